#pragma once

// In-context toolkit and Execution agent. One backend call renders a whole
// multi-panel canvas: references sit in the first panels, targets are
// masked, and the generated targets are cropped back out.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chatdit/backend.hpp"
#include "chatdit/blob_store.hpp"
#include "chatdit/geometry.hpp"
#include "chatdit/model.hpp"

namespace chatdit {

struct ToolkitConfig {
  int num_inference_steps = kDefaultInferenceSteps;
  double guidance = kDefaultGuidance;
  int max_retries = 2;
  int max_concurrency = 2;
  long long area_budget = kDefaultAreaBudget;
  int aspect_width = 1;
  int aspect_height = 1;

  /// Picks up CHATDIT_BACKEND_CONCURRENCY when set.
  static ToolkitConfig from_env();
};

class InContextToolkit {
 public:
  InContextToolkit(DiffusionBackend& backend, ToolkitConfig config = {});

  /// output_images = pipe(prompt, input_images, num_outputs)
  std::vector<Image> pipe(const std::string& prompt, std::span<const Image> input_images,
                          int num_outputs, std::uint64_t seed = 0);

  /// Same as pipe() on an explicit layout whose panel count must equal
  /// |inputs| + num_outputs.
  std::vector<Image> run_panels(const PanelLayout& layout, const std::string& prompt,
                                std::span<const Image> inputs, int num_outputs,
                                std::uint64_t seed);

  const ToolkitConfig& config() const noexcept { return config_; }

 private:
  BackendResponse call_with_retries(const BackendRequest& request);

  DiffusionBackend& backend_;
  ToolkitConfig config_;
};

struct ProgressSink {
  std::function<void(const PlanStep&)> step_started;
  std::function<void(const PlanStep&, long long elapsed_ms)> step_finished;
  std::function<void(int ordinal, const ImageRecord&)> image_ready;
};

/// Loads a registry image's pixels.
using ReferenceLoader = std::function<Image(const std::string& image_id)>;
/// Registers a generated output and returns its record.
using OutputRegistrar = std::function<ImageRecord(int ordinal, const Image&, const std::string& caption)>;

class ExecutionAgent {
 public:
  explicit ExecutionAgent(InContextToolkit& toolkit);

  /// Runs the plan level by level: steps whose dependencies are satisfied
  /// run concurrently (bounded by max_concurrency); outputs are registered
  /// in step order after each level. Returns records indexed by ordinal.
  /// On failure, outputs registered so far stay registered and the error
  /// propagates.
  std::vector<ImageRecord> execute_plan(const GenerationPlan& plan,
                                        const std::vector<std::string>& target_prompts,
                                        const ReferenceLoader& load,
                                        const OutputRegistrar& registrar,
                                        const ProgressSink& progress = {});

  /// Convenience form working directly on a session and blob store. Fills
  /// turn.output_image_ids.
  std::vector<ImageRecord> execute_plan(Session& session, BlobStore& blobs, int turn_index,
                                        const GenerationPlan& plan,
                                        const ProgressSink& progress = {});

 private:
  InContextToolkit& toolkit_;
};

}  // namespace chatdit
