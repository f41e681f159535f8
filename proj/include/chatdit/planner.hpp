#pragma once

// Strategy-Planning agent. Long requests are broken into steps that each
// fit the panel cap:
//
//   T2I    one step, one target panel
//   T2Is   up to max_panels targets at once; beyond that, one target per
//          step conditioned on the first t2is_condition_count outputs
//   I2I    one step, all (trimmed) references + one target
//   Is2I   same as I2I
//   Is2Is  one independent step per output, each with all (trimmed) refs
//   I2Is   one step per output, each with the input plus the most recent
//          min(k, iterative_history_budget) outputs
//
// Panels are ordered references first, then targets.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chatdit/llm.hpp"
#include "chatdit/model.hpp"

namespace chatdit {

/// Pure mapping from (reference count, target count) to the task shape.
TaskShape classify(int m, int n);

struct PlanContext {
  std::string session_id;
  int turn_index = 0;
  std::uint64_t base_seed = 0;
};

/// `A set of K images. [IMAGE1] d1. ... [IMAGEK] dK.`
std::string panel_prompt_template(const std::vector<std::string>& panel_descriptions);

/// Error text unless [IMAGE1]..[IMAGEk] each occur exactly once, ascending,
/// with no other [IMAGEn] marker present.
std::optional<std::string> check_panel_markers(const std::string& prompt, int panel_count);

class StrategyPlanner {
 public:
  /// `gateway` may be null; the Referencing and Panelizing agents then use
  /// their deterministic fallbacks.
  explicit StrategyPlanner(LlmGateway* gateway, PlannerConfig config = {});

  GenerationPlan make_plan(const TaskShape& shape, const ParsedInstruction& parsed,
                           const PlanContext& context);

  /// Keeps at most `budget` of `candidates`. Falls back to the oldest
  /// candidates (registry order) when the LLM is missing or misbehaves.
  std::vector<std::string> select_references(const ParsedInstruction& parsed,
                                             const TaskShape& shape,
                                             const std::vector<std::string>& candidates,
                                             int budget, std::vector<std::string>* warnings);

  std::string build_panel_prompt(const std::vector<std::string>& reference_captions,
                                 const std::vector<std::string>& target_prompts,
                                 const PanelLayout& layout, std::vector<std::string>* warnings);

  const PlannerConfig& config() const noexcept { return config_; }

 private:
  LlmGateway* gateway_;
  PlannerConfig config_;
};

/// Checks a plan against the decision table and structural invariants
/// (panel cap, forward-only dependencies, ordinal partition). Returns one
/// message per violation; empty means legal.
std::vector<std::string> check_plan(const GenerationPlan& plan,
                                    const std::vector<std::string>& resolved_input_ids,
                                    int num_outputs);

/// Steps whose outputs `step` consumes.
std::vector<int> step_dependencies(const GenerationPlan& plan, const PlanStep& step);

/// Numeric part of an `img_NNNN` id (registry creation order).
long long image_sequence_number(const std::string& image_id);

}  // namespace chatdit
