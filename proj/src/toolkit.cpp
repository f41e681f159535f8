#include "chatdit/toolkit.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <future>
#include <map>
#include <optional>

#include "chatdit/errors.hpp"
#include "chatdit/planner.hpp"
#include "chatdit/session.hpp"

namespace chatdit {

ToolkitConfig ToolkitConfig::from_env() {
  ToolkitConfig c;
  if (const char* v = std::getenv("CHATDIT_BACKEND_CONCURRENCY"); v && *v) {
    try {
      c.max_concurrency = std::max(1, std::stoi(v));
    } catch (const std::exception&) {
      throw ConfigError(std::string("CHATDIT_BACKEND_CONCURRENCY is not a number: ") + v);
    }
  }
  return c;
}

InContextToolkit::InContextToolkit(DiffusionBackend& backend, ToolkitConfig config)
    : backend_(backend), config_(config) {}

BackendResponse InContextToolkit::call_with_retries(const BackendRequest& request) {
  for (int attempt = 0;; ++attempt) {
    try {
      return backend_.generate(request);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= config_.max_retries) throw;
    }
  }
}

std::vector<Image> InContextToolkit::pipe(const std::string& prompt,
                                          std::span<const Image> input_images, int num_outputs,
                                          std::uint64_t seed) {
  if (num_outputs < 1) throw InputError("num_outputs must be at least 1");
  const int panels = static_cast<int>(input_images.size()) + num_outputs;
  if (panels > kMaxLayoutPanels) {
    throw InputError("inputs plus outputs exceed " + std::to_string(kMaxLayoutPanels) + " panels");
  }
  return run_panels(layout_for(panels, config_.area_budget, config_.aspect_width, config_.aspect_height),
                    prompt, input_images, num_outputs, seed);
}

std::vector<Image> InContextToolkit::run_panels(const PanelLayout& layout, const std::string& prompt,
                                                std::span<const Image> inputs, int num_outputs,
                                                std::uint64_t seed) {
  if (num_outputs < 1) throw InputError("num_outputs must be at least 1");
  const int m = static_cast<int>(inputs.size());
  if (m + num_outputs != layout.panel_count) {
    throw InputError("layout has " + std::to_string(layout.panel_count) + " panels for " +
                     std::to_string(m) + " inputs and " + std::to_string(num_outputs) + " outputs");
  }
  std::vector<int> reference_panels(static_cast<std::size_t>(m));
  std::vector<int> target_panels(static_cast<std::size_t>(num_outputs));
  for (int i = 0; i < m; ++i) reference_panels[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < num_outputs; ++i) target_panels[static_cast<std::size_t>(i)] = m + i;

  BackendRequest request;
  request.prompt = prompt;
  request.width = layout.canvas_width();
  request.height = layout.canvas_height();
  request.seed = seed;
  request.num_inference_steps = config_.num_inference_steps;
  request.guidance = config_.guidance;
  if (m > 0) {
    request.canvas_png = encode_png(merge(layout, inputs, reference_panels));
    request.mask_png = encode_png(mask_for(layout, target_panels, reference_panels));
  }

  const BackendResponse response = call_with_retries(request);
  Image canvas;
  try {
    canvas = decode_image(response.image_png);
  } catch (const InputError& e) {
    throw ProtocolError(std::string("backend returned an undecodable image: ") + e.what());
  }
  if (canvas.width != request.width || canvas.height != request.height) {
    throw ProtocolError("backend returned " + std::to_string(canvas.width) + "x" +
                        std::to_string(canvas.height) + " for a " + std::to_string(request.width) +
                        "x" + std::to_string(request.height) + " request");
  }
  return split(layout, canvas, target_panels);
}

ExecutionAgent::ExecutionAgent(InContextToolkit& toolkit) : toolkit_(toolkit) {}

std::vector<ImageRecord> ExecutionAgent::execute_plan(const GenerationPlan& plan,
                                                      const std::vector<std::string>& target_prompts,
                                                      const ReferenceLoader& load,
                                                      const OutputRegistrar& registrar,
                                                      const ProgressSink& progress) {
  const int n = plan.shape.n;
  if (static_cast<int>(target_prompts.size()) != n) {
    throw InputError("plan expects " + std::to_string(n) + " target prompts");
  }

  // Level = longest dependency chain below the step; steps on one level are
  // mutually independent.
  std::vector<int> level(plan.steps.size(), 0);
  int max_level = 0;
  for (const auto& step : plan.steps) {
    for (int dep : step_dependencies(plan, step)) {
      if (dep >= step.step_index) throw InputError("plan step depends on a later step");
      level[static_cast<std::size_t>(step.step_index)] =
          std::max(level[static_cast<std::size_t>(step.step_index)], level[static_cast<std::size_t>(dep)] + 1);
    }
    max_level = std::max(max_level, level[static_cast<std::size_t>(step.step_index)]);
  }

  std::map<int, Image> produced;
  std::vector<std::optional<ImageRecord>> records(static_cast<std::size_t>(n));

  auto run_step = [&](const PlanStep& step) {
    if (progress.step_started) progress.step_started(step);
    const auto started = std::chrono::steady_clock::now();
    std::vector<Image> refs;
    for (const auto& slot : step.reference_slots) {
      if (slot.kind == ImageSlot::Kind::registry_image) {
        refs.push_back(load(slot.image_id));
      } else {
        refs.push_back(produced.at(slot.ordinal));  // finished on an earlier level
      }
    }
    auto images = toolkit_.run_panels(step.layout, step.panel_prompt, refs,
                                      static_cast<int>(step.target_ordinals.size()), step.seed);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    if (progress.step_finished) progress.step_finished(step, elapsed);
    return images;
  };

  const int cap = std::max(1, toolkit_.config().max_concurrency);
  for (int lv = 0; lv <= max_level; ++lv) {
    std::vector<const PlanStep*> batch;
    for (const auto& step : plan.steps) {
      if (level[static_cast<std::size_t>(step.step_index)] == lv) batch.push_back(&step);
    }
    std::vector<std::vector<Image>> results(batch.size());
    std::exception_ptr failure;
    for (std::size_t begin = 0; begin < batch.size(); begin += static_cast<std::size_t>(cap)) {
      const std::size_t end = std::min(batch.size(), begin + static_cast<std::size_t>(cap));
      std::vector<std::future<std::vector<Image>>> running;
      for (std::size_t i = begin; i < end; ++i) {
        if (end - begin == 1) break;
        running.push_back(std::async(std::launch::async, run_step, std::cref(*batch[i])));
      }
      for (std::size_t i = begin; i < end; ++i) {
        try {
          results[i] = end - begin == 1 ? run_step(*batch[i]) : running[i - begin].get();
        } catch (...) {
          if (!failure) failure = std::current_exception();
        }
      }
    }
    // Register what finished, in step order, before surfacing any failure.
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const PlanStep& step = *batch[i];
      if (results[i].size() != step.target_ordinals.size()) continue;
      for (std::size_t t = 0; t < step.target_ordinals.size(); ++t) {
        const int ordinal = step.target_ordinals[t];
        ImageRecord rec =
            registrar(ordinal, results[i][t], target_prompts[static_cast<std::size_t>(ordinal)]);
        produced.emplace(ordinal, std::move(results[i][t]));
        if (progress.image_ready) progress.image_ready(ordinal, rec);
        records[static_cast<std::size_t>(ordinal)] = std::move(rec);
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<ImageRecord> out;
  for (int o = 0; o < n; ++o) {
    if (!records[static_cast<std::size_t>(o)]) {
      throw std::logic_error("plan never produced output " + std::to_string(o));
    }
    out.push_back(*records[static_cast<std::size_t>(o)]);
  }
  return out;
}

std::vector<ImageRecord> ExecutionAgent::execute_plan(Session& session, BlobStore& blobs,
                                                      int turn_index, const GenerationPlan& plan,
                                                      const ProgressSink& progress) {
  Turn& turn = session.turns.at(static_cast<std::size_t>(turn_index));
  if (!turn.parsed) throw InputError("turn has no parsed instruction");
  auto load = [&](const std::string& id) {
    const ImageRecord* rec = session.find_image(id);
    if (!rec) throw InputError("plan references unknown image " + id);
    auto bytes = blobs.get(rec->storage_key);
    if (!bytes) throw IntegrityError("blob missing for " + id, {id});
    return decode_image(*bytes);
  };
  auto registrar = [&](int, const Image& image, const std::string& caption) {
    return register_image(session, blobs, ImageSource::generated, image, caption, turn_index);
  };
  auto records = execute_plan(plan, turn.parsed->target_prompts, load, registrar, progress);
  turn.output_image_ids.clear();
  for (const auto& r : records) turn.output_image_ids.push_back(r.id);
  return records;
}

}  // namespace chatdit
