#include "chatdit/planner.hpp"

#include <algorithm>
#include <climits>
#include <map>
#include <regex>
#include <set>

#include "chatdit/errors.hpp"
#include "chatdit/geometry.hpp"
#include "chatdit/hash.hpp"

namespace chatdit {
namespace {

constexpr const char* kReferencingPrompt =
    "You are the Referencing agent. The generator can only look at a limited number of "
    "reference images at once. From the candidate images, choose the ones that matter most for "
    "the requested outputs, most important first. Reply with JSON only: "
    "{\"reference_ids\": [<id>...]} containing exactly `budget` distinct candidate ids.";

constexpr const char* kPanelizingPrompt =
    "You are the Panelizing agent. You receive a multi-panel prompt for a grid image in which "
    "each panel is introduced by a marker [IMAGE1], [IMAGE2], ... Rewrite it so it reads "
    "fluently and describes the whole grid, keeping every marker exactly once and in order, "
    "and keeping every panel's content. Reply with JSON only: {\"panel_prompt\": <text>}.";

std::string clean_description(std::string text) {
  // Panel markers inside a description would confuse the marker structure.
  static const std::regex kMarker(R"(\[IMAGE(\d+)\])");
  text = std::regex_replace(text, kMarker, "(image $1)");
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!text.empty() && (text.back() == '.' || text.back() == ' ')) text.pop_back();
  while (!text.empty() && text.front() == ' ') text.erase(text.begin());
  return text;
}

std::string caption_of(const ParsedInstruction& parsed, const std::string& id) {
  for (const auto& d : parsed.input_descriptions) {
    if (d.id == id) return d.description;
  }
  return {};
}

}  // namespace

TaskShape classify(int m, int n) {
  if (m < 0) throw InputError("reference count must be non-negative");
  if (n < 1) throw InputError("at least one output image is required");
  TaskKind kind;
  if (m == 0) {
    kind = n == 1 ? TaskKind::T2I : TaskKind::T2Is;
  } else if (m == 1) {
    kind = n == 1 ? TaskKind::I2I : TaskKind::I2Is;
  } else {
    kind = n == 1 ? TaskKind::Is2I : TaskKind::Is2Is;
  }
  return {kind, m, n};
}

long long image_sequence_number(const std::string& image_id) {
  const auto pos = image_id.find_last_not_of("0123456789");
  const std::string digits = pos == std::string::npos ? image_id : image_id.substr(pos + 1);
  if (digits.empty() || digits.size() > 15) return LLONG_MAX;
  return std::stoll(digits);
}

std::string panel_prompt_template(const std::vector<std::string>& panel_descriptions) {
  const std::size_t k = panel_descriptions.size();
  std::string out = "A set of " + std::to_string(k) + (k == 1 ? " image." : " images.");
  for (std::size_t i = 0; i < k; ++i) {
    out += " [IMAGE" + std::to_string(i + 1) + "] " + clean_description(panel_descriptions[i]) + ".";
  }
  return out;
}

std::optional<std::string> check_panel_markers(const std::string& prompt, int panel_count) {
  static const std::regex kMarker(R"(\[IMAGE(\d+)\])");
  int expected = 1;
  for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), kMarker);
       it != std::sregex_iterator(); ++it) {
    const int k = std::stoi((*it)[1].str());
    if (k != expected) {
      return "panel marker [IMAGE" + std::to_string(k) + "] found where [IMAGE" +
             std::to_string(expected) + "] was expected";
    }
    ++expected;
  }
  if (expected != panel_count + 1) {
    return "prompt has " + std::to_string(expected - 1) + " panel markers, expected " +
           std::to_string(panel_count);
  }
  return std::nullopt;
}

StrategyPlanner::StrategyPlanner(LlmGateway* gateway, PlannerConfig config)
    : gateway_(gateway), config_(config) {
  config_.validate();
}

std::vector<std::string> StrategyPlanner::select_references(
    const ParsedInstruction& parsed, const TaskShape& shape,
    const std::vector<std::string>& candidates, int budget, std::vector<std::string>* warnings) {
  if (budget < 1) throw InputError("reference budget must be at least 1");
  if (static_cast<int>(candidates.size()) <= budget) return candidates;

  auto fallback = [&](const std::string& why) {
    std::vector<std::string> sorted = candidates;
    std::stable_sort(sorted.begin(), sorted.end(), [](const std::string& a, const std::string& b) {
      return image_sequence_number(a) < image_sequence_number(b);
    });
    sorted.resize(static_cast<std::size_t>(budget));
    if (warnings) {
      warnings->push_back("reference trimming fell back to registry order (" + why + ")");
    }
    return sorted;
  };
  if (!gateway_) return fallback("referencing agent unavailable");

  Json listing = Json::array();
  for (const auto& id : candidates) listing.push_back({{"id", id}, {"caption", caption_of(parsed, id)}});
  Json schema = Json::parse(R"({
    "type": "object",
    "required": ["reference_ids"],
    "properties": {"reference_ids": {"type": "array", "uniqueItems": true,
                                     "items": {"type": "string"}}}
  })");
  auto& ids = schema["properties"]["reference_ids"];
  ids["items"]["enum"] = candidates;
  ids["minItems"] = budget;
  ids["maxItems"] = budget;

  AgentRequest req;
  req.agent_name = agent::kReferencing;
  req.system_prompt = kReferencingPrompt;
  req.user_content = {ContentPart::from_text(Json{{"task_kind", to_string(shape.kind)},
                                                  {"num_outputs", shape.n},
                                                  {"target_prompts", parsed.target_prompts},
                                                  {"candidates", listing},
                                                  {"budget", budget}}
                                                 .dump())};
  req.response_schema = std::move(schema);
  req.temperature = kPlanningTemperature;
  try {
    return gateway_->complete_json(req).value.at("reference_ids").get<std::vector<std::string>>();
  } catch (const ContractError& e) {
    return fallback(e.what());
  } catch (const BackendError& e) {
    return fallback(e.what());
  }
}

std::string StrategyPlanner::build_panel_prompt(const std::vector<std::string>& reference_captions,
                                                const std::vector<std::string>& target_prompts,
                                                const PanelLayout& layout,
                                                std::vector<std::string>* warnings) {
  std::vector<std::string> panels = reference_captions;
  panels.insert(panels.end(), target_prompts.begin(), target_prompts.end());
  if (static_cast<int>(panels.size()) != layout.panel_count) {
    throw InputError("panel descriptions do not match the layout's panel count");
  }
  std::string templated = panel_prompt_template(panels);
  if (!gateway_ || !config_.rewrite_panel_prompts) return templated;

  const int k = layout.panel_count;
  AgentRequest req;
  req.agent_name = agent::kPanelizing;
  req.system_prompt = kPanelizingPrompt;
  req.user_content = {ContentPart::from_text(Json{{"template_prompt", templated},
                                                  {"panel_count", k},
                                                  {"reference_panels", reference_captions.size()},
                                                  {"rows", layout.rows},
                                                  {"cols", layout.cols}}
                                                 .dump())};
  req.response_schema = Json::parse(R"({
    "type": "object", "required": ["panel_prompt"],
    "properties": {"panel_prompt": {"type": "string", "minLength": 1}}
  })");
  req.validator = [k](const Json& v) { return check_panel_markers(v.at("panel_prompt").get<std::string>(), k); };
  req.max_repair_attempts = 1;
  req.temperature = kPlanningTemperature;
  try {
    return gateway_->complete_json(req).value.at("panel_prompt").get<std::string>();
  } catch (const ContractError& e) {
    if (warnings) warnings->push_back(std::string("panel prompt rewrite rejected: ") + e.what());
  } catch (const BackendError& e) {
    if (warnings) warnings->push_back(std::string("panel prompt rewrite unavailable: ") + e.what());
  }
  return templated;
}

GenerationPlan StrategyPlanner::make_plan(const TaskShape& shape, const ParsedInstruction& parsed,
                                          const PlanContext& context) {
  const int m = static_cast<int>(parsed.resolved_input_ids.size());
  const int n = parsed.num_outputs;
  if (shape != classify(m, n)) {
    throw InputError("task shape " + to_string(shape.kind) + " does not match m=" +
                     std::to_string(m) + ", n=" + std::to_string(n));
  }
  if (static_cast<int>(parsed.target_prompts.size()) != n) {
    throw InputError("parsed instruction has " + std::to_string(parsed.target_prompts.size()) +
                     " target prompts for " + std::to_string(n) + " outputs");
  }

  GenerationPlan plan;
  plan.shape = shape;
  plan.config_snapshot = config_;
  const int cap = config_.max_panels;

  auto add_step = [&](std::vector<ImageSlot> refs, std::vector<int> targets) {
    PlanStep step;
    step.step_index = static_cast<int>(plan.steps.size());
    step.reference_slots = std::move(refs);
    step.target_ordinals = std::move(targets);
    const int k = static_cast<int>(step.reference_slots.size() + step.target_ordinals.size());
    step.layout = layout_for(k, config_.area_budget, config_.aspect_width, config_.aspect_height);
    std::vector<std::string> ref_captions;
    for (const auto& slot : step.reference_slots) {
      ref_captions.push_back(slot.kind == ImageSlot::Kind::registry_image
                                 ? caption_of(parsed, slot.image_id)
                                 : parsed.target_prompts[static_cast<std::size_t>(slot.ordinal)]);
    }
    std::vector<std::string> target_text;
    for (int t : step.target_ordinals) target_text.push_back(parsed.target_prompts[static_cast<std::size_t>(t)]);
    step.panel_prompt = build_panel_prompt(ref_captions, target_text, step.layout, &plan.warnings);
    step.seed = step_seed(context.session_id, context.turn_index, step.step_index, context.base_seed);
    plan.steps.push_back(std::move(step));
  };

  auto registry_slots = [&]() {
    std::vector<ImageSlot> slots;
    for (const auto& id :
         select_references(parsed, shape, parsed.resolved_input_ids, cap - 1, &plan.warnings)) {
      slots.push_back(ImageSlot::registry(id));
    }
    return slots;
  };

  switch (shape.kind) {
    case TaskKind::T2I:
      add_step({}, {0});
      break;
    case TaskKind::T2Is: {
      const int first = std::min(n, cap);
      std::vector<int> targets(static_cast<std::size_t>(first));
      for (int i = 0; i < first; ++i) targets[static_cast<std::size_t>(i)] = i;
      add_step({}, targets);
      for (int ordinal = first; ordinal < n; ++ordinal) {
        std::vector<ImageSlot> refs;
        for (int c = 0; c < config_.t2is_condition_count; ++c) refs.push_back(ImageSlot::prior(c));
        add_step(std::move(refs), {ordinal});
      }
      break;
    }
    case TaskKind::I2I:
    case TaskKind::Is2I:
      add_step(registry_slots(), {0});
      break;
    case TaskKind::Is2Is: {
      const std::vector<ImageSlot> refs = registry_slots();
      for (int ordinal = 0; ordinal < n; ++ordinal) add_step(refs, {ordinal});
      break;
    }
    case TaskKind::I2Is: {
      const std::vector<ImageSlot> inputs = registry_slots();
      for (int k = 0; k < n; ++k) {
        std::vector<ImageSlot> refs = inputs;
        const int history = std::min(k, config_.iterative_history_budget);
        for (int o = k - history; o < k; ++o) refs.push_back(ImageSlot::prior(o));
        add_step(std::move(refs), {k});
      }
      break;
    }
  }
  return plan;
}

std::vector<int> step_dependencies(const GenerationPlan& plan, const PlanStep& step) {
  std::set<int> deps;
  for (const auto& slot : step.reference_slots) {
    if (slot.kind != ImageSlot::Kind::prior_output) continue;
    for (const auto& other : plan.steps) {
      const auto& t = other.target_ordinals;
      if (std::find(t.begin(), t.end(), slot.ordinal) != t.end()) deps.insert(other.step_index);
    }
  }
  return {deps.begin(), deps.end()};
}

std::vector<std::string> check_plan(const GenerationPlan& plan,
                                    const std::vector<std::string>& resolved_input_ids,
                                    int num_outputs) {
  std::vector<std::string> v;
  auto violation = [&](const PlanStep* step, const std::string& what) {
    v.push_back(step ? "step " + std::to_string(step->step_index) + ": " + what : what);
  };
  const PlannerConfig& cfg = plan.config_snapshot;
  const int m = static_cast<int>(resolved_input_ids.size());
  const int n = num_outputs;

  if (plan.steps.empty()) violation(nullptr, "plan has no steps");
  if (plan.shape.m != m || plan.shape.n != n) {
    violation(nullptr, "shape (m,n) does not match the parsed instruction");
  }
  if (n >= 1 && plan.shape.kind != classify(m, n).kind) {
    violation(nullptr, "task kind " + to_string(plan.shape.kind) + " is wrong for (m,n)");
  }

  std::map<int, int> producer;  // ordinal -> step index
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const PlanStep& s = plan.steps[i];
    if (s.step_index != static_cast<int>(i)) violation(&s, "step_index out of sequence");
    const int k = static_cast<int>(s.reference_slots.size() + s.target_ordinals.size());
    if (s.layout.panel_count != k) violation(&s, "layout panel count differs from slot count");
    if (k > cfg.max_panels) {
      violation(&s, std::to_string(k) + " panels exceed the cap of " + std::to_string(cfg.max_panels));
    }
    if (s.target_ordinals.empty()) violation(&s, "step produces nothing");
    if (auto e = check_panel_markers(s.panel_prompt, k)) violation(&s, *e);
    for (const auto& slot : s.reference_slots) {
      if (slot.kind == ImageSlot::Kind::prior_output) {
        auto it = producer.find(slot.ordinal);
        if (it == producer.end()) {
          violation(&s, "consumes output " + std::to_string(slot.ordinal) +
                            " before any earlier step produced it");
        }
      } else if (std::find(resolved_input_ids.begin(), resolved_input_ids.end(), slot.image_id) ==
                 resolved_input_ids.end()) {
        violation(&s, "references " + slot.image_id + ", which the instruction did not resolve");
      }
    }
    for (int t : s.target_ordinals) {
      if (t < 0 || t >= n) violation(&s, "target ordinal " + std::to_string(t) + " out of range");
      if (!producer.emplace(t, s.step_index).second) {
        violation(&s, "target ordinal " + std::to_string(t) + " produced twice");
      }
    }
  }
  for (int t = 0; t < n; ++t) {
    if (!producer.contains(t)) violation(nullptr, "ordinal " + std::to_string(t) + " is never produced");
  }
  if (!v.empty() || n < 1) return v;

  // Decision-table conformance.
  const int ref_budget = std::min(m, cfg.max_panels - 1);
  auto registry_refs = [](const PlanStep& s) {
    std::vector<std::string> ids;
    for (const auto& slot : s.reference_slots) {
      if (slot.kind == ImageSlot::Kind::registry_image) ids.push_back(slot.image_id);
    }
    return ids;
  };
  auto prior_refs = [](const PlanStep& s) {
    std::vector<int> ords;
    for (const auto& slot : s.reference_slots) {
      if (slot.kind == ImageSlot::Kind::prior_output) ords.push_back(slot.ordinal);
    }
    return ords;
  };
  const auto& steps = plan.steps;
  switch (plan.shape.kind) {
    case TaskKind::T2I:
      if (steps.size() != 1 || !steps[0].reference_slots.empty()) {
        violation(nullptr, "T2I must be a single reference-free step");
      }
      break;
    case TaskKind::T2Is: {
      const int first = std::min(n, cfg.max_panels);
      if (static_cast<int>(steps.size()) != 1 + (n - first)) {
        violation(nullptr, "T2Is has the wrong number of steps");
        break;
      }
      if (static_cast<int>(steps[0].target_ordinals.size()) != first ||
          !steps[0].reference_slots.empty()) {
        violation(&steps[0], "first T2Is step must hold " + std::to_string(first) + " targets");
      }
      std::vector<int> condition(static_cast<std::size_t>(cfg.t2is_condition_count));
      for (int c = 0; c < cfg.t2is_condition_count; ++c) condition[static_cast<std::size_t>(c)] = c;
      for (std::size_t i = 1; i < steps.size(); ++i) {
        if (prior_refs(steps[i]) != condition || !registry_refs(steps[i]).empty() ||
            steps[i].target_ordinals.size() != 1) {
          violation(&steps[i], "T2Is follow-up must reference exactly the first " +
                                   std::to_string(cfg.t2is_condition_count) +
                                   " outputs and produce one target");
        }
      }
      break;
    }
    case TaskKind::I2I:
    case TaskKind::Is2I:
      if (steps.size() != 1 || static_cast<int>(registry_refs(steps[0]).size()) != ref_budget ||
          !prior_refs(steps[0]).empty()) {
        violation(nullptr, to_string(plan.shape.kind) + " must be one step over " +
                               std::to_string(ref_budget) + " references");
      }
      break;
    case TaskKind::Is2Is: {
      if (static_cast<int>(steps.size()) != n) {
        violation(nullptr, "Is2Is needs one step per output");
        break;
      }
      for (const auto& s : steps) {
        if (!prior_refs(s).empty()) violation(&s, "Is2Is steps must be independent");
        if (registry_refs(s) != registry_refs(steps[0]) ||
            static_cast<int>(registry_refs(s).size()) != ref_budget) {
          violation(&s, "Is2Is steps must share the same " + std::to_string(ref_budget) + " references");
        }
        if (s.target_ordinals.size() != 1) violation(&s, "Is2Is steps produce one target");
      }
      break;
    }
    case TaskKind::I2Is: {
      if (static_cast<int>(steps.size()) != n) {
        violation(nullptr, "I2Is needs one step per output");
        break;
      }
      for (int k = 0; k < n; ++k) {
        const PlanStep& s = steps[static_cast<std::size_t>(k)];
        std::vector<int> expected;
        for (int o = k - std::min(k, cfg.iterative_history_budget); o < k; ++o) expected.push_back(o);
        if (registry_refs(s).size() != 1 || prior_refs(s) != expected ||
            s.target_ordinals != std::vector<int>{k}) {
          violation(&s, "I2Is step must reference the input plus the latest " +
                            std::to_string(expected.size()) + " outputs");
        }
      }
      break;
    }
  }
  return v;
}

}  // namespace chatdit
