#include "chatdit/model.hpp"

#include <stdexcept>

#include "chatdit/errors.hpp"

namespace chatdit {

NLOHMANN_JSON_SERIALIZE_ENUM(ImageSource, {{ImageSource::uploaded, "uploaded"},
                                           {ImageSource::generated, "generated"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TurnMode, {{TurnMode::images, "images"},
                                        {TurnMode::article, "article"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TurnStatus, {{TurnStatus::pending, "pending"},
                                          {TurnStatus::parsing, "parsing"},
                                          {TurnStatus::planning, "planning"},
                                          {TurnStatus::executing, "executing"},
                                          {TurnStatus::done, "done"},
                                          {TurnStatus::failed, "failed"}})
NLOHMANN_JSON_SERIALIZE_ENUM(EventKind, {{EventKind::parsing_started, "parsing_started"},
                                         {EventKind::parsed, "parsed"},
                                         {EventKind::planning_started, "planning_started"},
                                         {EventKind::planned, "planned"},
                                         {EventKind::step_started, "step_started"},
                                         {EventKind::step_finished, "step_finished"},
                                         {EventKind::image_ready, "image_ready"},
                                         {EventKind::article_ready, "article_ready"},
                                         {EventKind::turn_done, "turn_done"},
                                         {EventKind::turn_failed, "turn_failed"}})

void PlannerConfig::validate() const {
  if (max_panels < 2) throw ConfigError("max_panels must be at least 2");
  if (t2is_condition_count < 1 || t2is_condition_count >= max_panels) {
    throw ConfigError("t2is_condition_count must lie in [1, max_panels)");
  }
  if (iterative_history_budget < 0 || iterative_history_budget > max_panels - 2) {
    throw ConfigError("iterative_history_budget must lie in [0, max_panels - 2]");
  }
  if (aspect_width < 1 || aspect_height < 1) throw ConfigError("aspect ratio must be positive");
  if (area_budget < 16 * 16) throw ConfigError("area budget below one 16x16 panel");
}

void Turn::advance(TurnStatus next) {
  if (status == TurnStatus::done || status == TurnStatus::failed) {
    throw std::logic_error("turn " + std::to_string(index) + " is already " + to_string(status));
  }
  if (next == TurnStatus::failed) {
    status = next;
    return;
  }
  if (static_cast<int>(next) != static_cast<int>(status) + 1) {
    throw std::logic_error("illegal turn transition " + to_string(status) + " -> " +
                           to_string(next));
  }
  status = next;
}

const ImageRecord* Session::find_image(const std::string& image_id) const {
  for (const auto& r : registry) {
    if (r.id == image_id) return &r;
  }
  return nullptr;
}

ImageRecord* Session::find_image(const std::string& image_id) {
  return const_cast<ImageRecord*>(std::as_const(*this).find_image(image_id));
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::T2I: return "T2I";
    case TaskKind::T2Is: return "T2Is";
    case TaskKind::I2I: return "I2I";
    case TaskKind::Is2I: return "Is2I";
    case TaskKind::I2Is: return "I2Is";
    case TaskKind::Is2Is: return "Is2Is";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& text) {
  for (TaskKind k : {TaskKind::T2I, TaskKind::T2Is, TaskKind::I2I, TaskKind::Is2I, TaskKind::I2Is,
                     TaskKind::Is2Is}) {
    if (to_string(k) == text) return k;
  }
  throw InputError("unknown task type '" + text + "'");
}

std::string to_string(TurnStatus status) { return Json(status).get<std::string>(); }
std::string to_string(EventKind kind) { return Json(kind).get<std::string>(); }

void to_json(Json& j, const ImageRecord& v) {
  j = Json{{"id", v.id},           {"source", v.source},
           {"width", v.width},     {"height", v.height},
           {"caption", v.caption}, {"created_turn", v.created_turn},
           {"storage_key", v.storage_key}};
}

void from_json(const Json& j, ImageRecord& v) {
  j.at("id").get_to(v.id);
  j.at("source").get_to(v.source);
  j.at("width").get_to(v.width);
  j.at("height").get_to(v.height);
  j.at("caption").get_to(v.caption);
  j.at("created_turn").get_to(v.created_turn);
  j.at("storage_key").get_to(v.storage_key);
}

void to_json(Json& j, const ParsedInstruction& v) {
  Json descriptions = Json::array();
  for (const auto& d : v.input_descriptions) {
    descriptions.push_back({{"id", d.id}, {"description", d.description}});
  }
  j = Json{{"num_outputs", v.num_outputs},
           {"input_descriptions", descriptions},
           {"target_prompts", v.target_prompts},
           {"wants_article", v.wants_article},
           {"resolved_input_ids", v.resolved_input_ids}};
}

void from_json(const Json& j, ParsedInstruction& v) {
  j.at("num_outputs").get_to(v.num_outputs);
  v.input_descriptions.clear();
  for (const auto& d : j.at("input_descriptions")) {
    v.input_descriptions.push_back({d.at("id").get<std::string>(), d.at("description").get<std::string>()});
  }
  j.at("target_prompts").get_to(v.target_prompts);
  j.at("wants_article").get_to(v.wants_article);
  j.at("resolved_input_ids").get_to(v.resolved_input_ids);
}

void to_json(Json& j, const Rect& v) {
  j = Json{{"x", v.x}, {"y", v.y}, {"width", v.width}, {"height", v.height}};
}

void from_json(const Json& j, Rect& v) {
  j.at("x").get_to(v.x);
  j.at("y").get_to(v.y);
  j.at("width").get_to(v.width);
  j.at("height").get_to(v.height);
}

void to_json(Json& j, const PanelLayout& v) {
  j = Json{{"rows", v.rows},
           {"cols", v.cols},
           {"panel_count", v.panel_count},
           {"panel_width", v.panel_width},
           {"panel_height", v.panel_height},
           {"canvas_width", v.canvas_width()},
           {"canvas_height", v.canvas_height()},
           {"panel_rects", v.panel_rects}};
}

void from_json(const Json& j, PanelLayout& v) {
  j.at("rows").get_to(v.rows);
  j.at("cols").get_to(v.cols);
  j.at("panel_count").get_to(v.panel_count);
  j.at("panel_width").get_to(v.panel_width);
  j.at("panel_height").get_to(v.panel_height);
  j.at("panel_rects").get_to(v.panel_rects);
}

void to_json(Json& j, const TaskShape& v) {
  j = Json{{"kind", to_string(v.kind)}, {"m", v.m}, {"n", v.n}};
}

void from_json(const Json& j, TaskShape& v) {
  v.kind = task_kind_from_string(j.at("kind").get<std::string>());
  j.at("m").get_to(v.m);
  j.at("n").get_to(v.n);
}

void to_json(Json& j, const ImageSlot& v) {
  if (v.kind == ImageSlot::Kind::registry_image) {
    j = Json{{"kind", "registry_image"}, {"id", v.image_id}};
  } else {
    j = Json{{"kind", "prior_output"}, {"ordinal", v.ordinal}};
  }
}

void from_json(const Json& j, ImageSlot& v) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "registry_image") {
    v = ImageSlot::registry(j.at("id").get<std::string>());
  } else if (kind == "prior_output") {
    v = ImageSlot::prior(j.at("ordinal").get<int>());
  } else {
    throw InputError("unknown slot kind '" + kind + "'");
  }
}

void to_json(Json& j, const PlanStep& v) {
  // Seeds are 64-bit; JSON consumers outside C++ lose precision above 2^53,
  // so they travel as decimal strings.
  j = Json{{"step_index", v.step_index},
           {"reference_slots", v.reference_slots},
           {"target_ordinals", v.target_ordinals},
           {"panel_prompt", v.panel_prompt},
           {"layout", v.layout},
           {"seed", std::to_string(v.seed)}};
}

void from_json(const Json& j, PlanStep& v) {
  j.at("step_index").get_to(v.step_index);
  j.at("reference_slots").get_to(v.reference_slots);
  j.at("target_ordinals").get_to(v.target_ordinals);
  j.at("panel_prompt").get_to(v.panel_prompt);
  j.at("layout").get_to(v.layout);
  const auto& seed = j.at("seed");
  v.seed = seed.is_string() ? std::stoull(seed.get<std::string>()) : seed.get<std::uint64_t>();
}

void to_json(Json& j, const PlannerConfig& v) {
  j = Json{{"max_panels", v.max_panels},
           {"t2is_condition_count", v.t2is_condition_count},
           {"iterative_history_budget", v.iterative_history_budget},
           {"area_budget", v.area_budget},
           {"aspect_width", v.aspect_width},
           {"aspect_height", v.aspect_height},
           {"rewrite_panel_prompts", v.rewrite_panel_prompts}};
}

void from_json(const Json& j, PlannerConfig& v) {
  PlannerConfig d;
  v.max_panels = j.value("max_panels", d.max_panels);
  v.t2is_condition_count = j.value("t2is_condition_count", d.t2is_condition_count);
  v.iterative_history_budget = j.value("iterative_history_budget", d.iterative_history_budget);
  v.area_budget = j.value("area_budget", d.area_budget);
  v.aspect_width = j.value("aspect_width", d.aspect_width);
  v.aspect_height = j.value("aspect_height", d.aspect_height);
  v.rewrite_panel_prompts = j.value("rewrite_panel_prompts", d.rewrite_panel_prompts);
}

void to_json(Json& j, const GenerationPlan& v) {
  j = Json{{"shape", v.shape},
           {"steps", v.steps},
           {"config", v.config_snapshot},
           {"warnings", v.warnings}};
}

void from_json(const Json& j, GenerationPlan& v) {
  j.at("shape").get_to(v.shape);
  j.at("steps").get_to(v.steps);
  j.at("config").get_to(v.config_snapshot);
  v.warnings = j.value("warnings", std::vector<std::string>{});
}

void to_json(Json& j, const ArticleBlock& v) {
  if (v.kind == ArticleBlock::Kind::prose) {
    j = Json{{"kind", "prose"}, {"text", v.text}};
  } else {
    j = Json{{"kind", "image"}, {"image_id", v.image_id}, {"alt", v.alt}};
  }
}

void from_json(const Json& j, ArticleBlock& v) {
  const auto kind = j.at("kind").get<std::string>();
  v = ArticleBlock{};
  if (kind == "prose") {
    v.kind = ArticleBlock::Kind::prose;
    j.at("text").get_to(v.text);
  } else if (kind == "image") {
    v.kind = ArticleBlock::Kind::image;
    j.at("image_id").get_to(v.image_id);
    j.at("alt").get_to(v.alt);
  } else {
    throw InputError("unknown article block kind '" + kind + "'");
  }
}

void to_json(Json& j, const ArticleDocument& v) {
  j = Json{{"title", v.title},
           {"blocks", v.blocks},
           {"source_turn", v.source_turn},
           {"warnings", v.warnings}};
}

void from_json(const Json& j, ArticleDocument& v) {
  j.at("title").get_to(v.title);
  j.at("blocks").get_to(v.blocks);
  j.at("source_turn").get_to(v.source_turn);
  v.warnings = j.value("warnings", std::vector<std::string>{});
}

void to_json(Json& j, const TurnEvent& v) {
  j = Json{{"kind", v.kind}, {"turn", v.turn}, {"payload", v.payload}, {"seq", v.seq}};
}

void from_json(const Json& j, TurnEvent& v) {
  j.at("kind").get_to(v.kind);
  j.at("turn").get_to(v.turn);
  v.payload = j.at("payload");
  j.at("seq").get_to(v.seq);
}

void to_json(Json& j, const Turn& v) {
  j = Json{{"index", v.index},
           {"user_text", v.user_text},
           {"user_image_ids", v.user_image_ids},
           {"mode", v.mode},
           {"parsed", v.parsed ? Json(*v.parsed) : Json(nullptr)},
           {"plan", v.plan ? Json(*v.plan) : Json(nullptr)},
           {"output_image_ids", v.output_image_ids},
           {"article", v.article ? Json(*v.article) : Json(nullptr)},
           {"status", v.status},
           {"failure_reason", v.failure_reason ? Json(*v.failure_reason) : Json(nullptr)},
           {"events", v.events}};
}

void from_json(const Json& j, Turn& v) {
  j.at("index").get_to(v.index);
  j.at("user_text").get_to(v.user_text);
  j.at("user_image_ids").get_to(v.user_image_ids);
  j.at("mode").get_to(v.mode);
  v.parsed.reset();
  v.plan.reset();
  v.article.reset();
  v.failure_reason.reset();
  if (!j.at("parsed").is_null()) v.parsed = j.at("parsed").get<ParsedInstruction>();
  if (!j.at("plan").is_null()) v.plan = j.at("plan").get<GenerationPlan>();
  j.at("output_image_ids").get_to(v.output_image_ids);
  if (!j.at("article").is_null()) v.article = j.at("article").get<ArticleDocument>();
  j.at("status").get_to(v.status);
  if (!j.at("failure_reason").is_null()) v.failure_reason = j.at("failure_reason").get<std::string>();
  v.events = j.value("events", std::vector<TurnEvent>{});
}

void to_json(Json& j, const Session& v) {
  j = Json{{"id", v.id},
           {"turns", v.turns},
           {"registry", v.registry},
           {"created_at", v.created_at},
           {"updated_at", v.updated_at},
           {"next_image_number", v.next_image_number}};
}

void from_json(const Json& j, Session& v) {
  j.at("id").get_to(v.id);
  j.at("turns").get_to(v.turns);
  j.at("registry").get_to(v.registry);
  j.at("created_at").get_to(v.created_at);
  j.at("updated_at").get_to(v.updated_at);
  j.at("next_image_number").get_to(v.next_image_number);
}

}  // namespace chatdit
