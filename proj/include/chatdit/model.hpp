#pragma once

// Plain data shared by the pipeline stages, plus their JSON forms. The JSON
// field names double as the persisted session format and the HTTP
// transcript, so renaming a field is a format break.

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace chatdit {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

enum class ImageSource { uploaded, generated };

struct ImageRecord {
  std::string id;
  ImageSource source = ImageSource::uploaded;
  int width = 0;
  int height = 0;
  std::string caption;
  int created_turn = 0;
  std::string storage_key;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// ---------------------------------------------------------------------------
// Instruction parsing
// ---------------------------------------------------------------------------

struct InputDescription {
  std::string id;
  std::string description;

  friend bool operator==(const InputDescription&, const InputDescription&) = default;
};

struct ParsedInstruction {
  int num_outputs = 1;
  std::vector<InputDescription> input_descriptions;
  std::vector<std::string> target_prompts;
  bool wants_article = false;
  std::vector<std::string> resolved_input_ids;

  friend bool operator==(const ParsedInstruction&, const ParsedInstruction&) = default;
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  long long area() const noexcept { return static_cast<long long>(width) * height; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct PanelLayout {
  int rows = 1;
  int cols = 1;
  int panel_count = 1;
  int panel_width = 0;
  int panel_height = 0;
  std::vector<Rect> panel_rects;  // row-major, panel_count entries

  int canvas_width() const noexcept { return cols * panel_width; }
  int canvas_height() const noexcept { return rows * panel_height; }
  friend bool operator==(const PanelLayout&, const PanelLayout&) = default;
};

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

enum class TaskKind { T2I, T2Is, I2I, Is2I, I2Is, Is2Is };

struct TaskShape {
  TaskKind kind = TaskKind::T2I;
  int m = 0;
  int n = 1;

  friend bool operator==(const TaskShape&, const TaskShape&) = default;
};

/// A reference panel: either an image from the session registry or an
/// output produced by an earlier step of the same plan.
struct ImageSlot {
  enum class Kind { registry_image, prior_output };
  Kind kind = Kind::registry_image;
  std::string image_id;  // registry_image
  int ordinal = -1;      // prior_output

  static ImageSlot registry(std::string id) { return {Kind::registry_image, std::move(id), -1}; }
  static ImageSlot prior(int ordinal) { return {Kind::prior_output, {}, ordinal}; }
  friend bool operator==(const ImageSlot&, const ImageSlot&) = default;
};

struct PlanStep {
  int step_index = 0;
  std::vector<ImageSlot> reference_slots;
  std::vector<int> target_ordinals;
  std::string panel_prompt;
  PanelLayout layout;
  std::uint64_t seed = 0;

  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct PlannerConfig {
  int max_panels = 4;
  int t2is_condition_count = 3;
  int iterative_history_budget = 2;
  long long area_budget = 2048LL * 2048LL;
  int aspect_width = 1;
  int aspect_height = 1;
  /// Ask the Panelizing agent to rewrite template prompts for fluency.
  bool rewrite_panel_prompts = false;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;
  friend bool operator==(const PlannerConfig&, const PlannerConfig&) = default;
};

struct GenerationPlan {
  TaskShape shape;
  std::vector<PlanStep> steps;
  PlannerConfig config_snapshot;
  std::vector<std::string> warnings;

  friend bool operator==(const GenerationPlan&, const GenerationPlan&) = default;
};

// ---------------------------------------------------------------------------
// Articles
// ---------------------------------------------------------------------------

struct ArticleBlock {
  enum class Kind { prose, image };
  Kind kind = Kind::prose;
  std::string text;      // prose
  std::string image_id;  // image
  std::string alt;       // image

  friend bool operator==(const ArticleBlock&, const ArticleBlock&) = default;
};

struct ArticleDocument {
  std::string title;
  std::vector<ArticleBlock> blocks;
  int source_turn = 0;
  std::vector<std::string> warnings;

  friend bool operator==(const ArticleDocument&, const ArticleDocument&) = default;
};

// ---------------------------------------------------------------------------
// Conversation state
// ---------------------------------------------------------------------------

enum class TurnMode { images, article };
enum class TurnStatus { pending, parsing, planning, executing, done, failed };

enum class EventKind {
  parsing_started,
  parsed,
  planning_started,
  planned,
  step_started,
  step_finished,
  image_ready,
  article_ready,
  turn_done,
  turn_failed,
};

struct TurnEvent {
  EventKind kind = EventKind::parsing_started;
  int turn = 0;
  Json payload = Json::object();
  long long seq = 0;

  bool terminal() const noexcept {
    return kind == EventKind::turn_done || kind == EventKind::turn_failed;
  }
  friend bool operator==(const TurnEvent&, const TurnEvent&) = default;
};

struct Turn {
  int index = 0;
  std::string user_text;
  std::vector<std::string> user_image_ids;
  TurnMode mode = TurnMode::images;
  std::optional<ParsedInstruction> parsed;
  std::optional<GenerationPlan> plan;
  std::vector<std::string> output_image_ids;
  std::optional<ArticleDocument> article;
  TurnStatus status = TurnStatus::pending;
  std::optional<std::string> failure_reason;
  std::vector<TurnEvent> events;

  /// Moves forward along pending→parsing→planning→executing→done, or to
  /// failed from any state but done. Throws std::logic_error otherwise.
  void advance(TurnStatus next);
  bool finished() const noexcept {
    return status == TurnStatus::done || status == TurnStatus::failed;
  }

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Session {
  std::string id;
  std::vector<Turn> turns;
  std::vector<ImageRecord> registry;  // creation order, append-only
  long long created_at = 0;           // unix milliseconds
  long long updated_at = 0;
  int next_image_number = 1;

  const ImageRecord* find_image(const std::string& image_id) const;
  ImageRecord* find_image(const std::string& image_id);

  friend bool operator==(const Session&, const Session&) = default;
};

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& text);
std::string to_string(TurnStatus status);
std::string to_string(EventKind kind);

void to_json(Json& j, const ImageRecord& v);
void from_json(const Json& j, ImageRecord& v);
void to_json(Json& j, const ParsedInstruction& v);
void from_json(const Json& j, ParsedInstruction& v);
void to_json(Json& j, const Rect& v);
void from_json(const Json& j, Rect& v);
void to_json(Json& j, const PanelLayout& v);
void from_json(const Json& j, PanelLayout& v);
void to_json(Json& j, const TaskShape& v);
void from_json(const Json& j, TaskShape& v);
void to_json(Json& j, const ImageSlot& v);
void from_json(const Json& j, ImageSlot& v);
void to_json(Json& j, const PlanStep& v);
void from_json(const Json& j, PlanStep& v);
void to_json(Json& j, const PlannerConfig& v);
void from_json(const Json& j, PlannerConfig& v);
void to_json(Json& j, const GenerationPlan& v);
void from_json(const Json& j, GenerationPlan& v);
void to_json(Json& j, const ArticleBlock& v);
void from_json(const Json& j, ArticleBlock& v);
void to_json(Json& j, const ArticleDocument& v);
void from_json(const Json& j, ArticleDocument& v);
void to_json(Json& j, const TurnEvent& v);
void from_json(const Json& j, TurnEvent& v);
void to_json(Json& j, const Turn& v);
void from_json(const Json& j, Turn& v);
void to_json(Json& j, const Session& v);
void from_json(const Json& j, Session& v);

}  // namespace chatdit
