#include "chatdit/instruction_parsing.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <stdexcept>

#include "chatdit/errors.hpp"

namespace chatdit {
namespace {

constexpr const char* kCountingPrompt =
    "You are the Counting agent of an image generation assistant. Read the user's instruction "
    "and decide how many output images they want. Explicit numbers win; a single edit or a "
    "single picture means 1; multi-page or multi-scene requests mean one image per page or "
    "scene. Reply with JSON only: {\"num_outputs\": <integer >= 1>}.";

constexpr const char* kDescriptionPrompt =
    "You are the Description agent. For every attached image write a detailed description of "
    "its subject, identity attributes, style, composition, colors and context, so that an "
    "artist who cannot see the image could reproduce its key features. Reply with JSON only: "
    "{\"descriptions\": [{\"id\": <image id>, \"description\": <text>}]} with one entry per "
    "image, in the order given.";

constexpr const char* kResolutionPrompt =
    "You are the Reference Resolution step of an image generation assistant. Given the user's "
    "instruction, the images uploaded with it and the images from earlier in the conversation, "
    "list the ids of the images the instruction refers to, in the order they should be used. "
    "Phrases such as \"the second image\" or \"the dog from before\" refer to candidates by "
    "order or caption. Also say whether the user asks for an illustrated article. Reply with "
    "JSON only: {\"resolved_input_ids\": [<id>...], \"wants_article\": <bool>}.";

constexpr const char* kPromptingPrompt =
    "You are the Prompting agent. Write one detailed, self-contained description for each "
    "target image the user wants. Each description must stand alone: repeat the subject's "
    "identity attributes (species, colors, clothing, materials, distinctive marks) taken from "
    "the input image descriptions instead of referring to \"the input\". Keep characters and "
    "style consistent across images. Reply with JSON only: {\"target_prompts\": [<text>...]} "
    "with exactly num_outputs entries.";

Json history_json(const std::vector<HistoryEntry>& history) {
  Json out = Json::array();
  for (const auto& h : history) {
    out.push_back({{"id", h.id},
                   {"caption", h.caption},
                   {"source", h.source == ImageSource::uploaded ? "uploaded" : "generated"},
                   {"turn", h.turn}});
  }
  return out;
}

}  // namespace

bool asks_for_article(const std::string& user_text) {
  static const std::regex kCue(R"(\b(article|blog post|storybook with text)\b)",
                               std::regex::icase);
  return std::regex_search(user_text, kCue);
}

InstructionParser::InstructionParser(LlmGateway& gateway, ParserOptions options)
    : gateway_(gateway), options_(options) {}

std::vector<HistoryEntry> InstructionParser::recent(const std::vector<HistoryEntry>& history) const {
  if (history.size() <= options_.history_limit) return history;
  return {history.end() - static_cast<std::ptrdiff_t>(options_.history_limit), history.end()};
}

Json InstructionParser::counting_schema() {
  return Json::parse(R"({
    "type": "object",
    "required": ["num_outputs"],
    "properties": {"num_outputs": {"type": "integer", "minimum": 1}}
  })");
}

Json InstructionParser::description_schema(const std::vector<std::string>& ids) {
  Json schema = Json::parse(R"({
    "type": "object",
    "required": ["descriptions"],
    "properties": {
      "descriptions": {
        "type": "array",
        "items": {
          "type": "object",
          "required": ["id", "description"],
          "properties": {
            "id": {"type": "string"},
            "description": {"type": "string", "minLength": 1}
          }
        }
      }
    }
  })");
  auto& list = schema["properties"]["descriptions"];
  list["minItems"] = ids.size();
  list["maxItems"] = ids.size();
  list["items"]["properties"]["id"]["enum"] = ids;
  return schema;
}

Json InstructionParser::prompting_schema(int num_outputs) {
  Json schema = Json::parse(R"({
    "type": "object",
    "required": ["target_prompts"],
    "properties": {
      "target_prompts": {"type": "array", "items": {"type": "string", "minLength": 1}}
    }
  })");
  schema["properties"]["target_prompts"]["minItems"] = num_outputs;
  schema["properties"]["target_prompts"]["maxItems"] = num_outputs;
  return schema;
}

Json InstructionParser::resolution_schema(const std::vector<std::string>& candidate_ids) {
  Json schema = Json::parse(R"({
    "type": "object",
    "required": ["resolved_input_ids", "wants_article"],
    "properties": {
      "resolved_input_ids": {"type": "array", "uniqueItems": true, "items": {"type": "string"}},
      "wants_article": {"type": "boolean"}
    }
  })");
  schema["properties"]["resolved_input_ids"]["items"]["enum"] = candidate_ids;
  return schema;
}

int InstructionParser::count_outputs(const std::string& user_text,
                                     const std::vector<HistoryEntry>& history) {
  if (user_text.empty()) throw InputError("instruction text is empty");
  AgentRequest req;
  req.agent_name = agent::kCounting;
  req.system_prompt = kCountingPrompt;
  req.user_content = {ContentPart::from_text(
      Json{{"instruction", user_text}, {"history", history_json(recent(history))}}.dump())};
  req.response_schema = counting_schema();
  req.max_repair_attempts = options_.max_repair_attempts;
  req.temperature = options_.temperature;
  return gateway_.complete_json(req).value.at("num_outputs").get<int>();
}

std::vector<InputDescription> InstructionParser::describe_inputs(
    const std::vector<ImageRecord>& images) {
  if (images.empty()) return {};
  std::vector<std::string> ids;
  Json listing = Json::array();
  AgentRequest req;
  req.agent_name = agent::kDescription;
  req.system_prompt = kDescriptionPrompt;
  for (const auto& img : images) {
    ids.push_back(img.id);
    listing.push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}});
  }
  req.user_content.push_back(ContentPart::from_text(Json{{"images", listing}}.dump()));
  for (const auto& img : images) req.user_content.push_back(ContentPart::from_image(img.storage_key));
  req.response_schema = description_schema(ids);
  req.validator = [ids](const Json& v) -> std::optional<std::string> {
    std::set<std::string> seen;
    for (const auto& d : v.at("descriptions")) seen.insert(d.at("id").get<std::string>());
    for (const auto& id : ids) {
      if (!seen.contains(id)) return "no description for image " + id;
    }
    return std::nullopt;
  };
  req.max_repair_attempts = options_.max_repair_attempts;
  req.temperature = options_.temperature;
  const Json value = gateway_.complete_json(req).value;

  // Restore input order regardless of the order the model used.
  std::vector<InputDescription> out;
  for (const auto& id : ids) {
    for (const auto& d : value.at("descriptions")) {
      if (d.at("id") == id) {
        out.push_back({id, d.at("description").get<std::string>()});
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> InstructionParser::prompt_targets(
    const std::string& user_text, int num_outputs, const std::vector<InputDescription>& inputs,
    const std::vector<HistoryEntry>& history) {
  if (num_outputs < 1) throw InputError("num_outputs must be at least 1");
  Json described = Json::array();
  for (const auto& d : inputs) described.push_back({{"id", d.id}, {"description", d.description}});
  AgentRequest req;
  req.agent_name = agent::kPrompting;
  req.system_prompt = kPromptingPrompt;
  req.user_content = {ContentPart::from_text(Json{{"instruction", user_text},
                                                  {"num_outputs", num_outputs},
                                                  {"input_descriptions", described},
                                                  {"history", history_json(recent(history))}}
                                                 .dump())};
  req.response_schema = prompting_schema(num_outputs);
  req.max_repair_attempts = options_.max_repair_attempts;
  req.temperature = options_.temperature;
  return gateway_.complete_json(req).value.at("target_prompts").get<std::vector<std::string>>();
}

ResolvedReferences InstructionParser::resolve_references(
    const std::string& user_text, const std::vector<std::string>& uploaded_this_turn,
    const std::vector<HistoryEntry>& candidates, TurnMode mode) {
  ResolvedReferences out;
  const bool mode_article = mode == TurnMode::article;
  if (candidates.empty()) {
    out.wants_article = mode_article || asks_for_article(user_text);
    return out;
  }
  std::vector<std::string> ids;
  for (const auto& c : candidates) ids.push_back(c.id);
  AgentRequest req;
  req.agent_name = agent::kResolution;
  req.system_prompt = kResolutionPrompt;
  req.user_content = {ContentPart::from_text(
      Json{{"instruction", user_text},
           {"uploaded_this_turn", uploaded_this_turn},
           {"candidates", history_json(candidates)},
           {"requested_mode", mode_article ? "article" : "images"}}
          .dump())};
  req.response_schema = resolution_schema(ids);
  req.max_repair_attempts = options_.max_repair_attempts;
  req.temperature = options_.temperature;
  const Json value = gateway_.complete_json(req).value;
  out.ids = value.at("resolved_input_ids").get<std::vector<std::string>>();
  // The instruction may upgrade images -> article, never the reverse.
  out.wants_article = mode_article || value.at("wants_article").get<bool>();
  return out;
}

ParsedInstruction InstructionParser::parse_turn(Session& session, int turn_index) {
  if (turn_index < 0 || turn_index >= static_cast<int>(session.turns.size())) {
    throw InputError("no turn " + std::to_string(turn_index));
  }
  const Turn& turn = session.turns[static_cast<std::size_t>(turn_index)];
  if (turn.status != TurnStatus::parsing) {
    throw std::logic_error("turn " + std::to_string(turn_index) + " is not in the parsing state");
  }

  // Describe this turn's images that have no caption yet.
  std::vector<ImageRecord> to_describe;
  for (const auto& id : turn.user_image_ids) {
    const ImageRecord* rec = session.find_image(id);
    if (!rec) throw InputError("turn references unknown image " + id);
    if (rec->caption.empty()) to_describe.push_back(*rec);
  }
  for (const auto& d : describe_inputs(to_describe)) session.find_image(d.id)->caption = d.description;

  const std::vector<HistoryEntry> history = resolve_history_references(session, turn_index);
  std::vector<HistoryEntry> candidates = history;
  for (const auto& id : turn.user_image_ids) {
    const bool listed = std::any_of(candidates.begin(), candidates.end(),
                                    [&](const HistoryEntry& h) { return h.id == id; });
    if (listed) continue;
    const ImageRecord* rec = session.find_image(id);
    candidates.push_back({rec->id, rec->caption, rec->source, rec->created_turn});
  }
  const ResolvedReferences refs =
      resolve_references(turn.user_text, turn.user_image_ids, candidates, turn.mode);

  // Older images left uncaptioned by a failed turn.
  std::vector<ImageRecord> uncaptioned;
  for (const auto& id : refs.ids) {
    const ImageRecord* rec = session.find_image(id);
    if (rec && rec->caption.empty()) uncaptioned.push_back(*rec);
  }
  for (const auto& d : describe_inputs(uncaptioned)) session.find_image(d.id)->caption = d.description;

  ParsedInstruction parsed;
  parsed.resolved_input_ids = refs.ids;
  parsed.wants_article = refs.wants_article;
  for (const auto& id : refs.ids) {
    const ImageRecord* rec = session.find_image(id);
    if (!rec) throw InputError("resolved id " + id + " is not in the registry");
    parsed.input_descriptions.push_back({id, rec->caption});
  }
  parsed.num_outputs = count_outputs(turn.user_text, history);
  parsed.target_prompts =
      prompt_targets(turn.user_text, parsed.num_outputs, parsed.input_descriptions, history);

  if (static_cast<int>(parsed.target_prompts.size()) != parsed.num_outputs) {
    throw std::logic_error("prompt count does not match num_outputs");
  }
  return parsed;
}

}  // namespace chatdit
