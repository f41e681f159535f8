#include "chatdit/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <sstream>

#include "chatdit/errors.hpp"
#include "chatdit/hash.hpp"
#include "chatdit/json_schema.hpp"

namespace chatdit {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<Json> try_parse(const std::string& text, std::string& error) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    error = e.what();
    return std::nullopt;
  }
}

std::string getenv_or(const char* name, std::string fallback = {}) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::move(fallback);
}

// The first user message carries each agent's JSON payload.
Json request_payload(const ChatRequest& request) {
  for (const auto& m : request.messages) {
    if (m.role != "user") continue;
    for (const auto& p : m.parts) {
      if (p.kind != ContentPart::Kind::text) continue;
      try {
        return Json::parse(p.text);
      } catch (const Json::parse_error&) {
      }
    }
  }
  return Json::object();
}

int count_from_text(const std::string& text) {
  static const std::vector<std::pair<std::string, int>> kWords = {
      {"one", 1},  {"two", 2},   {"three", 3}, {"four", 4},  {"five", 5},    {"six", 6},
      {"seven", 7}, {"eight", 8}, {"nine", 9},  {"ten", 10}, {"eleven", 11}, {"twelve", 12},
      {"pair", 2}, {"single", 1}};
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const std::regex kToken(R"([a-z]+|[0-9]+)");
  for (auto it = std::sregex_iterator(lower.begin(), lower.end(), kToken);
       it != std::sregex_iterator(); ++it) {
    const std::string tok = it->str();
    if (std::isdigit(static_cast<unsigned char>(tok[0]))) {
      if (tok.size() <= 2) {
        const int n = std::stoi(tok);
        if (n >= 1) return n;
      }
      continue;
    }
    for (const auto& [word, n] : kWords) {
      if (tok == word) return n;
    }
  }
  return 1;
}

bool mentions(const std::string& text, const std::string& word) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower.find(word) != std::string::npos;
}

std::string render_transcript_entry(const ChatMessage& m) { return m.flatten(); }

}  // namespace

std::string ChatMessage::flatten() const {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += '\n';
    out += p.kind == ContentPart::Kind::text ? p.text : "[image:" + p.blob_key + "]";
  }
  return out;
}

// ---------------------------------------------------------------------------
// ScriptedLlm
// ---------------------------------------------------------------------------

ScriptedLlm::ScriptedLlm(std::map<std::string, std::string> fixture, bool vision)
    : fixture_(std::move(fixture)), vision_(vision) {}

std::shared_ptr<ScriptedLlm> ScriptedLlm::from_json(const Json& fixture) {
  if (!fixture.is_object()) throw FixtureError("LLM fixture must be a JSON object");
  std::map<std::string, std::string> entries;
  for (const auto& [key, value] : fixture.items()) {
    if (!value.is_string()) throw FixtureError("fixture entry '" + key + "' is not a string");
    entries.emplace(key, value.get<std::string>());
  }
  return std::make_shared<ScriptedLlm>(std::move(entries));
}

std::shared_ptr<ScriptedLlm> ScriptedLlm::from_file(const std::filesystem::path& path) {
  auto text = read_file(path);
  if (!text) throw FixtureError("cannot read LLM fixture " + path.string());
  try {
    return from_json(Json::parse(*text));
  } catch (const Json::parse_error& e) {
    throw FixtureError("LLM fixture " + path.string() + " is not JSON: " + e.what());
  }
}

std::string ScriptedLlm::chat(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  const int ordinal = next_ordinal_[request.agent_name]++;
  calls_.push_back({request.agent_name, ordinal, request});
  const std::string key = request.agent_name + "/" + std::to_string(ordinal);
  auto it = fixture_.find(key);
  if (it == fixture_.end()) throw FixtureError("no scripted reply for '" + key + "'");
  return it->second;
}

std::vector<ScriptedLlm::Call> ScriptedLlm::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

int ScriptedLlm::calls_for(const std::string& agent) const {
  std::lock_guard lock(mu_);
  auto it = next_ordinal_.find(agent);
  return it == next_ordinal_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// OfflineLlm
// ---------------------------------------------------------------------------

std::string OfflineLlm::chat(const ChatRequest& request) {
  const Json in = request_payload(request);
  const std::string instruction = in.value("instruction", std::string{});
  const std::string& name = request.agent_name;

  if (name == agent::kCounting) {
    return Json{{"num_outputs", count_from_text(instruction)}}.dump();
  }
  if (name == agent::kDescription) {
    Json out = Json::array();
    for (const auto& img : in.value("images", Json::array())) {
      out.push_back({{"id", img.at("id")},
                     {"description", "An uploaded image (" + std::to_string(img.value("width", 0)) +
                                         "x" + std::to_string(img.value("height", 0)) + " pixels)"}});
    }
    return Json{{"descriptions", out}}.dump();
  }
  if (name == agent::kResolution) {
    Json ids = in.value("uploaded_this_turn", Json::array());
    const Json candidates = in.value("candidates", Json::array());
    if (ids.empty() && !candidates.empty() &&
        (mentions(instruction, "previous") || mentions(instruction, "last image") ||
         mentions(instruction, "above"))) {
      ids.push_back(candidates.back().at("id"));
    }
    const bool article = in.value("requested_mode", std::string{}) == "article" ||
                         mentions(instruction, "article");
    return Json{{"resolved_input_ids", ids}, {"wants_article", article}}.dump();
  }
  if (name == agent::kPrompting) {
    const int n = in.value("num_outputs", 1);
    std::string reference;
    for (const auto& d : in.value("input_descriptions", Json::array())) {
      reference += " Reference: " + d.value("description", std::string{}) + ".";
    }
    Json prompts = Json::array();
    for (int k = 1; k <= n; ++k) {
      std::string p = instruction;
      if (n > 1) p += " (image " + std::to_string(k) + " of " + std::to_string(n) + ")";
      prompts.push_back(p + reference);
    }
    return Json{{"target_prompts", prompts}}.dump();
  }
  if (name == agent::kReferencing) {
    const int budget = in.value("budget", 1);
    Json ids = Json::array();
    for (const auto& c : in.value("candidates", Json::array())) {
      if (static_cast<int>(ids.size()) == budget) break;
      ids.push_back(c.at("id"));
    }
    return Json{{"reference_ids", ids}}.dump();
  }
  if (name == agent::kPanelizing) {
    return Json{{"panel_prompt", in.value("template_prompt", std::string{})}}.dump();
  }
  if (name == agent::kMarkdown) {
    std::ostringstream md;
    md << "# " << (instruction.empty() ? std::string("Untitled") : instruction) << "\n\n";
    for (const auto& img : in.value("images", Json::array())) {
      md << img.value("description", std::string{}) << "\n\n"
         << img.value("placeholder", std::string{}) << "\n\n";
    }
    return md.str();
  }
  throw ConfigError("offline LLM has no rule for agent '" + name + "'");
}

// ---------------------------------------------------------------------------
// HttpLlmBackend
// ---------------------------------------------------------------------------

std::optional<RemoteLlmConfig> RemoteLlmConfig::from_env() {
  RemoteLlmConfig c;
  c.url = getenv_or("CHATDIT_LLM_URL");
  if (c.url.empty()) return std::nullopt;
  c.api_key = getenv_or("CHATDIT_LLM_KEY");
  c.model = getenv_or("CHATDIT_LLM_MODEL", c.model);
  return c;
}

HttpLlmBackend::HttpLlmBackend(RemoteLlmConfig config, std::shared_ptr<HttpTransport> transport,
                               std::shared_ptr<const BlobStore> blobs)
    : config_(std::move(config)), transport_(std::move(transport)), blobs_(std::move(blobs)) {
  split_url(config_.url);
}

Json HttpLlmBackend::build_body(const ChatRequest& request) const {
  Json messages = Json::array();
  for (const auto& m : request.messages) {
    const bool has_image = std::any_of(m.parts.begin(), m.parts.end(), [](const ContentPart& p) {
      return p.kind == ContentPart::Kind::image;
    });
    if (!has_image) {
      messages.push_back({{"role", m.role}, {"content", m.flatten()}});
      continue;
    }
    Json content = Json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::text) {
        content.push_back({{"type", "text"}, {"text", p.text}});
        continue;
      }
      auto bytes = blobs_ ? blobs_->get(p.blob_key) : std::nullopt;
      if (!bytes) throw InputError("image blob " + p.blob_key + " is not stored");
      content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:" + p.media_type + ";base64," + base64_encode(*bytes)}}}});
    }
    messages.push_back({{"role", m.role}, {"content", content}});
  }
  Json body{{"model", config_.model}, {"temperature", request.temperature}, {"messages", messages}};
  if (request.json_mode) body["response_format"] = {{"type", "json_object"}};
  return body;
}

std::string HttpLlmBackend::chat(const ChatRequest& request) {
  HttpHeaders headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  const HttpResponse res =
      transport_->post(config_.url, headers, build_body(request).dump(), "application/json",
                       config_.timeout);
  if (res.status == 429 || res.status >= 500) {
    throw BackendError("LLM endpoint answered " + std::to_string(res.status), true);
  }
  if (res.status != 200) {
    throw BackendError("LLM endpoint answered " + std::to_string(res.status) + ": " + res.body,
                       false);
  }
  try {
    const Json reply = Json::parse(res.body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    throw BackendError(std::string("malformed chat-completions reply: ") + e.what(), false);
  }
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

ExtractedJson extract_json(const std::string& reply) {
  std::string text = trim(reply);
  if (auto fence = text.find("```"); fence != std::string::npos) {
    const auto body = text.find('\n', fence);
    const auto close = body == std::string::npos ? std::string::npos : text.find("```", body);
    if (close != std::string::npos) text = trim(text.substr(body + 1, close - body - 1));
  }
  std::string error;
  if (auto v = try_parse(text, error)) return {std::move(v), {}};

  // Prose around the document: take the widest bracketed span.
  const auto open = text.find_first_of("{[");
  if (open != std::string::npos) {
    const char closer = text[open] == '{' ? '}' : ']';
    const auto close = text.rfind(closer);
    if (close != std::string::npos && close > open) {
      std::string inner_error;
      if (auto v = try_parse(text.substr(open, close - open + 1), inner_error)) {
        return {std::move(v), {}};
      }
    }
  }
  return {std::nullopt, "reply is not parseable JSON (" + error + ")"};
}

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend, int max_concurrent_calls)
    : backend_(std::move(backend)), slots_(std::clamp(max_concurrent_calls, 1, 1024)) {
  if (!backend_) throw ConfigError("LLM gateway needs a backend");
}

std::string LlmGateway::call(const ChatRequest& request) {
  slots_.acquire();
  try {
    std::string reply = backend_->chat(request);
    slots_.release();
    return reply;
  } catch (...) {
    slots_.release();
    throw;
  }
}

namespace {

bool has_images(const std::vector<ContentPart>& parts) {
  return std::any_of(parts.begin(), parts.end(),
                     [](const ContentPart& p) { return p.kind == ContentPart::Kind::image; });
}

template <typename Request>
ChatRequest open_conversation(const Request& request, bool json_mode,
                              std::vector<std::pair<std::string, std::string>>& transcript) {
  ChatRequest chat;
  chat.agent_name = request.agent_name;
  chat.temperature = request.temperature;
  chat.json_mode = json_mode;
  chat.messages.push_back({"system", {ContentPart::from_text(request.system_prompt)}});
  chat.messages.push_back({"user", request.user_content});
  for (const auto& m : chat.messages) transcript.emplace_back(m.role, render_transcript_entry(m));
  return chat;
}

}  // namespace

AgentResponse LlmGateway::complete_json(const AgentRequest& request) {
  if (request.max_repair_attempts < 1) throw ConfigError("max_repair_attempts must be at least 1");
  if (!request.response_schema.is_object()) throw ConfigError("response schema must be an object");
  if (has_images(request.user_content) && !backend_->supports_vision()) {
    throw ConfigError("agent '" + request.agent_name +
                      "' needs image input but the configured LLM has no vision support");
  }
  AgentResponse response;
  ChatRequest chat = open_conversation(request, true, response.raw_transcript);
  std::string last_error;
  for (int attempt = 1; attempt <= request.max_repair_attempts; ++attempt) {
    const std::string reply = call(chat);
    chat.messages.push_back({"assistant", {ContentPart::from_text(reply)}});
    response.raw_transcript.emplace_back("assistant", reply);
    response.attempts_used = attempt;

    ExtractedJson parsed = extract_json(reply);
    if (!parsed.value) {
      last_error = parsed.error;
    } else if (auto e = validate_json(*parsed.value, request.response_schema)) {
      last_error = *e;
    } else if (auto e2 = request.validator ? request.validator(*parsed.value) : std::nullopt) {
      last_error = *e2;
    } else {
      response.value = std::move(*parsed.value);
      return response;
    }
    if (attempt == request.max_repair_attempts) break;
    const std::string repair =
        kRepairPrefix + last_error + ". Reply with ONLY the corrected JSON.";
    chat.messages.push_back({"user", {ContentPart::from_text(repair)}});
    response.raw_transcript.emplace_back("user", repair);
  }
  throw ContractError(request.agent_name, last_error);
}

TextResponse LlmGateway::complete_text(const TextRequest& request) {
  if (request.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  TextResponse response;
  ChatRequest chat = open_conversation(request, false, response.raw_transcript);
  std::string last_error;
  for (int attempt = 1; attempt <= request.max_attempts; ++attempt) {
    std::string reply = call(chat);
    chat.messages.push_back({"assistant", {ContentPart::from_text(reply)}});
    response.raw_transcript.emplace_back("assistant", reply);
    response.attempts_used = attempt;
    auto e = request.validator ? request.validator(reply) : std::nullopt;
    if (!e) {
      response.text = std::move(reply);
      return response;
    }
    last_error = *e;
    if (attempt == request.max_attempts) break;
    const std::string repair = "Your previous reply was invalid: " + last_error +
                               ". Reply with ONLY the corrected text.";
    chat.messages.push_back({"user", {ContentPart::from_text(repair)}});
    response.raw_transcript.emplace_back("user", repair);
  }
  throw ContractError(request.agent_name, last_error);
}

}  // namespace chatdit
