#pragma once

// Chat-completion backends and the JSON-contract gateway every agent talks
// through.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "chatdit/blob_store.hpp"
#include "chatdit/model.hpp"
#include "chatdit/transport.hpp"

namespace chatdit {

/// Agent names; they key scripted fixtures and audit logs.
namespace agent {
inline constexpr const char* kCounting = "counting";
inline constexpr const char* kDescription = "description";
inline constexpr const char* kResolution = "resolution";
inline constexpr const char* kPrompting = "prompting";
inline constexpr const char* kReferencing = "referencing";
inline constexpr const char* kPanelizing = "panelizing";
inline constexpr const char* kMarkdown = "markdown";
}  // namespace agent

struct ContentPart {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string text;
  std::string blob_key;
  std::string media_type;

  static ContentPart from_text(std::string t) { return {Kind::text, std::move(t), {}, {}}; }
  static ContentPart from_image(std::string key, std::string type = "image/png") {
    return {Kind::image, {}, std::move(key), std::move(type)};
  }
};

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::vector<ContentPart> parts;

  /// Text parts joined by newlines; image parts render as "[image:<key>]".
  std::string flatten() const;
};

struct ChatRequest {
  std::string agent_name;
  double temperature = 0.2;
  bool json_mode = true;
  std::vector<ChatMessage> messages;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Returns the assistant reply text. Throws BackendError on transport
  /// failure.
  virtual std::string chat(const ChatRequest& request) = 0;
  virtual bool supports_vision() const = 0;
};

/// Replays canned replies keyed by "<agent>/<ordinal>", where the ordinal
/// counts that agent's calls from 0. Repair attempts consume ordinals too.
class ScriptedLlm final : public LlmBackend {
 public:
  explicit ScriptedLlm(std::map<std::string, std::string> fixture, bool vision = true);

  /// Fixture file: a JSON object mapping "<agent>/<ordinal>" to reply text.
  static std::shared_ptr<ScriptedLlm> from_file(const std::filesystem::path& path);
  static std::shared_ptr<ScriptedLlm> from_json(const Json& fixture);

  std::string chat(const ChatRequest& request) override;
  bool supports_vision() const override { return vision_; }

  struct Call {
    std::string agent;
    int ordinal = 0;
    ChatRequest request;
  };
  std::vector<Call> calls() const;
  int calls_for(const std::string& agent) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> fixture_;
  std::map<std::string, int> next_ordinal_;
  std::vector<Call> calls_;
  bool vision_;
};

/// Rule-based stand-in used by `--mock` runs without a fixture. It reads
/// the JSON payload every agent sends and answers from simple heuristics
/// (explicit numerals for counts, the instruction text for prompts).
class OfflineLlm final : public LlmBackend {
 public:
  std::string chat(const ChatRequest& request) override;
  bool supports_vision() const override { return true; }
};

struct RemoteLlmConfig {
  std::string url;    // full chat-completions endpoint
  std::string api_key;
  std::string model = "gpt-4o";
  bool vision = true;
  std::chrono::milliseconds timeout{120000};

  /// Reads CHATDIT_LLM_URL / CHATDIT_LLM_KEY / CHATDIT_LLM_MODEL; nullopt
  /// when no URL is set.
  static std::optional<RemoteLlmConfig> from_env();
};

/// OpenAI-style chat-completions client. Images travel as base64 data URLs.
class HttpLlmBackend final : public LlmBackend {
 public:
  HttpLlmBackend(RemoteLlmConfig config, std::shared_ptr<HttpTransport> transport,
                 std::shared_ptr<const BlobStore> blobs);

  std::string chat(const ChatRequest& request) override;
  bool supports_vision() const override { return config_.vision; }

  /// The request body sent for `request`; exposed for tests.
  Json build_body(const ChatRequest& request) const;

 private:
  RemoteLlmConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<const BlobStore> blobs_;
};

/// Extra semantic check run after schema validation; returns an error
/// message or nullopt.
using ReplyValidator = std::function<std::optional<std::string>(const Json&)>;

struct AgentRequest {
  std::string agent_name;
  std::string system_prompt;
  std::vector<ContentPart> user_content;
  Json response_schema = Json::object();
  int max_repair_attempts = 3;
  double temperature = 0.2;
  ReplyValidator validator;
};

struct AgentResponse {
  Json value;
  int attempts_used = 0;
  std::vector<std::pair<std::string, std::string>> raw_transcript;
};

struct TextRequest {
  std::string agent_name;
  std::string system_prompt;
  std::vector<ContentPart> user_content;
  int max_attempts = 2;
  double temperature = 0.7;
  std::function<std::optional<std::string>(const std::string&)> validator;
};

struct TextResponse {
  std::string text;
  int attempts_used = 0;
  std::vector<std::pair<std::string, std::string>> raw_transcript;
};

inline constexpr double kPlanningTemperature = 0.2;
inline constexpr double kProseTemperature = 0.7;

/// Prefix of the corrective user message sent after an invalid reply.
inline constexpr const char* kRepairPrefix =
    "Your previous reply was invalid JSON for the required schema: ";

/// Pulls a JSON document out of a reply that may be fenced or wrapped in
/// prose. Returns the parse error text on failure.
struct ExtractedJson {
  std::optional<Json> value;
  std::string error;
};
ExtractedJson extract_json(const std::string& reply);

class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<LlmBackend> backend, int max_concurrent_calls = 4);

  /// Sends the request and re-prompts with the validation error until the
  /// reply validates or max_repair_attempts is spent (ContractError).
  AgentResponse complete_json(const AgentRequest& request);

  /// Free-text variant for the Markdown agent.
  TextResponse complete_text(const TextRequest& request);

  LlmBackend& backend() noexcept { return *backend_; }

 private:
  std::string call(const ChatRequest& request);

  std::shared_ptr<LlmBackend> backend_;
  std::counting_semaphore<1024> slots_;
};

}  // namespace chatdit
