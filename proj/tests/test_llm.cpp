#include <doctest.h>

#include <cstdlib>

#include "chatdit/errors.hpp"
#include "chatdit/json_schema.hpp"
#include "chatdit/llm.hpp"
#include "support.hpp"

using namespace chatdit;

namespace {

const Json kCountSchema = Json::parse(R"({
  "type": "object", "required": ["num_outputs"],
  "properties": {"num_outputs": {"type": "integer", "minimum": 1}}
})");

AgentRequest count_request(int attempts = 3) {
  AgentRequest r;
  r.agent_name = "counting";
  r.system_prompt = "count";
  r.user_content = {ContentPart::from_text("draw a cat")};
  r.response_schema = kCountSchema;
  r.max_repair_attempts = attempts;
  return r;
}

LlmGateway gateway_for(std::map<std::string, std::string> fixture, bool vision = true) {
  return LlmGateway(std::make_shared<ScriptedLlm>(std::move(fixture), vision));
}

class FakeTransport : public HttpTransport {
 public:
  std::vector<HttpResponse> replies;
  std::vector<std::string> bodies;
  HttpHeaders last_headers;
  std::string last_url;

  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                    const std::string&, std::chrono::milliseconds) override {
    last_url = url;
    last_headers = headers;
    bodies.push_back(body);
    const HttpResponse r = replies.front();
    replies.erase(replies.begin());
    return r;
  }
};

std::string completion(const std::string& content) {
  return Json{{"choices", Json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

}  // namespace

TEST_CASE("complete_json") {
  SUBCASE("valid first try") {
    auto gw = gateway_for({{"counting/0", R"({"num_outputs": 4})"}});
    const auto r = gw.complete_json(count_request());
    CHECK(r.value == Json{{"num_outputs", 4}});
    CHECK(r.attempts_used == 1);
    CHECK(r.raw_transcript.size() == 3);
  }
  SUBCASE("fenced reply") {
    auto gw = gateway_for({{"counting/0", "```json\n{\"num_outputs\": 4}\n```"}});
    const auto r = gw.complete_json(count_request());
    CHECK(r.value["num_outputs"] == 4);
    CHECK(r.attempts_used == 1);
  }
  SUBCASE("repair after a broken reply") {
    auto llm = std::make_shared<ScriptedLlm>(
        std::map<std::string, std::string>{{"counting/0", "{bad"}, {"counting/1", R"({"num_outputs": 2})"}});
    LlmGateway gw(llm);
    const auto r = gw.complete_json(count_request());
    CHECK(r.attempts_used == 2);
    CHECK(r.value["num_outputs"] == 2);
    CHECK(r.raw_transcript.size() == 5);
    CHECK(r.raw_transcript[0].first == "system");
    CHECK(r.raw_transcript[3].first == "user");
    CHECK(r.raw_transcript[3].second.rfind(kRepairPrefix, 0) == 0);
    CHECK(r.raw_transcript[3].second.find("Reply with ONLY the corrected JSON.") != std::string::npos);
    // The repair conversation carries the earlier exchange.
    const auto calls = llm->calls();
    REQUIRE(calls.size() == 2);
    CHECK(calls[1].request.messages.size() == 4);
  }
  SUBCASE("zero is a schema violation") {
    auto gw = gateway_for({{"counting/0", R"({"num_outputs": 0})"}});
    CHECK_THROWS_AS(gw.complete_json(count_request(1)), ContractError);
  }
  SUBCASE("contract error carries the last message") {
    auto gw = gateway_for({{"counting/0", "nope"}, {"counting/1", "[]"}, {"counting/2", R"({"num_outputs": "3"})"}});
    try {
      gw.complete_json(count_request());
      FAIL("expected ContractError");
    } catch (const ContractError& e) {
      CHECK(e.agent() == "counting");
      CHECK(e.last_message().find("/num_outputs") != std::string::npos);
    }
  }
  SUBCASE("semantic validator drives repair") {
    auto gw = gateway_for({{"counting/0", R"({"num_outputs": 9})"}, {"counting/1", R"({"num_outputs": 3})"}});
    auto req = count_request();
    req.validator = [](const Json& v) -> std::optional<std::string> {
      if (v["num_outputs"] > 6) return "too many";
      return std::nullopt;
    };
    CHECK(gw.complete_json(req).value["num_outputs"] == 3);
  }
  SUBCASE("image parts need a vision model") {
    auto gw = gateway_for({{"description/0", "{}"}}, false);
    AgentRequest req = count_request();
    req.agent_name = "description";
    req.user_content.push_back(ContentPart::from_image(std::string(64, 'a')));
    CHECK_THROWS_AS(gw.complete_json(req), ConfigError);
  }
}

TEST_CASE("complete_text repairs once") {
  auto gw = gateway_for({{"markdown/0", "no placeholder"}, {"markdown/1", "{{IMAGE_1}}"}});
  TextRequest req;
  req.agent_name = "markdown";
  req.validator = [](const std::string& t) -> std::optional<std::string> {
    if (t.find("{{IMAGE_1}}") == std::string::npos) return "missing";
    return std::nullopt;
  };
  const auto r = gw.complete_text(req);
  CHECK(r.attempts_used == 2);
  CHECK(r.text == "{{IMAGE_1}}");
}

TEST_CASE("extract_json") {
  CHECK(*extract_json(R"({"a": 1})").value == Json{{"a", 1}});
  CHECK(*extract_json("Sure! Here you go: {\"a\": [1, 2]} Hope that helps.").value == Json{{"a", {1, 2}}});
  CHECK(*extract_json("```\n[1,2]\n```").value == Json::array({1, 2}));
  CHECK_FALSE(extract_json("{\"a\": ").value);
  CHECK_FALSE(extract_json("no json here").value);
  CHECK_FALSE(extract_json("").value);
}

TEST_CASE("scripted mock") {
  ScriptedLlm llm({{"counting/0", "a"}, {"counting/1", "b"}});
  ChatRequest req;
  req.agent_name = "counting";
  CHECK(llm.chat(req) == "a");
  CHECK(llm.chat(req) == "b");
  CHECK_THROWS_AS(llm.chat(req), FixtureError);
  req.agent_name = "prompting";
  CHECK_THROWS_AS(llm.chat(req), FixtureError);
  CHECK(llm.calls_for("counting") == 3);

  testing::TempDir dir;
  const auto file = dir.path() / "fixture.json";
  atomic_write_file(file, R"({"counting/0": "{\"num_outputs\": 1}"})");
  auto loaded = ScriptedLlm::from_file(file);
  req.agent_name = "counting";
  CHECK(loaded->chat(req) == R"({"num_outputs": 1})");
  atomic_write_file(file, R"({"counting/0": 5})");
  CHECK_THROWS_AS(ScriptedLlm::from_file(file), FixtureError);
}

TEST_CASE("json schema subset") {
  const Json schema = Json::parse(R"({
    "type": "object", "required": ["ids", "flag"], "additionalProperties": false,
    "properties": {
      "ids": {"type": "array", "uniqueItems": true, "minItems": 1, "maxItems": 2,
              "items": {"type": "string", "enum": ["a", "b", "c"]}},
      "flag": {"type": "boolean"},
      "name": {"type": "string", "minLength": 2, "maxLength": 3}
    }
  })");
  CHECK_FALSE(validate_json(Json::parse(R"({"ids": ["a"], "flag": true})"), schema));
  CHECK(validate_json(Json::parse(R"({"ids": ["a", "a"], "flag": true})"), schema));
  CHECK(validate_json(Json::parse(R"({"ids": ["d"], "flag": true})"), schema));
  CHECK(validate_json(Json::parse(R"({"ids": [], "flag": true})"), schema));
  CHECK(validate_json(Json::parse(R"({"ids": ["a","b","c"], "flag": true})"), schema));
  CHECK(validate_json(Json::parse(R"({"ids": ["a"], "flag": 1})"), schema));
  CHECK(validate_json(Json::parse(R"({"ids": ["a"]})"), schema));
  CHECK(validate_json(Json::parse(R"({"ids": ["a"], "flag": true, "x": 1})"), schema));
  // Lengths count code points, not bytes.
  CHECK_FALSE(validate_json(Json::parse(R"({"ids": ["a"], "flag": true, "name": "ééé"})"), schema));
  CHECK(validate_json(Json::parse(R"({"ids": ["a"], "flag": true, "name": "é"})"), schema));
  CHECK(validate_json(Json(1.5), Json{{"type", "integer"}}));
  CHECK_FALSE(validate_json(Json(2), Json{{"type", "number"}}));
}

TEST_CASE("http llm backend") {
  auto transport = std::make_shared<FakeTransport>();
  auto blobs = std::make_shared<MemoryBlobStore>();
  const Bytes png{0x89, 'P', 'N', 'G'};
  const std::string key = blobs->put(png);
  RemoteLlmConfig config;
  config.url = "https://llm.example/v1/chat/completions";
  config.api_key = "secret";
  config.model = "m1";
  HttpLlmBackend llm(config, transport, blobs);

  ChatRequest req;
  req.agent_name = "description";
  req.temperature = 0.2;
  req.messages = {{"system", {ContentPart::from_text("sys")}},
                  {"user", {ContentPart::from_text("look"), ContentPart::from_image(key)}}};

  SUBCASE("request body") {
    const Json body = llm.build_body(req);
    CHECK(body["model"] == "m1");
    CHECK(body["temperature"] == 0.2);
    CHECK(body["response_format"]["type"] == "json_object");
    const Json& parts = body["messages"][1]["content"];
    CHECK(parts[1]["type"] == "image_url");
    CHECK(parts[1]["image_url"]["url"] == "data:image/png;base64," + base64_encode(png));
  }
  SUBCASE("status mapping") {
    transport->replies = {{200, completion("hello")}, {503, ""}, {429, ""}, {401, "denied"}, {200, "{}"}};
    CHECK(llm.chat(req) == "hello");
    CHECK(transport->last_headers.at(0).second == "Bearer secret");
    try {
      llm.chat(req);
      FAIL("503");
    } catch (const BackendError& e) {
      CHECK(e.retryable());
    }
    try {
      llm.chat(req);
      FAIL("429");
    } catch (const BackendError& e) {
      CHECK(e.retryable());
    }
    try {
      llm.chat(req);
      FAIL("401");
    } catch (const BackendError& e) {
      CHECK_FALSE(e.retryable());
    }
    CHECK_THROWS_AS(llm.chat(req), BackendError);
  }
  SUBCASE("transport errors do not consume repair attempts") {
    transport->replies = {{500, ""}};
    LlmGateway gw(std::make_shared<HttpLlmBackend>(config, transport, blobs));
    CHECK_THROWS_AS(gw.complete_json(count_request()), BackendError);
    CHECK(transport->bodies.size() == 1);
  }
}

TEST_CASE("recording transport without an inner client refuses") {
  RecordingTransport rec;
  CHECK_THROWS_AS(rec.post("http://x/", {}, "", "text/plain", std::chrono::milliseconds(10)), BackendError);
  CHECK(rec.request_count() == 1);
}

TEST_CASE("split_url") {
  const auto u = split_url("https://api.example.com/v1/chat/completions");
  CHECK(u.scheme_host_port == "https://api.example.com");
  CHECK(u.path == "/v1/chat/completions");
  CHECK(split_url("http://localhost:8000").path == "/");
  CHECK_THROWS_AS(split_url("ftp://x"), ConfigError);
}

TEST_CASE("remote llm config comes from the environment") {
  ::unsetenv("CHATDIT_LLM_URL");
  CHECK_FALSE(RemoteLlmConfig::from_env());
  ::setenv("CHATDIT_LLM_URL", "http://127.0.0.1:9/v1/chat/completions", 1);
  ::setenv("CHATDIT_LLM_MODEL", "custom", 1);
  const auto c = RemoteLlmConfig::from_env();
  REQUIRE(c);
  CHECK(c->model == "custom");
  ::unsetenv("CHATDIT_LLM_URL");
  ::unsetenv("CHATDIT_LLM_MODEL");
}

TEST_CASE("offline stand-in answers every agent under its schema") {
  LlmGateway gw(std::make_shared<OfflineLlm>());
  AgentRequest req = count_request();
  req.user_content = {ContentPart::from_text(Json{{"instruction", "draw 3 foxes"}}.dump())};
  CHECK(gw.complete_json(req).value["num_outputs"] == 3);
  req.user_content = {ContentPart::from_text(Json{{"instruction", "a four-page picture book"}}.dump())};
  CHECK(gw.complete_json(req).value["num_outputs"] == 4);
  req.user_content = {ContentPart::from_text(Json{{"instruction", "draw a cat"}}.dump())};
  CHECK(gw.complete_json(req).value["num_outputs"] == 1);
}
