#include <doctest.h>

#include <algorithm>

#include "chatdit/article.hpp"
#include "chatdit/errors.hpp"
#include "chatdit/geometry.hpp"
#include "chatdit/instruction_parsing.hpp"
#include "chatdit/planner.hpp"
#include "chatdit/session.hpp"
#include "support.hpp"

using namespace chatdit;
using testing::Fixture;

namespace {

struct Harness {
  MemoryBlobStore blobs;
  Session session = new_session("agents");
  std::shared_ptr<ScriptedLlm> llm;
  std::unique_ptr<LlmGateway> gateway;

  explicit Harness(const Fixture& f, bool vision = true) {
    llm = std::make_shared<ScriptedLlm>(f.map(), vision);
    gateway = std::make_unique<LlmGateway>(llm);
  }

  std::string upload(std::uint8_t shade, int turn) {
    return register_image(session, blobs, ImageSource::uploaded, testing::solid(16, 16, shade, shade, shade),
                          "", turn)
        .id;
  }

  int begin_turn(const std::string& text, std::vector<std::string> images = {},
                 TurnMode mode = TurnMode::images) {
    Turn t;
    t.index = static_cast<int>(session.turns.size());
    t.user_text = text;
    t.user_image_ids = std::move(images);
    t.mode = mode;
    t.advance(TurnStatus::parsing);
    session.turns.push_back(t);
    return t.index;
  }

  ParsedInstruction parse(int turn) {
    InstructionParser parser(*gateway);
    return parser.parse_turn(session, turn);
  }
};

Json prompts(std::vector<std::string> p) { return Json{{"target_prompts", p}}; }

ParsedInstruction parsed_with(int m, int n) {
  ParsedInstruction p;
  p.num_outputs = n;
  for (int i = 0; i < m; ++i) {
    const std::string id = "img_000" + std::to_string(i + 1);
    p.resolved_input_ids.push_back(id);
    p.input_descriptions.push_back({id, "input " + std::to_string(i + 1)});
  }
  for (int k = 0; k < n; ++k) p.target_prompts.push_back("target " + std::to_string(k + 1));
  return p;
}

GenerationPlan plan_for(int m, int n, LlmGateway* gw = nullptr) {
  StrategyPlanner planner(gw);
  return planner.make_plan(classify(m, n), parsed_with(m, n), PlanContext{"s", 0, 0});
}

std::vector<int> prior_ordinals(const PlanStep& s) {
  std::vector<int> out;
  for (const auto& slot : s.reference_slots) {
    if (slot.kind == ImageSlot::Kind::prior_output) out.push_back(slot.ordinal);
  }
  return out;
}

std::vector<std::string> registry_ids(const PlanStep& s) {
  std::vector<std::string> out;
  for (const auto& slot : s.reference_slots) {
    if (slot.kind == ImageSlot::Kind::registry_image) out.push_back(slot.image_id);
  }
  return out;
}

std::vector<ImageRecord> outputs(int n) {
  std::vector<ImageRecord> out;
  for (int k = 0; k < n; ++k) {
    ImageRecord r;
    r.id = "img_00" + std::to_string(10 + k);
    r.caption = "page " + std::to_string(k + 1);
    r.source = ImageSource::generated;
    out.push_back(r);
  }
  return out;
}

std::string article_with(int n, int skip = -1) {
  std::string text = "# A Fox Story\n\nOnce upon a time.\n\n";
  for (int k = 1; k <= n; ++k) {
    if (k != skip) text += "{{IMAGE_" + std::to_string(k) + "}}\n\n";
    text += "Paragraph after image " + std::to_string(k) + ".\n\n";
  }
  return text;
}

int image_blocks(const ArticleDocument& d) {
  int n = 0;
  for (const auto& b : d.blocks) n += b.kind == ArticleBlock::Kind::image;
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// Instruction parsing
// ---------------------------------------------------------------------------

TEST_CASE("parse: text-only request") {
  Fixture f;
  f.add("counting", {{"num_outputs", 1}});
  f.add("prompting", prompts({"A fluffy orange tabby cat sitting on a windowsill"}));
  Harness h(f);
  const auto p = h.parse(h.begin_turn("draw a cat"));
  CHECK(p.num_outputs == 1);
  CHECK(p.resolved_input_ids.empty());
  CHECK(p.target_prompts.size() == 1);
  CHECK_FALSE(p.wants_article);
  CHECK(h.llm->calls_for("description") == 0);
  CHECK(h.llm->calls_for("resolution") == 0);
}

TEST_CASE("parse: picture book count") {
  Fixture f;
  f.add("counting", {{"num_outputs", 4}});
  f.add("prompting", prompts({"p1", "p2", "p3", "p4"}));
  Harness h(f);
  const auto p = h.parse(h.begin_turn("a four-page picture book about a fox"));
  CHECK(p.num_outputs == 4);
  CHECK(p.target_prompts.size() == 4);
}

TEST_CASE("parse: history reference resolves to the first image") {
  Fixture f;
  f.add("resolution", {{"resolved_input_ids", {"img_0001"}}, {"wants_article", false}});
  f.add("counting", {{"num_outputs", 1}});
  f.add("prompting", prompts({"A golden retriever wearing a red hat"}));
  Harness h(f);
  h.begin_turn("two dogs");
  h.session.turns[0].status = TurnStatus::done;
  register_image(h.session, h.blobs, ImageSource::generated, testing::solid(8, 8, 1, 1, 1), "a golden retriever", 0);
  register_image(h.session, h.blobs, ImageSource::generated, testing::solid(8, 8, 2, 2, 2), "a black poodle", 0);

  const auto p = h.parse(h.begin_turn("make the dog from the first image wear a hat"));
  CHECK(p.resolved_input_ids == std::vector<std::string>{"img_0001"});
  REQUIRE(p.input_descriptions.size() == 1);
  CHECK(p.input_descriptions[0].description == "a golden retriever");
  // History is offered to the resolver in creation order.
  const Json payload = Json::parse(h.llm->calls()[0].request.messages[1].parts[0].text);
  CHECK(payload["candidates"][0]["id"] == "img_0001");
  CHECK(payload["candidates"][1]["caption"] == "a black poodle");
}

TEST_CASE("parse: two uploads blended into three posters") {
  Fixture f;
  f.add("description", {{"descriptions", Json::array({{{"id", "img_0002"}, {"description", "neon city"}},
                                                       {{"id", "img_0001"}, {"description", "ink wash"}}})}});
  f.add("resolution", {{"resolved_input_ids", {"img_0001", "img_0002"}}, {"wants_article", false}});
  f.add("counting", {{"num_outputs", 3}});
  f.add("prompting", prompts({"a", "b", "c"}));
  Harness h(f);
  const auto a = h.upload(10, 0);
  const auto b = h.upload(20, 0);
  const auto p = h.parse(h.begin_turn("blend these styles into 3 posters", {a, b}));
  CHECK(p.num_outputs == 3);
  CHECK(p.resolved_input_ids.size() == 2);
  // Captions land in the registry in input order even though the model swapped them.
  CHECK(h.session.find_image(a)->caption == "ink wash");
  CHECK(h.session.find_image(b)->caption == "neon city");
  CHECK(p.input_descriptions[0].description == "ink wash");
  // Both images were attached to the description call.
  const auto& parts = h.llm->calls()[0].request.messages[1].parts;
  CHECK(std::count_if(parts.begin(), parts.end(),
                      [](const ContentPart& c) { return c.kind == ContentPart::Kind::image; }) == 2);
}

TEST_CASE("parse: prompts carry the reference identity") {
  Fixture f;
  f.add("description", {{"descriptions", Json::array({{{"id", "img_0001"}, {"description", "a red ceramic mug"}}})}});
  f.add("resolution", {{"resolved_input_ids", {"img_0001"}}, {"wants_article", false}});
  f.add("counting", {{"num_outputs", 2}});
  f.add("prompting", prompts({"a red ceramic mug on a beach at sunset", "a red ceramic mug in the snow"}));
  Harness h(f);
  const auto id = h.upload(50, 0);
  const auto p = h.parse(h.begin_turn("show this mug in two places", {id}));
  for (const auto& t : p.target_prompts) CHECK(t.find("red ceramic mug") != std::string::npos);
  // The prompting agent saw the description it had to carry over.
  const auto calls = h.llm->calls();
  const Json payload = Json::parse(calls.back().request.messages[1].parts[0].text);
  CHECK(payload["input_descriptions"][0]["description"] == "a red ceramic mug");
}

TEST_CASE("parse: explicit numerals 1..8") {
  for (int k = 1; k <= 8; ++k) {
    Fixture f;
    f.add("counting", {{"num_outputs", k}});
    std::vector<std::string> p;
    for (int i = 0; i < k; ++i) p.push_back("scene " + std::to_string(i));
    f.add("prompting", prompts(p));
    Harness h(f);
    CHECK(h.parse(h.begin_turn("draw " + std::to_string(k) + " scenes")).num_outputs == k);
  }
}

TEST_CASE("parse: article intent") {
  SUBCASE("requested mode") {
    Fixture f;
    f.add("counting", {{"num_outputs", 1}}).add("prompting", prompts({"x"}));
    Harness h(f);
    CHECK(h.parse(h.begin_turn("a fox", {}, TurnMode::article)).wants_article);
  }
  SUBCASE("instruction cue upgrades images mode") {
    Fixture f;
    f.add("counting", {{"num_outputs", 1}}).add("prompting", prompts({"x"}));
    Harness h(f);
    CHECK(h.parse(h.begin_turn("write an illustrated article about foxes")).wants_article);
  }
  SUBCASE("resolver cannot downgrade article mode") {
    Fixture f;
    f.add("resolution", {{"resolved_input_ids", Json::array()}, {"wants_article", false}});
    f.add("counting", {{"num_outputs", 1}}).add("prompting", prompts({"x"}));
    Harness h(f);
    h.begin_turn("first");
    h.session.turns[0].status = TurnStatus::done;
    register_image(h.session, h.blobs, ImageSource::generated, testing::solid(8, 8, 1, 1, 1), "old", 0);
    CHECK(h.parse(h.begin_turn("next", {}, TurnMode::article)).wants_article);
  }
}

TEST_CASE("parse: failures") {
  SUBCASE("wrong prompt count is repaired") {
    Fixture f;
    f.add("counting", {{"num_outputs", 2}});
    f.add("prompting", prompts({"only one"}));
    f.add("prompting", prompts({"one", "two"}));
    Harness h(f);
    CHECK(h.parse(h.begin_turn("two cats")).target_prompts.size() == 2);
  }
  SUBCASE("description needs vision") {
    Fixture f;
    Harness h(f, false);
    const auto id = h.upload(1, 0);
    CHECK_THROWS_AS(h.parse(h.begin_turn("edit this", {id})), ConfigError);
  }
  SUBCASE("resolver may only name candidates") {
    Fixture f;
    f.add("description", {{"descriptions", Json::array({{{"id", "img_0001"}, {"description", "d"}}})}});
    for (int i = 0; i < 4; ++i) f.add("resolution", {{"resolved_input_ids", {"img_0099"}}, {"wants_article", false}});
    Harness h(f);
    const auto id = h.upload(1, 0);
    CHECK_THROWS_AS(h.parse(h.begin_turn("edit this", {id})), ContractError);
  }
  SUBCASE("turn must be parsing") {
    Fixture f;
    Harness h(f);
    h.begin_turn("x");
    h.session.turns[0].status = TurnStatus::pending;
    CHECK_THROWS_AS(h.parse(0), std::logic_error);
  }
}

TEST_CASE("describe_inputs") {
  Fixture f;
  f.add("description", {{"descriptions", Json::array({{{"id", "img_0003"}, {"description", "c"}},
                                                       {{"id", "img_0001"}, {"description", "a"}},
                                                       {{"id", "img_0002"}, {"description", "b"}}})}});
  Harness h(f);
  InstructionParser parser(*h.gateway);
  CHECK(parser.describe_inputs({}).empty());
  std::vector<ImageRecord> recs;
  for (int i = 0; i < 3; ++i) recs.push_back(*h.session.find_image(h.upload(static_cast<std::uint8_t>(i), 0)));
  const auto d = parser.describe_inputs(recs);
  REQUIRE(d.size() == 3);
  CHECK(d[0].id == "img_0001");
  CHECK(d[0].description == "a");
  CHECK(d[2].description == "c");
}

// ---------------------------------------------------------------------------
// Planner
// ---------------------------------------------------------------------------

TEST_CASE("classify") {
  CHECK(classify(0, 1).kind == TaskKind::T2I);
  CHECK(classify(0, 2).kind == TaskKind::T2Is);
  CHECK(classify(1, 1).kind == TaskKind::I2I);
  CHECK(classify(3, 1).kind == TaskKind::Is2I);
  CHECK(classify(1, 5).kind == TaskKind::I2Is);
  CHECK(classify(2, 3).kind == TaskKind::Is2Is);
  CHECK_THROWS_AS(classify(0, 0), InputError);
}

TEST_CASE("plan: T2Is n=6") {
  const auto plan = plan_for(0, 6);
  REQUIRE(plan.steps.size() == 3);
  CHECK(plan.steps[0].reference_slots.empty());
  CHECK(plan.steps[0].target_ordinals == std::vector<int>{0, 1, 2, 3});
  for (int s = 1; s <= 2; ++s) {
    CHECK(prior_ordinals(plan.steps[s]) == std::vector<int>{0, 1, 2});
    CHECK(plan.steps[s].target_ordinals == std::vector<int>{3 + s});
    CHECK(plan.steps[s].layout.panel_count == 4);
  }
  CHECK(check_plan(plan, {}, 6).empty());
}

TEST_CASE("plan: Is2Is m=2 n=3") {
  const auto plan = plan_for(2, 3);
  REQUIRE(plan.steps.size() == 3);
  for (const auto& s : plan.steps) {
    CHECK(registry_ids(s) == std::vector<std::string>{"img_0001", "img_0002"});
    CHECK(prior_ordinals(s).empty());
    CHECK(step_dependencies(plan, s).empty());
    CHECK(s.target_ordinals.size() == 1);
  }
}

TEST_CASE("plan: I2Is m=1 n=3") {
  const auto plan = plan_for(1, 3);
  REQUIRE(plan.steps.size() == 3);
  CHECK(prior_ordinals(plan.steps[0]).empty());
  CHECK(prior_ordinals(plan.steps[1]) == std::vector<int>{0});
  CHECK(prior_ordinals(plan.steps[2]) == std::vector<int>{0, 1});
  for (const auto& s : plan.steps) CHECK(registry_ids(s) == std::vector<std::string>{"img_0001"});
  CHECK(plan.steps[2].layout.panel_count == 4);
}

TEST_CASE("plan: panel prompts and seeds") {
  const auto plan = plan_for(2, 1);
  CHECK(plan.steps[0].panel_prompt == "A set of 3 images. [IMAGE1] input 1. [IMAGE2] input 2. [IMAGE3] target 1.");
  CHECK(plan_for(2, 1) == plan);
  StrategyPlanner planner(nullptr);
  const auto other = planner.make_plan(classify(2, 1), parsed_with(2, 1), PlanContext{"s", 1, 0});
  CHECK(other.steps[0].seed != plan.steps[0].seed);
  CHECK_THROWS_AS(planner.make_plan(classify(1, 1), parsed_with(2, 1), PlanContext{}), InputError);
}

TEST_CASE("panel prompt template") {
  CHECK(panel_prompt_template({"a cat"}) == "A set of 1 image. [IMAGE1] a cat.");
  CHECK(panel_prompt_template({"a red mug.", "a [IMAGE1] tag", "target\nline"}) ==
        "A set of 3 images. [IMAGE1] a red mug. [IMAGE2] a (image 1) tag. [IMAGE3] target line.");
  CHECK_FALSE(check_panel_markers("[IMAGE1] a [IMAGE2] b", 2));
  CHECK(check_panel_markers("[IMAGE2] b [IMAGE1] a", 2));
  CHECK(check_panel_markers("[IMAGE1] a", 2));
  CHECK(check_panel_markers("[IMAGE1] a [IMAGE1] a", 1));
  CHECK(check_panel_markers("[IMAGE1] a [IMAGE3] c", 1));
}

TEST_CASE("select_references") {
  ParsedInstruction p = parsed_with(5, 1);
  const std::vector<std::string> five = p.resolved_input_ids;
  const TaskShape shape = classify(5, 1);

  SUBCASE("under budget keeps all") {
    StrategyPlanner planner(nullptr);
    std::vector<std::string> w;
    const std::vector<std::string> two{"img_0002", "img_0001"};
    CHECK(planner.select_references(p, shape, two, 3, &w) == two);
    CHECK(w.empty());
  }
  SUBCASE("llm ranking is kept") {
    Fixture f;
    f.add("referencing", {{"reference_ids", {"img_0004", "img_0001", "img_0005"}}});
    Harness h(f);
    StrategyPlanner planner(h.gateway.get());
    std::vector<std::string> w;
    CHECK(planner.select_references(p, shape, five, 3, &w) ==
          std::vector<std::string>{"img_0004", "img_0001", "img_0005"});
    CHECK(w.empty());
  }
  SUBCASE("out-of-candidate id triggers repair") {
    Fixture f;
    f.add("referencing", {{"reference_ids", {"img_0009", "img_0001", "img_0005"}}});
    f.add("referencing", {{"reference_ids", {"img_0002", "img_0001", "img_0005"}}});
    Harness h(f);
    StrategyPlanner planner(h.gateway.get());
    CHECK(planner.select_references(p, shape, five, 3, nullptr).front() == "img_0002");
    CHECK(h.llm->calls_for("referencing") == 2);
  }
  SUBCASE("contract failure falls back to registry order") {
    Fixture f;
    for (int i = 0; i < 4; ++i) f.add_raw("referencing", "no idea");
    Harness h(f);
    StrategyPlanner planner(h.gateway.get());
    std::vector<std::string> w;
    const std::vector<std::string> shuffled{"img_0005", "img_0003", "img_0001", "img_0004", "img_0002"};
    CHECK(planner.select_references(p, shape, shuffled, 3, &w) ==
          std::vector<std::string>{"img_0001", "img_0002", "img_0003"});
    CHECK(w.size() == 1);
  }
  SUBCASE("no agent: fallback with a plan warning") {
    const auto plan = plan_for(5, 1);
    CHECK(registry_ids(plan.steps[0]) == std::vector<std::string>{"img_0001", "img_0002", "img_0003"});
    CHECK(plan.warnings.size() == 1);
  }
}

TEST_CASE("panelizing rewrite") {
  PlannerConfig config;
  config.rewrite_panel_prompts = true;
  const PanelLayout layout = layout_for(2, 64LL * 64 * 2);

  SUBCASE("valid rewrite is used") {
    Fixture f;
    f.add("panelizing", {{"panel_prompt", "Two panels: [IMAGE1] a mug, then [IMAGE2] the mug at sea."}});
    Harness h(f);
    StrategyPlanner planner(h.gateway.get(), config);
    CHECK(planner.build_panel_prompt({"a mug"}, {"the mug at sea"}, layout, nullptr) ==
          "Two panels: [IMAGE1] a mug, then [IMAGE2] the mug at sea.");
  }
  SUBCASE("dropped marker falls back to the template") {
    Fixture f;
    f.add("panelizing", {{"panel_prompt", "[IMAGE1] a mug at sea"}});
    f.add("panelizing", {{"panel_prompt", "[IMAGE2] [IMAGE1] a mug at sea"}});
    Harness h(f);
    StrategyPlanner planner(h.gateway.get(), config);
    std::vector<std::string> w;
    CHECK(planner.build_panel_prompt({"a mug"}, {"the mug at sea"}, layout, &w) ==
          "A set of 2 images. [IMAGE1] a mug. [IMAGE2] the mug at sea.");
    CHECK(w.size() == 1);
  }
}

TEST_CASE("check_plan catches tampering") {
  auto plan = plan_for(0, 6);
  CHECK(check_plan(plan, {}, 6).empty());
  SUBCASE("missing ordinal") {
    plan.steps.pop_back();
    CHECK_FALSE(check_plan(plan, {}, 6).empty());
  }
  SUBCASE("forward reference") {
    plan.steps[1].reference_slots[0] = ImageSlot::prior(5);
    CHECK_FALSE(check_plan(plan, {}, 6).empty());
  }
  SUBCASE("panel cap") {
    plan.steps[1].reference_slots.push_back(ImageSlot::prior(3));
    CHECK_FALSE(check_plan(plan, {}, 6).empty());
  }
  SUBCASE("invalid config") {
    PlannerConfig c;
    c.t2is_condition_count = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = PlannerConfig{};
    c.max_panels = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
}

// ---------------------------------------------------------------------------
// Markdown agent
// ---------------------------------------------------------------------------

TEST_CASE("article composition") {
  SUBCASE("n=1") {
    Fixture f;
    f.add_raw("markdown", "# Cat\n\nA cat.\n\n{{IMAGE_1}}\n");
    Harness h(f);
    MarkdownAgent agent(h.gateway.get());
    const auto doc = agent.compose_article("draw a cat", parsed_with(0, 1), outputs(1), 0);
    CHECK(image_blocks(doc) == 1);
    CHECK(doc.title == "Cat");
    CHECK(doc.warnings.empty());
  }
  SUBCASE("n=4 picture book keeps order with prose between") {
    Fixture f;
    f.add_raw("markdown", article_with(4));
    Harness h(f);
    MarkdownAgent agent(h.gateway.get());
    const auto outs = outputs(4);
    const auto doc = agent.compose_article("a picture book", parsed_with(0, 4), outs, 0);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < doc.blocks.size(); ++i) {
      if (doc.blocks[i].kind != ArticleBlock::Kind::image) continue;
      ids.push_back(doc.blocks[i].image_id);
      if (i + 1 < doc.blocks.size()) CHECK(doc.blocks[i + 1].kind == ArticleBlock::Kind::prose);
    }
    CHECK(ids == std::vector<std::string>{outs[0].id, outs[1].id, outs[2].id, outs[3].id});
  }
  SUBCASE("missing placeholder: repair succeeds") {
    Fixture f;
    f.add_raw("markdown", article_with(4, 3));
    f.add_raw("markdown", article_with(4));
    Harness h(f);
    MarkdownAgent agent(h.gateway.get());
    const auto doc = agent.compose_article("book", parsed_with(0, 4), outputs(4), 0);
    CHECK(doc.warnings.empty());
    CHECK(h.llm->calls_for("markdown") == 2);
  }
  SUBCASE("missing placeholder twice: fallback layout") {
    Fixture f;
    f.add_raw("markdown", article_with(4, 3));
    f.add_raw("markdown", article_with(4, 3));
    Harness h(f);
    MarkdownAgent agent(h.gateway.get());
    const auto outs = outputs(4);
    const auto doc = agent.compose_article("book", parsed_with(0, 4), outs, 2);
    CHECK(h.llm->calls_for("markdown") == 2);
    CHECK(doc.warnings.size() == 1);
    CHECK(image_blocks(doc) == 4);
    CHECK(doc.title == "book");
    CHECK(doc.source_turn == 2);
    CHECK(doc.blocks[0].text == outs[0].caption);
  }
}

TEST_CASE("article text validation") {
  CHECK_FALSE(check_article_text("{{IMAGE_1}} x {{IMAGE_2}}", 2));
  CHECK(check_article_text("{{IMAGE_2}} x {{IMAGE_1}}", 2));
  CHECK(check_article_text("{{IMAGE_1}} {{IMAGE_1}}", 1));
  CHECK(check_article_text("{{IMAGE_1}}", 2));
  CHECK(check_article_text("{{IMAGE_1}} ![x](y.png)", 1));
  CHECK(check_article_text("{{IMAGE_1}}\n```\ncode\n```", 1));
  CHECK(check_article_text("{{IMAGE_1}} <img src=x>", 1));
}

TEST_CASE("render_markdown") {
  auto resolver = [](const std::string& id) -> std::optional<std::string> {
    return "/api/images/s1/" + id;
  };
  ArticleDocument doc;
  ArticleBlock img;
  img.kind = ArticleBlock::Kind::image;
  img.image_id = "img_0001";
  img.alt = "a [weird] *alt*";
  doc.blocks.push_back(img);

  SUBCASE("image only") {
    CHECK(render_markdown(doc, resolver) == "![a \\[weird\\] \\*alt\\*](/api/images/s1/img_0001)\n");
  }
  SUBCASE("title is the first line") {
    doc.title = "Foxes";
    const std::string md = render_markdown(doc, resolver);
    CHECK(md.rfind("# Foxes\n", 0) == 0);
  }
  SUBCASE("unresolvable id") {
    CHECK_THROWS_AS(render_markdown(doc, [](const std::string&) { return std::optional<std::string>(); }),
                    RenderError);
  }
  SUBCASE("deterministic") { CHECK(render_markdown(doc, resolver) == render_markdown(doc, resolver)); }
}
