#include "chatdit/bench.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "chatdit/errors.hpp"
#include "chatdit/orchestrator.hpp"
#include "chatdit/planner.hpp"
#include "chatdit/session.hpp"

namespace fs = std::filesystem;

namespace chatdit {
namespace {

std::string sanitize_id(const std::string& id) {
  std::string out = "bench_";
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

std::string input_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "img_%04d", i + 1);
  return buf;
}

struct TaskEnv {
  std::shared_ptr<LlmBackend> llm;
  std::shared_ptr<DiffusionBackend> backend;
};

TaskEnv make_env(const TaskDescriptor& task, const BenchOptions& options,
                 const std::shared_ptr<RecordingTransport>& transport,
                 const std::shared_ptr<BlobStore>& blobs) {
  TaskEnv env;
  if (options.mode == BenchMode::live) {
    auto llm = options.llm ? options.llm : RemoteLlmConfig::from_env();
    auto backend = options.backend ? options.backend : RemoteBackendConfig::from_env();
    if (!llm) throw ConfigError("live mode needs CHATDIT_LLM_URL");
    if (!backend) throw ConfigError("live mode needs CHATDIT_BACKEND_URL");
    env.llm = std::make_shared<HttpLlmBackend>(*llm, transport, blobs);
    env.backend = std::make_shared<HttpDiffusionBackend>(*backend, transport);
    return env;
  }
  env.llm = ScriptedLlm::from_json(scripted_fixture_for(task));
  if (options.mode == BenchMode::mock) env.backend = std::make_shared<MockDiffusionBackend>();
  return env;
}

TaskResult run_task(const std::string& line, int line_number, const fs::path& base_dir,
                    const BenchOptions& options, const std::shared_ptr<RecordingTransport>& transport) {
  TaskResult result;
  result.line = line_number;
  result.task_type = "invalid";
  result.task_id = "line-" + std::to_string(line_number);
  TaskDescriptor task;
  try {
    task = parse_task_line(line);
  } catch (const std::exception& e) {
    result.violations.push_back(std::string("unparseable task line: ") + e.what());
    return result;
  }
  result.task_id = task.task_id;
  result.task_type = to_string(task.task_type);
  if (auto problem = check_descriptor(task)) {
    result.violations.push_back(*problem);
    return result;
  }

  try {
    auto blobs = std::make_shared<MemoryBlobStore>();
    TaskEnv env = make_env(task, options, transport, blobs);
    Session session = new_session(sanitize_id(task.task_id));
    std::vector<std::string> uploaded;
    for (const auto& p : task.input_paths) {
      const fs::path path = fs::path(p).is_absolute() ? fs::path(p) : base_dir / p;
      const auto bytes = read_file(path);
      if (!bytes) throw InputError("cannot read input " + path.string());
      const Bytes data(bytes->begin(), bytes->end());
      uploaded.push_back(register_image(session, *blobs, ImageSource::uploaded, data, "", 0).id);
    }
    const int turn = append_turn(session, task.instruction, uploaded, TurnMode::images);

    PipelineServices services;
    services.gateway = std::make_shared<LlmGateway>(env.llm);
    services.backend = env.backend;
    services.planner = options.planner;
    services.base_seed = options.base_seed;
    services.plan_only = options.mode == BenchMode::plan_only;
    TurnEventLog log(turn);
    TurnRunner runner(services, *blobs);
    runner.run(session, turn, log);

    const Turn& t = session.turns.at(static_cast<std::size_t>(turn));
    if (t.status != TurnStatus::done) {
      result.violations.push_back("pipeline failed: " + t.failure_reason.value_or("unknown"));
      return result;
    }
    const GenerationPlan& plan = *t.plan;
    result.steps = static_cast<int>(plan.steps.size());
    for (const auto& s : plan.steps) result.max_panels_used = std::max(result.max_panels_used, s.layout.panel_count);
    result.images_generated = static_cast<int>(t.output_image_ids.size());

    result.violations = check_plan(plan, t.parsed->resolved_input_ids, t.parsed->num_outputs);
    if (plan.shape.kind != task.task_type) {
      result.violations.push_back("planned as " + to_string(plan.shape.kind) + ", task is " +
                                  to_string(task.task_type));
    }
    if (t.parsed->num_outputs != task.expected_outputs) {
      result.violations.push_back("parsed " + std::to_string(t.parsed->num_outputs) + " outputs, expected " +
                                  std::to_string(task.expected_outputs));
    }
    const int want_steps = expected_step_count(plan.shape, options.planner);
    if (result.steps != want_steps) {
      result.violations.push_back(std::to_string(result.steps) + " steps, decision table says " +
                                  std::to_string(want_steps));
    }
    if (options.mode != BenchMode::plan_only && result.images_generated != task.expected_outputs) {
      result.violations.push_back(std::to_string(result.images_generated) + " images generated");
    }
    result.plan_legal = result.violations.empty();
  } catch (const std::exception& e) {
    result.violations.push_back(std::string("task failed: ") + e.what());
  }
  return result;
}

}  // namespace

TaskDescriptor parse_task_line(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("not JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("task line is not a JSON object");
  TaskDescriptor t;
  auto field = [&](const char* name) -> const Json& {
    if (!j.contains(name)) throw InputError(std::string("missing field ") + name);
    return j.at(name);
  };
  try {
    t.task_id = field("task_id").get<std::string>();
    t.task_type = task_kind_from_string(field("task_type").get<std::string>());
    t.instruction = field("instruction").get<std::string>();
    t.input_paths = j.value("input_paths", std::vector<std::string>{});
    const Json& n = field("expected_outputs");
    if (!n.is_number_integer()) throw InputError("expected_outputs must be an integer");
    t.expected_outputs = n.get<int>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("bad field type: ") + e.what());
  }
  if (t.task_id.empty()) throw InputError("task_id is empty");
  if (t.instruction.empty()) throw InputError("instruction is empty");
  return t;
}

std::optional<std::string> check_descriptor(const TaskDescriptor& task) {
  if (task.expected_outputs < 1) return "expected_outputs must be at least 1";
  const TaskShape shape = classify(static_cast<int>(task.input_paths.size()), task.expected_outputs);
  if (shape.kind != task.task_type) {
    return std::to_string(task.input_paths.size()) + " inputs and " +
           std::to_string(task.expected_outputs) + " outputs make " + to_string(shape.kind) +
           ", not " + to_string(task.task_type);
  }
  return std::nullopt;
}

int expected_step_count(const TaskShape& shape, const PlannerConfig& config) {
  switch (shape.kind) {
    case TaskKind::T2I:
    case TaskKind::I2I:
    case TaskKind::Is2I:
      return 1;
    case TaskKind::T2Is:
      return 1 + std::max(0, shape.n - config.max_panels);
    case TaskKind::Is2Is:
    case TaskKind::I2Is:
      return shape.n;
  }
  return 0;
}

Json scripted_fixture_for(const TaskDescriptor& task) {
  const int m = static_cast<int>(task.input_paths.size());
  const int n = task.expected_outputs;
  std::vector<std::string> ids;
  for (int i = 0; i < m; ++i) ids.push_back(input_id(i));

  Json fixture = Json::object();
  if (m > 0) {
    Json descriptions = Json::array();
    for (int i = 0; i < m; ++i) {
      descriptions.push_back({{"id", ids[static_cast<std::size_t>(i)]},
                              {"description", "input image " + std::to_string(i + 1) + " of task " + task.task_id}});
    }
    fixture["description/0"] = Json{{"descriptions", descriptions}}.dump();
    fixture["resolution/0"] = Json{{"resolved_input_ids", ids}, {"wants_article", false}}.dump();
  }
  fixture["counting/0"] = Json{{"num_outputs", n}}.dump();
  Json prompts = Json::array();
  for (int k = 0; k < n; ++k) {
    prompts.push_back(task.instruction + " (image " + std::to_string(k + 1) + " of " + std::to_string(n) + ")");
  }
  fixture["prompting/0"] = Json{{"target_prompts", prompts}}.dump();
  // Referencing runs once per plan, only when the inputs exceed the budget.
  if (m > 3) {
    fixture["referencing/0"] =
        Json{{"reference_ids", std::vector<std::string>(ids.begin(), ids.begin() + 3)}}.dump();
  }
  return fixture;
}

std::string to_string(BenchMode mode) {
  switch (mode) {
    case BenchMode::plan_only:
      return "plan-only";
    case BenchMode::mock:
      return "mock";
    case BenchMode::live:
      return "live";
  }
  return "?";
}

void to_json(Json& j, const TaskResult& r) {
  j = Json{{"task_id", r.task_id},
           {"task_type", r.task_type},
           {"line", r.line},
           {"plan_legal", r.plan_legal},
           {"steps", r.steps},
           {"max_panels_used", r.max_panels_used},
           {"images_generated", r.images_generated},
           {"violations", r.violations}};
}

Json to_json(const BenchReport& report) {
  return Json{{"mode", to_string(report.mode)},
              {"total", report.total()},
              {"legal", report.legal},
              {"aggregate", report.aggregate},
              {"network_requests", report.network_requests},
              {"tasks", report.tasks}};
}

BenchReport run_bench(const std::vector<std::string>& lines, const fs::path& base_dir,
                      const BenchOptions& options) {
  auto transport = options.transport;
  if (!transport) {
    transport = std::make_shared<RecordingTransport>(
        options.mode == BenchMode::live ? std::make_shared<HttplibTransport>() : nullptr);
  }

  std::vector<std::pair<int, const std::string*>> work;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r\n") != std::string::npos) {
      work.emplace_back(static_cast<int>(i + 1), &lines[i]);
    }
  }

  BenchReport report;
  report.mode = options.mode;
  report.tasks.resize(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      report.tasks[i] = run_task(*work[i].second, work[i].first, base_dir, options, transport);
    }
  };
  const int jobs = std::clamp(options.jobs, 1, std::max(1, static_cast<int>(work.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& t : report.tasks) {
    ++report.aggregate[t.task_type];
    if (t.plan_legal) ++report.legal;
  }
  report.network_requests = transport->request_count();
  return report;
}

BenchReport run_bench_file(const fs::path& tasks_file, const BenchOptions& options) {
  std::ifstream in(tasks_file);
  if (!in) throw InputError("cannot read task file " + tasks_file.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return run_bench(lines, tasks_file.parent_path(), options);
}

}  // namespace chatdit
