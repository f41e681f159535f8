// chatdit: serve the HTTP API, run one turn, or replay a bench task file.
//
// Exit codes: 0 ok, 1 pipeline failure, 2 usage error.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chatdit/bench.hpp"
#include "chatdit/errors.hpp"
#include "chatdit/orchestrator.hpp"
#include "chatdit/server.hpp"
#include "chatdit/session.hpp"

namespace fs = std::filesystem;
using namespace chatdit;

namespace {

constexpr int kOk = 0;
constexpr int kPipelineFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BackendFlags {
  bool mock = false;
  bool live = false;
  std::string fixture;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& f) {
  auto* mock = cmd->add_flag("--mock", f.mock, "Offline LLM stand-in and mock diffusion backend");
  auto* live = cmd->add_flag("--live", f.live, "Use CHATDIT_LLM_* and CHATDIT_BACKEND_URL");
  mock->excludes(live);
  cmd->add_option("--fixture", f.fixture, "Scripted LLM replies (JSON object \"agent/ordinal\" -> text)")
      ->check(CLI::ExistingFile);
}

/// Resolves flags into backends. `needs_backend` is false for plan-only.
void configure(PipelineServices& services, const BackendFlags& f, bool needs_backend,
               std::shared_ptr<const BlobStore> blobs) {
  const auto llm_env = RemoteLlmConfig::from_env();
  const auto backend_env = RemoteBackendConfig::from_env();
  const bool live = f.live || (!f.mock && f.fixture.empty() && llm_env);
  std::shared_ptr<LlmBackend> llm;
  if (!f.fixture.empty()) {
    llm = ScriptedLlm::from_file(f.fixture);
  } else if (live) {
    if (!llm_env) throw UsageError("--live needs CHATDIT_LLM_URL");
    llm = std::make_shared<HttpLlmBackend>(*llm_env, std::make_shared<HttplibTransport>(), blobs);
  } else if (f.mock) {
    llm = std::make_shared<OfflineLlm>();
  } else {
    throw UsageError("no LLM configured: set CHATDIT_LLM_URL or pass --mock");
  }
  services.gateway = std::make_shared<LlmGateway>(llm);
  if (!needs_backend) return;
  if (live && !f.mock) {
    if (!backend_env) throw UsageError("no diffusion backend configured: set CHATDIT_BACKEND_URL or pass --mock");
    services.backend = std::make_shared<HttpDiffusionBackend>(*backend_env, std::make_shared<HttplibTransport>());
  } else if (f.mock || !f.fixture.empty()) {
    if (backend_env && !f.mock) {
      services.backend = std::make_shared<HttpDiffusionBackend>(*backend_env, std::make_shared<HttplibTransport>());
    } else {
      services.backend = std::make_shared<MockDiffusionBackend>();
    }
  }
}

std::string seed_session_id(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%llx", static_cast<unsigned long long>(seed));
  return buf;
}

void write_json(const fs::path& path, const Json& value) { atomic_write_file(path, value.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string instruction;
  std::vector<std::string> inputs;
  std::string out_dir = "chatdit-out";
  std::string data_dir;
  bool plan_only = false;
  bool article = false;
  std::uint64_t seed = 0;
  BackendFlags backend;
};

int cmd_run(const RunArgs& a) {
  for (const auto& p : a.inputs) {
    if (!fs::is_regular_file(p)) throw UsageError("input file not found: " + p);
  }
  std::shared_ptr<SessionRepository> repo;
  std::shared_ptr<BlobStore> blobs;
  if (!a.data_dir.empty()) {
    repo = std::make_shared<SessionRepository>(a.data_dir);
    blobs = repo->blobs();
  } else {
    blobs = std::make_shared<MemoryBlobStore>();
  }

  PipelineServices services;
  services.base_seed = a.seed;
  services.plan_only = a.plan_only;
  services.toolkit = ToolkitConfig::from_env();
  configure(services, a.backend, !a.plan_only, blobs);

  Session session = new_session(seed_session_id(a.seed));
  if (repo && repo->exists(session.id)) session = repo->restore(session.id);
  const int turn_index = static_cast<int>(session.turns.size());
  std::vector<std::string> ids;
  for (const auto& p : a.inputs) {
    const auto text = read_file(p);
    if (!text) throw UsageError("input file not readable: " + p);
    const Bytes bytes(text->begin(), text->end());
    try {
      ids.push_back(register_image(session, *blobs, ImageSource::uploaded, bytes, "", turn_index).id);
    } catch (const InputError& e) {
      throw UsageError(p + ": " + e.what());
    }
  }
  append_turn(session, a.instruction, ids, a.article ? TurnMode::article : TurnMode::images);

  // Articles written next to the PNGs link them by file name.
  const Session* live = &session;
  services.image_url = [live, turn_index](const std::string&, const std::string& id) {
    const auto& outs = live->turns.at(static_cast<std::size_t>(turn_index)).output_image_ids;
    for (std::size_t k = 0; k < outs.size(); ++k) {
      if (outs[k] == id) {
        char name[32];
        std::snprintf(name, sizeof name, "out_%03zu.png", k);
        return std::string(name);
      }
    }
    return id + ".png";
  };

  TurnRunner runner(services, *blobs);
  if (repo) runner.checkpoint = [&](const Session& s) { repo->persist(s); };
  TurnEventLog log(turn_index);
  runner.run(session, turn_index, log);
  const Turn& turn = session.turns.at(static_cast<std::size_t>(turn_index));

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  if (turn.plan) write_json(out / "plan.json", Json(*turn.plan));
  if (turn.status != TurnStatus::done) {
    std::cerr << "chatdit: turn failed: " << turn.failure_reason.value_or("unknown error") << "\n";
    return kPipelineFailure;
  }
  if (!a.plan_only) {
    write_json(out / "parsed.json", Json(*turn.parsed));
    for (std::size_t k = 0; k < turn.output_image_ids.size(); ++k) {
      const ImageRecord* rec = session.find_image(turn.output_image_ids[k]);
      const auto bytes = blobs->get(rec->storage_key);
      char name[32];
      std::snprintf(name, sizeof name, "out_%03zu.png", k);
      atomic_write_file(out / name, std::string(bytes->begin(), bytes->end()));
    }
    for (const auto& e : turn.events) {
      if (e.kind == EventKind::article_ready) {
        atomic_write_file(out / "article.md", e.payload.at("markdown").get<std::string>());
      }
    }
  }

  const auto& plan = *turn.plan;
  std::cout << to_string(plan.shape.kind) << ": " << turn.parsed->num_outputs << " output(s), "
            << plan.steps.size() << " step(s)";
  if (!a.plan_only) std::cout << ", " << turn.output_image_ids.size() << " image(s) written";
  std::cout << " -> " << out.string() << "\n";
  for (const auto& w : plan.warnings) std::cout << "warning: " << w << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string tasks;
  std::string report;
  bool plan_only = false;
  bool mock = false;
  bool live = false;
  int jobs = 4;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a) {
  BenchOptions options;
  options.mode = a.plan_only ? BenchMode::plan_only : a.live ? BenchMode::live : BenchMode::mock;
  options.jobs = a.jobs;
  options.base_seed = a.seed;
  const BenchReport report = run_bench_file(a.tasks, options);
  const Json j = to_json(report);
  if (a.report.empty() || a.report == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(a.report, j);
  }
  std::cerr << report.legal << "/" << report.total() << " tasks legal (" << to_string(report.mode)
            << ")\n";
  return report.legal == report.total() ? kOk : kPipelineFailure;
}

// ---------------------------------------------------------------------------

ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeArgs {
  std::string data_dir;
  std::string bind;
  std::uint64_t seed = 0;
  BackendFlags backend;
};

int cmd_serve(const ServeArgs& a) {
  std::string data_dir = a.data_dir;
  if (data_dir.empty()) {
    const char* env = std::getenv("CHATDIT_DATA_DIR");
    data_dir = env && *env ? env : "chatdit-data";
  }
  auto repo = std::make_shared<SessionRepository>(data_dir);
  PipelineServices services;
  services.base_seed = a.seed;
  services.toolkit = ToolkitConfig::from_env();
  configure(services, a.backend, true, repo->blobs());
  if (!services.backend) throw UsageError("no diffusion backend configured");

  ServerConfig config = ServerConfig::from_env();
  if (!a.bind.empty()) {
    setenv("CHATDIT_BIND_ADDR", a.bind.c_str(), 1);
    config = ServerConfig::from_env();
  }
  SessionManager manager(repo, services);
  ApiServer server(manager, config);
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "chatdit: serving " << data_dir << " on http://" << config.host << ":" << port << "\n";
  server.serve();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ChatDiT-style multi-agent image generation service"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Execute one turn and write its outputs");
  run_cmd->add_option("instruction", run.instruction, "Instruction text")->required();
  run_cmd->add_option("-i,--input", run.inputs, "Input image (PNG or JPEG); repeatable");
  run_cmd->add_option("-o,--out", run.out_dir, "Output directory")->capture_default_str();
  run_cmd->add_option("--data-dir", run.data_dir, "Persist the session under this directory");
  run_cmd->add_flag("--plan-only", run.plan_only, "Stop after planning; write plan.json only");
  run_cmd->add_flag("--article", run.article, "Also compose article.md");
  run_cmd->add_option("--seed", run.seed, "Base seed")->capture_default_str();
  add_backend_flags(run_cmd, run.backend);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Replay a JSON-lines task file");
  bench_cmd->add_option("tasks", bench.tasks, "Task file")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("-r,--report", bench.report, "Report path ('-' for stdout)");
  auto* b_plan = bench_cmd->add_flag("--plan-only", bench.plan_only, "Parse and plan only");
  auto* b_mock = bench_cmd->add_flag("--mock", bench.mock, "Execute with the mock backend (default)");
  auto* b_live = bench_cmd->add_flag("--live", bench.live, "Use the configured remote backends");
  b_plan->excludes(b_live);
  b_mock->excludes(b_live);
  b_plan->excludes(b_mock);
  bench_cmd->add_option("--jobs", bench.jobs, "Concurrent tasks")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Base seed")->capture_default_str();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--data-dir", serve.data_dir, "Data directory (default $CHATDIT_DATA_DIR)");
  serve_cmd->add_option("--bind", serve.bind, "host:port (default $CHATDIT_BIND_ADDR or 127.0.0.1:8080)");
  serve_cmd->add_option("--seed", serve.seed, "Base seed");
  add_backend_flags(serve_cmd, serve.backend);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*bench_cmd) return cmd_bench(bench);
    if (*serve_cmd) return cmd_serve(serve);
  } catch (const UsageError& e) {
    std::cerr << "chatdit: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "chatdit: configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const InputError& e) {
    std::cerr << "chatdit: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "chatdit: " << e.what() << "\n";
    return kPipelineFailure;
  }
  return kUsage;
}
