#pragma once

// Batch harness over JSON-lines task files. One line per task:
//
//   {"task_id": "t2is-01", "task_type": "T2Is", "instruction": "...",
//    "input_paths": ["a.png"], "expected_outputs": 6}
//
// Relative input paths resolve against the task file's directory.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chatdit/backend.hpp"
#include "chatdit/llm.hpp"
#include "chatdit/model.hpp"
#include "chatdit/transport.hpp"

namespace chatdit {

struct TaskDescriptor {
  std::string task_id;
  TaskKind task_type = TaskKind::T2I;
  std::string instruction;
  std::vector<std::string> input_paths;
  int expected_outputs = 1;
};

/// Parses one line. Throws InputError naming the offending field.
TaskDescriptor parse_task_line(const std::string& line);

/// Error text when (|input_paths|, expected_outputs) does not classify as
/// task_type.
std::optional<std::string> check_descriptor(const TaskDescriptor& task);

/// Step count the decision table prescribes for a shape.
int expected_step_count(const TaskShape& shape, const PlannerConfig& config);

/// Scripted replies that make the pipeline follow the descriptor exactly:
/// every input is resolved, n comes from expected_outputs.
Json scripted_fixture_for(const TaskDescriptor& task);

enum class BenchMode { plan_only, mock, live };
std::string to_string(BenchMode mode);

struct BenchOptions {
  BenchMode mode = BenchMode::mock;
  int jobs = 4;
  std::uint64_t base_seed = 0;
  PlannerConfig planner;
  /// Every HTTP client the harness builds goes through this transport. When
  /// null a RecordingTransport is created: offline modes wrap nothing, live
  /// mode wraps a real client.
  std::shared_ptr<RecordingTransport> transport;
  /// Live mode only; default to the CHATDIT_* environment.
  std::optional<RemoteLlmConfig> llm;
  std::optional<RemoteBackendConfig> backend;
};

struct TaskResult {
  std::string task_id;
  std::string task_type;  // "invalid" for unparseable lines
  int line = 0;           // 1-based
  bool plan_legal = false;
  int steps = 0;
  int max_panels_used = 0;
  int images_generated = 0;
  std::vector<std::string> violations;
};

struct BenchReport {
  BenchMode mode = BenchMode::mock;
  std::vector<TaskResult> tasks;  // file order
  std::map<std::string, int> aggregate;
  int legal = 0;
  std::size_t network_requests = 0;

  int total() const noexcept { return static_cast<int>(tasks.size()); }
};

Json to_json(const BenchReport& report);
void to_json(Json& j, const TaskResult& r);

/// Runs every non-blank line. Lines that fail to parse or tasks that fail
/// in the pipeline are reported, never thrown.
BenchReport run_bench(const std::vector<std::string>& lines, const std::filesystem::path& base_dir,
                      const BenchOptions& options);

/// Reads the file (throws InputError when unreadable) and runs it.
BenchReport run_bench_file(const std::filesystem::path& tasks_file, const BenchOptions& options);

}  // namespace chatdit
