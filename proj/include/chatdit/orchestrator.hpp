#pragma once

// Turn orchestration: parse -> plan -> execute -> (article), with progress
// events and a checkpoint after every stage.

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "chatdit/article.hpp"
#include "chatdit/backend.hpp"
#include "chatdit/events.hpp"
#include "chatdit/instruction_parsing.hpp"
#include "chatdit/llm.hpp"
#include "chatdit/persistence.hpp"
#include "chatdit/planner.hpp"
#include "chatdit/toolkit.hpp"

namespace chatdit {

struct PipelineServices {
  std::shared_ptr<LlmGateway> gateway;
  std::shared_ptr<DiffusionBackend> backend;  // unused when plan_only
  PlannerConfig planner;
  ToolkitConfig toolkit;
  ParserOptions parser;
  std::uint64_t base_seed = 0;
  bool plan_only = false;
  /// Maps (session id, image id) to the URL written into articles.
  std::function<std::string(const std::string&, const std::string&)> image_url;
};

/// Default article URL: `/api/images/<session>/<image>`.
std::string default_image_url(const std::string& session_id, const std::string& image_id);

class TurnRunner {
 public:
  TurnRunner(const PipelineServices& services, BlobStore& blobs);

  /// Called with the session after each stage (and at the end).
  std::function<void(const Session&)> checkpoint;

  /// Drives `session.turns[turn_index]` (pending) to done or failed.
  /// Pipeline errors are recorded on the turn and as a turn_failed event;
  /// only checkpoint failures propagate.
  TurnStatus run(Session& session, int turn_index, TurnEventLog& log);

 private:
  const PipelineServices& services_;
  BlobStore& blobs_;
};

/// Appends a pending turn; validates text and image ids (InputError).
int append_turn(Session& session, std::string text, std::vector<std::string> image_ids,
                TurnMode mode);

/// Thread-safe owner of live sessions. Each session runs at most one turn at
/// a time, on a worker thread; state is persisted after every stage.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<SessionRepository> repo, PipelineServices services);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  Session create_session();
  /// Copy of the current state. Throws NotFoundError.
  Session snapshot(const std::string& session_id);

  /// Throws BusyError while a turn runs, InputError for undecodable bytes.
  ImageRecord upload_image(const std::string& session_id, std::span<const std::uint8_t> bytes);

  /// Starts a turn asynchronously and returns its index. Throws BusyError,
  /// InputError or NotFoundError.
  int submit_turn(const std::string& session_id, std::string text,
                  std::vector<std::string> image_ids, TurnMode mode);

  /// Event log for a turn, live or replayed from disk. Throws NotFoundError.
  std::shared_ptr<TurnEventLog> events(const std::string& session_id, int turn);

  /// PNG bytes of a session image. Throws NotFoundError.
  Bytes image_bytes(const std::string& session_id, const std::string& image_id);
  /// PNG bytes by storage key. Throws NotFoundError.
  Bytes blob_bytes(const std::string& storage_key);

  /// Blocks until the session has no active turn.
  void wait_idle(const std::string& session_id);

 private:
  struct Slot {
    std::mutex mu;
    std::condition_variable idle;
    Session session;
    bool busy = false;
    int active_turn = -1;
    std::thread worker;
  };

  std::shared_ptr<Slot> slot(const std::string& session_id);
  void publish(Slot& slot, const Session& session);

  std::shared_ptr<SessionRepository> repo_;
  PipelineServices services_;
  EventHub hub_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace chatdit
