#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chatdit/model.hpp"

namespace chatdit {

/// Append-only event log for one turn. Sequence numbers are gapless from 0;
/// the log closes after turn_done or turn_failed. Any number of readers may
/// wait on it concurrently.
class TurnEventLog {
 public:
  explicit TurnEventLog(int turn, std::vector<TurnEvent> existing = {});

  /// Assigns the next seq. Throws std::logic_error once the log is closed.
  TurnEvent append(EventKind kind, Json payload = Json::object());

  /// Events with seq > after (after = -1 yields everything).
  std::vector<TurnEvent> events_after(long long after) const;

  /// Blocks until an event with seq > after exists, the log closes or the
  /// timeout elapses, then behaves like events_after().
  std::vector<TurnEvent> wait_after(long long after, std::chrono::milliseconds timeout) const;

  bool closed() const;
  int turn() const noexcept { return turn_; }

 private:
  const int turn_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<TurnEvent> events_;
  bool closed_ = false;
};

/// Live logs keyed by (session id, turn index).
class EventHub {
 public:
  std::shared_ptr<TurnEventLog> open(const std::string& session_id, int turn,
                                     std::vector<TurnEvent> existing = {});
  std::shared_ptr<TurnEventLog> find(const std::string& session_id, int turn) const;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, int>, std::shared_ptr<TurnEventLog>> logs_;
};

/// Problems with a finished turn's stream: seq gaps, a missing or repeated
/// terminal event, or (for done turns) an image_ready count other than
/// `num_outputs`.
std::vector<std::string> check_event_stream(const std::vector<TurnEvent>& events,
                                            std::optional<int> num_outputs);

/// One SSE frame: `id: <seq>\nevent: <kind>\ndata: <json>\n\n`.
std::string sse_frame(const TurnEvent& event);

}  // namespace chatdit
