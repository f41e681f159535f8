#include "chatdit/events.hpp"

#include <stdexcept>

namespace chatdit {

TurnEventLog::TurnEventLog(int turn, std::vector<TurnEvent> existing)
    : turn_(turn), events_(std::move(existing)) {
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (events_[i].seq != static_cast<long long>(i)) {
      throw std::invalid_argument("existing events are not gapless from 0");
    }
  }
  closed_ = !events_.empty() && events_.back().terminal();
}

TurnEvent TurnEventLog::append(EventKind kind, Json payload) {
  TurnEvent event;
  {
    std::lock_guard lock(mu_);
    if (closed_) throw std::logic_error("event log for turn " + std::to_string(turn_) + " is closed");
    event.kind = kind;
    event.turn = turn_;
    event.payload = std::move(payload);
    event.seq = static_cast<long long>(events_.size());
    events_.push_back(event);
    closed_ = event.terminal();
  }
  cv_.notify_all();
  return event;
}

std::vector<TurnEvent> TurnEventLog::events_after(long long after) const {
  std::lock_guard lock(mu_);
  const auto first = static_cast<std::size_t>(std::max(0LL, after + 1));
  if (first >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(first), events_.end()};
}

std::vector<TurnEvent> TurnEventLog::wait_after(long long after,
                                                std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] {
    return closed_ || static_cast<long long>(events_.size()) > after + 1;
  });
  const auto first = static_cast<std::size_t>(std::max(0LL, after + 1));
  if (first >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(first), events_.end()};
}

bool TurnEventLog::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::shared_ptr<TurnEventLog> EventHub::open(const std::string& session_id, int turn,
                                             std::vector<TurnEvent> existing) {
  auto log = std::make_shared<TurnEventLog>(turn, std::move(existing));
  std::lock_guard lock(mu_);
  logs_[{session_id, turn}] = log;
  return log;
}

std::shared_ptr<TurnEventLog> EventHub::find(const std::string& session_id, int turn) const {
  std::lock_guard lock(mu_);
  auto it = logs_.find({session_id, turn});
  return it == logs_.end() ? nullptr : it->second;
}

std::vector<std::string> check_event_stream(const std::vector<TurnEvent>& events,
                                            std::optional<int> num_outputs) {
  std::vector<std::string> problems;
  int terminals = 0;
  int images = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.seq != static_cast<long long>(i)) {
      problems.push_back("event " + std::to_string(i) + " has seq " + std::to_string(e.seq));
    }
    if (e.terminal()) {
      ++terminals;
      if (i + 1 != events.size()) problems.push_back("terminal event is not last");
    }
    if (e.kind == EventKind::image_ready) ++images;
  }
  if (terminals != 1) problems.push_back(std::to_string(terminals) + " terminal events");
  if (events.empty() || events.front().kind != EventKind::parsing_started) {
    problems.push_back("stream does not start with parsing_started");
  }
  const bool done = !events.empty() && events.back().kind == EventKind::turn_done;
  if (done && num_outputs && images != *num_outputs) {
    problems.push_back(std::to_string(images) + " image_ready events for " +
                       std::to_string(*num_outputs) + " outputs");
  }
  return problems;
}

std::string sse_frame(const TurnEvent& event) {
  return "id: " + std::to_string(event.seq) + "\nevent: " + to_string(event.kind) +
         "\ndata: " + Json(event).dump() + "\n\n";
}

}  // namespace chatdit
