#include "chatdit/persistence.hpp"

#include <algorithm>
#include <system_error>

#include "chatdit/errors.hpp"
#include "chatdit/session.hpp"

namespace fs = std::filesystem;

namespace chatdit {

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

void mark_interrupted(Session& session) {
  for (auto& turn : session.turns) {
    if (turn.finished()) continue;
    turn.advance(TurnStatus::failed);
    turn.failure_reason = kInterruptedReason;
    TurnEvent e;
    e.kind = EventKind::turn_failed;
    e.turn = turn.index;
    e.payload = {{"reason", kInterruptedReason}};
    e.seq = static_cast<long long>(turn.events.size());
    turn.events.push_back(std::move(e));
  }
}

SessionRepository::SessionRepository(fs::path data_dir)
    : dir_(std::move(data_dir)), blobs_(std::make_shared<FileBlobStore>(dir_)) {
  std::error_code ec;
  fs::create_directories(dir_ / "sessions", ec);
  if (ec) throw PersistenceError("cannot create " + (dir_ / "sessions").string() + ": " + ec.message());
}

fs::path SessionRepository::session_file(const std::string& id) const {
  if (!valid_session_id(id)) throw InputError("invalid session id: " + id);
  return dir_ / "sessions" / id / "session.json";
}

Session SessionRepository::create_session() {
  for (;;) {
    Session s = new_session();
    if (exists(s.id)) continue;
    persist(s);
    return s;
  }
}

void SessionRepository::persist(const Session& session) {
  const fs::path file = session_file(session.id);
  std::error_code ec;
  fs::create_directories(file.parent_path(), ec);
  if (ec) throw PersistenceError("cannot create " + file.parent_path().string() + ": " + ec.message());
  atomic_write_file(file, Json(session).dump(1));
}

bool SessionRepository::exists(const std::string& id) const {
  if (!valid_session_id(id)) return false;
  std::error_code ec;
  return fs::is_regular_file(session_file(id), ec);
}

Session SessionRepository::restore(const std::string& id) const {
  if (!valid_session_id(id)) throw NotFoundError("no session " + id);
  const fs::path file = session_file(id);
  const auto text = read_file(file);
  if (!text) throw NotFoundError("no session " + id);
  Session session;
  try {
    session = Json::parse(*text).get<Session>();
  } catch (const Json::exception& e) {
    throw PersistenceError("corrupt session file " + file.string() + ": " + e.what());
  }
  if (session.id != id) {
    throw PersistenceError("session file " + file.string() + " holds session " + session.id);
  }
  std::vector<std::string> missing;
  for (const auto& rec : session.registry) {
    if (!blobs_->contains(rec.storage_key)) missing.push_back(rec.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IntegrityError("session " + id + " is missing blobs for: " + list, missing);
  }
  mark_interrupted(session);
  return session;
}

std::vector<std::string> SessionRepository::list_sessions() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_ / "sessions", ec)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && valid_session_id(name) && exists(name)) out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace chatdit
