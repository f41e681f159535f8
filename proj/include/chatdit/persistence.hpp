#pragma once

// On-disk layout under the data directory:
//
//   sessions/<id>/session.json   full transcript, replaced atomically
//   blobs/<sha256>.png           content-addressed image bytes

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "chatdit/blob_store.hpp"
#include "chatdit/model.hpp"

namespace chatdit {

inline constexpr const char* kInterruptedReason = "interrupted";

class SessionRepository {
 public:
  explicit SessionRepository(std::filesystem::path data_dir);

  /// A fresh empty session, already on disk.
  Session create_session();

  /// Throws PersistenceError.
  void persist(const Session& session);

  /// Loads a session. Turns that were still running when it was saved come
  /// back failed with reason "interrupted". Throws NotFoundError,
  /// PersistenceError (corrupt file, named in the message) or
  /// IntegrityError (registry entries whose blob is gone).
  Session restore(const std::string& session_id) const;

  bool exists(const std::string& session_id) const;
  std::vector<std::string> list_sessions() const;

  std::filesystem::path session_file(const std::string& session_id) const;
  const std::filesystem::path& data_dir() const noexcept { return dir_; }
  std::shared_ptr<FileBlobStore> blobs() const noexcept { return blobs_; }

 private:
  std::filesystem::path dir_;
  std::shared_ptr<FileBlobStore> blobs_;
};

/// Session ids become directory names, so only [A-Za-z0-9_-] is accepted.
bool valid_session_id(const std::string& session_id);

/// Marks unfinished turns failed ("interrupted"), closing their event logs.
void mark_interrupted(Session& session);

}  // namespace chatdit
