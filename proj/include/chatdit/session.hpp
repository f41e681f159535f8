#pragma once

#include <span>
#include <string>
#include <vector>

#include "chatdit/blob_store.hpp"
#include "chatdit/image.hpp"
#include "chatdit/model.hpp"

namespace chatdit {

/// Random 16-hex-digit session identifier.
std::string fresh_session_id();
long long unix_millis();

/// An empty session. Persisting it is the repository's job.
Session new_session(std::string id = fresh_session_id());

/// Decodes `encoded` (PNG or JPEG), stores it content-addressed and appends
/// a record with the next `img_NNNN` id. JPEG input is normalized to PNG
/// before hashing. Throws InputError when the bytes are not a usable image.
ImageRecord register_image(Session& session, BlobStore& blobs, ImageSource source,
                           std::span<const std::uint8_t> encoded, std::string caption,
                           int created_turn);
ImageRecord register_image(Session& session, BlobStore& blobs, ImageSource source,
                           const Image& image, std::string caption, int created_turn);

struct HistoryEntry {
  std::string id;
  std::string caption;
  ImageSource source = ImageSource::uploaded;
  int turn = 0;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

/// Every registry entry created strictly before `turn_index`, oldest first.
std::vector<HistoryEntry> resolve_history_references(const Session& session, int turn_index);

}  // namespace chatdit
