#include "chatdit/session.hpp"

#include <chrono>
#include <cstdio>
#include <random>

#include "chatdit/errors.hpp"

namespace chatdit {
namespace {

std::string format_image_id(int number) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%04d", number);
  return buf;
}

ImageRecord append_record(Session& session, ImageSource source, int width, int height,
                          std::string caption, int created_turn, std::string key) {
  ImageRecord record;
  record.id = format_image_id(session.next_image_number++);
  record.source = source;
  record.width = width;
  record.height = height;
  record.caption = std::move(caption);
  record.created_turn = created_turn;
  record.storage_key = std::move(key);
  session.registry.push_back(record);
  session.updated_at = unix_millis();
  return record;
}

}  // namespace

std::string fresh_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

long long unix_millis() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

Session new_session(std::string id) {
  Session s;
  s.id = std::move(id);
  s.created_at = s.updated_at = unix_millis();
  return s;
}

ImageRecord register_image(Session& session, BlobStore& blobs, ImageSource source,
                           std::span<const std::uint8_t> encoded, std::string caption,
                           int created_turn) {
  const Image image = decode_image(encoded);
  std::string key;
  if (looks_like_png(encoded)) {
    key = blobs.put(encoded);
  } else {
    key = blobs.put(encode_png(image));
  }
  return append_record(session, source, image.width, image.height, std::move(caption),
                       created_turn, std::move(key));
}

ImageRecord register_image(Session& session, BlobStore& blobs, ImageSource source,
                           const Image& image, std::string caption, int created_turn) {
  if (image.empty()) throw InputError("image has a zero dimension");
  std::string key = blobs.put(encode_png(image));
  return append_record(session, source, image.width, image.height, std::move(caption),
                       created_turn, std::move(key));
}

std::vector<HistoryEntry> resolve_history_references(const Session& session, int turn_index) {
  if (turn_index < 0 || turn_index > static_cast<int>(session.turns.size())) {
    throw InputError("turn index " + std::to_string(turn_index) + " is beyond the conversation");
  }
  std::vector<HistoryEntry> out;
  for (const auto& r : session.registry) {
    if (r.created_turn < turn_index) out.push_back({r.id, r.caption, r.source, r.created_turn});
  }
  return out;
}

}  // namespace chatdit
