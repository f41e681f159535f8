#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include "chatdit/hash.hpp"

namespace chatdit {

/// Content-addressed storage for encoded image bytes. Keys are the hex
/// SHA-256 of the stored bytes, so identical uploads share one blob.
class BlobStore {
 public:
  virtual ~BlobStore() = default;

  /// Stores the bytes (idempotent) and returns their key.
  virtual std::string put(std::span<const std::uint8_t> bytes) = 0;
  virtual std::optional<Bytes> get(const std::string& key) const = 0;
  virtual bool contains(const std::string& key) const = 0;
};

class MemoryBlobStore final : public BlobStore {
 public:
  std::string put(std::span<const std::uint8_t> bytes) override;
  std::optional<Bytes> get(const std::string& key) const override;
  bool contains(const std::string& key) const override;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Bytes> blobs_;
};

/// Blobs live at `<root>/blobs/<key>.png`, written via temp file + rename.
class FileBlobStore final : public BlobStore {
 public:
  explicit FileBlobStore(std::filesystem::path root);

  std::string put(std::span<const std::uint8_t> bytes) override;
  std::optional<Bytes> get(const std::string& key) const override;
  bool contains(const std::string& key) const override;
  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
};

/// Writes `data` to a sibling temp file, then renames it over `target`.
/// Throws PersistenceError.
void atomic_write_file(const std::filesystem::path& target, std::string_view data);

std::optional<std::string> read_file(const std::filesystem::path& path);

}  // namespace chatdit
