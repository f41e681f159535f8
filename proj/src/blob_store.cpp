#include "chatdit/blob_store.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "chatdit/errors.hpp"

namespace fs = std::filesystem;

namespace chatdit {
namespace {

bool valid_key(const std::string& key) {
  if (key.size() != 64) return false;
  for (char c : key) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

}  // namespace

std::string MemoryBlobStore::put(std::span<const std::uint8_t> bytes) {
  std::string key = sha256_hex(bytes);
  std::lock_guard lock(mu_);
  blobs_.try_emplace(key, bytes.begin(), bytes.end());
  return key;
}

std::optional<Bytes> MemoryBlobStore::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = blobs_.find(key);
  if (it == blobs_.end()) return std::nullopt;
  return it->second;
}

bool MemoryBlobStore::contains(const std::string& key) const {
  std::lock_guard lock(mu_);
  return blobs_.contains(key);
}

std::size_t MemoryBlobStore::size() const {
  std::lock_guard lock(mu_);
  return blobs_.size();
}

FileBlobStore::FileBlobStore(fs::path root) : dir_(std::move(root) / "blobs") {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw PersistenceError("cannot create blob directory " + dir_.string() + ": " + ec.message());
}

fs::path FileBlobStore::path_for(const std::string& key) const { return dir_ / (key + ".png"); }

std::string FileBlobStore::put(std::span<const std::uint8_t> bytes) {
  std::string key = sha256_hex(bytes);
  const fs::path target = path_for(key);
  if (!fs::exists(target)) {
    atomic_write_file(target, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  return key;
}

std::optional<Bytes> FileBlobStore::get(const std::string& key) const {
  if (!valid_key(key)) return std::nullopt;
  auto text = read_file(path_for(key));
  if (!text) return std::nullopt;
  return Bytes(text->begin(), text->end());
}

bool FileBlobStore::contains(const std::string& key) const {
  return valid_key(key) && fs::exists(path_for(key));
}

void atomic_write_file(const fs::path& target, std::string_view data) {
  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw PersistenceError("cannot create " + target.parent_path().string() + ": " + ec.message());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot open " + tmp.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw PersistenceError("short write to " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw PersistenceError("cannot rename into " + target.string());
  }
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace chatdit
