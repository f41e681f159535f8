#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "chatdit/image.hpp"
#include "chatdit/model.hpp"

namespace testing {

namespace fs = std::filesystem;
using chatdit::Json;

inline fs::path data_path(const std::string& name) { return fs::path(CHATDIT_TEST_DATA) / name; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("chatdit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline chatdit::Image solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  chatdit::Image img(w, h);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

inline chatdit::Image noise(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  chatdit::Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

/// Fixture entries keyed "<agent>/<ordinal>", values dumped to strings.
class Fixture {
 public:
  Fixture& add(const std::string& agent, const Json& reply) {
    entries_[agent + "/" + std::to_string(next_[agent]++)] = reply.dump();
    return *this;
  }
  Fixture& add_raw(const std::string& agent, const std::string& reply) {
    entries_[agent + "/" + std::to_string(next_[agent]++)] = reply;
    return *this;
  }
  Json json() const { return Json(entries_); }
  std::map<std::string, std::string> map() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::map<std::string, int> next_;
};

}  // namespace testing
