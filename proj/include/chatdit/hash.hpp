#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chatdit {

using Bytes = std::vector<std::uint8_t>;

/// Lowercase hex SHA-256 of the input.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws InputError on malformed input.
Bytes base64_decode(std::string_view text);

/// 64-bit FNV-1a. Stable across platforms; used for prompt keys.
std::uint64_t fnv1a64(std::string_view data);

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Reproducible per-step seed derived from the session, turn and step.
std::uint64_t step_seed(std::string_view session_id, int turn_index,
                        int step_index, std::uint64_t base_seed = 0);

}  // namespace chatdit
