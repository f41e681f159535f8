#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chatdit/hash.hpp"

namespace chatdit {

/// 8-bit interleaved RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  bool empty() const noexcept { return width <= 0 || height <= 0; }
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }
  std::uint8_t* at(int x, int y) noexcept { return pixels.data() + offset(x, y); }
  const std::uint8_t* at(int x, int y) const noexcept { return pixels.data() + offset(x, y); }

  friend bool operator==(const Image&, const Image&) = default;
};

/// 8-bit single-channel raster (panel masks).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) noexcept {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int x, int y) const noexcept {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

bool looks_like_png(std::span<const std::uint8_t> bytes) noexcept;
bool looks_like_jpeg(std::span<const std::uint8_t> bytes) noexcept;

Bytes encode_png(const Image& image);
Bytes encode_png(const GrayImage& image);

/// Decodes PNG or JPEG into RGB; alpha is dropped. Throws InputError on
/// undecodable data or zero dimensions.
Image decode_image(std::span<const std::uint8_t> bytes);
/// Decodes a PNG into a single luminance channel.
GrayImage decode_png_gray(std::span<const std::uint8_t> bytes);

}  // namespace chatdit
