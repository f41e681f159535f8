#include "chatdit/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

#include "chatdit/errors.hpp"

namespace chatdit {
namespace {

constexpr int kPngCompression = 3;

void write_to_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

[[noreturn]] void png_fail(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = message;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

Bytes encode_png_raw(int width, int height, int color_type, int channels,
                     const std::uint8_t* pixels) {
  if (width <= 0 || height <= 0) throw InputError("cannot encode an empty image");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  Bytes out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode failed: " + error);
  }
  png_set_write_fn(png, &out, write_to_bytes, flush_noop);
  png_set_compression_level(png, kPngCompression);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + stride * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

struct PngReadSource {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_from_span(png_structp png, png_bytep data, png_size_t length) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->pos + length > src->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(data, src->bytes.data() + src->pos, length);
  src->pos += length;
}

// Decodes to either 1 (gray) or 3 (RGB) channels.
std::vector<std::uint8_t> decode_png_raw(std::span<const std::uint8_t> bytes, bool gray,
                                         int& width, int& height) {
  if (!looks_like_png(bytes)) throw InputError("not a PNG stream");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadSource src{bytes};
  std::vector<std::uint8_t> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("undecodable PNG: " + error);
  }
  png_set_read_fn(png, &src, read_from_span);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (gray) {
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  } else if (!(color & PNG_COLOR_MASK_COLOR)) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  const int channels = gray ? 1 : 3;
  if (rowbytes != static_cast<std::size_t>(w) * channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("unsupported PNG pixel layout");
  }
  pixels.resize(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  width = static_cast<int>(w);
  height = static_cast<int>(h);
  return pixels;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_fail;
  Image image;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw InputError(std::string("undecodable JPEG: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  image = Image(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = image.at(0, static_cast<int>(cinfo.output_scanline));
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return image;
}

}  // namespace

bool looks_like_png(std::span<const std::uint8_t> bytes) noexcept {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

bool looks_like_jpeg(std::span<const std::uint8_t> bytes) noexcept {
  return bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff;
}

Bytes encode_png(const Image& image) {
  return encode_png_raw(image.width, image.height, PNG_COLOR_TYPE_RGB, 3, image.pixels.data());
}

Bytes encode_png(const GrayImage& image) {
  return encode_png_raw(image.width, image.height, PNG_COLOR_TYPE_GRAY, 1, image.data.data());
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  Image image;
  if (looks_like_png(bytes)) {
    image.pixels = decode_png_raw(bytes, false, image.width, image.height);
  } else if (looks_like_jpeg(bytes)) {
    image = decode_jpeg(bytes);
  } else {
    throw InputError("unrecognized image format (expected PNG or JPEG)");
  }
  if (image.empty()) throw InputError("image has a zero dimension");
  return image;
}

GrayImage decode_png_gray(std::span<const std::uint8_t> bytes) {
  GrayImage image;
  image.data = decode_png_raw(bytes, true, image.width, image.height);
  if (image.width <= 0 || image.height <= 0) throw InputError("mask has a zero dimension");
  return image;
}

}  // namespace chatdit
