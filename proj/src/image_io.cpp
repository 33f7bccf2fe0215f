#include "abair/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include "abair/tensorio.hpp"

namespace abair::img {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Decoded rows: 8-bit values widened to u16 so one path serves both depths.
struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;
};

Decoded decode_png(const std::filesystem::path& path, bool header_only) {
  auto file = open_file(path, "rb");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn,
                                           png_warning_fn);
  if (!png) throw ImageIoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageIoError("png_create_info_struct failed");
  }

  Decoded d;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("PNG decode failed for " + path.string() + ": " + err);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  if (header_only) {
    png_destroy_read_struct(&png, &info, nullptr);
    return d;
  }

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // host-order u16 on little-endian
  png_read_update_info(png, info);

  d.bit_depth = png_get_bit_depth(png, info);
  d.channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * d.height);
  rows.resize(d.height);
  for (int r = 0; r < d.height; ++r) rows[r] = buffer.data() + rowbytes * r;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(d.height) * d.width * d.channels;
  d.samples.resize(n);
  if (d.bit_depth == 16) {
    std::memcpy(d.samples.data(), buffer.data(), n * 2);
  } else {
    for (std::size_t i = 0; i < n; ++i) d.samples[i] = buffer[i];
  }
  return d;
}

void encode_png(const std::filesystem::path& path, int height, int width, int channels,
                int bit_depth, const std::vector<std::uint8_t>& bytes) {
  auto file = open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn,
                                            png_warning_fn);
  if (!png) throw ImageIoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageIoError("png_create_info_struct failed");
  }
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) {
    rows[r] = const_cast<png_bytep>(bytes.data() + rowbytes * r);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("PNG encode failed for " + path.string() + ": " + err);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw ImageIoError("write failed: " + path.string());
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  auto d = decode_png(path, false);
  if (d.channels != 1 && d.channels != 3) {
    throw ImageIoError("unsupported channel count in " + path.string());
  }
  const double scale = d.bit_depth == 16 ? 65535.0 : 255.0;
  Image img(d.height, d.width, d.channels);
  auto out = img.data();
  for (std::size_t i = 0; i < d.samples.size(); ++i) out[i] = d.samples[i] / scale;
  return img;
}

PngInfo read_png_info(const std::filesystem::path& path) {
  auto d = decode_png(path, true);
  return {d.height, d.width};
}

void write_png(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ImageIoError("bit depth must be 8 or 16");
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  const auto src = img.data();
  std::vector<std::uint8_t> bytes(src.size() * (bit_depth / 8));
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = std::isnan(src[i]) ? 0.0 : std::clamp(src[i], 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::round(v * scale));
    if (bit_depth == 16) {
      bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);  // PNG is big-endian
      bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xFF);
    } else {
      bytes[i] = static_cast<std::uint8_t>(q);
    }
  }
  encode_png(path, img.height(), img.width(), img.channels(), bit_depth, bytes);
}

void write_gray8_png(const std::filesystem::path& path, const Gray8& raster) {
  if (raster.values.size() != static_cast<std::size_t>(raster.height) * raster.width) {
    throw ImageIoError("gray raster size mismatch");
  }
  encode_png(path, raster.height, raster.width, 1, 8, raster.values);
}

Gray8 read_gray8_png(const std::filesystem::path& path) {
  auto d = decode_png(path, false);
  if (d.channels != 1 || d.bit_depth != 8) {
    throw ImageIoError("expected 8-bit grayscale PNG: " + path.string());
  }
  Gray8 g{d.height, d.width, {}};
  g.values.assign(d.samples.begin(), d.samples.end());
  return g;
}

Image read_depth(const std::filesystem::path& path) {
  if (path.extension() == ".abwt") {
    const auto tensors = tensorio::read_tensors(path);
    if (tensors.empty()) throw ImageIoError("depth tensor file is empty: " + path.string());
    const auto& t = tensors.front();
    if (!(t.dims.size() == 2 || (t.dims.size() == 3 && t.dims[2] == 1))) {
      throw ImageIoError("depth tensor must have dims [H, W] or [H, W, 1]");
    }
    return Image(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), 1, t.as_doubles());
  }
  auto depth = read_png(path);
  if (depth.channels() != 1) throw ImageIoError("depth PNG must be grayscale: " + path.string());
  return depth;
}

}  // namespace abair::img
