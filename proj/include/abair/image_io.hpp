#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "abair/image.hpp"

namespace abair::img {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads 8- or 16-bit PNG. Gray stays 1 channel; palette and RGB become 3
// channels; alpha is dropped. Values are scaled to [0, 1].
Image read_png(const std::filesystem::path& path);

// Quantizes to `bit_depth` (8 or 16): round(clamp(v, 0, 1) * max), halves
// away from zero.
void write_png(const std::filesystem::path& path, const Image& img, int bit_depth = 16);

// Raw 8-bit grayscale bytes, no scaling (label maps).
struct Gray8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;
};
void write_gray8_png(const std::filesystem::path& path, const Gray8& raster);
Gray8 read_gray8_png(const std::filesystem::path& path);

// Depth map: a grayscale PNG, or an ABWT file whose first tensor has dims
// [H, W] or [H, W, 1].
Image read_depth(const std::filesystem::path& path);

// Image width/height without decoding pixel data.
struct PngInfo {
  int height = 0;
  int width = 0;
};
PngInfo read_png_info(const std::filesystem::path& path);

}  // namespace abair::img
