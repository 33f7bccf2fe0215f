#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace abair::img {

// Row-major, channel-interleaved floating point raster. Pixel values live
// in [0, 1]; 8-bit scale constants are divided by 255 before they get here.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  Image(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  double& at(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }
  double at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  bool operator==(const Image& o) const = default;

  // Single channel `ch` as a 1-channel image.
  Image channel(int ch) const;

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

void clamp_unit(Image& img);

// ---------------------------------------------------------------------------
// Random streams

// One reference splitmix64 step: advance `state` by the golden gamma, mix.
std::uint64_t splitmix64(std::uint64_t state);

// Child seed for work item `index` of a run seeded with `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// splitmix64 generator. Single consumer: never share one across threads,
// derive a child seed per work item instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  // Uniform in [0, 1) with 53 bits of resolution.
  double next_unit();

  std::uint64_t state() const { return state_; }

 private:
  friend double sample_gaussian(Rng&, double, double);
  std::uint64_t state_;
  std::optional<double> cached_normal_;
};

double sample_uniform(Rng& rng, double lo, double hi);
// Integer in [0, n), n > 0.
std::uint64_t sample_index(Rng& rng, std::uint64_t n);
// Box-Muller; each pair of uniforms yields two normals, the second cached.
double sample_gaussian(Rng& rng, double mean, double sigma);

// ---------------------------------------------------------------------------
// Convolution

class Kernel2D {
 public:
  Kernel2D(int size, std::vector<double> weights);
  static Kernel2D identity() { return Kernel2D(1, {1.0}); }

  int size() const { return size_; }
  int radius() const { return size_ / 2; }
  double at(int row, int col) const { return weights_[static_cast<std::size_t>(row) * size_ + col]; }
  std::span<const double> weights() const { return weights_; }
  double sum() const;
  Kernel2D transposed() const;

  bool operator==(const Kernel2D&) const = default;

 private:
  int size_;
  std::vector<double> weights_;
};

enum class Padding { kZero, kReflect };

// Maps an out-of-range index into [0, n) by mirroring about the edge
// samples (edge not repeated: -1 -> 1, n -> n-2).
int reflect_index(int i, int n);

// "Same" correlation, applied per channel:
//   out(r, c) = sum_ij k(i, j) * in(r + i - k/2, c + j - k/2)
Image convolve2d(const Image& img, const Kernel2D& kernel, Padding padding);

// Linear motion kernel: a 1-pixel-wide segment of `length` pixels through
// the center at `angle_deg` (counter-clockwise from +x, rows growing down),
// supercover-rasterized and normalized to sum 1. Size is length rounded up
// to odd.
Kernel2D motion_kernel(int length, double angle_deg);

}  // namespace abair::img
