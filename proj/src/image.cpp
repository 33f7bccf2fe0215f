#include "abair/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace abair::img {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1) throw std::invalid_argument("image dims must be >= 1");
  if (channels != 1 && channels != 3) throw std::invalid_argument("channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : Image(height, width, channels) {
  if (data.size() != data_.size()) throw std::invalid_argument("image data size mismatch");
  data_ = std::move(data);
}

Image Image::channel(int ch) const {
  Image out(height_, width_, 1);
  for (std::size_t p = 0; p < pixels(); ++p) out.data_[p] = data_[p * channels_ + ch];
  return out;
}

void clamp_unit(Image& img) {
  for (auto& v : img.data()) v = std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t splitmix64(std::uint64_t state) { return mix64(state + kGoldenGamma); }

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ ((index + 1) * kGoldenGamma));
}

std::uint64_t Rng::next() {
  state_ += kGoldenGamma;
  return mix64(state_);
}

double Rng::next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double sample_uniform(Rng& rng, double lo, double hi) {
  const double u = rng.next_unit();
  if (lo == hi) return lo;
  const double v = lo + (hi - lo) * u;
  // Rounding can land exactly on hi for wide intervals.
  return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t sample_index(Rng& rng, std::uint64_t n) {
  const auto i = static_cast<std::uint64_t>(rng.next_unit() * static_cast<double>(n));
  return std::min(i, n - 1);
}

double sample_gaussian(Rng& rng, double mean, double sigma) {
  double z;
  if (rng.cached_normal_) {
    z = *rng.cached_normal_;
    rng.cached_normal_.reset();
  } else {
    const double u1 = 1.0 - rng.next_unit();  // (0, 1], keeps log finite
    const double u2 = rng.next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    z = r * std::cos(theta);
    rng.cached_normal_ = r * std::sin(theta);
  }
  return mean + sigma * z;
}

// ---------------------------------------------------------------------------

Kernel2D::Kernel2D(int size, std::vector<double> weights)
    : size_(size), weights_(std::move(weights)) {
  if (size < 1 || size % 2 == 0) {
    throw std::invalid_argument("kernel size must be odd, got " + std::to_string(size));
  }
  if (weights_.size() != static_cast<std::size_t>(size) * size) {
    throw std::invalid_argument("kernel weight count does not match size");
  }
}

double Kernel2D::sum() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

Kernel2D Kernel2D::transposed() const {
  std::vector<double> t(weights_.size());
  for (int i = 0; i < size_; ++i)
    for (int j = 0; j < size_; ++j) t[static_cast<std::size_t>(j) * size_ + i] = at(i, j);
  return Kernel2D(size_, std::move(t));
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Image convolve2d(const Image& img, const Kernel2D& kernel, Padding padding) {
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  const int rad = kernel.radius();
  Image out(h, w, ch);
  auto src = img.data();
  auto dst = out.data();

  // Motion kernels are mostly zeros; walk only the live taps. Each output
  // value accumulates taps in row-major kernel order.
  for (int ki = 0; ki < kernel.size(); ++ki) {
    for (int kj = 0; kj < kernel.size(); ++kj) {
      const double wt = kernel.at(ki, kj);
      if (wt == 0.0) continue;
      const int dr = ki - rad;
      const int dc = kj - rad;
      // Columns whose source index stays inside the image.
      const int c_lo = std::clamp(-dc, 0, w);
      const int c_hi = std::clamp(w - dc, c_lo, w);
      for (int r = 0; r < h; ++r) {
        int sr = r + dr;
        if (sr < 0 || sr >= h) {
          if (padding == Padding::kZero) continue;
          sr = reflect_index(sr, h);
        }
        const double* srow = src.data() + static_cast<std::size_t>(sr) * w * ch;
        double* drow = dst.data() + static_cast<std::size_t>(r) * w * ch;
        const double* s = srow + static_cast<std::ptrdiff_t>(c_lo + dc) * ch;
        double* d = drow + static_cast<std::size_t>(c_lo) * ch;
        for (int n = (c_hi - c_lo) * ch; n > 0; --n) *d++ += wt * *s++;
        if (padding == Padding::kZero) continue;
        for (int c = 0; c < c_lo; ++c) {
          const int sc = reflect_index(c + dc, w);
          for (int k = 0; k < ch; ++k) drow[c * ch + k] += wt * srow[sc * ch + k];
        }
        for (int c = c_hi; c < w; ++c) {
          const int sc = reflect_index(c + dc, w);
          for (int k = 0; k < ch; ++k) drow[c * ch + k] += wt * srow[sc * ch + k];
        }
      }
    }
  }
  return out;
}

namespace {

// Liang-Barsky test of segment p0 + t (p1 - p0), t in [0, 1], against an
// axis-aligned box.
bool segment_hits_box(double x0, double y0, double x1, double y1, double xmin, double xmax,
                      double ymin, double ymax) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {x0 - xmin, xmax - x0, y0 - ymin, ymax - y0};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

Kernel2D motion_kernel(int length, double angle_deg) {
  if (length < 1) throw std::invalid_argument("motion kernel length must be >= 1");
  const int k = length % 2 == 1 ? length : length + 1;
  const int rad = k / 2;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  // Endpoints in (x right, y down) coordinates centered on the middle pixel.
  const double half = 0.5 * length;
  const double ex = half * std::cos(theta);
  const double ey = -half * std::sin(theta);

  // A pixel belongs to the supercover when the segment crosses its interior.
  // Shrinking each cell by a hair drops pure edge/corner contacts and absorbs
  // the ~1e-16 noise of cos/sin, so antipodal angles rasterize identically.
  constexpr double kShrink = 1e-9;
  std::vector<double> weights(static_cast<std::size_t>(k) * k, 0.0);
  int hits = 0;
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      const double cx = c - rad;
      const double cy = r - rad;
      if (segment_hits_box(-ex, -ey, ex, ey, cx - 0.5 + kShrink, cx + 0.5 - kShrink,
                           cy - 0.5 + kShrink, cy + 0.5 - kShrink)) {
        weights[static_cast<std::size_t>(r) * k + c] = 1.0;
        ++hits;
      }
    }
  }
  for (auto& v : weights) v /= hits;
  return Kernel2D(k, std::move(weights));
}

}  // namespace abair::img
