#include "abair/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace abair::metrics {

double psnr(const img::Image& a, const img::Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shapes differ");
  const auto x = a.data();
  const auto y = b.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> g(size);
  const int rad = size / 2;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double x = i - rad;
    g[i] = std::exp(-(x * x) / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

namespace {

// Valid-region separable filtering of a single plane (h x w) -> (h-n+1) x (w-n+1).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& g) {
  const int n = static_cast<int>(g.size());
  const int oh = h - n + 1;
  const int ow = w - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int r = 0; r < h; ++r) {
    const double* s = src.data() + static_cast<std::size_t>(r) * w;
    double* d = tmp.data() + static_cast<std::size_t>(r) * ow;
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += g[k] * s[c + k];
      d[c] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int r = 0; r < oh; ++r) {
    double* d = out.data() + static_cast<std::size_t>(r) * ow;
    for (int k = 0; k < n; ++k) {
      const double* s = tmp.data() + static_cast<std::size_t>(r + k) * ow;
      for (int c = 0; c < ow; ++c) d[c] += g[k] * s[c];
    }
  }
  return out;
}

}  // namespace

double ssim(const img::Image& a, const img::Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: image shapes differ");
  const int h = a.height();
  const int w = a.width();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  }
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  const auto g = gaussian_taps(kSsimWindow, kSsimSigma);
  const int ch = a.channels();
  const std::size_t n = a.pixels();

  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < ch; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = a.data()[p * ch + c];
      y[p] = b.data()[p * ch + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = filter_valid(x, h, w, g);
    const auto my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g);
    const auto syy = filter_valid(yy, h, w, g);
    const auto sxy = filter_valid(xy, h, w, g);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      total += num / den;
    }
    count += mx.size();
  }
  return total / static_cast<double>(count);
}

}  // namespace abair::metrics
