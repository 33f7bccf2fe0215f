#pragma once

#include <vector>

#include "abair/image.hpp"

namespace abair::metrics {

// 10 log10(1 / MSE) over every value of both images, peak 1.0. Identical
// images give +infinity.
double psnr(const img::Image& a, const img::Image& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), dynamic range 1.0,
// evaluated on the valid region of each channel and averaged over channels
// and positions.
double ssim(const img::Image& a, const img::Image& b);

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_taps(int size, double sigma);

}  // namespace abair::metrics
