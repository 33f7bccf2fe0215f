#include "abair/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace abair::degrade {

using img::Image;
using img::Rng;
using nlohmann::json;

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::kClean: return "clean";
    case Kind::kRain: return "rain";
    case Kind::kHaze: return "haze";
    case Kind::kNoise: return "noise";
    case Kind::kBlur: return "blur";
    case Kind::kLowLight: return "lowlight";
  }
  return "unknown";
}

Kind parse_kind(std::string_view name) {
  for (auto k : {Kind::kClean, Kind::kRain, Kind::kHaze, Kind::kNoise, Kind::kBlur,
                 Kind::kLowLight}) {
    if (kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown degradation kind: " + std::string(name));
}

Kind kind_of(const Params& p) {
  static constexpr Kind kByIndex[] = {Kind::kRain, Kind::kHaze, Kind::kBlur, Kind::kNoise,
                                      Kind::kLowLight};
  return kByIndex[p.index()];
}

namespace {

void require_rgb(const Image& image, const char* op) {
  if (image.channels() != 3) throw std::invalid_argument(std::string(op) + " requires RGB input");
}

int rasterized_length(double length) {
  return std::max(1, static_cast<int>(std::lround(length)));
}

}  // namespace

Image rain_streaks(int height, int width, const RainParams& p, Rng& rng) {
  Image mask(height, width, 1);
  const auto drops = static_cast<std::uint64_t>(
      std::floor(p.density * static_cast<double>(height) * static_cast<double>(width)));
  const int s = std::max(1, p.drop_size);
  for (std::uint64_t i = 0; i < drops; ++i) {
    const int r0 = static_cast<int>(img::sample_index(rng, height));
    const int c0 = static_cast<int>(img::sample_index(rng, width));
    for (int r = r0; r < std::min(r0 + s, height); ++r)
      for (int c = c0; c < std::min(c0 + s, width); ++c) mask.at(r, c) = 1.0;
  }
  if (drops == 0) return mask;

  auto streaks = img::convolve2d(
      mask, img::motion_kernel(rasterized_length(p.length), p.angle), img::Padding::kZero);
  double peak = 0.0;
  for (double v : streaks.data()) peak = std::max(peak, v);
  if (peak > 0.0) {
    for (auto& v : streaks.data()) v /= peak;
  }
  return streaks;
}

Image apply_rain(const Image& image, const RainParams& p, Rng& rng) {
  require_rgb(image, "rain");
  const auto streaks = rain_streaks(image.height(), image.width(), p, rng);
  Image out = image;
  auto dst = out.data();
  const auto layer = streaks.data();
  const double w = p.weight;
  for (std::size_t px = 0; px < image.pixels(); ++px) {
    for (int c = 0; c < 3; ++c) {
      double& v = dst[px * 3 + c];
      v = p.blend == RainBlend::kLiteral ? w * v + (1.0 - w) * layer[px] : v + w * layer[px];
    }
  }
  img::clamp_unit(out);
  return out;
}

Image haze_transmission(const Image& depth, const HazeParams& p) {
  if (depth.channels() != 1) throw std::invalid_argument("depth map must be single channel");
  double lo = depth.data()[0];
  double hi = lo;
  for (double v : depth.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("depth map contains non-finite values");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Image t(depth.height(), depth.width(), 1);
  auto dst = t.data();
  const auto src = depth.data();
  const double range = hi - lo;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double norm = range > 0.0 ? (src[i] - lo) / range : 0.0;
    dst[i] = 1.0 - (p.t_min + norm * (p.t_max - p.t_min));
  }
  return t;
}

Image apply_transmission(const Image& image, const Image& transmission, double color) {
  if (transmission.height() != image.height() || transmission.width() != image.width() ||
      transmission.channels() != 1) {
    throw std::invalid_argument("transmission map size does not match image");
  }
  const double airlight = color / 255.0;
  Image out = image;
  auto dst = out.data();
  const auto t = transmission.data();
  const int ch = image.channels();
  for (std::size_t px = 0; px < image.pixels(); ++px) {
    for (int c = 0; c < ch; ++c) {
      double& v = dst[px * ch + c];
      v = t[px] * v + (1.0 - t[px]) * airlight;
    }
  }
  img::clamp_unit(out);
  return out;
}

Image apply_haze(const Image& image, const Image& depth, const HazeParams& p) {
  if (depth.height() != image.height() || depth.width() != image.width()) {
    throw std::invalid_argument("depth map size does not match image");
  }
  return apply_transmission(image, haze_transmission(depth, p), p.color);
}

Image apply_blur(const Image& image, const BlurParams& p) {
  if (p.length < 1 || p.length % 2 == 0) {
    throw std::invalid_argument("blur length must be a positive odd number");
  }
  auto out = img::convolve2d(image, img::motion_kernel(p.length, p.angle), img::Padding::kReflect);
  img::clamp_unit(out);
  return out;
}

Image apply_noise(const Image& image, const NoiseParams& p, Rng& rng) {
  if (p.sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  const double sigma = p.sigma / 255.0;
  Image out = image;
  for (auto& v : out.data()) v += img::sample_gaussian(rng, 0.0, sigma);
  img::clamp_unit(out);
  return out;
}

Image apply_lowlight(const Image& image, const LowLightParams& p, Rng& rng) {
  if (!(p.compression > 0.0)) throw std::invalid_argument("low-light compression must be > 0");
  if (p.sigma < 0.0) throw std::invalid_argument("low-light sigma must be >= 0");
  const double sigma = p.sigma / 255.0;
  Image out = image;
  for (auto& v : out.data()) v = v * p.compression + img::sample_gaussian(rng, 0.0, sigma);
  img::clamp_unit(out);
  return out;
}

Image apply(const Image& image, const Params& p, Rng& rng, const Image* depth) {
  return std::visit(
      [&](const auto& q) -> Image {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, RainParams>) {
          return apply_rain(image, q, rng);
        } else if constexpr (std::is_same_v<T, HazeParams>) {
          if (!depth) throw std::invalid_argument("haze requires a depth map");
          return apply_haze(image, *depth, q);
        } else if constexpr (std::is_same_v<T, BlurParams>) {
          return apply_blur(image, q);
        } else if constexpr (std::is_same_v<T, NoiseParams>) {
          return apply_noise(image, q, rng);
        } else {
          return apply_lowlight(image, q, rng);
        }
      },
      p);
}

Params sample_params(Kind kind, Rng& rng) {
  auto uniform = [&](const double (&range)[2]) {
    return img::sample_uniform(rng, range[0], range[1]);
  };
  switch (kind) {
    case Kind::kRain: {
      RainParams p;
      p.density = uniform(kRainDensity);
      p.length = uniform(kRainLength);
      p.angle = uniform(kRainAngle);
      p.drop_size = kRainDropSize[0] +
                    static_cast<int>(img::sample_index(rng, kRainDropSize[1] - kRainDropSize[0] + 1));
      p.weight = uniform(kRainWeight);
      return p;
    }
    case Kind::kHaze: {
      HazeParams p;
      p.t_min = uniform(kHazeMin);
      p.t_max = uniform(kHazeMax);
      p.color = uniform(kHazeColor);
      return p;
    }
    case Kind::kBlur: {
      BlurParams p;
      const double raw = img::sample_uniform(rng, kBlurLength[0], kBlurLength[1]);
      const int odd = 2 * static_cast<int>(std::lround((raw - 1.0) / 2.0)) + 1;
      p.length = std::clamp(odd, kBlurLength[0], kBlurLength[1]);
      p.angle = uniform(kBlurAngle);
      return p;
    }
    case Kind::kNoise: return NoiseParams{uniform(kNoiseSigma)};
    case Kind::kLowLight: {
      LowLightParams p;
      p.compression = uniform(kLowLightCompression);
      p.sigma = uniform(kLowLightSigma);
      return p;
    }
    case Kind::kClean: break;
  }
  throw std::invalid_argument("no parameters for kind " + std::string(kind_name(kind)));
}

json params_to_json(const Params& p) {
  json j = std::visit(
      [](const auto& q) -> json {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, RainParams>) {
          return {{"density", q.density}, {"length", q.length},       {"angle", q.angle},
                  {"drop_size", q.drop_size}, {"weight", q.weight},
                  {"blend", q.blend == RainBlend::kLiteral ? "literal" : "additive"}};
        } else if constexpr (std::is_same_v<T, HazeParams>) {
          return {{"t_min", q.t_min}, {"t_max", q.t_max}, {"color", q.color}};
        } else if constexpr (std::is_same_v<T, BlurParams>) {
          return {{"length", q.length}, {"angle", q.angle}};
        } else if constexpr (std::is_same_v<T, NoiseParams>) {
          return {{"sigma", q.sigma}};
        } else {
          return {{"compression", q.compression}, {"sigma", q.sigma}};
        }
      },
      p);
  j["kind"] = kind_name(kind_of(p));
  return j;
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Params default_params(Kind kind) {
  switch (kind) {
    case Kind::kRain: return RainParams{};
    case Kind::kHaze: return HazeParams{};
    case Kind::kBlur: return BlurParams{};
    case Kind::kNoise: return NoiseParams{};
    case Kind::kLowLight: return LowLightParams{};
    case Kind::kClean: break;
  }
  throw std::invalid_argument("no parameters for kind clean");
}

}  // namespace

Params merge_params(const Params& base, const json& j) {
  if (j.contains("kind") && parse_kind(j["kind"].get<std::string>()) != kind_of(base)) {
    throw std::invalid_argument("parameter kind mismatch");
  }
  Params out = base;
  std::visit(
      [&](auto& q) {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, RainParams>) {
          read_field(j, "density", q.density);
          read_field(j, "length", q.length);
          read_field(j, "angle", q.angle);
          read_field(j, "drop_size", q.drop_size);
          read_field(j, "weight", q.weight);
          if (j.contains("blend")) {
            const auto b = j["blend"].get<std::string>();
            if (b == "literal") {
              q.blend = RainBlend::kLiteral;
            } else if (b == "additive") {
              q.blend = RainBlend::kAdditive;
            } else {
              throw std::invalid_argument("unknown rain blend mode: " + b);
            }
          }
        } else if constexpr (std::is_same_v<T, HazeParams>) {
          read_field(j, "t_min", q.t_min);
          read_field(j, "t_max", q.t_max);
          read_field(j, "color", q.color);
        } else if constexpr (std::is_same_v<T, BlurParams>) {
          read_field(j, "length", q.length);
          read_field(j, "angle", q.angle);
        } else if constexpr (std::is_same_v<T, NoiseParams>) {
          read_field(j, "sigma", q.sigma);
        } else {
          read_field(j, "compression", q.compression);
          read_field(j, "sigma", q.sigma);
        }
      },
      out);
  return out;
}

Params params_from_json(const json& j) {
  return merge_params(default_params(parse_kind(j.at("kind").get<std::string>())), j);
}

}  // namespace abair::degrade
