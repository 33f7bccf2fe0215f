#pragma once

// Parametric degradation generators: rain, haze, motion blur, AWGN and
// low-light. Every generator is pure, clamps its output to [0, 1], and takes
// its randomness from an explicit Rng.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "abair/image.hpp"
#include "json.hpp"

namespace abair::degrade {

// Codes double as label-map values.
enum class Kind : std::uint8_t {
  kClean = 0,
  kRain = 1,
  kHaze = 2,
  kNoise = 3,
  kBlur = 4,
  kLowLight = 5,
};

inline constexpr Kind kAllKinds[] = {Kind::kRain, Kind::kHaze, Kind::kNoise, Kind::kBlur,
                                     Kind::kLowLight};

std::string_view kind_name(Kind k);
Kind parse_kind(std::string_view name);  // throws std::invalid_argument

enum class RainBlend {
  kLiteral,   // w * img + (1 - w) * streaks
  kAdditive,  // img + w * streaks
};

struct RainParams {
  double density = 0.01;  // fraction of pixels seeding a drop
  double length = 30.0;   // streak length in pixels, rounded when rasterized
  double angle = 90.0;    // degrees
  int drop_size = 1;      // side of the square drop, pixels
  double weight = 0.8;
  RainBlend blend = RainBlend::kLiteral;
  bool operator==(const RainParams&) const = default;
};

struct HazeParams {
  double t_min = 0.3;    // haze amount at the nearest pixel
  double t_max = 0.8;    // haze amount at the farthest pixel
  double color = 170.0;  // airlight, 0-255 scale, achromatic
  bool operator==(const HazeParams&) const = default;
};

struct BlurParams {
  int length = 9;  // odd
  double angle = 0.0;
  bool operator==(const BlurParams&) const = default;
};

struct NoiseParams {
  double sigma = 25.0;  // 0-255 scale
  bool operator==(const NoiseParams&) const = default;
};

struct LowLightParams {
  double compression = 0.4;
  double sigma = 1.0;  // 0-255 scale
  bool operator==(const LowLightParams&) const = default;
};

using Params = std::variant<RainParams, HazeParams, BlurParams, NoiseParams, LowLightParams>;

Kind kind_of(const Params& p);

// Sampling ranges.
inline constexpr double kRainDensity[2] = {0.005, 0.02};
inline constexpr double kRainLength[2] = {25.0, 35.0};
inline constexpr double kRainAngle[2] = {70.0, 110.0};
inline constexpr int kRainDropSize[2] = {1, 3};
inline constexpr double kRainWeight[2] = {0.75, 1.0};
inline constexpr double kHazeMin[2] = {0.2, 0.4};
inline constexpr double kHazeMax[2] = {0.7, 0.9};
inline constexpr double kHazeColor[2] = {140.0, 200.0};
inline constexpr int kBlurLength[2] = {9, 35};
inline constexpr double kBlurAngle[2] = {0.0, 360.0};
inline constexpr double kNoiseSigma[2] = {15.0, 50.0};
inline constexpr double kLowLightCompression[2] = {0.25, 0.5};
inline constexpr double kLowLightSigma[2] = {0.5, 1.5};

img::Image apply_rain(const img::Image& image, const RainParams& p, img::Rng& rng);

// Streak layer before blending: drop mask convolved with the motion kernel
// and divided by its maximum. Single channel.
img::Image rain_streaks(int height, int width, const RainParams& p, img::Rng& rng);

// `depth` is single channel, larger = farther.
img::Image apply_haze(const img::Image& image, const img::Image& depth, const HazeParams& p);

// Per-pixel transmission for `depth` under `p`: 1 - (t_min + norm(depth) * (t_max - t_min)).
img::Image haze_transmission(const img::Image& depth, const HazeParams& p);

// out = T * img + (1 - T) * color / 255
img::Image apply_transmission(const img::Image& image, const img::Image& transmission,
                              double color);

img::Image apply_blur(const img::Image& image, const BlurParams& p);
img::Image apply_noise(const img::Image& image, const NoiseParams& p, img::Rng& rng);
img::Image apply_lowlight(const img::Image& image, const LowLightParams& p, img::Rng& rng);

// Dispatch on the parameter type. `depth` is required for haze.
img::Image apply(const img::Image& image, const Params& p, img::Rng& rng,
                 const img::Image* depth = nullptr);

// Draws every field uniformly from its range, in declaration order.
Params sample_params(Kind kind, img::Rng& rng);

nlohmann::json params_to_json(const Params& p);
Params params_from_json(const nlohmann::json& j);
// Fields present in `overrides` replace those of `base`; the kind must match.
Params merge_params(const Params& base, const nlohmann::json& overrides);

}  // namespace abair::degrade
