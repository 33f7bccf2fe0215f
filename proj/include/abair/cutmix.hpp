#pragma once

// Degradation CutMix: one degradation inside a random rectangle, another
// outside it, plus the per-pixel label map recording which is where.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "abair/degrade.hpp"
#include "abair/image.hpp"
#include "json.hpp"

namespace abair::cutmix {

// Clean plus the five base degradations; extension tasks take codes 6+.
inline constexpr int kDefaultClassCount = 6;

struct DegradationMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;  // row-major class codes

  std::uint8_t at(int row, int col) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
  bool operator==(const DegradationMap&) const = default;
};

// Half-open pixel bounds.
struct CutRegion {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  long area() const { return static_cast<long>(x1 - x0) * (y1 - y0); }
  bool contains(int row, int col) const { return col >= x0 && col < x1 && row >= y0 && row < y1; }
  bool operator==(const CutRegion&) const = default;
};

inline constexpr double kMinAreaFraction = 0.25;
inline constexpr double kMaxAreaFraction = 0.75;
inline constexpr double kMinAspect = 0.75;
inline constexpr double kMaxAspect = 1.333;
inline constexpr int kMaxRegionAttempts = 16;

bool region_valid(const CutRegion& r, int height, int width);

// CutMix-style box: lambda ~ U[0.25, 0.75], aspect a ~ U[0.75, 1.333],
// size (w sqrt(lambda a), h sqrt(lambda / a)) around a uniform center,
// clipped. Redrawn until the area fraction is in range; after 16 failures a
// centered box of half the area is returned.
CutRegion sample_region(int height, int width, img::Rng& rng);

// Everything needed to replay a composite.
struct CutmixRecord {
  degrade::Params inside;
  degrade::Params outside;
  CutRegion region;
  std::uint64_t inside_seed = 0;
  std::uint64_t outside_seed = 0;
};

struct CutmixResult {
  img::Image image;
  DegradationMap map;
  CutmixRecord record;
};

// Both degradations run on the full frame (each from its own seed) and are
// then masked, so convolutional kinds have no seam artifacts at the border.
CutmixResult compose(const img::Image& image, const CutmixRecord& record,
                     const img::Image* depth = nullptr);

// Draws region, inside params, outside params, then the two apply seeds
// from `rng`, and composes.
CutmixResult degradation_cutmix(const img::Image& image, degrade::Kind inside,
                                degrade::Kind outside, const img::Image* depth, img::Rng& rng);

DegradationMap label_map(int height, int width, const CutRegion& region, std::uint8_t inside,
                         std::uint8_t outside);

nlohmann::json record_to_json(const CutmixRecord& r);
CutmixRecord record_from_json(const nlohmann::json& j);

// 8-bit grayscale PNG holding raw class codes.
void encode_map_png(const DegradationMap& map, const std::filesystem::path& path);
// Throws std::invalid_argument when a code is >= class_count.
DegradationMap decode_map_png(const std::filesystem::path& path,
                              int class_count = kDefaultClassCount);

}  // namespace abair::cutmix
