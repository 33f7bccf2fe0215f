#include "abair/cutmix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "abair/image_io.hpp"

namespace abair::cutmix {

using img::Image;
using nlohmann::json;

bool region_valid(const CutRegion& r, int height, int width) {
  if (!(0 <= r.x0 && r.x0 < r.x1 && r.x1 <= width)) return false;
  if (!(0 <= r.y0 && r.y0 < r.y1 && r.y1 <= height)) return false;
  const double frac = static_cast<double>(r.area()) / (static_cast<double>(height) * width);
  return frac >= kMinAreaFraction && frac <= kMaxAreaFraction;
}

namespace {

CutRegion centered_box(int height, int width, double lambda) {
  const int rw = std::clamp(static_cast<int>(std::lround(width * std::sqrt(lambda))), 1, width);
  const int rh = std::clamp(static_cast<int>(std::lround(height * std::sqrt(lambda))), 1, height);
  const int x0 = (width - rw) / 2;
  const int y0 = (height - rh) / 2;
  return {x0, y0, x0 + rw, y0 + rh};
}

}  // namespace

CutRegion sample_region(int height, int width, img::Rng& rng) {
  if (height < 4 || width < 4) throw std::invalid_argument("image too small for CutMix (< 4 px)");
  for (int attempt = 0; attempt < kMaxRegionAttempts; ++attempt) {
    const double lambda = img::sample_uniform(rng, kMinAreaFraction, kMaxAreaFraction);
    const double aspect = img::sample_uniform(rng, kMinAspect, kMaxAspect);
    const double cx = img::sample_uniform(rng, 0.0, width);
    const double cy = img::sample_uniform(rng, 0.0, height);
    const double rw = width * std::sqrt(lambda) * std::sqrt(aspect);
    const double rh = height * std::sqrt(lambda) / std::sqrt(aspect);
    CutRegion r;
    r.x0 = std::clamp(static_cast<int>(std::lround(cx - rw / 2)), 0, width);
    r.x1 = std::clamp(static_cast<int>(std::lround(cx + rw / 2)), 0, width);
    r.y0 = std::clamp(static_cast<int>(std::lround(cy - rh / 2)), 0, height);
    r.y1 = std::clamp(static_cast<int>(std::lround(cy + rh / 2)), 0, height);
    if (region_valid(r, height, width)) return r;
  }
  return centered_box(height, width, 0.5);
}

DegradationMap label_map(int height, int width, const CutRegion& region, std::uint8_t inside,
                         std::uint8_t outside) {
  DegradationMap m{height, width, {}};
  m.labels.assign(static_cast<std::size_t>(height) * width, outside);
  for (int r = region.y0; r < region.y1; ++r)
    for (int c = region.x0; c < region.x1; ++c)
      m.labels[static_cast<std::size_t>(r) * width + c] = inside;
  return m;
}

CutmixResult compose(const Image& image, const CutmixRecord& record, const Image* depth) {
  const auto kind_in = degrade::kind_of(record.inside);
  const auto kind_out = degrade::kind_of(record.outside);
  if (kind_in == kind_out) throw std::invalid_argument("CutMix needs two different degradations");
  if (!region_valid(record.region, image.height(), image.width())) {
    throw std::invalid_argument("CutMix region out of bounds");
  }

  img::Rng rng_in(record.inside_seed);
  img::Rng rng_out(record.outside_seed);
  const auto full_in = degrade::apply(image, record.inside, rng_in, depth);
  auto out = degrade::apply(image, record.outside, rng_out, depth);

  const int ch = image.channels();
  const auto& reg = record.region;
  for (int r = reg.y0; r < reg.y1; ++r)
    for (int c = reg.x0; c < reg.x1; ++c)
      for (int k = 0; k < ch; ++k) out.at(r, c, k) = full_in.at(r, c, k);

  return {std::move(out),
          label_map(image.height(), image.width(), reg, static_cast<std::uint8_t>(kind_in),
                    static_cast<std::uint8_t>(kind_out)),
          record};
}

CutmixResult degradation_cutmix(const Image& image, degrade::Kind inside, degrade::Kind outside,
                                const Image* depth, img::Rng& rng) {
  if (inside == outside) throw std::invalid_argument("CutMix needs two different degradations");
  if ((inside == degrade::Kind::kHaze || outside == degrade::Kind::kHaze) && !depth) {
    throw std::invalid_argument("haze requires a depth map");
  }
  CutmixRecord rec;
  rec.region = sample_region(image.height(), image.width(), rng);
  rec.inside = degrade::sample_params(inside, rng);
  rec.outside = degrade::sample_params(outside, rng);
  rec.inside_seed = rng.next();
  rec.outside_seed = rng.next();
  return compose(image, rec, depth);
}

json record_to_json(const CutmixRecord& r) {
  return {{"inside", degrade::params_to_json(r.inside)},
          {"outside", degrade::params_to_json(r.outside)},
          {"region", {{"x0", r.region.x0}, {"y0", r.region.y0}, {"x1", r.region.x1}, {"y1", r.region.y1}}},
          {"inside_seed", r.inside_seed},
          {"outside_seed", r.outside_seed}};
}

CutmixRecord record_from_json(const json& j) {
  CutmixRecord r;
  r.inside = degrade::params_from_json(j.at("inside"));
  r.outside = degrade::params_from_json(j.at("outside"));
  const auto& reg = j.at("region");
  r.region = {reg.at("x0").get<int>(), reg.at("y0").get<int>(), reg.at("x1").get<int>(),
              reg.at("y1").get<int>()};
  r.inside_seed = j.at("inside_seed").get<std::uint64_t>();
  r.outside_seed = j.at("outside_seed").get<std::uint64_t>();
  return r;
}

void encode_map_png(const DegradationMap& map, const std::filesystem::path& path) {
  img::write_gray8_png(path, {map.height, map.width, map.labels});
}

DegradationMap decode_map_png(const std::filesystem::path& path, int class_count) {
  auto g = img::read_gray8_png(path);
  for (auto v : g.values) {
    if (v >= class_count) {
      throw std::invalid_argument("label " + std::to_string(v) + " >= class count " +
                                  std::to_string(class_count) + " in " + path.string());
    }
  }
  return {g.height, g.width, std::move(g.values)};
}

}  // namespace abair::cutmix
