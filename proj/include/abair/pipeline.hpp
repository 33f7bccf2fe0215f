#pragma once

// Batch synthesis of degraded/clean training pairs: input filtering, per-item
// seed derivation, single-kind or CutMix degradation, PNG output and the
// manifest.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abair/cutmix.hpp"
#include "abair/degrade.hpp"
#include "abair/image.hpp"
#include "abair/manifest.hpp"
#include "json.hpp"

namespace abair::pipeline {

enum class DepthMode { kConstant, kVertical, kRadial };

// constant -> every pixel `value`; vertical -> 0 on the bottom row rising
// linearly to 1 on the top row; radial -> distance from the center divided
// by the largest such distance.
img::Image synthetic_depth(int height, int width, DepthMode mode, double value = 0.5);

struct DepthSource {
  enum class Type { kNone, kDirectory, kSynthetic };
  Type type = Type::kNone;
  std::filesystem::path directory;  // <stem>.png or <stem>.abwt inside
  DepthMode mode = DepthMode::kVertical;
  double value = 0.5;
};

// "synthetic:vertical", "synthetic:radial", "synthetic:constant[:<c>]",
// "dir:<path>", or a plain file path (returned as nullopt; load it directly).
std::optional<DepthSource> parse_depth_spec(const std::string& spec);

// Depth for an image of the given size. For directories, throws if no
// matching file exists or its size differs.
img::Image resolve_depth(const DepthSource& src, const std::string& stem, int height, int width);

struct QualityProxy {
  double min_grad_energy = 0.01;
};

struct PipelineConfig {
  std::uint64_t master_seed = 0;
  std::filesystem::path input_dir;
  std::filesystem::path output_dir;
  // Keys are kind names ("noise") for single degradations or "inside+outside"
  // ("rain+haze") for CutMix pairs.
  std::map<std::string, double> mix;
  double cutmix_fraction = 0.0;
  int min_short_edge = 400;
  QualityProxy quality;
  int threads = 1;
  DepthSource depth_source;
};

// Relative paths resolve against `base`.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
PipelineConfig load_config(const std::filesystem::path& path);
void validate(const PipelineConfig& config);

// ABAIR_THREADS, when set to a positive integer, wins over config.threads.
int effective_threads(const PipelineConfig& config);

// Mean gradient magnitude (forward differences) of the channel-mean image.
double gradient_energy(const img::Image& image);

struct FilterResult {
  std::vector<std::filesystem::path> accepted;
  std::vector<tensorio::Rejection> rejected;  // reason "resolution" or "quality"
};

// Scans `dir` for .png files in lexicographic order.
FilterResult filter_inputs(const std::filesystem::path& dir, const PipelineConfig& config);

// Result of one seeded single-kind degradation. Parameters come from
// Rng(seed), then `overrides` replace individual fields; the generator draws
// from Rng(derive_seed(seed, 0)). Replaying with the recorded parameters as
// overrides therefore reproduces the image exactly.
struct SingleResult {
  img::Image image;
  degrade::Params params;
};
SingleResult degrade_seeded(const img::Image& image, degrade::Kind kind, std::uint64_t seed,
                            const nlohmann::json* overrides = nullptr,
                            const img::Image* depth = nullptr);

// CutMix replay: draws everything from Rng(seed).
cutmix::CutmixResult cutmix_seeded(const img::Image& image, degrade::Kind inside,
                                   degrade::Kind outside, std::uint64_t seed,
                                   const img::Image* depth = nullptr);

// Converts grayscale input to RGB by replication.
img::Image to_rgb(const img::Image& image);

struct ItemPlan {
  std::vector<degrade::Kind> kinds;  // one kind, or {inside, outside} for CutMix
  bool cutmix = false;
  std::uint64_t seed = 0;  // seed handed to degrade_seeded / cutmix_seeded
};

// Per-item decisions, a pure function of (config, index).
ItemPlan plan_item(const PipelineConfig& config, std::uint64_t index);

// Runs the whole pipeline, writes `manifest.json` into output_dir and
// returns the manifest. Output is identical for any thread count.
tensorio::Manifest synthesize_dataset(const PipelineConfig& config);

}  // namespace abair::pipeline
