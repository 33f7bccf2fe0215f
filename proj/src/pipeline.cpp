#include "abair/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "abair/image_io.hpp"

namespace abair::pipeline {

namespace fs = std::filesystem;
using img::Image;
using nlohmann::json;

Image synthetic_depth(int height, int width, DepthMode mode, double value) {
  Image d(height, width, 1);
  switch (mode) {
    case DepthMode::kConstant:
      for (auto& v : d.data()) v = value;
      break;
    case DepthMode::kVertical:
      for (int r = 0; r < height; ++r) {
        const double v = height > 1 ? static_cast<double>(height - 1 - r) / (height - 1) : 0.0;
        for (int c = 0; c < width; ++c) d.at(r, c) = v;
      }
      break;
    case DepthMode::kRadial: {
      const double cy = (height - 1) / 2.0;
      const double cx = (width - 1) / 2.0;
      const double far = std::hypot(cy, cx);
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
          d.at(r, c) = far > 0.0 ? std::hypot(r - cy, c - cx) / far : 0.0;
      break;
    }
  }
  return d;
}

std::optional<DepthSource> parse_depth_spec(const std::string& spec) {
  DepthSource src;
  if (spec.starts_with("dir:")) {
    src.type = DepthSource::Type::kDirectory;
    src.directory = spec.substr(4);
    return src;
  }
  if (!spec.starts_with("synthetic:")) return std::nullopt;
  src.type = DepthSource::Type::kSynthetic;
  const auto rest = spec.substr(10);
  if (rest == "vertical") {
    src.mode = DepthMode::kVertical;
  } else if (rest == "radial") {
    src.mode = DepthMode::kRadial;
  } else if (rest == "constant" || rest.starts_with("constant:")) {
    src.mode = DepthMode::kConstant;
    if (rest.size() > 9) src.value = std::stod(rest.substr(9));
  } else {
    throw std::invalid_argument("unknown synthetic depth mode: " + rest);
  }
  return src;
}

Image resolve_depth(const DepthSource& src, const std::string& stem, int height, int width) {
  switch (src.type) {
    case DepthSource::Type::kSynthetic:
      return synthetic_depth(height, width, src.mode, src.value);
    case DepthSource::Type::kDirectory: {
      for (const char* ext : {".png", ".abwt"}) {
        const auto p = src.directory / (stem + ext);
        if (!fs::exists(p)) continue;
        auto d = img::read_depth(p);
        if (d.height() != height || d.width() != width) {
          throw std::invalid_argument("depth map " + p.string() + " does not match image size");
        }
        return d;
      }
      throw std::invalid_argument("no depth map for " + stem + " in " + src.directory.string());
    }
    case DepthSource::Type::kNone: break;
  }
  throw std::invalid_argument("haze requires a depth source");
}

// ---------------------------------------------------------------------------

namespace {

DepthSource depth_from_json(const json& j, const fs::path& base) {
  if (j.is_string()) {
    auto src = parse_depth_spec(j.get<std::string>());
    if (!src) throw std::invalid_argument("bad depth_source: " + j.get<std::string>());
    if (src->type == DepthSource::Type::kDirectory && src->directory.is_relative()) {
      src->directory = base / src->directory;
    }
    return *src;
  }
  DepthSource src;
  if (j.contains("dir")) {
    src.type = DepthSource::Type::kDirectory;
    src.directory = j["dir"].get<std::string>();
    if (src.directory.is_relative()) src.directory = base / src.directory;
  } else if (j.contains("synthetic")) {
    src = *parse_depth_spec("synthetic:" + j["synthetic"].get<std::string>());
    if (j.contains("value")) src.value = j["value"].get<double>();
  } else {
    throw std::invalid_argument("depth_source needs \"dir\" or \"synthetic\"");
  }
  return src;
}

bool is_pair_key(const std::string& key) { return key.find('+') != std::string::npos; }

std::pair<degrade::Kind, degrade::Kind> parse_pair(const std::string& key) {
  const auto plus = key.find('+');
  return {degrade::parse_kind(key.substr(0, plus)), degrade::parse_kind(key.substr(plus + 1))};
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base) {
  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
  };
  c.master_seed = j.value("master_seed", std::uint64_t{0});
  c.input_dir = resolve(j.at("input_dir").get<std::string>());
  c.output_dir = resolve(j.at("output_dir").get<std::string>());
  c.mix = j.at("mix").get<std::map<std::string, double>>();
  c.cutmix_fraction = j.value("cutmix_fraction", 0.0);
  c.min_short_edge = j.value("min_short_edge", 400);
  c.threads = j.value("threads", 1);
  if (j.contains("quality")) {
    c.quality.min_grad_energy = j["quality"].value("min_grad_energy", c.quality.min_grad_energy);
  }
  if (j.contains("min_grad_energy")) c.quality.min_grad_energy = j["min_grad_energy"].get<double>();
  if (j.contains("depth_source") && !j["depth_source"].is_null()) {
    c.depth_source = depth_from_json(j["depth_source"], base);
  }
  validate(c);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path.string());
  return config_from_json(json::parse(f), path.parent_path());
}

void validate(const PipelineConfig& c) {
  double singles = 0.0;
  double pairs = 0.0;
  int positive_singles = 0;
  for (const auto& [key, w] : c.mix) {
    if (!(w >= 0.0)) throw std::invalid_argument("mix weight for " + key + " must be >= 0");
    if (is_pair_key(key)) {
      const auto [a, b] = parse_pair(key);
      if (a == b) throw std::invalid_argument("CutMix pair needs two different kinds: " + key);
      if (a == degrade::Kind::kClean || b == degrade::Kind::kClean) {
        throw std::invalid_argument("clean is not a degradation: " + key);
      }
      pairs += w;
    } else {
      if (degrade::parse_kind(key) == degrade::Kind::kClean) {
        throw std::invalid_argument("clean is not a degradation");
      }
      singles += w;
      if (w > 0.0) ++positive_singles;
    }
  }
  if (singles + pairs <= 0.0) throw std::invalid_argument("degradation mix weights are all zero");
  if (!(c.cutmix_fraction >= 0.0 && c.cutmix_fraction <= 1.0)) {
    throw std::invalid_argument("cutmix_fraction must be in [0, 1]");
  }
  if (c.cutmix_fraction < 1.0 && singles <= 0.0) {
    throw std::invalid_argument("mix has no single-degradation weight");
  }
  if (c.cutmix_fraction > 0.0 && pairs <= 0.0 && positive_singles < 2) {
    throw std::invalid_argument("CutMix needs a pair weight or two single kinds");
  }
  if (c.min_short_edge < 1) throw std::invalid_argument("min_short_edge must be >= 1");
  if (c.quality.min_grad_energy < 0.0) throw std::invalid_argument("min_grad_energy must be >= 0");
  if (c.threads < 1) throw std::invalid_argument("threads must be >= 1");
}

int effective_threads(const PipelineConfig& config) {
  if (const char* env = std::getenv("ABAIR_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<int>(n);
  }
  return config.threads;
}

// ---------------------------------------------------------------------------

double gradient_energy(const Image& image) {
  const int h = image.height();
  const int w = image.width();
  if (h < 2 || w < 2) return 0.0;
  const int ch = image.channels();
  std::vector<double> gray(image.pixels());
  for (std::size_t p = 0; p < gray.size(); ++p) {
    double s = 0.0;
    for (int c = 0; c < ch; ++c) s += image.data()[p * ch + c];
    gray[p] = s / ch;
  }
  double total = 0.0;
  for (int r = 0; r + 1 < h; ++r) {
    for (int c = 0; c + 1 < w; ++c) {
      const double v = gray[static_cast<std::size_t>(r) * w + c];
      const double gx = gray[static_cast<std::size_t>(r) * w + c + 1] - v;
      const double gy = gray[static_cast<std::size_t>(r + 1) * w + c] - v;
      total += std::sqrt(gx * gx + gy * gy);
    }
  }
  return total / (static_cast<double>(h - 1) * (w - 1));
}

FilterResult filter_inputs(const fs::path& dir, const PipelineConfig& config) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw std::runtime_error("cannot read input directory " + dir.string() + ": " + ec.message());
  std::vector<fs::path> files;
  for (const auto& entry : it) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  FilterResult result;
  for (const auto& path : files) {
    const auto info = img::read_png_info(path);
    if (std::min(info.height, info.width) < config.min_short_edge) {
      result.rejected.push_back({path.filename().string(), "resolution"});
      continue;
    }
    if (gradient_energy(img::read_png(path)) < config.quality.min_grad_energy) {
      result.rejected.push_back({path.filename().string(), "quality"});
      continue;
    }
    result.accepted.push_back(path);
  }
  return result;
}

// ---------------------------------------------------------------------------

Image to_rgb(const Image& image) {
  if (image.channels() == 3) return image;
  Image out(image.height(), image.width(), 3);
  for (std::size_t p = 0; p < image.pixels(); ++p)
    for (int c = 0; c < 3; ++c) out.data()[p * 3 + c] = image.data()[p];
  return out;
}

SingleResult degrade_seeded(const Image& image, degrade::Kind kind, std::uint64_t seed,
                            const json* overrides, const Image* depth) {
  img::Rng param_rng(seed);
  auto params = degrade::sample_params(kind, param_rng);
  if (overrides) params = degrade::merge_params(params, *overrides);
  img::Rng apply_rng(img::derive_seed(seed, 0));
  auto out = degrade::apply(image, params, apply_rng, depth);
  return {std::move(out), params};
}

cutmix::CutmixResult cutmix_seeded(const Image& image, degrade::Kind inside, degrade::Kind outside,
                                   std::uint64_t seed, const Image* depth) {
  img::Rng rng(seed);
  return cutmix::degradation_cutmix(image, inside, outside, depth, rng);
}

namespace {

template <typename Range>
std::size_t weighted_pick(img::Rng& rng, const Range& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = img::sample_uniform(rng, 0.0, total);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace

ItemPlan plan_item(const PipelineConfig& config, std::uint64_t index) {
  const auto item_seed = img::derive_seed(config.master_seed, index);
  img::Rng choice(img::derive_seed(item_seed, 0));

  std::vector<degrade::Kind> single_kinds;
  std::vector<double> single_weights;
  std::vector<std::pair<degrade::Kind, degrade::Kind>> pair_kinds;
  std::vector<double> pair_weights;
  double pair_total = 0.0;
  for (const auto& [key, w] : config.mix) {
    if (is_pair_key(key)) {
      pair_kinds.push_back(parse_pair(key));
      pair_weights.push_back(w);
      pair_total += w;
    } else {
      single_kinds.push_back(degrade::parse_kind(key));
      single_weights.push_back(w);
    }
  }

  ItemPlan plan;
  plan.seed = img::derive_seed(item_seed, 1);
  plan.cutmix = choice.next_unit() < config.cutmix_fraction;
  if (!plan.cutmix) {
    plan.kinds = {single_kinds[weighted_pick(choice, single_weights)]};
  } else if (pair_total > 0.0) {
    const auto [a, b] = pair_kinds[weighted_pick(choice, pair_weights)];
    plan.kinds = {a, b};
  } else {
    const auto first = weighted_pick(choice, single_weights);
    auto rest = single_weights;
    rest[first] = 0.0;
    plan.kinds = {single_kinds[first], single_kinds[weighted_pick(choice, rest)]};
  }
  return plan;
}

tensorio::Manifest synthesize_dataset(const PipelineConfig& config) {
  validate(config);
  auto filtered = filter_inputs(config.input_dir, config);
  if (filtered.accepted.empty()) throw std::runtime_error("no input images passed filtering");

  const std::size_t n = filtered.accepted.size();
  std::vector<ItemPlan> plans(n);
  bool any_cutmix = false;
  for (std::size_t i = 0; i < n; ++i) {
    plans[i] = plan_item(config, i);
    any_cutmix |= plans[i].cutmix;
    const bool haze = std::find(plans[i].kinds.begin(), plans[i].kinds.end(),
                                degrade::Kind::kHaze) != plans[i].kinds.end();
    if (haze && config.depth_source.type == DepthSource::Type::kNone) {
      throw std::invalid_argument("haze assigned to " + filtered.accepted[i].filename().string() +
                                  " but no depth_source configured");
    }
  }

  const auto& out = config.output_dir;
  fs::create_directories(out / "clean");
  fs::create_directories(out / "degraded");
  if (any_cutmix) fs::create_directories(out / "maps");

  std::vector<tensorio::ManifestEntry> entries(n);
  auto process = [&](std::size_t i) {
    const auto& path = filtered.accepted[i];
    const auto& plan = plans[i];
    const auto stem = path.stem().string();
    const auto image = to_rgb(img::read_png(path));

    std::optional<Image> depth;
    if (std::find(plan.kinds.begin(), plan.kinds.end(), degrade::Kind::kHaze) != plan.kinds.end()) {
      depth = resolve_depth(config.depth_source, stem, image.height(), image.width());
    }
    const Image* depth_ptr = depth ? &*depth : nullptr;

    tensorio::ManifestEntry e;
    e.clean_path = "clean/" + stem + ".png";
    e.degraded_path = "degraded/" + stem + ".png";
    e.seed = plan.seed;
    for (auto k : plan.kinds) e.degradations.emplace_back(degrade::kind_name(k));

    img::write_png(out / e.clean_path, image, 16);
    if (plan.cutmix) {
      auto res = cutmix_seeded(image, plan.kinds[0], plan.kinds[1], plan.seed, depth_ptr);
      e.map_path = "maps/" + stem + ".png";
      img::write_png(out / e.degraded_path, res.image, 16);
      cutmix::encode_map_png(res.map, out / *e.map_path);
      e.params = cutmix::record_to_json(res.record);
    } else {
      auto res = degrade_seeded(image, plan.kinds[0], plan.seed, nullptr, depth_ptr);
      img::write_png(out / e.degraded_path, res.image, 16);
      e.params = degrade::params_to_json(res.params);
    }
    entries[i] = std::move(e);
  };

  const std::size_t workers = std::min<std::size_t>(effective_threads(config), n);
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            process(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  tensorio::Manifest manifest{std::move(entries), std::move(filtered.rejected)};
  tensorio::write_manifest(out / "manifest.json", manifest);
  return manifest;
}

}  // namespace abair::pipeline
