#include <cstdlib>
#include <random>

#include "abair/image_io.hpp"
#include "abair/metrics.hpp"
#include "abair/pipeline.hpp"
#include "doctest.h"
#include "oracles.hpp"

namespace fs = std::filesystem;
namespace img = abair::img;
namespace dg = abair::degrade;
namespace pl = abair::pipeline;
using img::Image;

namespace {

fs::path make_corpus(const std::string& name, int count, int h, int w, std::uint64_t seed = 1) {
  const auto dir = oracle::scratch_dir(name);
  fs::create_directories(dir / "in");
  std::mt19937_64 gen(seed);
  for (int i = 0; i < count; ++i) {
    char file[32];
    std::snprintf(file, sizeof file, "img%03d.png", i);
    img::write_png(dir / "in" / file, oracle::textured_image(gen, h, w), 8);
  }
  return dir;
}

pl::PipelineConfig small_config(const fs::path& dir, std::map<std::string, double> mix) {
  pl::PipelineConfig c;
  c.master_seed = 2024;
  c.input_dir = dir / "in";
  c.output_dir = dir / "out";
  c.mix = std::move(mix);
  c.min_short_edge = 32;
  c.depth_source.type = pl::DepthSource::Type::kSynthetic;
  c.depth_source.mode = pl::DepthMode::kVertical;
  return c;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = oracle::read_file(e.path());
  return out;
}

}  // namespace

TEST_CASE("synthetic depth maps") {
  const auto v = pl::synthetic_depth(5, 3, pl::DepthMode::kVertical);
  CHECK(v.at(4, 1) == 0.0);
  CHECK(v.at(0, 2) == 1.0);
  CHECK(v.at(2, 0) == 0.5);
  const auto r = pl::synthetic_depth(5, 5, pl::DepthMode::kRadial);
  CHECK(r.at(2, 2) == 0.0);
  CHECK(r.at(0, 0) == doctest::Approx(1.0));
  CHECK(r.at(4, 4) == doctest::Approx(1.0));
  const auto c = pl::synthetic_depth(2, 2, pl::DepthMode::kConstant, 0.3);
  for (double x : c.data()) CHECK(x == 0.3);

  const auto spec = pl::parse_depth_spec("synthetic:constant:0.7");
  REQUIRE(spec);
  CHECK(spec->mode == pl::DepthMode::kConstant);
  CHECK(spec->value == 0.7);
  CHECK_FALSE(pl::parse_depth_spec("depth.png"));
  CHECK_THROWS(pl::parse_depth_spec("synthetic:spiral"));
}

TEST_CASE("input filtering") {
  const auto dir = oracle::scratch_dir("filter");
  std::mt19937_64 gen(4);
  img::write_png(dir / "a_small.png", oracle::textured_image(gen, 399, 600), 8);
  img::write_png(dir / "b_flat.png", Image(512, 512, 3, 0.5), 8);
  img::write_png(dir / "c_good.png", oracle::textured_image(gen, 512, 512), 8);
  { std::ofstream(dir / "notes.txt") << "ignored"; }

  pl::PipelineConfig c;
  const auto res = pl::filter_inputs(dir, c);
  REQUIRE(res.accepted.size() == 1);
  CHECK(res.accepted[0].filename() == "c_good.png");
  REQUIRE(res.rejected.size() == 2);
  CHECK(res.rejected[0].path == "a_small.png");
  CHECK(res.rejected[0].reason == "resolution");
  CHECK(res.rejected[1].path == "b_flat.png");
  CHECK(res.rejected[1].reason == "quality");

  CHECK(pl::gradient_energy(Image(8, 8, 3, 0.9)) == 0.0);
}

TEST_CASE("noise-only dataset hits the expected PSNR") {
  const auto dir = make_corpus("pipe_noise", 4, 64, 80);
  const auto c = small_config(dir, {{"noise", 1.0}});
  const auto m = pl::synthesize_dataset(c);
  REQUIRE(m.entries.size() == 4);
  CHECK_FALSE(fs::exists(c.output_dir / "maps"));
  for (const auto& e : m.entries) {
    CHECK(e.degradations == std::vector<std::string>{"noise"});
    CHECK_FALSE(e.map_path);
    const double sigma = e.params.at("sigma").get<double>();
    const double psnr = abair::metrics::psnr(img::read_png(c.output_dir / e.clean_path),
                                             img::read_png(c.output_dir / e.degraded_path));
    CHECK(std::abs(psnr - 20.0 * std::log10(255.0 / sigma)) <= 1.5);
  }
}

TEST_CASE("full mix: determinism, completeness, replay") {
  const auto dir = make_corpus("pipe_mix", 10, 48, 64, 7);
  auto c = small_config(dir, {{"rain", 1}, {"haze", 1}, {"noise", 1}, {"blur", 1}, {"lowlight", 1}});
  c.cutmix_fraction = 0.5;
  const auto m = pl::synthesize_dataset(c);
  const auto first = tree_bytes(c.output_dir);

  c.threads = 4;
  fs::remove_all(c.output_dir);
  pl::synthesize_dataset(c);
  CHECK(tree_bytes(c.output_dir) == first);

  std::size_t with_maps = 0;
  const auto manifest = abair::tensorio::read_manifest(c.output_dir / "manifest.json");
  CHECK(manifest.entries.size() == m.entries.size());
  for (const auto& e : m.entries) {
    CHECK(fs::exists(c.output_dir / e.clean_path));
    CHECK(fs::exists(c.output_dir / e.degraded_path));
    const auto clean = img::read_png(c.output_dir / e.clean_path);
    const auto depth = pl::synthetic_depth(clean.height(), clean.width(), pl::DepthMode::kVertical);
    Image replay;
    if (e.map_path) {
      ++with_maps;
      CHECK(e.degradations.size() == 2);
      const auto rec = abair::cutmix::record_from_json(e.params);
      const auto res = abair::cutmix::compose(clean, rec, &depth);
      replay = res.image;
      CHECK(abair::cutmix::decode_map_png(c.output_dir / *e.map_path) == res.map);
      // The recorded seed regenerates the same record.
      const auto again = pl::cutmix_seeded(clean, dg::parse_kind(e.degradations[0]),
                                           dg::parse_kind(e.degradations[1]), e.seed, &depth);
      CHECK(abair::cutmix::record_to_json(again.record) == e.params);
    } else {
      const auto res = pl::degrade_seeded(clean, dg::parse_kind(e.degradations[0]), e.seed,
                                          &e.params, &depth);
      replay = res.image;
    }
    const auto tmp = dir / "replay.png";
    img::write_png(tmp, replay, 16);
    CHECK(oracle::read_file(tmp) == oracle::read_file(c.output_dir / e.degraded_path));
  }
  CHECK(with_maps > 0);
  CHECK(with_maps < m.entries.size());
}

TEST_CASE("plan_item is a pure function of seed and index") {
  pl::PipelineConfig c;
  c.master_seed = 5;
  c.mix = {{"rain", 2}, {"blur", 1}, {"rain+noise", 1}};
  c.cutmix_fraction = 0.3;
  std::map<std::string, int> counts;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto a = pl::plan_item(c, i);
    const auto b = pl::plan_item(c, i);
    CHECK(a.kinds == b.kinds);
    CHECK(a.seed == b.seed);
    if (a.cutmix) {
      CHECK(a.kinds == std::vector<dg::Kind>{dg::Kind::kRain, dg::Kind::kNoise});
      ++counts["cutmix"];
    } else {
      ++counts[std::string(dg::kind_name(a.kinds[0]))];
    }
  }
  CHECK(counts["cutmix"] > 450);
  CHECK(counts["cutmix"] < 750);
  CHECK(counts["rain"] > counts["blur"]);
}

TEST_CASE("config parsing and validation") {
  const auto dir = oracle::scratch_dir("pipe_cfg");
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"master_seed": 9, "input_dir": "in", "output_dir": "/tmp/o", "mix": {"noise": 1, "blur": 1},
            "cutmix_fraction": 0.25, "threads": 3, "quality": {"min_grad_energy": 0.02},
            "depth_source": {"dir": "depth"}})";
  }
  const auto c = pl::load_config(dir / "cfg.json");
  CHECK(c.master_seed == 9);
  CHECK(c.input_dir == dir / "in");
  CHECK(c.output_dir == "/tmp/o");
  CHECK(c.cutmix_fraction == 0.25);
  CHECK(c.quality.min_grad_energy == 0.02);
  CHECK(c.depth_source.type == pl::DepthSource::Type::kDirectory);
  CHECK(c.depth_source.directory == dir / "depth");

  auto bad = [](std::map<std::string, double> mix, double frac = 0.0, int threads = 1) {
    pl::PipelineConfig x;
    x.mix = std::move(mix);
    x.cutmix_fraction = frac;
    x.threads = threads;
    return x;
  };
  CHECK_NOTHROW(pl::validate(bad({{"noise", 1}, {"blur", 1}}, 0.5)));
  CHECK_THROWS(pl::validate(bad({{"noise", 0}})));
  CHECK_THROWS(pl::validate(bad({{"noise", -1}, {"rain", 2}})));
  CHECK_THROWS(pl::validate(bad({{"clean", 1}})));
  CHECK_THROWS(pl::validate(bad({{"snow", 1}})));
  CHECK_THROWS(pl::validate(bad({{"rain+rain", 1}, {"noise", 1}}, 0.5)));
  CHECK_THROWS(pl::validate(bad({{"noise", 1}}, 1.5)));
  CHECK_THROWS(pl::validate(bad({{"noise", 1}}, 0.5)));  // no second kind for CutMix
  CHECK_THROWS(pl::validate(bad({{"noise", 1}}, 0.0, 0)));
}

TEST_CASE("haze without depth and empty inputs are errors") {
  const auto dir = make_corpus("pipe_err", 2, 40, 40);
  auto c = small_config(dir, {{"haze", 1}});
  c.depth_source = {};
  CHECK_THROWS_AS(pl::synthesize_dataset(c), std::invalid_argument);
  c = small_config(dir, {{"noise", 1}});
  c.min_short_edge = 1000;
  CHECK_THROWS_AS(pl::synthesize_dataset(c), std::runtime_error);
}

TEST_CASE("ABAIR_THREADS overrides the configured thread count") {
  pl::PipelineConfig c;
  c.threads = 2;
  ::unsetenv("ABAIR_THREADS");
  CHECK(pl::effective_threads(c) == 2);
  ::setenv("ABAIR_THREADS", "6", 1);
  CHECK(pl::effective_threads(c) == 6);
  ::setenv("ABAIR_THREADS", "zero", 1);
  CHECK(pl::effective_threads(c) == 2);
  ::unsetenv("ABAIR_THREADS");
}
