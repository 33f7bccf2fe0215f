#include <sys/wait.h>

#include <cstdio>
#include <random>

#include "abair/adapters.hpp"
#include "abair/estimator.hpp"
#include "abair/image_io.hpp"
#include "abair/pipeline.hpp"
#include "abair/tensorio.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const fs::path& dir, const std::string& args) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + ABAIR_CLI_PATH + "\" " + args + " 2>\"" + err_path.string() + "\"";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = oracle::read_file(err_path);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("metrics on identical images") {
  const auto dir = oracle::scratch_dir("cli_metrics");
  std::mt19937_64 gen(1);
  abair::img::write_png(dir / "a.png", oracle::textured_image(gen, 32, 32), 8);
  const auto r = run(dir, "metrics " + q(dir / "a.png") + " " + q(dir / "a.png"));
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["psnr"] == "inf");
  CHECK(j["ssim"] == 1.0);
  CHECK(r.out.find('\n') == r.out.size() - 1);
}

TEST_CASE("degrade prints replayable parameters") {
  const auto dir = oracle::scratch_dir("cli_degrade");
  std::mt19937_64 gen(2);
  abair::img::write_png(dir / "in.png", oracle::textured_image(gen, 40, 48), 8);
  const auto r = run(dir, "degrade --kind blur --seed 17 " + q(dir / "in.png") + " " + q(dir / "out.png"));
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["kind"] == "blur");
  CHECK(j["seed"] == 17);
  CHECK(j["params"]["length"].get<int>() % 2 == 1);

  const auto again = run(dir, "degrade --kind blur --seed 99 --params '" + j["params"].dump() + "' " +
                                  q(dir / "in.png") + " " + q(dir / "out2.png"));
  REQUIRE(again.code == 0);
  CHECK(json::parse(again.out)["params"] == j["params"]);

  // Haze with a synthetic depth works; without one it is an error.
  CHECK(run(dir, "degrade --kind haze --seed 1 --depth synthetic:radial " + q(dir / "in.png") + " " +
                     q(dir / "h.png")).code == 0);
  const auto fail = run(dir, "degrade --kind haze --seed 1 " + q(dir / "in.png") + " " + q(dir / "h2.png"));
  CHECK(fail.code == 1);
  const auto e = json::parse(fail.err);
  CHECK(e["command"] == "degrade");
  CHECK(e.contains("error"));
}

TEST_CASE("cutmix writes image and label map") {
  const auto dir = oracle::scratch_dir("cli_cutmix");
  std::mt19937_64 gen(3);
  abair::img::write_png(dir / "in.png", oracle::textured_image(gen, 40, 40), 8);
  const auto r = run(dir, "cutmix --kinds rain,noise --seed 5 " + q(dir / "in.png") + " " +
                              q(dir / "out.png") + " " + q(dir / "map.png"));
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  const auto rec = abair::cutmix::record_from_json(j["record"]);
  const auto map = abair::cutmix::decode_map_png(dir / "map.png");
  CHECK(map == abair::cutmix::label_map(40, 40, rec.region, 1, 3));
  CHECK(run(dir, "cutmix --kinds rain,rain --seed 5 " + q(dir / "in.png") + " " + q(dir / "o.png") +
                     " " + q(dir / "m.png")).code == 1);
}

TEST_CASE("blend: one-hot SW is byte-identical to select") {
  const auto dir = oracle::scratch_dir("cli_blend");
  std::mt19937_64 gen(4);
  const auto bank = oracle::random_bank(gen, {{12, 8}, {6, 10}}, 2, {0, 1, 2, 3, 4});
  abair::tensorio::write_tensors(dir / "bank.abwt", abair::adapters::bank_to_tensors(bank));
  const auto a = run(dir, "blend --bank " + q(dir / "bank.abwt") + " --probs 0,0,1,0,0 --policy sw --out " + q(dir / "sw.abwt"));
  const auto b = run(dir, "blend --bank " + q(dir / "bank.abwt") + " --policy select:2 --threads 3 --out " + q(dir / "sel.abwt"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(oracle::read_file(dir / "sw.abwt") == oracle::read_file(dir / "sel.abwt"));
  CHECK(json::parse(a.out)["layers"] == 2);

  const auto bad = run(dir, "blend --bank " + q(dir / "bank.abwt") + " --probs 0.5,0.5 --policy sw --out " + q(dir / "x.abwt"));
  CHECK(bad.code == 1);
  CHECK(json::parse(bad.err)["command"] == "blend");
}

TEST_CASE("estimate and restore-weights") {
  const auto dir = oracle::scratch_dir("cli_estimate");
  std::mt19937_64 gen(5);
  const auto net = oracle::random_net(gen, 3, {4, 6}, 5);
  abair::tensorio::write_tensors(dir / "net.abwt", abair::estimator::net_to_tensors(net));
  abair::img::write_png(dir / "x.png", oracle::textured_image(gen, 32, 40), 8);
  const auto bank = oracle::random_bank(gen, {{5, 5}}, 1, {0, 1, 2, 3, 4});
  abair::tensorio::write_tensors(dir / "bank.abwt", abair::adapters::bank_to_tensors(bank));

  const auto r = run(dir, "estimate --net " + q(dir / "net.abwt") + " --policy oh " + q(dir / "x.png"));
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  double s = 0.0;
  for (double p : j["probs"]) s += p;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  const auto policy = j["policy"].get<std::vector<double>>();
  CHECK(std::count(policy.begin(), policy.end(), 1.0) == 1);

  const auto rw = run(dir, "restore-weights --net " + q(dir / "net.abwt") + " --bank " +
                               q(dir / "bank.abwt") + " --policy oh " + q(dir / "x.png") + " --out " +
                               q(dir / "w.abwt"));
  REQUIRE(rw.code == 0);
  const auto best = static_cast<int>(std::max_element(policy.begin(), policy.end()) - policy.begin());
  const auto sel = run(dir, "blend --bank " + q(dir / "bank.abwt") + " --policy select:" +
                                std::to_string(best) + " --out " + q(dir / "s.abwt"));
  REQUIRE(sel.code == 0);
  CHECK(oracle::read_file(dir / "w.abwt") == oracle::read_file(dir / "s.abwt"));
}

TEST_CASE("pipeline subcommand and argument errors") {
  const auto dir = oracle::scratch_dir("cli_pipeline");
  fs::create_directories(dir / "in");
  std::mt19937_64 gen(6);
  for (int i = 0; i < 3; ++i)
    abair::img::write_png(dir / "in" / ("p" + std::to_string(i) + ".png"), oracle::textured_image(gen, 40, 40), 8);
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"master_seed": 1, "input_dir": "in", "output_dir": "out", "mix": {"noise": 1, "blur": 1},
            "min_short_edge": 16, "cutmix_fraction": 0.5})";
  }
  const auto r = run(dir, "pipeline --config " + q(dir / "cfg.json"));
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["accepted"] == 3);
  CHECK(fs::exists(dir / "out" / "manifest.json"));

  CHECK(run(dir, "frobnicate").code == 2);
  CHECK(run(dir, "metrics onlyone.png").code == 2);
  const auto missing = run(dir, "metrics " + q(dir / "nope.png") + " " + q(dir / "nope.png"));
  CHECK(missing.code == 1);
  CHECK(json::parse(missing.err)["command"] == "metrics");
}
