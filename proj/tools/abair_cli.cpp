// abair: degradation synthesis, adapter blending, estimator inference and
// image metrics from the command line. Every subcommand prints one line of
// JSON with sorted keys; failures print {"command":..,"error":..} to stderr
// and exit nonzero.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "abair/adapters.hpp"
#include "abair/cutmix.hpp"
#include "abair/degrade.hpp"
#include "abair/estimator.hpp"
#include "abair/image_io.hpp"
#include "abair/metrics.hpp"
#include "abair/pipeline.hpp"
#include "abair/tensorio.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::optional<abair::img::Image> load_depth(const std::string& spec, const std::string& stem,
                                            int height, int width) {
  if (spec.empty()) return std::nullopt;
  if (auto src = abair::pipeline::parse_depth_spec(spec)) {
    return abair::pipeline::resolve_depth(*src, stem, height, width);
  }
  return abair::img::read_depth(spec);
}

std::vector<double> parse_probs(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad probability: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty probability list");
  return out;
}

json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

abair::estimator::PolicyMode parse_mode(const std::string& s) {
  if (s == "oh") return abair::estimator::PolicyMode::kOneHot;
  if (s == "sw") return abair::estimator::PolicyMode::kSoftWeights;
  throw std::invalid_argument("policy must be oh or sw, got " + s);
}

void print(const json& j) { std::cout << j.dump() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic degradations, adapter blending and restoration metrics"};
  app.require_subcommand(1);

  // degrade
  std::string kind_name, params_text, depth_spec, in_path, out_path, map_path;
  std::uint64_t seed = 0;
  auto* degrade_cmd = app.add_subcommand("degrade", "Apply one seeded degradation to an image");
  degrade_cmd->add_option("--kind", kind_name, "rain|haze|noise|blur|lowlight")->required();
  degrade_cmd->add_option("--seed", seed, "Seed for parameter sampling and noise")->required();
  degrade_cmd->add_option("--params", params_text, "JSON object overriding sampled parameters");
  degrade_cmd->add_option("--depth", depth_spec, "Depth map (PNG/ABWT) or synthetic:<mode>");
  degrade_cmd->add_option("IN", in_path)->required();
  degrade_cmd->add_option("OUT", out_path)->required();

  // cutmix
  std::string kinds_text;
  auto* cutmix_cmd = app.add_subcommand("cutmix", "Degradation CutMix of one image");
  cutmix_cmd->add_option("--kinds", kinds_text, "inside,outside")->required();
  cutmix_cmd->add_option("--seed", seed)->required();
  cutmix_cmd->add_option("--depth", depth_spec, "Depth map (PNG/ABWT) or synthetic:<mode>");
  cutmix_cmd->add_option("IN", in_path)->required();
  cutmix_cmd->add_option("OUT", out_path)->required();
  cutmix_cmd->add_option("MAP", map_path)->required();

  // pipeline
  std::string config_path;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Synthesize a dataset from a JSON config");
  pipeline_cmd->add_option("--config", config_path)->required();

  // blend
  std::string bank_path, probs_text, policy_text, net_path;
  int threads = 1;
  auto* blend_cmd = app.add_subcommand("blend", "Blend task adapters into base weights");
  blend_cmd->add_option("--bank", bank_path)->required();
  blend_cmd->add_option("--probs", probs_text, "Comma-separated task probabilities");
  blend_cmd->add_option("--policy", policy_text, "oh|sw|sum|avg|select:<task>")->required();
  blend_cmd->add_option("--out", out_path)->required();
  blend_cmd->add_option("--threads", threads);

  // estimate
  std::string mode_text = "sw";
  auto* estimate_cmd = app.add_subcommand("estimate", "Run the degradation estimator");
  estimate_cmd->add_option("--net", net_path)->required();
  estimate_cmd->add_option("--policy", mode_text, "oh|sw");
  estimate_cmd->add_option("IMG", in_path)->required();

  // restore-weights
  auto* restore_cmd =
      app.add_subcommand("restore-weights", "Estimator probabilities -> policy -> blended weights");
  restore_cmd->add_option("--net", net_path)->required();
  restore_cmd->add_option("--bank", bank_path)->required();
  restore_cmd->add_option("--policy", mode_text, "oh|sw")->required();
  restore_cmd->add_option("IMG", in_path)->required();
  restore_cmd->add_option("--out", out_path)->required();

  // metrics
  std::string a_path, b_path;
  auto* metrics_cmd = app.add_subcommand("metrics", "PSNR and SSIM (RGB) between two images");
  metrics_cmd->add_option("A", a_path)->required();
  metrics_cmd->add_option("B", b_path)->required();

  std::string command = "abair";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"command", command}, {"error", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    namespace img = abair::img;
    namespace dg = abair::degrade;
    if (*degrade_cmd) {
      command = "degrade";
      const auto kind = dg::parse_kind(kind_name);
      const auto image = abair::pipeline::to_rgb(img::read_png(in_path));
      const auto depth = load_depth(depth_spec, fs::path(in_path).stem().string(), image.height(),
                                    image.width());
      std::optional<json> overrides;
      if (!params_text.empty()) overrides = json::parse(params_text);
      const auto res = abair::pipeline::degrade_seeded(image, kind, seed,
                                                       overrides ? &*overrides : nullptr,
                                                       depth ? &*depth : nullptr);
      img::write_png(out_path, res.image, 16);
      print({{"kind", kind_name}, {"seed", seed}, {"params", dg::params_to_json(res.params)}});
    } else if (*cutmix_cmd) {
      command = "cutmix";
      const auto comma = kinds_text.find(',');
      if (comma == std::string::npos) throw std::invalid_argument("--kinds expects inside,outside");
      const auto inside = dg::parse_kind(kinds_text.substr(0, comma));
      const auto outside = dg::parse_kind(kinds_text.substr(comma + 1));
      const auto image = abair::pipeline::to_rgb(img::read_png(in_path));
      const auto depth = load_depth(depth_spec, fs::path(in_path).stem().string(), image.height(),
                                    image.width());
      const auto res =
          abair::pipeline::cutmix_seeded(image, inside, outside, seed, depth ? &*depth : nullptr);
      img::write_png(out_path, res.image, 16);
      abair::cutmix::encode_map_png(res.map, map_path);
      print({{"seed", seed}, {"record", abair::cutmix::record_to_json(res.record)}});
    } else if (*pipeline_cmd) {
      command = "pipeline";
      const auto config = abair::pipeline::load_config(config_path);
      const auto manifest = abair::pipeline::synthesize_dataset(config);
      print({{"accepted", manifest.entries.size()},
             {"rejected", manifest.rejected.size()},
             {"manifest", (config.output_dir / "manifest.json").string()}});
    } else if (*blend_cmd) {
      command = "blend";
      const auto tensors = abair::tensorio::read_tensors(bank_path);
      const auto bank = abair::adapters::bank_from_tensors(tensors);
      const auto policy = abair::adapters::parse_policy(policy_text);
      const auto probs = probs_text.empty() ? std::vector<double>{} : parse_probs(probs_text);
      const auto blended = abair::adapters::blend_bank(bank, probs, policy, threads);
      const auto out = abair::adapters::blended_to_tensors(bank, blended);
      abair::tensorio::write_tensors(out_path, out);
      print({{"layers", blended.size()}, {"out", out_path}, {"policy", policy_text}});
    } else if (*estimate_cmd) {
      command = "estimate";
      const auto net = abair::estimator::net_from_tensors(abair::tensorio::read_tensors(net_path));
      auto image = img::read_png(in_path);
      if (net.input_channels() == 3) image = abair::pipeline::to_rgb(image);
      const auto logits = abair::estimator::forward(net, image);
      const auto probs = abair::estimator::softmax(logits);
      const auto policy = abair::estimator::policy_vector(probs, parse_mode(mode_text));
      print({{"logits", logits}, {"mode", mode_text}, {"policy", policy}, {"probs", probs}});
    } else if (*restore_cmd) {
      command = "restore-weights";
      const auto net = abair::estimator::net_from_tensors(abair::tensorio::read_tensors(net_path));
      const auto bank =
          abair::adapters::bank_from_tensors(abair::tensorio::read_tensors(bank_path));
      if (static_cast<std::size_t>(net.n_classes) != bank.tasks.size()) {
        throw std::invalid_argument("estimator has " + std::to_string(net.n_classes) +
                                    " classes but bank has " + std::to_string(bank.tasks.size()) +
                                    " tasks");
      }
      auto image = img::read_png(in_path);
      if (net.input_channels() == 3) image = abair::pipeline::to_rgb(image);
      const auto probs = abair::estimator::softmax(abair::estimator::forward(net, image));
      const auto mode = parse_mode(mode_text);
      const auto policy = abair::estimator::policy_vector(probs, mode);
      // The policy vector is already one-hot under OH, so SW blending of it is exact.
      const auto blended =
          abair::adapters::blend_bank(bank, policy, abair::adapters::BlendPolicy::soft_weights());
      abair::tensorio::write_tensors(out_path, abair::adapters::blended_to_tensors(bank, blended));
      print({{"mode", mode_text}, {"out", out_path}, {"policy", policy}, {"probs", probs}});
    } else if (*metrics_cmd) {
      command = "metrics";
      const auto a = img::read_png(a_path);
      const auto b = img::read_png(b_path);
      print({{"psnr", number_or_inf(abair::metrics::psnr(a, b))},
             {"ssim", abair::metrics::ssim(a, b)}});
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"command", command}, {"error", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
