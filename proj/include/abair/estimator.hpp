#pragma once

// Inference for the lightweight degradation estimator: N blocks of
// conv3x3 (pad 1) -> batchnorm (running stats) -> ReLU -> maxpool 2x2,
// then global average pooling and a linear head.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "abair/image.hpp"
#include "abair/tensorio.hpp"

namespace abair::estimator {

inline constexpr int kDefaultWidths[] = {40, 80, 160, 256};
inline constexpr double kDefaultBnEps = 1e-5;

struct ConvBlock {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<float> weight;  // out x in x 3 x 3
  std::vector<float> bias;    // out
  std::vector<float> gamma, beta, mean, var;  // out each
  double eps = kDefaultBnEps;
};

struct EstimatorNet {
  std::vector<ConvBlock> blocks;
  int n_classes = 0;
  std::vector<float> head_weight;  // n_classes x final channels
  std::vector<float> head_bias;    // n_classes

  int input_channels() const { return blocks.empty() ? 0 : blocks.front().in_channels; }
  int final_channels() const { return blocks.empty() ? 0 : blocks.back().out_channels; }
  std::size_t parameter_count() const;
};

class EstimatorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void validate(const EstimatorNet& net);

// Net of the given widths with every parameter zero, batchnorm as identity.
EstimatorNet make_net(int in_channels, std::span<const int> widths, int n_classes);

// Minimum side length the net accepts: one 2x2 pooling per block.
int min_input_size(const EstimatorNet& net);

std::vector<double> forward(const EstimatorNet& net, const img::Image& image);

// Stable softmax; throws on NaN.
std::vector<double> softmax(std::span<const double> logits);

enum class PolicyMode { kOneHot, kSoftWeights };

// SW: p unchanged. OH: one-hot at argmax, ties to the lowest index.
std::vector<double> policy_vector(std::span<const double> p, PolicyMode mode);

// ABWT names: block<i>.conv.{w,b}, block<i>.bn.{gamma,beta,mean,var}
// (optional block<i>.bn.eps), head.w, head.b, meta.n_classes.
EstimatorNet net_from_tensors(std::span<const tensorio::NamedTensor> tensors);
std::vector<tensorio::NamedTensor> net_to_tensors(const EstimatorNet& net);

}  // namespace abair::estimator
