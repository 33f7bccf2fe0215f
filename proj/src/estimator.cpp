#include "abair/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace abair::estimator {

std::size_t EstimatorNet::parameter_count() const {
  // Trainable parameters only; running statistics are buffers.
  std::size_t n = head_weight.size() + head_bias.size();
  for (const auto& b : blocks) n += b.weight.size() + b.bias.size() + b.gamma.size() + b.beta.size();
  return n;
}

void validate(const EstimatorNet& net) {
  if (net.blocks.empty()) throw EstimatorError("estimator has no conv blocks");
  if (net.n_classes < 1) throw EstimatorError("estimator needs at least one class");
  int in = net.blocks.front().in_channels;
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    const auto& b = net.blocks[i];
    const auto tag = "block" + std::to_string(i);
    if (b.in_channels != in || b.in_channels < 1 || b.out_channels < 1) {
      throw EstimatorError(tag + ": input channels do not chain from the previous block");
    }
    const auto out = static_cast<std::size_t>(b.out_channels);
    if (b.weight.size() != out * b.in_channels * 9) throw EstimatorError(tag + ": conv weight must be out x in x 3 x 3");
    if (b.bias.size() != out || b.gamma.size() != out || b.beta.size() != out ||
        b.mean.size() != out || b.var.size() != out) {
      throw EstimatorError(tag + ": per-channel tensor length mismatch");
    }
    for (float v : b.var) {
      if (!(v > 0.0f)) throw EstimatorError(tag + ": batchnorm running_var must be > 0");
    }
    if (!(b.eps >= 0.0)) throw EstimatorError(tag + ": batchnorm eps must be >= 0");
    in = b.out_channels;
  }
  if (net.head_weight.size() != static_cast<std::size_t>(net.n_classes) * in ||
      net.head_bias.size() != static_cast<std::size_t>(net.n_classes)) {
    throw EstimatorError("head must be n_classes x final channels");
  }
}

EstimatorNet make_net(int in_channels, std::span<const int> widths, int n_classes) {
  EstimatorNet net;
  int in = in_channels;
  for (int w : widths) {
    ConvBlock b;
    b.in_channels = in;
    b.out_channels = w;
    const auto out = static_cast<std::size_t>(w);
    b.weight.assign(out * in * 9, 0.0f);
    b.bias.assign(out, 0.0f);
    b.gamma.assign(out, 1.0f);
    b.beta.assign(out, 0.0f);
    b.mean.assign(out, 0.0f);
    b.var.assign(out, 1.0f);
    net.blocks.push_back(std::move(b));
    in = w;
  }
  net.n_classes = n_classes;
  net.head_weight.assign(static_cast<std::size_t>(n_classes) * in, 0.0f);
  net.head_bias.assign(n_classes, 0.0f);
  return net;
}

int min_input_size(const EstimatorNet& net) { return 1 << net.blocks.size(); }

namespace {

// Planar activations: channel-major, then rows.
struct Activation {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  double* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
  const double* plane(int c) const {
    return data.data() + static_cast<std::size_t>(c) * height * width;
  }
};

Activation conv_bn_relu(const Activation& x, const ConvBlock& b) {
  const int h = x.height;
  const int w = x.width;
  Activation y{b.out_channels, h, w,
               std::vector<double>(static_cast<std::size_t>(b.out_channels) * h * w)};
  for (int o = 0; o < b.out_channels; ++o) {
    double* dst = y.plane(o);
    std::fill(dst, dst + static_cast<std::size_t>(h) * w, static_cast<double>(b.bias[o]));
    for (int i = 0; i < b.in_channels; ++i) {
      const double* src = x.plane(i);
      const float* k = &b.weight[(static_cast<std::size_t>(o) * b.in_channels + i) * 9];
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wt = k[ky * 3 + kx];
          if (wt == 0.0) continue;
          const int dy = ky - 1;
          const int dx = kx - 1;
          const int c_lo = std::max(0, -dx);
          const int c_hi = std::min(w, w - dx);
          for (int r = std::max(0, -dy); r < std::min(h, h - dy); ++r) {
            const double* s = src + static_cast<std::size_t>(r + dy) * w + dx;
            double* d = dst + static_cast<std::size_t>(r) * w;
            for (int c = c_lo; c < c_hi; ++c) d[c] += wt * s[c];
          }
        }
      }
    }
    const double scale = b.gamma[o] / std::sqrt(static_cast<double>(b.var[o]) + b.eps);
    const double mean = b.mean[o];
    const double beta = b.beta[o];
    for (std::size_t n = 0; n < static_cast<std::size_t>(h) * w; ++n) {
      dst[n] = std::max(0.0, (dst[n] - mean) * scale + beta);
    }
  }
  return y;
}

Activation max_pool2(const Activation& x) {
  const int h = x.height / 2;
  const int w = x.width / 2;
  Activation y{x.channels, h, w, std::vector<double>(static_cast<std::size_t>(x.channels) * h * w)};
  for (int c = 0; c < x.channels; ++c) {
    const double* src = x.plane(c);
    double* dst = y.plane(c);
    for (int r = 0; r < h; ++r) {
      const double* r0 = src + static_cast<std::size_t>(2 * r) * x.width;
      const double* r1 = r0 + x.width;
      for (int col = 0; col < w; ++col) {
        dst[static_cast<std::size_t>(r) * w + col] =
            std::max(std::max(r0[2 * col], r0[2 * col + 1]), std::max(r1[2 * col], r1[2 * col + 1]));
      }
    }
  }
  return y;
}

}  // namespace

std::vector<double> forward(const EstimatorNet& net, const img::Image& image) {
  validate(net);
  if (image.channels() != net.input_channels()) {
    throw EstimatorError("image has " + std::to_string(image.channels()) +
                         " channels, estimator expects " + std::to_string(net.input_channels()));
  }
  const int min_side = min_input_size(net);
  if (image.height() < min_side || image.width() < min_side) {
    throw EstimatorError("image smaller than " + std::to_string(min_side) + "x" +
                         std::to_string(min_side));
  }

  Activation x{image.channels(), image.height(), image.width(),
               std::vector<double>(image.size())};
  for (int c = 0; c < image.channels(); ++c) {
    double* dst = x.plane(c);
    for (std::size_t p = 0; p < image.pixels(); ++p) dst[p] = image.data()[p * image.channels() + c];
  }
  for (const auto& block : net.blocks) x = max_pool2(conv_bn_relu(x, block));

  const int ch = x.channels;
  std::vector<double> pooled(ch);
  const double area = static_cast<double>(x.height) * x.width;
  for (int c = 0; c < ch; ++c) {
    double s = 0.0;
    const double* p = x.plane(c);
    for (std::size_t i = 0; i < static_cast<std::size_t>(x.height) * x.width; ++i) s += p[i];
    pooled[c] = s / area;
  }
  std::vector<double> logits(net.n_classes);
  for (int n = 0; n < net.n_classes; ++n) {
    double s = net.head_bias[n];
    for (int c = 0; c < ch; ++c) s += net.head_weight[static_cast<std::size_t>(n) * ch + c] * pooled[c];
    logits[n] = s;
  }
  return logits;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw EstimatorError("softmax of empty vector");
  double peak = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (std::isnan(z)) throw EstimatorError("softmax input contains NaN");
    peak = std::max(peak, z);
  }
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> policy_vector(std::span<const double> p, PolicyMode mode) {
  std::vector<double> out(p.begin(), p.end());
  if (mode == PolicyMode::kSoftWeights || p.empty()) return out;
  const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  std::fill(out.begin(), out.end(), 0.0);
  out[best] = 1.0;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const tensorio::NamedTensor& require(std::span<const tensorio::NamedTensor> tensors,
                                     const std::string& name) {
  const auto* t = tensorio::find_tensor(tensors, name);
  if (!t) throw EstimatorError("estimator weights missing tensor " + name);
  return *t;
}

std::vector<float> floats(const tensorio::NamedTensor& t) {
  if (const auto* v = std::get_if<std::vector<float>>(&t.data)) return *v;
  const auto d = t.as_doubles();
  return std::vector<float>(d.begin(), d.end());
}

}  // namespace

EstimatorNet net_from_tensors(std::span<const tensorio::NamedTensor> tensors) {
  EstimatorNet net;
  net.n_classes = static_cast<int>(std::lround(require(tensors, "meta.n_classes").as_doubles().at(0)));
  for (int i = 0;; ++i) {
    const auto prefix = "block" + std::to_string(i) + ".";
    const auto* w = tensorio::find_tensor(tensors, prefix + "conv.w");
    if (!w) break;
    if (w->dims.size() != 4 || w->dims[2] != 3 || w->dims[3] != 3) {
      throw EstimatorError(prefix + "conv.w must have dims [out, in, 3, 3]");
    }
    ConvBlock b;
    b.out_channels = static_cast<int>(w->dims[0]);
    b.in_channels = static_cast<int>(w->dims[1]);
    b.weight = floats(*w);
    b.bias = floats(require(tensors, prefix + "conv.b"));
    b.gamma = floats(require(tensors, prefix + "bn.gamma"));
    b.beta = floats(require(tensors, prefix + "bn.beta"));
    b.mean = floats(require(tensors, prefix + "bn.mean"));
    b.var = floats(require(tensors, prefix + "bn.var"));
    if (const auto* eps = tensorio::find_tensor(tensors, prefix + "bn.eps")) b.eps = eps->as_doubles().at(0);
    net.blocks.push_back(std::move(b));
  }
  net.head_weight = floats(require(tensors, "head.w"));
  net.head_bias = floats(require(tensors, "head.b"));
  validate(net);
  return net;
}

std::vector<tensorio::NamedTensor> net_to_tensors(const EstimatorNet& net) {
  using tensorio::NamedTensor;
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    const auto& b = net.blocks[i];
    const auto prefix = "block" + std::to_string(i) + ".";
    const std::uint64_t oc = b.out_channels;
    out.push_back(NamedTensor::f32(prefix + "conv.w",
                                   {oc, static_cast<std::uint64_t>(b.in_channels), 3, 3}, b.weight));
    out.push_back(NamedTensor::f32(prefix + "conv.b", {oc}, b.bias));
    out.push_back(NamedTensor::f32(prefix + "bn.gamma", {oc}, b.gamma));
    out.push_back(NamedTensor::f32(prefix + "bn.beta", {oc}, b.beta));
    out.push_back(NamedTensor::f32(prefix + "bn.mean", {oc}, b.mean));
    out.push_back(NamedTensor::f32(prefix + "bn.var", {oc}, b.var));
    out.push_back(NamedTensor::f64(prefix + "bn.eps", {}, {b.eps}));
  }
  out.push_back(NamedTensor::f32("head.w",
                                 {static_cast<std::uint64_t>(net.n_classes),
                                  static_cast<std::uint64_t>(net.final_channels())},
                                 net.head_weight));
  out.push_back(NamedTensor::f32("head.b", {static_cast<std::uint64_t>(net.n_classes)}, net.head_bias));
  out.push_back(NamedTensor::f64("meta.n_classes", {}, {static_cast<double>(net.n_classes)}));
  return out;
}

}  // namespace abair::estimator
