#pragma once

// Low-rank adapter composition: W' = W + sum_n c_n B_n A_n, where the
// coefficients c come from a blend policy applied to the estimator's task
// probabilities.
//
// Adapters are stored unscaled: any LoRA alpha/r factor must already be
// folded into B.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "abair/tensorio.hpp"

namespace abair::adapters {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double frobenius(const Matrix& m);

struct LoraPair {
  int task = 0;
  Matrix a;  // r x k
  Matrix b;  // d x r
  std::size_t rank() const { return a.rows(); }
};

class AdapterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// B * A accumulated one rank-1 outer product at a time.
Matrix delta(const LoraPair& pair);

struct BlendPolicy {
  enum class Kind { kOneHot, kSoftWeights, kSum, kAverage, kSelect };
  Kind kind = Kind::kSoftWeights;
  int task = 0;  // task code, kSelect only

  static BlendPolicy one_hot() { return {Kind::kOneHot, 0}; }
  static BlendPolicy soft_weights() { return {Kind::kSoftWeights, 0}; }
  static BlendPolicy sum() { return {Kind::kSum, 0}; }
  static BlendPolicy average() { return {Kind::kAverage, 0}; }
  static BlendPolicy select(int task) { return {Kind::kSelect, task}; }
};

// Parses "oh", "sw", "sum", "avg", "select:<task>".
BlendPolicy parse_policy(std::string_view text);

// Per-pair coefficients for `policy`. OneHot ties go to the lowest index.
std::vector<double> blend_coefficients(std::span<const LoraPair> pairs, std::span<const double> p,
                                       const BlendPolicy& policy);

// W + sum_n c_n B_n A_n. Zero coefficients contribute nothing, so padding
// p with zeros for extra tasks leaves the result bit-identical.
Matrix blend_layer(const Matrix& w, std::span<const LoraPair> pairs, std::span<const double> p,
                   const BlendPolicy& policy);

struct Layer {
  Matrix w;
  std::vector<std::uint64_t> w_dims;  // original tensor dims (conv kernels flattened into cols)
  tensorio::DType w_dtype = tensorio::DType::kF64;
  std::vector<LoraPair> pairs;        // ordered like AdapterBank::tasks
};

struct AdapterBank {
  std::vector<int> tasks;  // task codes, in probability-vector order
  std::map<std::string, Layer> layers;
};

void validate(const AdapterBank& bank);

std::map<std::string, Matrix> blend_bank(const AdapterBank& bank, std::span<const double> p,
                                         const BlendPolicy& policy, int threads = 1);

struct NewTaskPair {
  Matrix a;
  Matrix b;
};

// Returns a bank with `task` appended; existing pairs are copied untouched.
AdapterBank add_task(const AdapterBank& bank, int task,
                     const std::map<std::string, NewTaskPair>& pairs);

// ABWT naming: `<layer>.W`, `<layer>.task<k>.A`, `<layer>.task<k>.B`.
AdapterBank bank_from_tensors(std::span<const tensorio::NamedTensor> tensors);
std::vector<tensorio::NamedTensor> bank_to_tensors(const AdapterBank& bank,
                                                   tensorio::DType dtype = tensorio::DType::kF64);

// Blended weights as `<layer>.W`, in the dims and dtype of the bank's base weights.
std::vector<tensorio::NamedTensor> blended_to_tensors(
    const AdapterBank& bank, const std::map<std::string, Matrix>& blended);

}  // namespace abair::adapters
