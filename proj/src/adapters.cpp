#include "abair/adapters.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <regex>
#include <set>
#include <thread>

namespace abair::adapters {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw AdapterError("matrix data size mismatch");
}

double frobenius(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

namespace {

void check_pair(const LoraPair& pair) {
  if (pair.a.rows() == 0 || pair.b.cols() != pair.a.rows()) {
    throw AdapterError("task " + std::to_string(pair.task) + ": B is " +
                       std::to_string(pair.b.rows()) + "x" + std::to_string(pair.b.cols()) +
                       " but A is " + std::to_string(pair.a.rows()) + "x" +
                       std::to_string(pair.a.cols()));
  }
}

void check_pair_against(const LoraPair& pair, const Matrix& w) {
  check_pair(pair);
  if (pair.b.rows() != w.rows() || pair.a.cols() != w.cols()) {
    throw AdapterError("task " + std::to_string(pair.task) +
                       ": adapter shape does not match base weight " +
                       std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  }
  if (pair.rank() > std::min(w.rows(), w.cols())) {
    throw AdapterError("task " + std::to_string(pair.task) + ": rank exceeds min(d, k)");
  }
}

}  // namespace

Matrix delta(const LoraPair& pair) {
  check_pair(pair);
  const std::size_t d = pair.b.rows();
  const std::size_t k = pair.a.cols();
  Matrix out(d, k);
  for (std::size_t t = 0; t < pair.rank(); ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      const double bi = pair.b(i, t);
      if (bi == 0.0) continue;
      double* row = &out(i, 0);
      const double* arow = pair.a.data().data() + t * k;
      for (std::size_t j = 0; j < k; ++j) row[j] += bi * arow[j];
    }
  }
  return out;
}

BlendPolicy parse_policy(std::string_view text) {
  if (text == "oh") return BlendPolicy::one_hot();
  if (text == "sw") return BlendPolicy::soft_weights();
  if (text == "sum") return BlendPolicy::sum();
  if (text == "avg") return BlendPolicy::average();
  constexpr std::string_view kSelect = "select:";
  if (text.starts_with(kSelect)) {
    const auto num = text.substr(kSelect.size());
    int task = 0;
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), task);
    if (ec == std::errc() && ptr == num.data() + num.size() && !num.empty()) {
      return BlendPolicy::select(task);
    }
  }
  throw AdapterError("unknown blend policy: " + std::string(text));
}

std::vector<double> blend_coefficients(std::span<const LoraPair> pairs, std::span<const double> p,
                                       const BlendPolicy& policy) {
  const std::size_t n = pairs.size();
  using K = BlendPolicy::Kind;
  std::vector<double> coef(n, 0.0);
  if (policy.kind == K::kSoftWeights || policy.kind == K::kOneHot) {
    if (p.size() != n) {
      throw AdapterError("probability vector has " + std::to_string(p.size()) +
                         " entries for " + std::to_string(n) + " adapters");
    }
  }
  switch (policy.kind) {
    case K::kSoftWeights: {
      double total = 0.0;
      for (double v : p) {
        if (!(v >= 0.0)) throw AdapterError("probabilities must be non-negative");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-6) throw AdapterError("probabilities must sum to 1");
      std::copy(p.begin(), p.end(), coef.begin());
      break;
    }
    case K::kOneHot: {
      if (n == 0) break;
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (p[i] > p[best]) best = i;
      }
      coef[best] = 1.0;
      break;
    }
    case K::kSum:
      std::fill(coef.begin(), coef.end(), 1.0);
      break;
    case K::kAverage:
      std::fill(coef.begin(), coef.end(), n ? 1.0 / static_cast<double>(n) : 0.0);
      break;
    case K::kSelect: {
      auto it = std::find_if(pairs.begin(), pairs.end(),
                             [&](const LoraPair& q) { return q.task == policy.task; });
      if (it == pairs.end()) throw AdapterError("no adapter for task " + std::to_string(policy.task));
      coef[static_cast<std::size_t>(it - pairs.begin())] = 1.0;
      break;
    }
  }
  return coef;
}

Matrix blend_layer(const Matrix& w, std::span<const LoraPair> pairs, std::span<const double> p,
                   const BlendPolicy& policy) {
  for (const auto& pair : pairs) check_pair_against(pair, w);
  const auto coef = blend_coefficients(pairs, p, policy);

  Matrix acc(w.rows(), w.cols());
  bool any = false;
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    if (coef[n] == 0.0) continue;
    const auto dw = delta(pairs[n]);
    auto dst = acc.data();
    const auto src = dw.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += coef[n] * src[i];
    any = true;
  }
  if (!any) return w;
  auto out = w;
  auto dst = out.data();
  const auto src = acc.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

void validate(const AdapterBank& bank) {
  std::set<int> unique(bank.tasks.begin(), bank.tasks.end());
  if (unique.size() != bank.tasks.size()) throw AdapterError("duplicate task code in bank");
  for (const auto& [name, layer] : bank.layers) {
    if (layer.pairs.size() != bank.tasks.size()) {
      throw AdapterError("layer " + name + " has " + std::to_string(layer.pairs.size()) +
                         " adapters, bank has " + std::to_string(bank.tasks.size()) + " tasks");
    }
    for (std::size_t i = 0; i < layer.pairs.size(); ++i) {
      if (layer.pairs[i].task != bank.tasks[i]) {
        throw AdapterError("layer " + name + " task order differs from bank");
      }
      check_pair_against(layer.pairs[i], layer.w);
    }
  }
}

std::map<std::string, Matrix> blend_bank(const AdapterBank& bank, std::span<const double> p,
                                         const BlendPolicy& policy, int threads) {
  validate(bank);
  std::vector<const std::pair<const std::string, Layer>*> items;
  for (const auto& kv : bank.layers) items.push_back(&kv);
  std::vector<Matrix> results(items.size());

  auto work = [&](std::size_t i) {
    results[i] = blend_layer(items[i]->second.w, items[i]->second.pairs, p, policy);
  };
  const std::size_t workers =
      std::min<std::size_t>(std::max(1, threads), std::max<std::size_t>(1, items.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) work(i);
  } else {
    // Static striping; each slot is written by exactly one worker.
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < items.size(); i += workers) work(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::map<std::string, Matrix> out;
  for (std::size_t i = 0; i < items.size(); ++i) out.emplace(items[i]->first, std::move(results[i]));
  return out;
}

AdapterBank add_task(const AdapterBank& bank, int task,
                     const std::map<std::string, NewTaskPair>& pairs) {
  validate(bank);
  if (std::find(bank.tasks.begin(), bank.tasks.end(), task) != bank.tasks.end()) {
    throw AdapterError("task " + std::to_string(task) + " already present");
  }
  for (const auto& [name, _] : pairs) {
    if (!bank.layers.count(name)) throw AdapterError("new adapter for unknown layer " + name);
  }
  AdapterBank out = bank;
  out.tasks.push_back(task);
  for (auto& [name, layer] : out.layers) {
    auto it = pairs.find(name);
    if (it == pairs.end()) throw AdapterError("missing new-task adapter for layer " + name);
    LoraPair pair{task, it->second.a, it->second.b};
    check_pair_against(pair, layer.w);
    layer.pairs.push_back(std::move(pair));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ABWT mapping

namespace {

Matrix flatten(const tensorio::NamedTensor& t) {
  if (t.dims.size() < 2) throw AdapterError("tensor " + t.name + " must have at least 2 dims");
  std::uint64_t cols = 1;
  for (std::size_t i = 1; i < t.dims.size(); ++i) cols *= t.dims[i];
  return Matrix(t.dims[0], cols, t.as_doubles());
}

tensorio::NamedTensor to_tensor(std::string name, std::vector<std::uint64_t> dims,
                                const Matrix& m, tensorio::DType dtype) {
  const auto v = m.data();
  if (dtype == tensorio::DType::kF32) {
    return tensorio::NamedTensor::f32(std::move(name), std::move(dims),
                                      std::vector<float>(v.begin(), v.end()));
  }
  return tensorio::NamedTensor::f64(std::move(name), std::move(dims),
                                    std::vector<double>(v.begin(), v.end()));
}

}  // namespace

AdapterBank bank_from_tensors(std::span<const tensorio::NamedTensor> tensors) {
  static const std::regex kPairName(R"((.+)\.task(\d+)\.(A|B))");
  struct Partial {
    const tensorio::NamedTensor* a = nullptr;
    const tensorio::NamedTensor* b = nullptr;
  };
  std::map<std::string, std::map<int, Partial>> partial;
  AdapterBank bank;
  std::set<int> task_set;

  for (const auto& t : tensors) {
    std::smatch m;
    if (t.name.size() > 2 && t.name.ends_with(".W")) {
      const auto layer = t.name.substr(0, t.name.size() - 2);
      auto& l = bank.layers[layer];
      l.w = flatten(t);
      l.w_dims = t.dims;
      l.w_dtype = t.dtype();
    } else if (std::regex_match(t.name, m, kPairName)) {
      const int task = std::stoi(m[2].str());
      auto& slot = partial[m[1].str()][task];
      (m[3].str() == "A" ? slot.a : slot.b) = &t;
      task_set.insert(task);
    } else {
      throw AdapterError("unrecognized tensor name in adapter bank: " + t.name);
    }
  }

  bank.tasks.assign(task_set.begin(), task_set.end());
  for (auto& [name, layer] : bank.layers) {
    auto& by_task = partial[name];
    for (int task : bank.tasks) {
      auto it = by_task.find(task);
      if (it == by_task.end() || !it->second.a || !it->second.b) {
        throw AdapterError("layer " + name + " lacks adapter pair for task " + std::to_string(task));
      }
      const auto& a = *it->second.a;
      const auto& b = *it->second.b;
      // B is d x r (trailing 1x1 conv dims allowed); A is r x k.
      layer.pairs.push_back({task, flatten(a), flatten(b)});
    }
  }
  for (const auto& [name, _] : partial) {
    if (!bank.layers.count(name)) throw AdapterError("adapters for layer " + name + " without " + name + ".W");
  }
  validate(bank);
  return bank;
}

std::vector<tensorio::NamedTensor> bank_to_tensors(const AdapterBank& bank,
                                                   tensorio::DType dtype) {
  std::vector<tensorio::NamedTensor> out;
  for (const auto& [name, layer] : bank.layers) {
    out.push_back(to_tensor(name + ".W", layer.w_dims, layer.w, dtype));
    for (const auto& pair : layer.pairs) {
      const auto prefix = name + ".task" + std::to_string(pair.task);
      out.push_back(to_tensor(prefix + ".A", {pair.a.rows(), pair.a.cols()}, pair.a, dtype));
      out.push_back(to_tensor(prefix + ".B", {pair.b.rows(), pair.b.cols()}, pair.b, dtype));
    }
  }
  return out;
}

std::vector<tensorio::NamedTensor> blended_to_tensors(const AdapterBank& bank,
                                                      const std::map<std::string, Matrix>& blended) {
  std::vector<tensorio::NamedTensor> out;
  for (const auto& [name, m] : blended) {
    const auto& layer = bank.layers.at(name);
    out.push_back(to_tensor(name + ".W", layer.w_dims, m, layer.w_dtype));
  }
  return out;
}

}  // namespace abair::adapters
