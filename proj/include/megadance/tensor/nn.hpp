#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "megadance/tensor/conv.hpp"
#include "megadance/tensor/ops.hpp"

namespace megadance {

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded generator. `split` derives an independent stream from a name, so
/// parameter initialization does not depend on construction order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  Rng split(std::string_view name) const { return Rng(splitmix64(seed_ ^ fnv1a64(name))); }

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mu = 0.0, double sigma = 1.0) { return std::normal_distribution<double>(mu, sigma)(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Named registry of trainable leaves. Names are unique path-like identifiers.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

  /// Registers a tensor initialized uniform(-bound, bound).
  Tensor create(const std::string& name, Shape shape, double bound) {
    Rng local = rng_.split(name);
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = local.uniform(-bound, bound);
    return add(name, Tensor(std::move(shape), std::move(values), true));
  }
  Tensor constant(const std::string& name, Shape shape, double value) {
    return add(name, Tensor::full(std::move(shape), value, true));
  }
  Tensor add(const std::string& name, Tensor tensor) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    tensor.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, tensor);
    return tensor;
  }

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  bool contains(const std::string& name) const { return index_.contains(name); }
  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return entries_[it->second].second;
  }
  const Tensor& at(const std::string& name) const { return const_cast<ParameterStore*>(this)->at(name); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.numel();
    return n;
  }
  /// Releases every gradient buffer, so parameters a step never touches
  /// report has_grad() == false.
  void zero_grad() {
    for (auto& [_, t] : entries_) t.clear_grad();
  }
  std::uint64_t seed() const { return rng_.seed(); }

 private:
  Rng rng_;
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

inline double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

/// y = x W + b with W: [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;  // undefined when constructed without bias

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool with_bias = true,
         double init_scale = 1.0) {
    const double bound = init_scale * fan_in_bound(in);
    weight = store.create(name + ".weight", {in, out}, bound);
    if (with_bias) bias = store.create(name + ".bias", {1, out}, bound);
  }
  Tensor operator()(const Tensor& x) const {
    auto y = matmul(x, weight);
    return bias.defined() ? add(y, bias) : y;
  }
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t width) {
    gamma = store.constant(name + ".gamma", {1, width}, 1.0);
    beta = store.constant(name + ".beta", {1, width}, 0.0);
  }
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

/// Same-padded strided convolution layer, see conv1d().
struct Conv1d {
  Tensor weight;
  Tensor bias;
  std::size_t kernel = 1;
  std::size_t stride = 1;

  Conv1d() = default;
  Conv1d(ParameterStore& store, const std::string& name, std::size_t cin, std::size_t cout, std::size_t kernel_size,
         std::size_t stride_size)
      : kernel(kernel_size), stride(stride_size) {
    const double bound = fan_in_bound(cin * kernel);
    weight = store.create(name + ".weight", {kernel * cin, cout}, bound);
    bias = store.create(name + ".bias", {1, cout}, bound);
  }
  Tensor operator()(const Tensor& x) const { return conv1d(x, weight, bias, kernel, stride); }
};

struct ConvTranspose1d {
  Tensor weight;
  Tensor bias;
  std::size_t kernel = 1;
  std::size_t stride = 1;

  ConvTranspose1d() = default;
  ConvTranspose1d(ParameterStore& store, const std::string& name, std::size_t cin, std::size_t cout,
                  std::size_t kernel_size, std::size_t stride_size)
      : kernel(kernel_size), stride(stride_size) {
    const double bound = fan_in_bound(cin * kernel / stride);
    weight = store.create(name + ".weight", {cin, kernel * cout}, bound);
    bias = store.create(name + ".bias", {1, cout}, bound);
  }
  Tensor operator()(const Tensor& x) const { return conv_transpose1d(x, weight, bias, kernel, stride); }
};

inline Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ContractError("dropout probability must be < 1");
  std::vector<double> mask(x.numel());
  const double keep = 1.0 / (1.0 - p);
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep;
  return apply_dropout_mask(x, std::move(mask));
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Adam over every parameter of a store. Parameters without a gradient
/// buffer are skipped entirely (moments and values untouched).
class Adam {
 public:
  Adam(ParameterStore& store, AdamConfig config) : store_(store), config_(config) {
    for (const auto& [_, t] : store_.entries()) {
      first_.emplace_back(t.numel(), 0.0);
      second_.emplace_back(t.numel(), 0.0);
    }
    counts_.assign(first_.size(), 0);
  }

  void step() {
    ++steps_;
    auto& entries = store_.entries();
    for (std::size_t p = 0; p < entries.size(); ++p) {
      Tensor& t = entries[p].second;
      const auto g = t.grad_view();
      if (g.size() != t.numel()) continue;
      auto values = t.mutable_values();
      auto& m = first_[p];
      auto& v = second_[p];
      const auto n = static_cast<double>(++counts_[p]);
      const double c1 = 1.0 - std::pow(config_.beta1, n);
      const double c2 = 1.0 - std::pow(config_.beta2, n);
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double gi = g[i];
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
        values[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      }
    }
  }
  std::size_t steps() const { return steps_; }

 private:
  ParameterStore& store_;
  AdamConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::vector<std::size_t> counts_;
  std::size_t steps_ = 0;
};

}  // namespace megadance
