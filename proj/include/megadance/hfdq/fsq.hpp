#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/tensor/ops.hpp"

namespace megadance::hfdq {

struct FsqConfig {
  std::vector<int> levels = {7, 5, 5, 5, 5};
  std::size_t feature_dim = 64;
  std::size_t downsample = 8;

  std::size_t latent_dim() const { return levels.size(); }
  std::size_t codebook_size() const {
    std::size_t k = 1;
    for (int l : levels) k *= static_cast<std::size_t>(l);
    return k;
  }
  void validate() const {
    if (levels.empty()) throw ConfigError("fsq levels must not be empty");
    for (int l : levels) {
      if (l < 2) throw ConfigError("fsq level count " + std::to_string(l) + " is below 2");
    }
    if (feature_dim == 0) throw ConfigError("fsq feature_dim must be positive");
    if (downsample != 8) throw ConfigError("downsample must be 8 (three stride-2 layers)");
  }
};

struct Quantized {
  Tensor values;            // integer levels as floats, straight-through gradient
  std::vector<int> levels;  // same data, row-major [T' x d]
};

/// Bounded rounding: level = round((L - 1) * sigmoid(z)). The forward value is
/// the level; the backward pass sees only the smooth bound.
inline Quantized fsq_quantize(const Tensor& z, const FsqConfig& cfg) {
  const std::size_t d = cfg.latent_dim();
  if (z.dim() != 2 || z.cols() != d) {
    throw DimensionError("fsq_quantize expects last dim " + std::to_string(d) + ", got " + shape_str(z.shape()));
  }
  const auto& zv = z.node()->value;
  std::vector<double> out(zv.size());
  std::vector<double> slope(zv.size());
  std::vector<int> levels(zv.size());
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const double span = cfg.levels[i % d] - 1;
    const double s = detail::sigmoid(zv[i]);
    const double level = std::round(span * s);
    levels[i] = static_cast<int>(level);
    out[i] = level;
    slope[i] = span * s * (1.0 - s);
  }
  auto values = Tensor::make_op(z.shape(), std::move(out), {z}, [slope = std::move(slope)](detail::Node& self) {
    double* g = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < slope.size(); ++i) g[i] += self.grad[i] * slope[i];
  });
  return {values, std::move(levels)};
}

/// Maps integer levels to [-1, 1] per channel: level / (L - 1) * 2 - 1.
inline Tensor normalize_levels(const Tensor& q, const FsqConfig& cfg) {
  std::vector<double> inv(cfg.latent_dim());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 2.0 / (cfg.levels[i] - 1);
  return add_scalar(mul(q, Tensor({1, inv.size()}, inv)), -1.0);
}

/// Mixed-radix packing with the first channel most significant.
inline int levels_to_index(std::span<const int> levels, const FsqConfig& cfg) {
  if (levels.size() != cfg.latent_dim()) throw DimensionError("levels_to_index: wrong number of channels");
  int index = 0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0 || levels[i] >= cfg.levels[i]) {
      throw RangeError("level " + std::to_string(levels[i]) + " outside [0, " + std::to_string(cfg.levels[i]) +
                       ") on channel " + std::to_string(i));
    }
    index = index * cfg.levels[i] + levels[i];
  }
  return index;
}

inline std::vector<int> index_to_levels(int index, const FsqConfig& cfg) {
  const auto k = static_cast<int>(cfg.codebook_size());
  if (index < 0 || index >= k) {
    throw RangeError("code " + std::to_string(index) + " outside [0, " + std::to_string(k) + ")");
  }
  std::vector<int> levels(cfg.latent_dim());
  for (std::size_t i = levels.size(); i-- > 0;) {
    levels[i] = index % cfg.levels[i];
    index /= cfg.levels[i];
  }
  return levels;
}

/// Row-major [T' x d] levels -> T' codes.
inline std::vector<int> codes_from_levels(std::span<const int> levels, const FsqConfig& cfg) {
  const std::size_t d = cfg.latent_dim();
  std::vector<int> codes(levels.size() / d);
  for (std::size_t t = 0; t < codes.size(); ++t) codes[t] = levels_to_index(levels.subspan(t * d, d), cfg);
  return codes;
}

/// Codes -> [T' x d] tensor of integer levels.
inline Tensor levels_from_codes(std::span<const int> codes, const FsqConfig& cfg) {
  const std::size_t d = cfg.latent_dim();
  std::vector<double> v;
  v.reserve(codes.size() * d);
  for (int c : codes) {
    for (int l : index_to_levels(c, cfg)) v.push_back(l);
  }
  return Tensor({codes.size(), d}, std::move(v));
}

}  // namespace megadance::hfdq
