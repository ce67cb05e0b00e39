#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/tensor/tensor.hpp"

namespace megadance::gadg {

inline constexpr std::size_t kStreams = 3;  // music, upper, lower

/// First visible column of row i inside one T'xT' block.
inline std::size_t window_start(std::size_t i, std::size_t a_step, std::size_t s) {
  if (i < a_step) return 0;
  return ((i - a_step) / s + 1) * s;
}

/// 3T'x3T' additive mask made of nine identical sliding-window blocks.
struct AttentionMask {
  std::size_t len = 0;
  std::size_t a_step = 0;
  std::size_t window_step = 0;
  Tensor matrix;  // 0 or -inf

  bool allows(std::size_t row, std::size_t col) const {
    const std::size_t i = row % len, j = col % len;
    return j <= i && j >= window_start(i, a_step, window_step);
  }
};

inline AttentionMask build_sliding_mask(std::size_t len, std::size_t a_step, std::size_t s) {
  if (len == 0 || a_step == 0 || s == 0) {
    throw ContractError("build_sliding_mask needs T' >= 1, A_step >= 1, S >= 1");
  }
  AttentionMask mask{len, a_step, s, {}};
  const std::size_t n = kStreams * len;
  std::vector<double> m(n * n, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (mask.allows(r, c)) m[r * n + c] = 0.0;
    }
  }
  mask.matrix = Tensor({n, n}, std::move(m));
  return mask;
}

}  // namespace megadance::gadg
