#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "megadance/tensor/tensor.hpp"

namespace megadance {

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

inline ConstMatrixMap as_matrix(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return {v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}
inline ConstMatrixMap as_matrix(const double* p, std::size_t r, std::size_t c) {
  return {p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}
inline MatrixMap as_matrix(double* p, std::size_t r, std::size_t c) {
  return {p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

inline void require_2d(const Tensor& t, const char* op) {
  if (t.dim() != 2) {
    throw DimensionError(std::string(op) + " expects a 2-D tensor, got " + shape_str(t.shape()));
  }
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

// Maps every output element of a broadcast binary op to its two source elements.
struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_index;
  std::vector<std::size_t> b_index;
};

inline BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  auto padded = [rank](const Shape& s) {
    Shape p(rank - s.size(), 1);
    p.insert(p.end(), s.begin(), s.end());
    return p;
  };
  const Shape pa = padded(a), pb = padded(b);
  BroadcastPlan plan;
  plan.out.resize(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1) {
      throw DimensionError("shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcast-compatible");
    }
    plan.out[d] = std::max(pa[d], pb[d]);
  }
  auto strides = [rank](const Shape& s) {
    std::vector<std::size_t> st(rank, 0);
    std::size_t acc = 1;
    for (std::size_t d = rank; d-- > 0;) {
      st[d] = s[d] == 1 ? 0 : acc;
      acc *= s[d];
    }
    return st;
  };
  const auto sa = strides(pa), sb = strides(pb);
  const std::size_t n = shape_numel(plan.out);
  plan.a_index.resize(n);
  plan.b_index.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      ia += idx[d] * sa[d];
      ib += idx[d] * sb[d];
    }
    plan.a_index[i] = ia;
    plan.b_index[i] = ib;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < plan.out[d]) break;
      idx[d] = 0;
    }
  }
  return plan;
}

enum class BinaryKind { add, sub, mul, div };

inline Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
  auto apply = [kind](double x, double y) {
    switch (kind) {
      case BinaryKind::add: return x + y;
      case BinaryKind::sub: return x - y;
      case BinaryKind::mul: return x * y;
      case BinaryKind::div: return x / y;
    }
    return 0.0;
  };
  // Partial derivatives (d/dx, d/dy) at (x, y).
  auto partials = [kind](double x, double y) -> std::pair<double, double> {
    switch (kind) {
      case BinaryKind::add: return {1.0, 1.0};
      case BinaryKind::sub: return {1.0, -1.0};
      case BinaryKind::mul: return {y, x};
      case BinaryKind::div: return {1.0 / y, -x / (y * y)};
    }
    return {0.0, 0.0};
  };

  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  if (a.shape() == b.shape()) {
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(av[i], bv[i]);
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [partials](Node& self) {
      const auto& x = self.input(0).value;
      const auto& y = self.input(1).value;
      double* gx = input_grad(self, 0);
      double* gy = input_grad(self, 1);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const auto [dx, dy] = partials(x[i], y[i]);
        if (gx) gx[i] += self.grad[i] * dx;
        if (gy) gy[i] += self.grad[i] * dy;
      }
    });
  }

  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape()));
  std::vector<double> out(plan->a_index.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = apply(av[plan->a_index[i]], bv[plan->b_index[i]]);
  }
  return Tensor::make_op(plan->out, std::move(out), {a, b}, [plan, partials](Node& self) {
    const auto& x = self.input(0).value;
    const auto& y = self.input(1).value;
    double* gx = input_grad(self, 0);
    double* gy = input_grad(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const std::size_t ia = plan->a_index[i], ib = plan->b_index[i];
      const auto [dx, dy] = partials(x[ia], y[ib]);
      if (gx) gx[ia] += self.grad[i] * dx;
      if (gy) gy[ib] += self.grad[i] * dy;
    }
  });
}

template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return Tensor::make_op(x.shape(), std::move(out), {x}, [df](Node& self) {
    const auto& in = self.input(0).value;
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      g[i] += self.grad[i] * df(in[i], self.value[i]);
    }
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::mul); }
inline Tensor div(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::div); }

inline Tensor scale(const Tensor& x, double c) {
  return detail::unary(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}
inline Tensor add_scalar(const Tensor& x, double c) {
  return detail::unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}
inline Tensor neg(const Tensor& x) { return scale(x, -1.0); }

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(x, detail::sigmoid, [](double, double y) { return y * (1.0 - y); });
}
inline Tensor softplus(const Tensor& x) {
  return detail::unary(x, detail::softplus, [](double v, double) { return detail::sigmoid(v); });
}
inline Tensor exp(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}
inline Tensor log(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}
inline Tensor relu(const Tensor& x) {
  return detail::unary(x, [](double v) { return v > 0 ? v : 0.0; },
                       [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}
/// Elementwise |x|; the building block of L1 losses. Subgradient 0 at 0.
inline Tensor abs(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::abs(v); },
                       [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}
inline Tensor tanh(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}
inline Tensor square(const Tensor& x) {
  return detail::unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}
/// x * sigmoid(x)
inline Tensor silu(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v * detail::sigmoid(v); },
      [](double v, double) {
        const double s = detail::sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

enum class ElementwiseOp { add, sub, mul, sigmoid, softplus, exp, l1, relu };

/// Uniform dispatcher over the elementwise primitives.
inline Tensor elementwise(ElementwiseOp op, std::span<const Tensor> inputs) {
  const bool is_binary = op == ElementwiseOp::add || op == ElementwiseOp::sub || op == ElementwiseOp::mul;
  if (inputs.size() != (is_binary ? 2u : 1u)) {
    throw ContractError("elementwise op received " + std::to_string(inputs.size()) + " inputs");
  }
  switch (op) {
    case ElementwiseOp::add: return add(inputs[0], inputs[1]);
    case ElementwiseOp::sub: return sub(inputs[0], inputs[1]);
    case ElementwiseOp::mul: return mul(inputs[0], inputs[1]);
    case ElementwiseOp::sigmoid: return sigmoid(inputs[0]);
    case ElementwiseOp::softplus: return softplus(inputs[0]);
    case ElementwiseOp::exp: return exp(inputs[0]);
    case ElementwiseOp::l1: return abs(inputs[0]);
    case ElementwiseOp::relu: return relu(inputs[0]);
  }
  throw ContractError("unknown elementwise op");
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return Tensor::make_op({1}, {total}, {x}, [](detail::Node& self) {
    double* g = detail::input_grad(self, 0);
    const std::size_t n = self.input(0).value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

inline Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

/// Mean absolute difference, the reduction used by every L1 term.
inline Tensor l1_mean(const Tensor& a, const Tensor& b) { return mean(abs(sub(a, b))); }

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  detail::as_matrix(out.data(), m, n).noalias() =
      detail::as_matrix(a.node()->value, m, k) * detail::as_matrix(b.node()->value, k, n);
  return Tensor::make_op({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
    const auto g = detail::as_matrix(self.grad, m, n);
    if (double* ga = detail::input_grad(self, 0)) {
      detail::as_matrix(ga, m, k).noalias() += g * detail::as_matrix(self.input(1).value, k, n).transpose();
    }
    if (double* gb = detail::input_grad(self, 1)) {
      detail::as_matrix(gb, k, n).noalias() += detail::as_matrix(self.input(0).value, m, k).transpose() * g;
    }
  });
}

inline Tensor transpose(const Tensor& x) {
  detail::require_2d(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  detail::as_matrix(out.data(), c, r) = detail::as_matrix(x.node()->value, r, c).transpose();
  return Tensor::make_op({c, r}, std::move(out), {x}, [r, c](detail::Node& self) {
    double* g = detail::input_grad(self, 0);
    detail::as_matrix(g, r, c) += detail::as_matrix(self.grad, c, r).transpose();
  });
}

// ---------------------------------------------------------------------------
// Softmax and cross-entropy

/// Softmax over the last dimension. Entries equal to -inf receive probability 0;
/// a row that is masked everywhere has no distribution and is rejected.
inline Tensor softmax_lastdim(const Tensor& x) {
  if (x.dim() == 0 || x.shape().back() == 0) throw DimensionError("softmax over an empty dimension");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.numel() / width;
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * width;
    double* y = out.data() + r * width;
    const double peak = *std::max_element(in, in + width);
    if (peak == -std::numeric_limits<double>::infinity()) {
      throw DegenerateMaskError("softmax row " + std::to_string(r) + " is fully masked");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) total += (y[j] = std::exp(in[j] - peak));
    for (std::size_t j = 0; j < width; ++j) y[j] /= total;
  }
  return Tensor::make_op(x.shape(), std::move(out), {x}, [rows, width](detail::Node& self) {
    double* g = detail::input_grad(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * width;
      const double* gy = self.grad.data() + r * width;
      double dot = 0.0;
      for (std::size_t j = 0; j < width; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < width; ++j) g[r * width + j] += y[j] * (gy[j] - dot);
    }
  });
}

/// Mean over rows of -log softmax(logits)[row, target[row]].
inline Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  detail::require_2d(logits, "cross_entropy");
  const std::size_t rows = logits.rows(), classes = logits.cols();
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " rows");
  }
  auto probs = std::make_shared<std::vector<double>>(logits.numel());
  auto tgt = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  const auto& lv = logits.node()->value;
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw RangeError("cross_entropy target " + std::to_string(t) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    const double* in = lv.data() + r * classes;
    double* p = probs->data() + r * classes;
    const double peak = *std::max_element(in, in + classes);
    double total = 0.0;
    for (std::size_t j = 0; j < classes; ++j) total += (p[j] = std::exp(in[j] - peak));
    for (std::size_t j = 0; j < classes; ++j) p[j] /= total;
    loss += peak + std::log(total) - in[t];
  }
  loss /= static_cast<double>(rows);
  return Tensor::make_op({1}, {loss}, {logits}, [probs, tgt, rows, classes](detail::Node& self) {
    double* g = detail::input_grad(self, 0);
    const double s = self.grad[0] / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < classes; ++j) g[r * classes + j] += s * (*probs)[r * classes + j];
      g[r * classes + static_cast<std::size_t>((*tgt)[r])] -= s;
    }
  });
}

// ---------------------------------------------------------------------------
// Slicing and assembly (2-D)

inline Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  detail::require_2d(x, "slice_rows");
  if (begin > end || end > x.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of " + shape_str(x.shape()));
  }
  const std::size_t c = x.cols();
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * c));
  return Tensor::make_op({end - begin, c}, std::move(out), {x}, [begin, c](detail::Node& self) {
    double* g = detail::input_grad(self, 0) + begin * c;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  detail::require_2d(x, "slice_cols");
  if (begin > end || end > x.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of " + shape_str(x.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  std::vector<double> out(r * w);
  detail::as_matrix(out.data(), r, w) =
      detail::as_matrix(x.node()->value, r, c).middleCols(static_cast<Eigen::Index>(begin),
                                                          static_cast<Eigen::Index>(w));
  return Tensor::make_op({r, w}, std::move(out), {x}, [r, c, w, begin](detail::Node& self) {
    double* g = detail::input_grad(self, 0);
    detail::as_matrix(g, r, c).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(w)) +=
        detail::as_matrix(self.grad, r, w);
  });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_2d(p, "concat_rows");
    if (p.cols() != c) throw DimensionError("concat_rows column mismatch");
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor::make_op({total, c}, std::move(out), parts, [](detail::Node& self) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const std::size_t n = self.input(i).value.size();
      if (double* g = detail::input_grad(self, i)) {
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[offset + j];
      }
      offset += n;
    }
  });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_2d(p, "concat_cols");
    if (p.rows() != r) throw DimensionError("concat_cols row mismatch");
    total += p.cols();
  }
  std::vector<double> out(r * total);
  auto dst = detail::as_matrix(out.data(), r, total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    dst.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(p.cols())) =
        detail::as_matrix(p.node()->value, r, p.cols());
    offset += p.cols();
  }
  return Tensor::make_op({r, total}, std::move(out), parts, [r, total](detail::Node& self) {
    const auto g = detail::as_matrix(self.grad, r, total);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const std::size_t c = self.input(i).value.size() / r;
      if (double* gi = detail::input_grad(self, i)) {
        detail::as_matrix(gi, r, c) +=
            g.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(c));
      }
      offset += c;
    }
  });
}

/// out[:, j] = x[:, columns[j]]
inline Tensor gather_cols(const Tensor& x, std::vector<std::size_t> columns) {
  detail::require_2d(x, "gather_cols");
  const std::size_t r = x.rows(), c = x.cols(), w = columns.size();
  for (auto col : columns) {
    if (col >= c) throw DimensionError("gather_cols index " + std::to_string(col) + " out of range");
  }
  const auto& xv = x.node()->value;
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * c + columns[j]];
  }
  return Tensor::make_op({r, w}, std::move(out), {x},
                         [r, c, w, cols = std::move(columns)](detail::Node& self) {
                           double* g = detail::input_grad(self, 0);
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < w; ++j) g[i * c + cols[j]] += self.grad[i * w + j];
                           }
                         });
}

/// Row lookup: out[i, :] = table[ids[i], :]. Gradients scatter-add into the table.
inline Tensor embedding(const Tensor& table, std::span<const int> ids) {
  detail::require_2d(table, "embedding");
  const std::size_t n = table.rows(), d = table.cols();
  std::vector<int> rows(ids.begin(), ids.end());
  std::vector<double> out(rows.size() * d);
  const auto& tv = table.node()->value;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= n) {
      throw RangeError("embedding id " + std::to_string(rows[i]) + " outside table of " +
                       std::to_string(n) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(rows[i]) * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const std::size_t count = rows.size();
  return Tensor::make_op({count, d}, std::move(out), {table},
                         [d, ids = std::move(rows)](detail::Node& self) {
                           double* g = detail::input_grad(self, 0);
                           for (std::size_t i = 0; i < ids.size(); ++i) {
                             double* dst = g + static_cast<std::size_t>(ids[i]) * d;
                             for (std::size_t j = 0; j < d; ++j) dst[j] += self.grad[i * d + j];
                           }
                         });
}

// ---------------------------------------------------------------------------
// Normalization and regularization

/// Per-row layer normalization with affine parameters of shape [1 x C].
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
  detail::require_2d(x, "layer_norm");
  const std::size_t r = x.rows(), c = x.cols();
  if (gamma.numel() != c || beta.numel() != c) throw DimensionError("layer_norm affine width mismatch");
  auto normalized = std::make_shared<std::vector<double>>(r * c);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  const auto& xv = x.node()->value;
  const auto& gv = gamma.node()->value;
  const auto& bv = beta.node()->value;
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      (*normalized)[i * c + j] = h;
      out[i * c + j] = h * gv[j] + bv[j];
    }
  }
  return Tensor::make_op({r, c}, std::move(out), {x, gamma, beta},
                         [r, c, normalized, inv_std](detail::Node& self) {
                           const auto& gv = self.input(1).value;
                           double* gx = detail::input_grad(self, 0);
                           double* gg = detail::input_grad(self, 1);
                           double* gb = detail::input_grad(self, 2);
                           for (std::size_t i = 0; i < r; ++i) {
                             const double* h = normalized->data() + i * c;
                             const double* gy = self.grad.data() + i * c;
                             double mean_g = 0.0, mean_gh = 0.0;
                             for (std::size_t j = 0; j < c; ++j) {
                               const double gh = gy[j] * gv[j];
                               mean_g += gh;
                               mean_gh += gh * h[j];
                               if (gg) gg[j] += gy[j] * h[j];
                               if (gb) gb[j] += gy[j];
                             }
                             if (!gx) continue;
                             mean_g /= static_cast<double>(c);
                             mean_gh /= static_cast<double>(c);
                             for (std::size_t j = 0; j < c; ++j) {
                               gx[i * c + j] += (*inv_std)[i] * (gy[j] * gv[j] - mean_g - h[j] * mean_gh);
                             }
                           }
                         });
}

/// Inverted dropout with an explicit keep-mask drawn by the caller.
inline Tensor apply_dropout_mask(const Tensor& x, std::vector<double> mask) {
  if (mask.size() != x.numel()) throw DimensionError("dropout mask size mismatch");
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return Tensor::make_op(x.shape(), std::move(out), {x}, [m = std::move(mask)](detail::Node& self) {
    double* g = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < m.size(); ++i) g[i] += self.grad[i] * m[i];
  });
}

}  // namespace megadance
