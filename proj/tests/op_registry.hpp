#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "megadance/gadg/expert.hpp"
#include "megadance/gadg/mamba.hpp"
#include "megadance/gadg/mask.hpp"
#include "megadance/hfdq/fsq.hpp"
#include "megadance/hfdq/loss.hpp"
#include "megadance/motion/body_split.hpp"
#include "megadance/motion/kinematics.hpp"
#include "megadance/tensor/conv.hpp"
#include "megadance/tensor/ops.hpp"

namespace megadance::testing {

// One differentiable op with an input generator. `reference`, when set, is
// differenced instead of `fn` (straight-through ops whose forward is a step).
struct OpCase {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  TensorFn fn;
  TensorFn reference;
};

// Keeps samples at least `gap` away from zero, for ops with a kink there.
inline Tensor away_from_zero(Shape shape, Rng& rng, double gap = 0.2) {
  auto t = random_tensor(std::move(shape), rng);
  for (auto& v : t.mutable_values()) v += v >= 0 ? gap : -gap;
  return t;
}

inline Tensor negative_tensor(Shape shape, Rng& rng) {
  auto t = random_positive(std::move(shape), rng, 0.2, 1.5);
  for (auto& v : t.mutable_values()) v = -v;
  return t;
}

inline std::vector<OpCase> differentiable_ops() {
  using V = std::vector<Tensor>;
  std::vector<OpCase> ops;
  auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> f, bool kink = false) {
    ops.push_back({std::move(name),
                   [kink](Rng& r) { return V{kink ? away_from_zero({3, 4}, r) : random_tensor({3, 4}, r)}; },
                   [f](const V& in) { return f(in[0]); },
                   {}});
  };
  auto pair = [](Shape a, Shape b) {
    return [a, b](Rng& r) { return V{random_tensor(a, r), random_tensor(b, r)}; };
  };

  ops.push_back({"add", pair({3, 4}, {3, 4}), [](const V& in) { return add(in[0], in[1]); }, {}});
  ops.push_back({"add_row_broadcast", pair({3, 4}, {1, 4}), [](const V& in) { return add(in[0], in[1]); }, {}});
  ops.push_back({"sub_col_broadcast", pair({3, 4}, {3, 1}), [](const V& in) { return sub(in[0], in[1]); }, {}});
  ops.push_back({"mul", pair({3, 4}, {3, 4}), [](const V& in) { return mul(in[0], in[1]); }, {}});
  ops.push_back({"mul_row_broadcast", pair({3, 4}, {1, 4}), [](const V& in) { return mul(in[0], in[1]); }, {}});
  ops.push_back({"div",
                 [](Rng& r) { return V{random_tensor({3, 4}, r), random_positive({3, 4}, r)}; },
                 [](const V& in) { return div(in[0], in[1]); },
                 {}});
  ops.push_back({"div_row_broadcast",
                 [](Rng& r) { return V{random_tensor({3, 4}, r), random_positive({1, 4}, r)}; },
                 [](const V& in) { return div(in[0], in[1]); },
                 {}});
  unary("scale", [](const Tensor& x) { return scale(x, -1.7); });
  unary("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.3); });
  unary("neg", [](const Tensor& x) { return neg(x); });
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  unary("softplus", [](const Tensor& x) { return softplus(x); });
  unary("exp", [](const Tensor& x) { return exp(x); });
  ops.push_back({"log", [](Rng& r) { return V{random_positive({3, 4}, r)}; },
                 [](const V& in) { return log(in[0]); }, {}});
  unary("relu", [](const Tensor& x) { return relu(x); }, true);
  unary("abs", [](const Tensor& x) { return abs(x); }, true);
  unary("tanh", [](const Tensor& x) { return tanh(x); });
  unary("square", [](const Tensor& x) { return square(x); });
  unary("silu", [](const Tensor& x) { return silu(x); });
  unary("sum", [](const Tensor& x) { return sum(x); });
  unary("mean", [](const Tensor& x) { return mean(x); });
  ops.push_back({"l1_mean",
                 [](Rng& r) {
                   auto b = random_tensor({3, 4}, r);
                   auto d = away_from_zero({3, 4}, r);
                   return V{add(b, d).detach(), b};
                 },
                 [](const V& in) { return l1_mean(in[0], in[1]); },
                 {}});
  ops.push_back({"matmul", pair({3, 5}, {5, 2}), [](const V& in) { return matmul(in[0], in[1]); }, {}});
  unary("transpose", [](const Tensor& x) { return transpose(x); });
  unary("softmax_lastdim", [](const Tensor& x) { return softmax_lastdim(x); });
  ops.push_back({"softmax_masked",
                 [](Rng& r) { return V{random_tensor({3, 3}, r)}; },
                 [](const V& in) {
                   const double inf = std::numeric_limits<double>::infinity();
                   Tensor m({3, 3}, {0, -inf, -inf, 0, 0, -inf, 0, 0, 0});
                   return softmax_lastdim(add(in[0], m));
                 },
                 {}});
  ops.push_back({"cross_entropy", [](Rng& r) { return V{random_tensor({4, 6}, r)}; },
                 [](const V& in) {
                   const std::vector<int> t{0, 5, 2, 2};
                   return cross_entropy(in[0], t);
                 },
                 {}});
  unary("slice_rows", [](const Tensor& x) { return slice_rows(x, 1, 3); });
  unary("slice_cols", [](const Tensor& x) { return slice_cols(x, 1, 3); });
  ops.push_back({"concat_rows", pair({2, 4}, {3, 4}), [](const V& in) { return concat_rows({in[0], in[1]}); }, {}});
  ops.push_back({"concat_cols", pair({3, 2}, {3, 4}), [](const V& in) { return concat_cols({in[0], in[1]}); }, {}});
  unary("gather_cols", [](const Tensor& x) { return gather_cols(x, {3, 0, 0, 2}); });
  ops.push_back({"embedding", [](Rng& r) { return V{random_tensor({5, 3}, r)}; },
                 [](const V& in) {
                   const std::vector<int> ids{4, 0, 4, 2};
                   return embedding(in[0], ids);
                 },
                 {}});
  ops.push_back({"layer_norm",
                 [](Rng& r) { return V{random_tensor({3, 6}, r), random_tensor({1, 6}, r), random_tensor({1, 6}, r)}; },
                 [](const V& in) { return layer_norm(in[0], in[1], in[2]); },
                 {}});
  ops.push_back({"dropout_mask", [](Rng& r) { return V{random_tensor({2, 3}, r)}; },
                 [](const V& in) { return apply_dropout_mask(in[0], {0, 2, 2, 0, 2, 0}); }, {}});
  ops.push_back({"conv1d_stride2",
                 [](Rng& r) { return V{random_tensor({7, 3}, r), random_tensor({4 * 3, 2}, r), random_tensor({1, 2}, r)}; },
                 [](const V& in) { return conv1d(in[0], in[1], in[2], 4, 2); },
                 {}});
  ops.push_back({"conv_transpose1d_stride2",
                 [](Rng& r) { return V{random_tensor({4, 3}, r), random_tensor({3, 4 * 2}, r), random_tensor({1, 2}, r)}; },
                 [](const V& in) { return conv_transpose1d(in[0], in[1], in[2], 4, 2); },
                 {}});
  ops.push_back({"causal_depthwise_conv1d",
                 [](Rng& r) { return V{random_tensor({6, 3}, r), random_tensor({3, 4}, r), random_tensor({1, 3}, r)}; },
                 [](const V& in) { return causal_depthwise_conv1d(in[0], in[1], in[2]); },
                 {}});
  ops.push_back({"finite_difference_2", [](Rng& r) { return V{random_tensor({5, 3}, r)}; },
                 [](const V& in) { return motion::finite_difference(in[0], 2); }, {}});
  ops.push_back({"forward_kinematics",
                 [](Rng& r) { return V{random_tensor({2, motion::kPoseWidth}, r, 0.5)}; },
                 [](const V& in) { return motion::forward_kinematics(in[0], motion::Skeleton::smpl()); },
                 {}});
  ops.push_back({"selective_scan",
                 [](Rng& r) {
                   return V{random_tensor({5, 3}, r), random_positive({5, 3}, r, 0.05, 0.8), negative_tensor({3, 2}, r),
                            random_tensor({5, 2}, r), random_tensor({5, 2}, r)};
                 },
                 [](const V& in) { return gadg::selective_scan(in[0], in[1], in[2], in[3], in[4]); },
                 {}});
  ops.push_back({"masked_attention",
                 [](Rng& r) { return V{random_tensor({6, 4}, r), random_tensor({6, 4}, r), random_tensor({6, 4}, r)}; },
                 [](const V& in) {
                   const auto mask = gadg::build_sliding_mask(2, 1, 1);
                   return gadg::masked_attention(in[0], in[1], in[2], mask.matrix, 2);
                 },
                 {}});
  const hfdq::FsqConfig fsq{{7, 5, 5}, 4, 8};
  ops.push_back({"fsq_straight_through", [](Rng& r) { return V{random_tensor({2, 3}, r)}; },
                 [fsq](const V& in) { return hfdq::fsq_quantize(in[0], fsq).values; },
                 [fsq](const V& in) {
                   Tensor span({1, 3}, {6.0, 4.0, 4.0});
                   return mul(sigmoid(in[0]), span);
                 }});
  ops.push_back({"normalize_levels", [](Rng& r) { return V{random_tensor({2, 3}, r)}; },
                 [fsq](const V& in) { return hfdq::normalize_levels(in[0], fsq); }, {}});
  ops.push_back({"kinematic_l1",
                 [](Rng& r) {
                   auto t = random_tensor({5, 3}, r);
                   return V{add(t, away_from_zero({5, 3}, r, 0.5)).detach(), t};
                 },
                 [](const V& in) { return hfdq::kinematic_l1(in[0], in[1], hfdq::LossConfig{}); },
                 {}});
  return ops;
}

inline GradCheckResult check_op(const OpCase& op, std::uint64_t seed) {
  Rng rng(seed);
  return gradcheck(op.fn, op.inputs(rng), seed, 1e-5, 1e-3, op.reference);
}

}  // namespace megadance::testing
