#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/tensor/conv.hpp"
#include "megadance/tensor/nn.hpp"
#include "megadance/tensor/ops.hpp"

namespace megadance::gadg {

namespace detail {

// phi(s) = (e^s - 1) / s, with the Taylor series near zero.
inline double expm1_ratio(double s) {
  if (std::abs(s) < 1e-6) return 1.0 + s / 2.0 + s * s / 6.0;
  return std::expm1(s) / s;
}

// psi(s) = (s e^s - e^s + 1) / s^2, so d/da [(e^{da} - 1)/a] = d^2 psi(da).
inline double expm1_ratio_slope(double s) {
  if (std::abs(s) < 1e-4) return 0.5 + s / 3.0 + s * s / 8.0 + s * s * s / 30.0;
  return (s * std::exp(s) - std::expm1(s)) / (s * s);
}

}  // namespace detail

struct Discretized {
  double a_bar;
  double b_bar;
};

/// Zero-order hold for one diagonal entry: a_bar = exp(delta a),
/// b_bar = (delta a)^-1 (exp(delta a) - 1) delta b.
inline Discretized mamba_discretize(double a, double b, double delta) {
  if (!(delta > 0.0)) throw ContractError("mamba_discretize needs delta > 0, got " + std::to_string(delta));
  const double s = delta * a;
  return {std::exp(s), delta * detail::expm1_ratio(s) * b};
}

/// Raw inputs of one selective scan.
///   u, delta: [T x E]; a: [E x N]; b, c: [T x N]
struct ScanInputs {
  std::size_t length = 0, channels = 0, states = 0;
  std::vector<double> u, delta, a, b, c;

  void check() const {
    if (u.size() != length * channels || delta.size() != length * channels || a.size() != channels * states ||
        b.size() != length * states || c.size() != length * states) {
      throw DimensionError("selective scan inputs have inconsistent sizes");
    }
  }
};

/// h_t = a_bar_t h_{t-1} + b_bar_t u_t, y_t = C_t h_t, h_{-1} = 0. The oracle.
inline std::vector<double> selective_scan_sequential(const ScanInputs& in) {
  in.check();
  const std::size_t T = in.length, E = in.channels, N = in.states;
  std::vector<double> h(E * N, 0.0), y(T * E, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < E; ++e) {
      const double d = in.delta[t * E + e], x = in.u[t * E + e];
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const auto [ab, bb] = mamba_discretize(in.a[e * N + n], in.b[t * N + n], d);
        double& hs = h[e * N + n];
        hs = ab * hs + bb * x;
        acc += in.c[t * N + n] * hs;
      }
      y[t * E + e] = acc;
    }
  }
  return y;
}

/// Chunked evaluation: each chunk scans from a zero state while tracking the
/// running product of a_bar, then chunk carries are chained and folded back
/// in. The per-chunk passes are independent of each other.
inline std::vector<double> selective_scan_blocked(const ScanInputs& in, std::size_t block) {
  in.check();
  if (block == 0) throw ContractError("scan block size must be positive");
  const std::size_t T = in.length, E = in.channels, N = in.states, EN = E * N;
  const std::size_t chunks = (T + block - 1) / block;
  // pass 1: local states and decay products per timestep
  std::vector<double> local(T * EN), decay(T * EN);
  for (std::size_t k = 0; k < chunks; ++k) {
    const std::size_t t0 = k * block, t1 = std::min(T, t0 + block);
    std::vector<double> l(EN, 0.0), p(EN, 1.0);
    for (std::size_t t = t0; t < t1; ++t) {
      for (std::size_t e = 0; e < E; ++e) {
        const double d = in.delta[t * E + e], x = in.u[t * E + e];
        for (std::size_t n = 0; n < N; ++n) {
          const auto [ab, bb] = mamba_discretize(in.a[e * N + n], in.b[t * N + n], d);
          const std::size_t i = e * N + n;
          l[i] = ab * l[i] + bb * x;
          p[i] *= ab;
          local[t * EN + i] = l[i];
          decay[t * EN + i] = p[i];
        }
      }
    }
  }
  // pass 2: carry states into each chunk
  std::vector<double> carry(chunks * EN, 0.0);
  for (std::size_t k = 1; k < chunks; ++k) {
    const std::size_t last = k * block - 1;
    for (std::size_t i = 0; i < EN; ++i) {
      carry[k * EN + i] = decay[last * EN + i] * carry[(k - 1) * EN + i] + local[last * EN + i];
    }
  }
  // pass 3: outputs
  std::vector<double> y(T * E, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t k = t / block;
    for (std::size_t e = 0; e < E; ++e) {
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t i = e * N + n;
        acc += in.c[t * N + n] * (decay[t * EN + i] * carry[k * EN + i] + local[t * EN + i]);
      }
      y[t * E + e] = acc;
    }
  }
  return y;
}

/// Differentiable selective scan. u, delta: [T x E]; a: [E x N] (negative);
/// b, c: [T x N]. Returns y: [T x E].
inline Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a, const Tensor& b,
                             const Tensor& c) {
  const std::size_t T = u.rows(), E = u.cols(), N = a.cols();
  if (delta.rows() != T || delta.cols() != E || a.rows() != E || b.rows() != T || b.cols() != N || c.rows() != T ||
      c.cols() != N) {
    throw DimensionError("selective_scan shape mismatch: u " + shape_str(u.shape()) + ", delta " +
                         shape_str(delta.shape()) + ", A " + shape_str(a.shape()) + ", B " + shape_str(b.shape()) +
                         ", C " + shape_str(c.shape()));
  }
  const auto& uv = u.node()->value;
  const auto& dv = delta.node()->value;
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  const auto& cv = c.node()->value;
  auto states = std::make_shared<std::vector<double>>(T * E * N);
  std::vector<double> y(T * E, 0.0);
  std::vector<double> h(E * N, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < E; ++e) {
      const double d = dv[t * E + e], x = uv[t * E + e];
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const auto [ab, bb] = mamba_discretize(av[e * N + n], bv[t * N + n], d);
        double& hs = h[e * N + n];
        hs = ab * hs + bb * x;
        acc += cv[t * N + n] * hs;
      }
      y[t * E + e] = acc;
    }
    std::copy(h.begin(), h.end(), states->begin() + static_cast<std::ptrdiff_t>(t * E * N));
  }
  return Tensor::make_op({T, E}, std::move(y), {u, delta, a, b, c}, [states, T, E, N](megadance::detail::Node& self) {
    const auto& xin = self.input(0).value;
    const auto& din = self.input(1).value;
    const auto& ain = self.input(2).value;
    const auto& bin = self.input(3).value;
    const auto& cin = self.input(4).value;
    double* gu = megadance::detail::input_grad(self, 0);
    double* gd = megadance::detail::input_grad(self, 1);
    double* ga = megadance::detail::input_grad(self, 2);
    double* gb = megadance::detail::input_grad(self, 3);
    double* gc = megadance::detail::input_grad(self, 4);
    const auto& hs = *states;
    std::vector<double> gh(E * N, 0.0);
    for (std::size_t t = T; t-- > 0;) {
      for (std::size_t e = 0; e < E; ++e) {
        const double gy = self.grad[t * E + e];
        const double d = din[t * E + e], x = xin[t * E + e];
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t i = e * N + n;
          const double an = ain[i], bn = bin[t * N + n];
          const double s = d * an;
          const double ab = std::exp(s);
          const double phi = detail::expm1_ratio(s);
          const double h_now = hs[t * E * N + i];
          const double h_prev = t > 0 ? hs[(t - 1) * E * N + i] : 0.0;
          if (gc) gc[t * N + n] += gy * h_now;
          const double g = gh[i] + gy * cin[t * N + n];
          const double g_ab = g * h_prev;
          const double g_bb = g * x;
          if (gu) gu[t * E + e] += g * d * phi * bn;
          if (gd) gd[t * E + e] += g_ab * an * ab + g_bb * bn * ab;
          if (ga) ga[i] += g_ab * d * ab + g_bb * bn * d * d * detail::expm1_ratio_slope(s);
          if (gb) gb[t * N + n] += g_bb * d * phi;
          gh[i] = g * ab;
        }
      }
    }
  });
}

struct MambaConfig {
  std::size_t model_dim = 128;
  std::size_t state_dim = 16;
  std::size_t conv_kernel = 4;
  std::size_t expand = 2;

  std::size_t inner_dim() const { return expand * model_dim; }
  std::size_t dt_rank() const { return (model_dim + 15) / 16; }
};

/// Selective state-space block: gated input projection, causal depthwise
/// conv, input-dependent (delta, B, C), diagonal scan, skip D, output projection.
struct MambaBlock {
  MambaConfig cfg;
  Linear in_proj;
  Tensor conv_weight, conv_bias;
  Linear x_proj, dt_proj;
  Tensor a_log;  // A = -exp(a_log)
  Tensor skip;
  Linear out_proj;

  MambaBlock() = default;
  MambaBlock(ParameterStore& store, const std::string& name, MambaConfig c) : cfg(c) {
    const std::size_t d = cfg.model_dim, e = cfg.inner_dim(), n = cfg.state_dim, r = cfg.dt_rank();
    in_proj = Linear(store, name + ".in_proj", d, 2 * e, false);
    conv_weight = store.create(name + ".conv.weight", {e, cfg.conv_kernel}, fan_in_bound(cfg.conv_kernel));
    conv_bias = store.create(name + ".conv.bias", {1, e}, fan_in_bound(cfg.conv_kernel));
    x_proj = Linear(store, name + ".x_proj", e, r + 2 * n, false);
    dt_proj = Linear(store, name + ".dt_proj", r, e, true);
    // softplus(bias) log-uniform in [1e-3, 1e-1]
    Rng rng = Rng(store.seed()).split(name + ".dt_init");
    auto bias = dt_proj.bias.mutable_values();
    for (auto& v : bias) {
      const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
      v = dt + std::log(-std::expm1(-dt));
    }
    std::vector<double> al(e * n);
    for (std::size_t i = 0; i < e; ++i) {
      for (std::size_t j = 0; j < n; ++j) al[i * n + j] = std::log(static_cast<double>(j + 1));
    }
    a_log = store.add(name + ".A_log", Tensor({e, n}, std::move(al)));
    skip = store.constant(name + ".D", {1, e}, 1.0);
    out_proj = Linear(store, name + ".out_proj", e, d, false);
  }

  Tensor state_matrix() const { return neg(exp(a_log)); }

  Tensor operator()(const Tensor& x) const {
    const std::size_t e = cfg.inner_dim(), n = cfg.state_dim, r = cfg.dt_rank();
    const Tensor xz = in_proj(x);
    const Tensor u = silu(causal_depthwise_conv1d(slice_cols(xz, 0, e), conv_weight, conv_bias));
    const Tensor gate = silu(slice_cols(xz, e, 2 * e));
    const Tensor dbc = x_proj(u);
    const Tensor delta = softplus(dt_proj(slice_cols(dbc, 0, r)));
    const Tensor y = selective_scan(u, delta, state_matrix(), slice_cols(dbc, r, r + n), slice_cols(dbc, r + n, r + 2 * n));
    return out_proj(mul(add(y, mul(u, skip)), gate));
  }
};

}  // namespace megadance::gadg
