#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "megadance/tensor/ops.hpp"

namespace megadance {

/// Output length of a same-padded strided convolution: ceil(T / stride).
inline std::size_t same_conv_length(std::size_t length, std::size_t stride) {
  return (length + stride - 1) / stride;
}

/// Temporal convolution over a time-major sequence.
///
/// x: [T x Cin]; weight: [(K * Cin) x Cout] with row index k * Cin + c;
/// bias: [1 x Cout]. Same padding, so the output has ceil(T / stride) rows.
inline Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t kernel,
                     std::size_t stride) {
  detail::require_2d(x, "conv1d");
  detail::require_2d(weight, "conv1d");
  if (stride == 0 || kernel == 0) throw ContractError("conv1d requires kernel >= 1 and stride >= 1");
  const std::size_t length = x.rows(), cin = x.cols(), cout = weight.cols();
  if (weight.rows() != kernel * cin) {
    throw DimensionError("conv1d weight has " + std::to_string(weight.rows()) + " rows, expected kernel*Cin = " +
                         std::to_string(kernel * cin));
  }
  if (bias.numel() != cout) throw DimensionError("conv1d bias width mismatch");
  const std::size_t out_len = same_conv_length(length, stride);
  const std::size_t needed = (out_len - 1) * stride + kernel;
  const std::ptrdiff_t pad_left = needed > length ? static_cast<std::ptrdiff_t>((needed - length) / 2) : 0;
  const std::size_t width = kernel * cin;

  auto cols = std::make_shared<std::vector<double>>(out_len * width, 0.0);
  const auto& xv = x.node()->value;
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) - pad_left;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
      std::copy_n(xv.begin() + src * static_cast<std::ptrdiff_t>(cin), cin,
                  cols->begin() + static_cast<std::ptrdiff_t>(t * width + k * cin));
    }
  }
  std::vector<double> out(out_len * cout);
  auto y = detail::as_matrix(out.data(), out_len, cout);
  y.noalias() = detail::as_matrix(*cols, out_len, width) * detail::as_matrix(weight.node()->value, width, cout);
  y.rowwise() += detail::as_matrix(bias.node()->value, 1, cout).row(0);

  return Tensor::make_op(
      {out_len, cout}, std::move(out), {x, weight, bias},
      [=](detail::Node& self) {
        const auto g = detail::as_matrix(self.grad, out_len, cout);
        if (double* gw = detail::input_grad(self, 1)) {
          detail::as_matrix(gw, width, cout).noalias() += detail::as_matrix(*cols, out_len, width).transpose() * g;
        }
        if (double* gb = detail::input_grad(self, 2)) {
          detail::as_matrix(gb, 1, cout) += g.colwise().sum();
        }
        if (double* gx = detail::input_grad(self, 0)) {
          detail::RowMatrix gcols = g * detail::as_matrix(self.input(1).value, width, cout).transpose();
          for (std::size_t t = 0; t < out_len; ++t) {
            for (std::size_t k = 0; k < kernel; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) - pad_left;
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
              double* dst = gx + static_cast<std::size_t>(src) * cin;
              const double* from = gcols.data() + t * width + k * cin;
              for (std::size_t c = 0; c < cin; ++c) dst[c] += from[c];
            }
          }
        }
      });
}

/// Transposed temporal convolution that upsamples length T to T * stride.
///
/// x: [T x Cin]; weight: [Cin x (K * Cout)] with column index k * Cout + o;
/// bias: [1 x Cout]. Requires kernel >= stride; the full (T-1)*stride + K
/// output is cropped symmetrically to T * stride rows.
inline Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t kernel,
                               std::size_t stride) {
  detail::require_2d(x, "conv_transpose1d");
  detail::require_2d(weight, "conv_transpose1d");
  if (stride == 0 || kernel < stride) throw ContractError("conv_transpose1d requires kernel >= stride >= 1");
  const std::size_t length = x.rows(), cin = x.cols();
  if (weight.rows() != cin || weight.cols() % kernel != 0) {
    throw DimensionError("conv_transpose1d weight " + shape_str(weight.shape()) + " incompatible with Cin=" +
                         std::to_string(cin) + ", K=" + std::to_string(kernel));
  }
  const std::size_t cout = weight.cols() / kernel;
  if (bias.numel() != cout) throw DimensionError("conv_transpose1d bias width mismatch");
  const std::size_t out_len = length * stride;
  const std::ptrdiff_t crop = static_cast<std::ptrdiff_t>((kernel - stride) / 2);
  const std::size_t wide = kernel * cout;

  // Each input row contributes K output rows: contrib = x * W, then col2im.
  detail::RowMatrix contrib =
      detail::as_matrix(x.node()->value, length, cin) * detail::as_matrix(weight.node()->value, cin, wide);
  std::vector<double> out(out_len * cout, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(t * stride + k) - crop;
      if (dst < 0 || dst >= static_cast<std::ptrdiff_t>(out_len)) continue;
      double* row = out.data() + static_cast<std::size_t>(dst) * cout;
      const double* src = contrib.data() + t * wide + k * cout;
      for (std::size_t o = 0; o < cout; ++o) row[o] += src[o];
    }
  }
  auto y = detail::as_matrix(out.data(), out_len, cout);
  y.rowwise() += detail::as_matrix(bias.node()->value, 1, cout).row(0);

  return Tensor::make_op({out_len, cout}, std::move(out), {x, weight, bias}, [=](detail::Node& self) {
    const auto g = detail::as_matrix(self.grad, out_len, cout);
    if (double* gb = detail::input_grad(self, 2)) detail::as_matrix(gb, 1, cout) += g.colwise().sum();
    detail::RowMatrix gcontrib = detail::RowMatrix::Zero(static_cast<Eigen::Index>(length),
                                                         static_cast<Eigen::Index>(wide));
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(t * stride + k) - crop;
        if (dst < 0 || dst >= static_cast<std::ptrdiff_t>(out_len)) continue;
        const double* from = self.grad.data() + static_cast<std::size_t>(dst) * cout;
        double* to = gcontrib.data() + t * wide + k * cout;
        for (std::size_t o = 0; o < cout; ++o) to[o] += from[o];
      }
    }
    if (double* gw = detail::input_grad(self, 1)) {
      detail::as_matrix(gw, cin, wide).noalias() +=
          detail::as_matrix(self.input(0).value, length, cin).transpose() * gcontrib;
    }
    if (double* gx = detail::input_grad(self, 0)) {
      detail::as_matrix(gx, length, cin).noalias() +=
          gcontrib * detail::as_matrix(self.input(1).value, cin, wide).transpose();
    }
  });
}

/// Per-channel causal convolution: y[t, c] = b[c] + sum_k w[c, k] * x[t - (K-1) + k, c],
/// with zeros before the first frame. x: [T x C], weight: [C x K], bias: [1 x C].
inline Tensor causal_depthwise_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  detail::require_2d(x, "causal_depthwise_conv1d");
  const std::size_t length = x.rows(), channels = x.cols();
  if (weight.rows() != channels || bias.numel() != channels) {
    throw DimensionError("causal_depthwise_conv1d parameter shape mismatch");
  }
  const std::size_t kernel = weight.cols();
  const auto& xv = x.node()->value;
  const auto& wv = weight.node()->value;
  const auto& bv = bias.node()->value;
  std::vector<double> out(length * channels);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = bv[c];
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(kernel - 1);
        if (src >= 0) acc += wv[c * kernel + k] * xv[static_cast<std::size_t>(src) * channels + c];
      }
      out[t * channels + c] = acc;
    }
  }
  return Tensor::make_op({length, channels}, std::move(out), {x, weight, bias}, [=](detail::Node& self) {
    const auto& xin = self.input(0).value;
    const auto& win = self.input(1).value;
    double* gx = detail::input_grad(self, 0);
    double* gw = detail::input_grad(self, 1);
    double* gb = detail::input_grad(self, 2);
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double g = self.grad[t * channels + c];
        if (gb) gb[c] += g;
        for (std::size_t k = 0; k < kernel; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(kernel - 1);
          if (src < 0) continue;
          const std::size_t s = static_cast<std::size_t>(src) * channels + c;
          if (gw) gw[c * kernel + k] += g * xin[s];
          if (gx) gx[s] += g * win[c * kernel + k];
        }
      }
    }
  });
}

}  // namespace megadance
