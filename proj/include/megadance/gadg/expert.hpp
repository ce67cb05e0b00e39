#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/gadg/mamba.hpp"
#include "megadance/gadg/mask.hpp"
#include "megadance/tensor/nn.hpp"
#include "megadance/tensor/ops.hpp"

namespace megadance::gadg {

using Streams = std::array<Tensor, kStreams>;

struct ExpertConfig {
  std::size_t model_dim = 128;
  std::size_t heads = 8;
  std::size_t ff_dim = 512;
  double dropout = 0.25;
  MambaConfig mamba;
};

/// Optional per-head attention probabilities, filled when passed in.
using AttentionTrace = std::vector<Tensor>;

/// softmax((QK^T + M) / sqrt(C)) V per head, heads concatenated along columns.
inline Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask,
                               std::size_t heads, AttentionTrace* trace = nullptr) {
  const std::size_t width = q.cols();
  if (width % heads != 0) throw ConfigError("model dim must be divisible by the head count");
  if (mask.rows() != q.rows() || mask.cols() != k.rows()) {
    throw DimensionError("attention mask " + shape_str(mask.shape()) + " does not fit " +
                         std::to_string(q.rows()) + "x" + std::to_string(k.rows()) + " scores");
  }
  const std::size_t hd = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
    const Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
    const Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
    const Tensor p = softmax_lastdim(scale(add(matmul(qh, transpose(kh)), mask), inv_sqrt));
    if (trace) trace->push_back(p.detach());
    outs.push_back(matmul(p, vh));
  }
  return concat_cols(outs);
}

/// Mamba per stream, then joint masked attention over the concatenated
/// streams, then a feed-forward block. Pre-norm residual everywhere.
struct Expert {
  ExpertConfig cfg;
  std::array<LayerNorm, kStreams> mamba_norm;
  std::array<MambaBlock, kStreams> mamba;
  LayerNorm attn_norm;
  Linear wq, wk, wv, wo;
  LayerNorm ff_norm;
  Linear ff1, ff2;

  Expert() = default;
  Expert(ParameterStore& store, const std::string& name, const ExpertConfig& c) : cfg(c) {
    static const char* stream_names[kStreams] = {"music", "upper", "lower"};
    const std::size_t d = cfg.model_dim;
    for (std::size_t s = 0; s < kStreams; ++s) {
      const std::string prefix = name + ".mamba_" + stream_names[s];
      mamba_norm[s] = LayerNorm(store, prefix + ".norm", d);
      mamba[s] = MambaBlock(store, prefix, cfg.mamba);
    }
    attn_norm = LayerNorm(store, name + ".attn.norm", d);
    wq = Linear(store, name + ".attn.q", d, d);
    wk = Linear(store, name + ".attn.k", d, d);
    wv = Linear(store, name + ".attn.v", d, d);
    wo = Linear(store, name + ".attn.out", d, d);
    ff_norm = LayerNorm(store, name + ".ff.norm", d);
    ff1 = Linear(store, name + ".ff.fc0", d, cfg.ff_dim);
    ff2 = Linear(store, name + ".ff.fc1", cfg.ff_dim, d);
  }

  /// `rng` enables dropout (training); nullptr is evaluation mode.
  Streams operator()(const Streams& in, const AttentionMask& mask, Rng* rng = nullptr,
                     AttentionTrace* trace = nullptr) const {
    const std::size_t len = in[0].rows();
    for (const auto& s : in) {
      if (s.rows() != len) throw DimensionError("expert streams differ in length");
      if (s.cols() != cfg.model_dim) throw DimensionError("expert stream width differs from model dim");
    }
    if (mask.len != len) throw DimensionError("attention mask built for a different length");
    std::vector<Tensor> parts;
    for (std::size_t s = 0; s < kStreams; ++s) parts.push_back(add(in[s], mamba[s](mamba_norm[s](in[s]))));
    Tensor x = concat_rows(parts);
    const Tensor xn = attn_norm(x);
    x = add(x, wo(masked_attention(wq(xn), wk(xn), wv(xn), mask.matrix, cfg.heads, trace)));
    Tensor f = ff2(relu(ff1(ff_norm(x))));
    if (rng) f = dropout(f, cfg.dropout, *rng);
    x = add(x, f);
    return {slice_rows(x, 0, len), slice_rows(x, len, 2 * len), slice_rows(x, 2 * len, 3 * len)};
  }
};

/// G specialized experts routed hard on the genre plus one universal expert.
/// Output is E_spec[g](x) + E_univ(x) - x: each expert's residual delta once.
struct MoeLayer {
  std::vector<Expert> specialized;
  Expert universal;

  MoeLayer() = default;
  MoeLayer(ParameterStore& store, const std::string& name, std::size_t genres, const ExpertConfig& cfg) {
    if (genres == 0) throw ConfigError("genre count must be positive");
    for (std::size_t g = 0; g < genres; ++g) {
      specialized.emplace_back(store, name + ".genre" + std::to_string(g) + "_expert", cfg);
    }
    universal = Expert(store, name + ".universal_expert", cfg);
  }

  std::size_t genres() const { return specialized.size(); }

  Streams operator()(const Streams& in, int genre, const AttentionMask& mask, Rng* rng = nullptr) const {
    if (genre < 0 || static_cast<std::size_t>(genre) >= specialized.size()) {
      throw RoutingError("genre " + std::to_string(genre) + " is not routable; valid ids are 0.." +
                         std::to_string(specialized.size() - 1));
    }
    const Streams s = specialized[static_cast<std::size_t>(genre)](in, mask, rng);
    const Streams u = universal(in, mask, rng);
    Streams out;
    for (std::size_t i = 0; i < kStreams; ++i) out[i] = sub(add(s[i], u[i]), in[i]);
    return out;
  }
};

}  // namespace megadance::gadg
