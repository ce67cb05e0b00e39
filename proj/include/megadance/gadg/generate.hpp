#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/gadg/model.hpp"
#include "megadance/hfdq/codec.hpp"

namespace megadance::gadg {

enum class Sampling { argmax, top_k };

struct GenerateOptions {
  Sampling sampling = Sampling::argmax;
  std::size_t top_k = 10;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (top_k == 0) throw ConfigError("top-k sampling needs k >= 1");
    if (!(temperature > 0.0)) throw ConfigError("sampling temperature must be positive");
  }
};

/// Phase counts of the two-step schedule for a target latent length.
struct GenerationPlan {
  std::size_t autoregressive_steps = 0;
  std::size_t windows = 0;
};

inline GenerationPlan plan_generation(std::size_t latent_len, std::size_t a_step, std::size_t window_step) {
  GenerationPlan p;
  p.autoregressive_steps = std::min(latent_len, a_step);
  if (latent_len > a_step) p.windows = (latent_len - a_step + window_step - 1) / window_step;
  return p;
}

namespace detail {

inline int pick(std::span<const double> logits, const GenerateOptions& opt, Rng& rng) {
  if (opt.sampling == Sampling::argmax) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  const std::size_t k = std::min(opt.top_k, logits.size());
  std::vector<std::size_t> idx(logits.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  std::vector<double> w(k);
  const double top = logits[idx[0]];
  for (std::size_t i = 0; i < k; ++i) w[i] = std::exp((logits[idx[i]] - top) / opt.temperature);
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return static_cast<int>(idx[dist(rng.engine())]);
}

}  // namespace detail

/// Two-step inference. Step 1 emits the first min(T', A_step) codes one at a
/// time from the start token. Step 2 slides a window of A_step + S latent
/// steps forward by S each time, keeping the last A_step codes as context and
/// emitting S new codes. `music` is the aligned [>= T' x 35] stream.
inline hfdq::LatentCodes generate(const GadgModel& model, const Tensor& music, int genre, std::size_t latent_len,
                                  const GenerateOptions& opt = {}) {
  opt.validate();
  if (latent_len == 0) throw LengthError("cannot generate an empty sequence");
  if (music.rows() < latent_len) {
    throw LengthError("music covers " + std::to_string(music.rows()) + " latent steps, " +
                      std::to_string(latent_len) + " requested");
  }
  const auto& cfg = model.config();
  if (genre < 0 || static_cast<std::size_t>(genre) >= cfg.genres) {
    throw RoutingError("genre " + std::to_string(genre) + " is not routable; valid ids are 0.." +
                       std::to_string(cfg.genres - 1));
  }
  NoGradGuard guard;
  Rng rng = Rng(opt.seed).split("gadg.sampling");
  const int start = model.start_token();
  std::vector<int> upper, lower;
  upper.reserve(latent_len);
  lower.reserve(latent_len);

  // Predict global position q given the window [w0, q].
  auto emit = [&](std::size_t w0, std::size_t q) {
    std::vector<int> ui, li;
    for (std::size_t p = w0; p <= q; ++p) {
      ui.push_back(p == 0 ? start : upper[p - 1]);
      li.push_back(p == 0 ? start : lower[p - 1]);
    }
    const Tensor m = slice_rows(music, w0, q + 1);
    const DanceHidden h = model.hidden(m, genre, ui, li);
    const std::size_t last = q - w0;
    const ActionLogits logits = model.heads({slice_rows(h.upper, last, last + 1), slice_rows(h.lower, last, last + 1)});
    upper.push_back(detail::pick(logits.upper.values(), opt, rng));
    lower.push_back(detail::pick(logits.lower.values(), opt, rng));
  };

  const GenerationPlan plan = plan_generation(latent_len, cfg.a_step, cfg.window_step);
  for (std::size_t q = 0; q < plan.autoregressive_steps; ++q) emit(0, q);
  for (std::size_t w = 0; w < plan.windows; ++w) {
    const std::size_t w0 = w * cfg.window_step;
    for (std::size_t j = 0; j < cfg.window_step; ++j) {
      const std::size_t q = w0 + cfg.a_step + j;
      if (q >= latent_len) break;
      emit(w0, q);
    }
  }
  return {std::move(upper), std::move(lower)};
}

}  // namespace megadance::gadg
