#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/gadg/model.hpp"
#include "megadance/tensor/nn.hpp"

namespace megadance::gadg {

/// One training sequence at latent rate.
struct GadgSample {
  Tensor music;  // [T' x 35], already aligned
  int genre = 0;
  std::vector<int> upper;
  std::vector<int> lower;

  std::size_t length() const { return upper.size(); }
  void check(const GadgConfig& cfg) const {
    if (upper.empty()) throw LengthError("gadg sample has no codes");
    if (lower.size() != upper.size() || music.rows() != upper.size()) {
      throw DimensionError("gadg sample streams disagree in length");
    }
    if (genre < 0 || static_cast<std::size_t>(genre) >= cfg.genres) {
      throw RoutingError("sample genre " + std::to_string(genre) + " outside [0, " + std::to_string(cfg.genres) + ")");
    }
  }
};

struct GadgTrainConfig {
  std::size_t steps = 1500;
  std::size_t batch = 4;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  std::uint64_t seed = 0;

  void validate() const {
    if (steps == 0 || batch == 0) throw ConfigError("gadg training steps and batch must be positive");
    if (!(lr > 0.0)) throw ConfigError("gadg learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("adam betas must lie in [0, 1)");
  }
};

struct CrossEntropy {
  double upper = 0.0;
  double lower = 0.0;
  double total() const { return upper + lower; }
  double mean() const { return 0.5 * (upper + lower); }
};

/// Teacher-forced loss of one window: CE(a_t, p_t) with inputs shifted right.
inline std::pair<Tensor, Tensor> sequence_loss(const GadgModel& model, const Tensor& music, int genre,
                                               std::span<const int> upper, std::span<const int> lower, Rng* rng) {
  const int start = model.start_token();
  const auto ui = shift_right(upper, start);
  const auto li = shift_right(lower, start);
  const auto logits = model.forward(music, genre, ui, li, rng);
  return {cross_entropy(logits.upper, upper), cross_entropy(logits.lower, lower)};
}

/// Evaluation-mode teacher-forced CE over a whole sample, window by window.
inline CrossEntropy teacher_forced_ce(const GadgModel& model, const GadgSample& sample) {
  sample.check(model.config());
  NoGradGuard guard;
  const std::size_t ctx = model.config().context();
  CrossEntropy ce;
  double weight = 0.0;
  for (std::size_t b = 0; b < sample.length(); b += ctx) {
    const std::size_t e = std::min(sample.length(), b + ctx);
    const auto [u, l] = sequence_loss(model, slice_rows(sample.music, b, e), sample.genre,
                                      std::span(sample.upper).subspan(b, e - b),
                                      std::span(sample.lower).subspan(b, e - b), nullptr);
    const auto n = static_cast<double>(e - b);
    ce.upper += n * u.item();
    ce.lower += n * l.item();
    weight += n;
  }
  ce.upper /= weight;
  ce.lower /= weight;
  return ce;
}

struct GadgStepLog {
  std::size_t step;
  CrossEntropy ce;
};

/// Adam on CE_upper + CE_lower over random context-length windows. Dropout is
/// active during training. Returns the per-step summed loss.
inline std::vector<double> train_generator(GadgModel& model, const std::vector<GadgSample>& samples,
                                           const GadgTrainConfig& cfg,
                                           const std::function<void(const GadgStepLog&)>& on_step = {}) {
  cfg.validate();
  if (samples.empty()) throw InputError("gadg training set is empty");
  for (const auto& s : samples) s.check(model.config());
  const std::size_t ctx = model.config().context();
  Rng rng = Rng(cfg.seed).split("gadg.batches");
  Rng drop = Rng(cfg.seed).split("gadg.dropout");
  Adam opt(model.parameters(), {.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2});
  std::vector<double> losses;
  losses.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    model.parameters().zero_grad();
    CrossEntropy ce;
    Tensor total;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const auto& s = samples[rng.index(samples.size())];
      const std::size_t len = std::min(ctx, s.length());
      const std::size_t off = s.length() > len ? rng.index(s.length() - len + 1) : 0;
      const auto [u, l] = sequence_loss(model, slice_rows(s.music, off, off + len), s.genre,
                                        std::span(s.upper).subspan(off, len), std::span(s.lower).subspan(off, len),
                                        &drop);
      ce.upper += u.item();
      ce.lower += l.item();
      const Tensor item = add(u, l);
      total = total.defined() ? add(total, item) : item;
    }
    const double inv = 1.0 / static_cast<double>(cfg.batch);
    ce.upper *= inv;
    ce.lower *= inv;
    if (!std::isfinite(ce.total())) throw Error("gadg loss became non-finite at step " + std::to_string(step));
    scale(total, inv).backward();
    opt.step();
    losses.push_back(ce.total());
    if (on_step) on_step({step, ce});
  }
  return losses;
}

}  // namespace megadance::gadg
