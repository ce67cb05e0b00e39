#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "megadance/hfdq/codec.hpp"
#include "megadance/hfdq/loss.hpp"
#include "megadance/motion/kinematics.hpp"
#include "megadance/tensor/nn.hpp"

namespace megadance::hfdq {

struct HfdqTrainConfig {
  std::size_t steps = 2000;
  std::size_t batch = 8;
  double lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.99;
  std::size_t window = 240;
  std::size_t stride = 16;
  std::uint64_t seed = 0;
  bool normalize = true;  // fit per-channel pose statistics before training
  LossConfig loss;

  void validate() const {
    if (steps == 0 || batch == 0) throw ConfigError("hfdq steps and batch must be positive");
    if (window == 0 || window % 8 != 0) throw ConfigError("hfdq window must be a positive multiple of 8");
    if (stride == 0) throw ConfigError("hfdq stride must be positive");
    if (!(lr > 0.0)) throw ConfigError("hfdq lr must be positive");
    loss.validate();
  }
};

struct ClipWindow {
  std::size_t clip;
  std::size_t start;
};

/// All [start, start + window) windows of every clip at the given stride.
/// Clips shorter than the window contribute nothing.
inline std::vector<ClipWindow> sliding_windows(const std::vector<std::size_t>& lengths, std::size_t window,
                                               std::size_t stride) {
  std::vector<ClipWindow> out;
  for (std::size_t c = 0; c < lengths.size(); ++c) {
    for (std::size_t s = 0; s + window <= lengths[c]; s += stride) out.push_back({c, s});
  }
  return out;
}

struct StepLog {
  std::size_t step;
  double loss;
};

/// Adam on the combined pose/joint loss over random batches of windows.
inline std::vector<double> train_codec(MotionCodec& codec, const std::vector<motion::MotionSequence>& clips,
                                       const HfdqTrainConfig& cfg, const motion::Skeleton& skeleton,
                                       const std::function<void(const StepLog&)>& on_step = {}) {
  cfg.validate();
  std::vector<std::size_t> lengths;
  for (const auto& c : clips) lengths.push_back(c.frame_count());
  const auto windows = sliding_windows(lengths, cfg.window, cfg.stride);
  if (windows.empty()) {
    throw InputError("no training windows: need at least one clip of " + std::to_string(cfg.window) + " frames");
  }
  if (cfg.normalize) codec.fit_normalization(clips);
  std::vector<Tensor> inputs;
  inputs.reserve(windows.size());
  for (const auto& w : windows) inputs.push_back(clips[w.clip].slice(w.start, w.start + cfg.window).to_tensor());

  Adam opt(codec.parameters(), {.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2});
  Rng rng = Rng(cfg.seed).split("hfdq.batches");
  std::vector<double> losses;
  losses.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    codec.parameters().zero_grad();
    Tensor total;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const Tensor& x = inputs[windows.size() == 1 ? 0 : rng.index(windows.size())];
      auto loss = reconstruction_loss(codec.forward(x).reconstruction, x, skeleton, cfg.loss);
      total = total.defined() ? add(total, loss) : loss;
    }
    total = scale(total, 1.0 / static_cast<double>(cfg.batch));
    const double value = total.item();
    if (!std::isfinite(value)) throw Error("hfdq loss became non-finite at step " + std::to_string(step));
    total.backward();
    opt.step();
    losses.push_back(value);
    if (on_step) on_step({step, value});
  }
  return losses;
}

/// Mean squared joint-position error of decode(encode(seq)) per coordinate.
inline double reconstruction_joint_mse(const MotionCodec& codec, const motion::MotionSequence& seq,
                                       const motion::Skeleton& skeleton) {
  const auto recon = codec.decode(codec.encode(seq));
  const auto a = motion::forward_kinematics(recon, skeleton);
  const auto b = motion::forward_kinematics(seq, skeleton);
  double total = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    total += d * d;
  }
  return total / static_cast<double>(a.values().size());
}

}  // namespace megadance::hfdq
