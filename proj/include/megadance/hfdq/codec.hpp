#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "megadance/hfdq/fsq.hpp"
#include "megadance/motion/body_split.hpp"
#include "megadance/motion/pose.hpp"
#include "megadance/tensor/conv.hpp"
#include "megadance/tensor/nn.hpp"

namespace megadance::hfdq {

/// Three stride-2 convolutions (K=3, ReLU) then a two-layer MLP down to d.
struct Encoder {
  std::vector<Conv1d> convs;
  Linear fc0, fc1;

  Encoder() = default;
  Encoder(ParameterStore& store, const std::string& name, std::size_t in_width, const FsqConfig& cfg) {
    const std::size_t f = cfg.feature_dim;
    for (std::size_t i = 0; i < 3; ++i) {
      convs.emplace_back(store, name + ".conv" + std::to_string(i), i == 0 ? in_width : f, f, 3, 2);
    }
    fc0 = Linear(store, name + ".fc0", f, f);
    fc1 = Linear(store, name + ".fc1", f, cfg.latent_dim());
  }

  Tensor operator()(const Tensor& x) const {
    if (x.rows() % 8 != 0) {
      throw PaddingError("encoder input length " + std::to_string(x.rows()) +
                         " is not a multiple of 8; pad the clip first");
    }
    if (x.rows() == 0) throw PaddingError("encoder input is empty");
    Tensor h = x;
    for (const auto& c : convs) h = relu(c(h));
    return fc1(relu(fc0(h)));
  }
};

/// Two-layer MLP up from d then three stride-2 transposed convolutions
/// (K=4); the last one is linear.
struct Decoder {
  Linear fc0, fc1;
  std::vector<ConvTranspose1d> deconvs;

  Decoder() = default;
  Decoder(ParameterStore& store, const std::string& name, std::size_t out_width, const FsqConfig& cfg) {
    const std::size_t f = cfg.feature_dim;
    fc0 = Linear(store, name + ".fc0", cfg.latent_dim(), f);
    fc1 = Linear(store, name + ".fc1", f, f);
    for (std::size_t i = 0; i < 3; ++i) {
      deconvs.emplace_back(store, name + ".deconv" + std::to_string(i), f, i == 2 ? out_width : f, 4, 2);
    }
  }

  Tensor operator()(const Tensor& z) const {
    Tensor h = relu(fc1(relu(fc0(z))));
    for (std::size_t i = 0; i < deconvs.size(); ++i) {
      h = deconvs[i](h);
      if (i + 1 < deconvs.size()) h = relu(h);
    }
    return h;
  }
};

struct LatentCodes {
  std::vector<int> upper;
  std::vector<int> lower;
  std::size_t latent_len() const { return upper.size(); }
};

struct CodecOutput {
  Tensor reconstruction;  // [T x 147]
  Quantized upper;
  Quantized lower;
};

/// Upper and lower codecs with disjoint weights and a shared FSQ config.
class MotionCodec {
 public:
  MotionCodec(FsqConfig cfg, std::uint64_t seed, motion::BodyPartSplit split = motion::BodyPartSplit::standard())
      : cfg_(std::move(cfg)), split_(std::move(split)), store_(seed) {
    cfg_.validate();
    upper_encoder_ = Encoder(store_, "hfdq.upper.encoder", split_.upper_width(), cfg_);
    upper_decoder_ = Decoder(store_, "hfdq.upper.decoder", split_.upper_width(), cfg_);
    lower_encoder_ = Encoder(store_, "hfdq.lower.encoder", split_.lower_width(), cfg_);
    lower_decoder_ = Decoder(store_, "hfdq.lower.decoder", split_.lower_width(), cfg_);
  }
  MotionCodec(const MotionCodec&) = delete;
  MotionCodec& operator=(const MotionCodec&) = delete;

  const FsqConfig& config() const { return cfg_; }
  const motion::BodyPartSplit& split() const { return split_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  /// Per-channel pose statistics; encoder inputs are standardized with them
  /// and decoder outputs mapped back. Identity until set.
  void set_normalization(std::vector<double> mean, std::vector<double> stddev) {
    if (mean.size() != motion::kPoseWidth || stddev.size() != motion::kPoseWidth) {
      throw DimensionError("normalization statistics must be 147 wide");
    }
    for (auto& s : stddev) s = std::max(s, kMinStd);
    mean_ = Tensor({1, motion::kPoseWidth}, std::move(mean));
    std_ = Tensor({1, motion::kPoseWidth}, std::move(stddev));
  }
  void fit_normalization(const std::vector<motion::MotionSequence>& clips) {
    std::vector<double> mean(motion::kPoseWidth, 0.0), sq(motion::kPoseWidth, 0.0);
    double n = 0;
    for (const auto& c : clips) {
      for (std::size_t t = 0; t < c.frame_count(); ++t, n += 1) {
        for (std::size_t k = 0; k < motion::kPoseWidth; ++k) mean[k] += c.frame(t)[k];
      }
    }
    if (n == 0) throw InputError("cannot fit normalization on an empty dataset");
    for (auto& m : mean) m /= n;
    for (const auto& c : clips) {
      for (std::size_t t = 0; t < c.frame_count(); ++t) {
        for (std::size_t k = 0; k < motion::kPoseWidth; ++k) sq[k] += std::pow(c.frame(t)[k] - mean[k], 2);
      }
    }
    for (auto& s : sq) s = std::sqrt(s / n);
    set_normalization(std::move(mean), std::move(sq));
  }
  const Tensor& norm_mean() const { return mean_; }
  const Tensor& norm_std() const { return std_; }

  /// Pre-quantization latents for both parts.
  std::pair<Tensor, Tensor> encode_latents(const Tensor& poses) const {
    auto [upper, lower] = split_.split(div(sub(poses, mean_), std_));
    return {upper_encoder_(upper), lower_encoder_(lower)};
  }

  CodecOutput forward(const Tensor& poses) const {
    auto [zu, zl] = encode_latents(poses);
    auto qu = fsq_quantize(zu, cfg_);
    auto ql = fsq_quantize(zl, cfg_);
    auto recon = decode_levels(qu.values, ql.values);
    return {recon, std::move(qu), std::move(ql)};
  }

  Tensor decode_levels(const Tensor& upper_levels, const Tensor& lower_levels) const {
    auto out = split_.merge(upper_decoder_(normalize_levels(upper_levels, cfg_)),
                            lower_decoder_(normalize_levels(lower_levels, cfg_)));
    return add(mul(out, std_), mean_);
  }

  LatentCodes encode(const motion::MotionSequence& seq) const {
    NoGradGuard guard;
    auto [zu, zl] = encode_latents(seq.to_tensor());
    return {codes_from_levels(fsq_quantize(zu, cfg_).levels, cfg_),
            codes_from_levels(fsq_quantize(zl, cfg_).levels, cfg_)};
  }

  motion::MotionSequence decode(const LatentCodes& codes) const {
    if (codes.upper.size() != codes.lower.size()) {
      throw DimensionError("upper and lower code streams differ in length");
    }
    if (codes.upper.empty()) throw LengthError("cannot decode an empty code sequence");
    NoGradGuard guard;
    return motion::MotionSequence::from_tensor(
        decode_levels(levels_from_codes(codes.upper, cfg_), levels_from_codes(codes.lower, cfg_)));
  }

 private:
  static constexpr double kMinStd = 1e-3;

  FsqConfig cfg_;
  motion::BodyPartSplit split_;
  ParameterStore store_;
  Encoder upper_encoder_, lower_encoder_;
  Decoder upper_decoder_, lower_decoder_;
  Tensor mean_ = Tensor::zeros({1, motion::kPoseWidth});
  Tensor std_ = Tensor::full({1, motion::kPoseWidth}, 1.0);
};

}  // namespace megadance::hfdq
