#pragma once

#include <span>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/features/music.hpp"
#include "megadance/gadg/expert.hpp"
#include "megadance/gadg/mask.hpp"
#include "megadance/tensor/nn.hpp"

namespace megadance::gadg {

struct GadgConfig {
  std::size_t model_dim = 128;
  std::size_t genres = 4;
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t ff_dim = 512;
  double dropout = 0.25;
  std::size_t state_dim = 16;
  std::size_t conv_kernel = 4;
  std::size_t expand = 2;
  std::size_t codebook_size = 4375;
  std::size_t a_step = 22;
  std::size_t window_step = 8;
  double head_init_scale = 0.1;

  /// Longest latent sequence the positional table covers: one window.
  std::size_t context() const { return a_step + window_step; }

  ExpertConfig expert() const {
    return {model_dim, heads, ff_dim, dropout, MambaConfig{model_dim, state_dim, conv_kernel, expand}};
  }

  void validate() const {
    if (model_dim == 0 || layers == 0 || heads == 0 || ff_dim == 0) throw ConfigError("gadg sizes must be positive");
    if (model_dim % heads != 0) throw ConfigError("gadg.model_dim must be divisible by gadg.heads");
    if (genres == 0) throw ConfigError("gadg.genres must be positive");
    if (codebook_size < 2) throw ConfigError("gadg.codebook_size must be at least 2");
    if (a_step == 0 || window_step == 0) throw ConfigError("gadg.a_step and gadg.window_step must be positive");
    if (a_step < window_step) throw ConfigError("gadg.a_step must be >= gadg.window_step");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("gadg.dropout must lie in [0, 1)");
    if (state_dim == 0 || conv_kernel == 0 || expand == 0) throw ConfigError("gadg mamba sizes must be positive");
  }
};

/// Average-pools 30 fps music features over each 8-frame window so the music
/// stream runs at the latent rate. A trailing partial window is averaged too.
inline Tensor align_music(const features::MusicFeatureSequence& music, std::size_t downsample = 8) {
  const std::size_t frames = music.frame_count();
  if (frames == 0) throw LengthError("music sequence is empty");
  const std::size_t steps = (frames + downsample - 1) / downsample;
  std::vector<double> out(steps * features::kMusicWidth, 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t f0 = s * downsample, f1 = std::min(frames, f0 + downsample);
    for (std::size_t f = f0; f < f1; ++f) {
      for (std::size_t c = 0; c < features::kMusicWidth; ++c) out[s * features::kMusicWidth + c] += music.at(f, c);
    }
    for (std::size_t c = 0; c < features::kMusicWidth; ++c) {
      out[s * features::kMusicWidth + c] /= static_cast<double>(f1 - f0);
    }
  }
  return Tensor({steps, features::kMusicWidth}, std::move(out));
}

struct ActionLogits {
  Tensor upper;  // [T' x k]
  Tensor lower;
};

/// Final hidden states of the two dance streams.
struct DanceHidden {
  Tensor upper;
  Tensor lower;
};

/// Code embeddings (k+1 rows, row k = start token), a two-layer music MLP,
/// genre/position/stream embeddings, L MoE layers and two k-way heads.
class GadgModel {
 public:
  GadgModel(GadgConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), store_(seed) {
    cfg_.validate();
    const std::size_t d = cfg_.model_dim, k = cfg_.codebook_size;
    upper_embed_ = store_.create("gadg.upper_code_embedding", {k + 1, d}, 1.0);
    lower_embed_ = store_.create("gadg.lower_code_embedding", {k + 1, d}, 1.0);
    music_fc0_ = Linear(store_, "gadg.music_mlp.fc0", features::kMusicWidth, d);
    music_fc1_ = Linear(store_, "gadg.music_mlp.fc1", d, d);
    genre_embed_ = store_.create("gadg.genre_embedding", {cfg_.genres, d}, 1.0);
    position_embed_ = store_.create("gadg.position_embedding", {cfg_.context(), d}, 0.1);
    stream_embed_ = store_.create("gadg.stream_embedding", {kStreams, d}, 0.1);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      layers_.emplace_back(store_, "gadg.layer" + std::to_string(l), cfg_.genres, cfg_.expert());
    }
    upper_norm_ = LayerNorm(store_, "gadg.upper_head.norm", d);
    lower_norm_ = LayerNorm(store_, "gadg.lower_head.norm", d);
    upper_head_ = Linear(store_, "gadg.upper_head", d, k, true, cfg_.head_init_scale);
    lower_head_ = Linear(store_, "gadg.lower_head", d, k, true, cfg_.head_init_scale);
  }
  GadgModel(const GadgModel&) = delete;
  GadgModel& operator=(const GadgModel&) = delete;

  const GadgConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const MoeLayer& layer(std::size_t i) const { return layers_.at(i); }
  int start_token() const { return static_cast<int>(cfg_.codebook_size); }

  /// music: [T' x 35] aligned features; upper_in/lower_in: T' input tokens
  /// (start token then the previous codes). `rng` enables dropout.
  DanceHidden hidden(const Tensor& music, int genre, std::span<const int> upper_in, std::span<const int> lower_in,
                     Rng* rng = nullptr) const {
    const std::size_t len = upper_in.size();
    if (len == 0) throw LengthError("gadg forward on an empty sequence");
    if (lower_in.size() != len || music.rows() != len) {
      throw DimensionError("gadg inputs disagree in length: music " + std::to_string(music.rows()) + ", upper " +
                           std::to_string(len) + ", lower " + std::to_string(lower_in.size()));
    }
    if (music.cols() != features::kMusicWidth) throw DimensionError("gadg music features must be 35 wide");
    if (len > cfg_.context()) {
      throw LengthError("sequence of " + std::to_string(len) + " latent steps exceeds the context of " +
                        std::to_string(cfg_.context()));
    }
    if (genre < 0 || static_cast<std::size_t>(genre) >= cfg_.genres) {
      throw RoutingError("genre " + std::to_string(genre) + " is not routable; valid ids are 0.." +
                         std::to_string(cfg_.genres - 1));
    }
    for (auto ids : {upper_in, lower_in}) {
      for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) > cfg_.codebook_size) {
          throw RangeError("input token " + std::to_string(id) + " outside [0, " +
                           std::to_string(cfg_.codebook_size) + "]");
        }
      }
    }
    const Tensor pos = slice_rows(position_embed_, 0, len);
    const std::vector<int> genre_id(1, genre);
    Tensor m = music_fc1_(relu(music_fc0_(music)));
    m = add(m, embedding(genre_embed_, genre_id));
    Streams s = {m, embedding(upper_embed_, upper_in), embedding(lower_embed_, lower_in)};
    for (std::size_t i = 0; i < kStreams; ++i) {
      s[i] = add(add(s[i], pos), slice_rows(stream_embed_, i, i + 1));
    }
    const AttentionMask mask = build_sliding_mask(len, cfg_.a_step, cfg_.window_step);
    for (const auto& layer : layers_) s = layer(s, genre, mask, rng);
    return {upper_norm_(s[1]), lower_norm_(s[2])};
  }

  ActionLogits heads(const DanceHidden& h) const { return {upper_head_(h.upper), lower_head_(h.lower)}; }

  ActionLogits forward(const Tensor& music, int genre, std::span<const int> upper_in, std::span<const int> lower_in,
                       Rng* rng = nullptr) const {
    return heads(hidden(music, genre, upper_in, lower_in, rng));
  }

 private:
  GadgConfig cfg_;
  ParameterStore store_;
  Tensor upper_embed_, lower_embed_;
  Linear music_fc0_, music_fc1_;
  Tensor genre_embed_, position_embed_, stream_embed_;
  std::vector<MoeLayer> layers_;
  LayerNorm upper_norm_, lower_norm_;
  Linear upper_head_, lower_head_;
};

/// Teacher-forcing inputs: start token then codes[0..T'-2].
inline std::vector<int> shift_right(std::span<const int> codes, int start) {
  std::vector<int> in;
  in.reserve(codes.size());
  if (codes.empty()) return in;
  in.push_back(start);
  in.insert(in.end(), codes.begin(), codes.end() - 1);
  return in;
}

}  // namespace megadance::gadg
