#pragma once

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/features/music.hpp"
#include "megadance/motion/pose.hpp"
#include "megadance/motion/rotation.hpp"
#include "megadance/tensor/nn.hpp"

namespace megadance::features {

struct SyntheticPairConfig {
  std::uint64_t seed = 7;
  double bpm_min = 90.0;
  double bpm_max = 150.0;
  std::size_t clip_len = 240;
  int genre_count = 4;
  double variation = 0.35;  // rad, per-beat random motion on top of the genre motifs

  void validate() const {
    if (bpm_min < 60.0 || bpm_max > 180.0 || bpm_min > bpm_max) {
      throw ConfigError("synthetic tempo range must lie within [60, 180] bpm");
    }
    if (clip_len < 3) throw ConfigError("synthetic clip_len must be at least 3 frames");
    if (genre_count < 1) throw ConfigError("synthetic genre_count must be positive");
    if (variation < 0.0) throw ConfigError("synthetic variation must be >= 0");
  }
};

/// One periodic joint rotation: angle(t) = amplitude * cos(harmonic * pi * phase(t)).
struct Motif {
  std::size_t joint;
  Eigen::Vector3d axis;
  double amplitude;
  int harmonic;
};

struct GenreStyle {
  std::vector<Motif> motifs;
  double sway = 0.0;  // lateral root swing (m)
  double bob = 0.0;   // vertical root bob (m)
  std::array<double, kMfccCount> timbre{};
  std::array<double, kChromaCount> key{};
  bool offbeat_onsets = false;
};

/// Genre motif table. Fixed per genre id (independent of the clip seed) so
/// genres keep distinct signatures across a dataset.
inline GenreStyle genre_style(int genre) {
  static const std::array<std::size_t, 14> movable = {1, 2, 3, 4, 5, 6, 9, 12, 13, 14, 16, 17, 18, 19};
  Rng rng = Rng(0x5eedULL).split("genre." + std::to_string(genre));
  GenreStyle s;
  // lead joint differs for every genre modulo the table size
  const std::size_t lead = movable[static_cast<std::size_t>(genre) % movable.size()];
  std::vector<std::size_t> joints = {lead};
  while (joints.size() < 6) {
    const auto j = movable[rng.index(movable.size())];
    if (std::find(joints.begin(), joints.end(), j) == joints.end()) joints.push_back(j);
  }
  const Eigen::Vector3d axes[3] = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ()};
  for (std::size_t i = 0; i < joints.size(); ++i) {
    Motif m;
    m.joint = joints[i];
    m.axis = axes[(static_cast<std::size_t>(genre) + i) % 3];
    m.amplitude = (i == 0 ? 0.8 : rng.uniform(0.3, 0.7)) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    m.harmonic = 1 + static_cast<int>(rng.index(2));
    s.motifs.push_back(m);
  }
  s.sway = rng.uniform(0.02, 0.08);
  s.bob = rng.uniform(0.01, 0.04);
  for (auto& v : s.timbre) v = rng.normal(0.0, 1.0);
  for (auto& v : s.key) v = rng.uniform(0.1, 0.9);
  s.offbeat_onsets = genre % 2 == 1;
  return s;
}

namespace detail {

/// Sum of a few slow random sinusoids, roughly unit variance.
class SmoothNoise {
 public:
  SmoothNoise(Rng& rng, std::size_t terms = 3) {
    for (std::size_t i = 0; i < terms; ++i) {
      freq_.push_back(rng.uniform(0.01, 0.08));
      phase_.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    }
  }
  double operator()(double t) const {
    double v = 0.0;
    for (std::size_t i = 0; i < freq_.size(); ++i) v += std::sin(2.0 * std::numbers::pi * freq_[i] * t + phase_[i]);
    return v * std::sqrt(2.0 / static_cast<double>(freq_.size()));
  }

 private:
  std::vector<double> freq_, phase_;
};

}  // namespace detail

struct SyntheticPair {
  MusicFeatureSequence music;
  motion::MotionSequence motion;
  double bpm = 0.0;
  std::vector<std::size_t> beats;
};

/// Procedural music/motion pair. Beats fall on integer frames; the motion
/// phase runs linearly between consecutive beats, so every joint is at rest
/// exactly on a beat frame.
inline SyntheticPair synthesize_pair(const SyntheticPairConfig& cfg, int genre) {
  cfg.validate();
  if (genre < 0 || genre >= cfg.genre_count) {
    throw RoutingError("genre " + std::to_string(genre) + " outside [0, " + std::to_string(cfg.genre_count) + ")");
  }
  Rng rng = Rng(cfg.seed).split("pair." + std::to_string(genre));
  const std::size_t frames = cfg.clip_len;
  const double bpm = rng.uniform(cfg.bpm_min, cfg.bpm_max);
  const double period = 60.0 * kMusicFps / bpm;
  const double first = rng.uniform(0.0, period);

  // Beat frames, with one virtual beat on each side so the phase is defined everywhere.
  std::vector<long> grid;
  for (long n = -1;; ++n) {
    const long b = std::lround(first + static_cast<double>(n) * period);
    if (grid.empty() || b > grid.back()) grid.push_back(b);
    if (b >= static_cast<long>(frames)) break;
  }
  auto phase = [&grid](std::size_t t) {
    const long tt = static_cast<long>(t);
    std::size_t i = 0;
    while (i + 2 < grid.size() && grid[i + 1] <= tt) ++i;
    return static_cast<double>(i) + static_cast<double>(tt - grid[i]) / static_cast<double>(grid[i + 1] - grid[i]);
  };

  SyntheticPair pair;
  pair.bpm = bpm;
  for (long b : grid) {
    if (b >= 0 && b < static_cast<long>(frames)) pair.beats.push_back(static_cast<std::size_t>(b));
  }

  const GenreStyle style = genre_style(genre);

  // Music.
  MusicFeatureSequence music(frames, genre);
  std::vector<detail::SmoothNoise> mfcc_noise, chroma_noise;
  for (std::size_t c = 0; c < kMfccCount; ++c) mfcc_noise.emplace_back(rng);
  for (std::size_t c = 0; c < kChromaCount; ++c) chroma_noise.emplace_back(rng);
  for (std::size_t t = 0; t < frames; ++t) {
    const double ph = phase(t);
    const double frac = ph - std::floor(ph);
    const double pulse = std::exp(-4.0 * frac);
    for (std::size_t c = 0; c < kMfccCount; ++c) {
      music.at(t, kMfccBegin + c) = style.timbre[c] + 0.3 * mfcc_noise[c](static_cast<double>(t)) + 0.2 * pulse;
    }
    for (std::size_t c = 0; c < kChromaCount; ++c) {
      music.at(t, kChromaBegin + c) =
          std::clamp(style.key[c] + 0.1 * chroma_noise[c](static_cast<double>(t)), 0.0, 1.0);
    }
    music.at(t, kEnvelopeChannel) = 1.0 - frac;
  }
  for (auto b : pair.beats) {
    music.at(b, kBeatChannel) = 1.0;
    music.at(b, kPeakChannel) = 1.0;
  }
  if (style.offbeat_onsets) {
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const long mid = (grid[i] + grid[i + 1]) / 2;
      if (mid >= 0 && mid < static_cast<long>(frames)) music.at(static_cast<std::size_t>(mid), kPeakChannel) = 1.0;
    }
  }

  // Motion. Genre motifs keep a fixed amplitude; the per-clip variation
  // motifs draw a new amplitude every beat and blend with a smoothstep, so
  // the angular velocity still vanishes on beat frames.
  std::vector<double> gain(style.motifs.size());
  for (auto& g : gain) g = rng.uniform(0.9, 1.1);
  const double heading = rng.uniform(-0.3, 0.3);
  const Eigen::Matrix3d facing = motion::axis_angle(Eigen::Vector3d::UnitY(), heading);
  struct Variation {
    std::size_t joint;
    Eigen::Vector3d axis;
    int harmonic;
    std::vector<double> amplitude;  // one per beat interval
  };
  std::vector<Variation> variations;
  for (std::size_t j = 1; j < motion::kJointCount; ++j) {
    Variation v{j, Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized(),
                1 + static_cast<int>(rng.index(3)), {}};
    for (std::size_t n = 0; n < grid.size(); ++n) v.amplitude.push_back(rng.uniform(-cfg.variation, cfg.variation));
    variations.push_back(std::move(v));
  }
  motion::MotionSequence seq(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const double ph = phase(t);
    const auto beat = static_cast<std::size_t>(std::floor(ph));
    const double frac = ph - static_cast<double>(beat);
    const double blend = frac * frac * (3.0 - 2.0 * frac);
    std::array<Eigen::Matrix3d, motion::kJointCount> local;
    local.fill(Eigen::Matrix3d::Identity());
    local[0] = facing;
    for (std::size_t i = 0; i < style.motifs.size(); ++i) {
      const auto& m = style.motifs[i];
      const double angle = gain[i] * m.amplitude * std::cos(m.harmonic * std::numbers::pi * ph);
      local[m.joint] = local[m.joint] * motion::axis_angle(m.axis, angle);
    }
    for (const auto& v : variations) {
      const double a = v.amplitude[beat] + (v.amplitude[std::min(beat + 1, v.amplitude.size() - 1)] - v.amplitude[beat]) * blend;
      local[v.joint] = local[v.joint] * motion::axis_angle(v.axis, a * std::cos(v.harmonic * std::numbers::pi * ph));
    }
    for (std::size_t j = 0; j < motion::kJointCount; ++j) {
      const auto r6 = motion::matrix_to_rot6d(local[j]);
      std::copy(r6.begin(), r6.end(), seq.rotation6d(t, j).begin());
    }
    const double sway = style.sway * std::cos(std::numbers::pi * ph);
    const double bob = style.bob * std::cos(2.0 * std::numbers::pi * ph);
    seq.set_root_translation(t, Eigen::Vector3d(sway, 0.9 + bob, 0.0));
  }
  pair.music = std::move(music);
  pair.motion = std::move(seq);
  return pair;
}

/// Clip i of a synthetic dataset: genre i mod G, its own derived seed.
inline SyntheticPair synthesize_clip(const SyntheticPairConfig& cfg, std::size_t index) {
  SyntheticPairConfig clip = cfg;
  clip.seed = splitmix64(cfg.seed * 0x100000001b3ULL + index);
  return synthesize_pair(clip, static_cast<int>(index % static_cast<std::size_t>(cfg.genre_count)));
}

}  // namespace megadance::features
