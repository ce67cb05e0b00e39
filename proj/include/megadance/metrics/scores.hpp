#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "megadance/errors.hpp"

namespace megadance::metrics {

/// Mean Euclidean distance over all unordered pairs.
inline double diversity(const std::vector<std::vector<double>>& features) {
  if (features.size() < 2) {
    throw InputError("diversity needs at least 2 feature vectors, got " + std::to_string(features.size()));
  }
  const std::size_t width = features.front().size();
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != width) throw DimensionError("feature vectors differ in width");
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < width; ++k) sq += std::pow(features[i][k] - features[j][k], 2);
      total += std::sqrt(sq);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

inline constexpr double kDefaultBeatSigma = 3.0;

/// Mean over music beats of exp(-d^2 / (2 sigma^2)), d the distance in frames
/// to the nearest kinematic beat. No kinematic beats scores 0.
inline double beat_align_score(const std::vector<std::size_t>& music_beats,
                               const std::vector<std::size_t>& kinematic_beats, double sigma = kDefaultBeatSigma) {
  if (music_beats.empty()) throw InputError("beat align score needs at least one music beat");
  if (!(sigma > 0.0)) throw ConfigError("beat align sigma must be positive");
  if (kinematic_beats.empty()) return 0.0;
  double total = 0.0;
  for (auto m : music_beats) {
    double best = std::numeric_limits<double>::infinity();
    for (auto k : kinematic_beats) {
      const double d = static_cast<double>(m) - static_cast<double>(k);
      best = std::min(best, d * d);
    }
    total += std::exp(-best / (2.0 * sigma * sigma));
  }
  return total / static_cast<double>(music_beats.size());
}

}  // namespace megadance::metrics
