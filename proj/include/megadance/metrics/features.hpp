#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/motion/kinematics.hpp"
#include "megadance/motion/pose.hpp"
#include "megadance/motion/skeleton.hpp"

namespace megadance::metrics {

enum class FeatureKind { kinetic, geometric };

inline constexpr std::size_t kKineticWidth = 72;
inline constexpr std::size_t kGeometricWidth = 32;

inline std::size_t feature_width(FeatureKind kind) {
  return kind == FeatureKind::kinetic ? kKineticWidth : kGeometricWidth;
}
inline const char* feature_name(FeatureKind kind) { return kind == FeatureKind::kinetic ? "kinetic" : "geometric"; }
inline FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "kinetic") return FeatureKind::kinetic;
  if (name == "geometric") return FeatureKind::geometric;
  throw ConfigError("unknown feature kind '" + name + "' (expected kinetic or geometric)");
}

struct FeatureVector {
  FeatureKind kind;
  std::vector<double> values;
};

/// Joint pairs measured by the geometric features (SMPL indices).
inline constexpr std::array<std::array<std::size_t, 2>, 8> kDistancePairs = {{
    {20, 21},  // wrists
    {7, 8},    // ankles
    {15, 0},   // head to pelvis
    {20, 7},   // left wrist to left ankle
    {21, 8},   // right wrist to right ankle
    {22, 15},  // left hand to head
    {23, 15},  // right hand to head
    {4, 5},    // knees
}};

/// Interior angles at the middle joint of each triple.
inline constexpr std::array<std::array<std::size_t, 3>, 8> kAngleTriples = {{
    {16, 18, 20},  // left elbow
    {17, 19, 21},  // right elbow
    {1, 4, 7},     // left knee
    {2, 5, 8},     // right knee
    {13, 16, 18},  // left shoulder
    {14, 17, 19},  // right shoulder
    {0, 1, 4},     // left hip
    {0, 2, 5},     // right hip
}};

namespace detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  mean = m;
  sd = std::sqrt(v / static_cast<double>(xs.size()));
}

inline double angle_at(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d u = a - b, v = c - b;
  const double nu = u.norm(), nv = v.norm();
  if (nu < 1e-12 || nv < 1e-12) return 0.0;
  return std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0));
}

}  // namespace detail

/// Kinetic: per joint, mean magnitude of the first, second and third forward
/// differences of its position (per-frame units), laid out [speed x24,
/// accel x24, jerk x24]. A 3-frame clip has no third difference; jerk is 0.
inline std::vector<double> kinetic_features(const motion::JointPositions& pos) {
  const std::size_t frames = pos.frame_count();
  if (frames < 3) throw LengthError("kinetic features need at least 3 frames, got " + std::to_string(frames));
  std::vector<double> out(kKineticWidth, 0.0);
  for (std::size_t j = 0; j < motion::kJointCount; ++j) {
    double speed = 0.0, accel = 0.0, jerk = 0.0;
    for (std::size_t t = 0; t + 1 < frames; ++t) speed += (pos.at(t + 1, j) - pos.at(t, j)).norm();
    for (std::size_t t = 0; t + 2 < frames; ++t) {
      accel += (pos.at(t + 2, j) - 2.0 * pos.at(t + 1, j) + pos.at(t, j)).norm();
    }
    for (std::size_t t = 0; t + 3 < frames; ++t) {
      jerk += (pos.at(t + 3, j) - 3.0 * pos.at(t + 2, j) + 3.0 * pos.at(t + 1, j) - pos.at(t, j)).norm();
    }
    out[j] = speed / static_cast<double>(frames - 1);
    out[motion::kJointCount + j] = accel / static_cast<double>(frames - 2);
    out[2 * motion::kJointCount + j] = frames > 3 ? jerk / static_cast<double>(frames - 3) : 0.0;
  }
  return out;
}

/// Geometric: mean and std over time of 8 joint distances, then of 8 joint
/// angles (radians): [d_mean x8, d_std x8, a_mean x8, a_std x8].
inline std::vector<double> geometric_features(const motion::JointPositions& pos) {
  const std::size_t frames = pos.frame_count();
  if (frames < 3) throw LengthError("geometric features need at least 3 frames, got " + std::to_string(frames));
  std::vector<double> out(kGeometricWidth, 0.0);
  std::vector<double> series(frames);
  for (std::size_t i = 0; i < kDistancePairs.size(); ++i) {
    const auto [a, b] = kDistancePairs[i];
    for (std::size_t t = 0; t < frames; ++t) series[t] = (pos.at(t, a) - pos.at(t, b)).norm();
    detail::mean_std(series, out[i], out[8 + i]);
  }
  for (std::size_t i = 0; i < kAngleTriples.size(); ++i) {
    const auto [a, b, c] = kAngleTriples[i];
    for (std::size_t t = 0; t < frames; ++t) series[t] = detail::angle_at(pos.at(t, a), pos.at(t, b), pos.at(t, c));
    detail::mean_std(series, out[16 + i], out[24 + i]);
  }
  return out;
}

inline FeatureVector extract_features(const motion::JointPositions& pos, FeatureKind kind) {
  return {kind, kind == FeatureKind::kinetic ? kinetic_features(pos) : geometric_features(pos)};
}

inline FeatureVector extract_features(const motion::MotionSequence& seq, const motion::Skeleton& skeleton,
                                      FeatureKind kind) {
  if (seq.frame_count() < 3) {
    throw LengthError("feature extraction needs at least 3 frames, got " + std::to_string(seq.frame_count()));
  }
  return extract_features(motion::forward_kinematics(seq, skeleton), kind);
}

}  // namespace megadance::metrics
