#pragma once

#include <algorithm>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/motion/pose.hpp"

namespace megadance::features {

/// Mean joint speed per frame using central differences, frames 1..T-2
/// (entries 0 and T-1 are left at zero and never reported as beats).
inline std::vector<double> mean_joint_speed(const motion::JointPositions& pos) {
  const std::size_t frames = pos.frame_count();
  std::vector<double> speed(frames, 0.0);
  for (std::size_t t = 1; t + 1 < frames; ++t) {
    double total = 0.0;
    for (std::size_t j = 0; j < motion::kJointCount; ++j) total += (pos.at(t + 1, j) - pos.at(t - 1, j)).norm();
    speed[t] = total / (2.0 * motion::kJointCount);
  }
  return speed;
}

/// Kinematic beats: frames where mean joint speed has a local minimum. A flat
/// valley reports its middle frame. Differences below a relative tolerance
/// count as ties so rounding noise on uniform motion does not create beats.
inline std::vector<std::size_t> beat_extract(const motion::JointPositions& pos) {
  const std::size_t frames = pos.frame_count();
  if (frames < 3) {
    throw LengthError("beat extraction needs at least 3 frames, got " + std::to_string(frames));
  }
  const auto speed = mean_joint_speed(pos);
  const double peak = *std::max_element(speed.begin(), speed.end());
  const double tol = 1e-9 * std::max(peak, 1e-12);
  std::vector<std::size_t> beats;
  // valid speeds live in [1, T-2]; a valley needs a neighbor on each side
  std::size_t t = 2;
  while (t + 2 < frames) {
    std::size_t end = t;
    while (end + 2 < frames && std::abs(speed[end + 1] - speed[t]) <= tol) ++end;
    if (speed[t - 1] > speed[t] + tol && speed[end + 1] > speed[t] + tol) beats.push_back((t + end) / 2);
    t = end + 1;
  }
  return beats;
}

}  // namespace megadance::features
