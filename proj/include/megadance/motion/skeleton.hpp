#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/motion/pose.hpp"

namespace megadance::motion {

/// Kinematic tree with rest-pose bone offsets (meters, parent frame).
struct Skeleton {
  std::vector<int> parents;              // parents[0] == -1
  std::vector<Eigen::Vector3d> offsets;  // offsets[0] is unused (root sits at the translation)

  std::size_t joint_count() const { return parents.size(); }

  void validate() const {
    if (parents.size() != offsets.size() || parents.empty()) {
      throw ConfigError("skeleton parents/offsets size mismatch");
    }
    if (parents[0] != -1) throw ConfigError("skeleton joint 0 must be the root");
    for (std::size_t j = 1; j < parents.size(); ++j) {
      if (parents[j] < 0 || static_cast<std::size_t>(parents[j]) >= j) {
        throw ConfigError("skeleton parent of joint " + std::to_string(j) + " must precede it");
      }
    }
  }

  /// 24-joint SMPL topology with approximate neutral-body rest offsets.
  static Skeleton smpl() {
    Skeleton s;
    s.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
    const std::array<std::array<double, 3>, kJointCount> raw = {{
        {0.0, 0.0, 0.0},          // pelvis
        {0.0695, -0.0914, -0.0042},  // left hip
        {-0.0677, -0.0905, -0.0043},  // right hip
        {-0.0025, 0.1089, -0.0267},   // spine1
        {0.0343, -0.3752, -0.0045},   // left knee
        {-0.0383, -0.3826, -0.0089},  // right knee
        {0.0055, 0.1352, 0.0011},     // spine2
        {-0.0136, -0.3980, -0.0437},  // left ankle
        {0.0158, -0.3984, -0.0423},   // right ankle
        {0.0015, 0.0529, 0.0254},     // spine3
        {0.0264, -0.0558, 0.1193},    // left foot
        {-0.0254, -0.0481, 0.1233},   // right foot
        {-0.0028, 0.2139, -0.0429},   // neck
        {0.0788, 0.1217, -0.0341},    // left collar
        {-0.0818, 0.1188, -0.0386},   // right collar
        {0.0052, 0.0650, 0.0513},     // head
        {0.0910, 0.0305, -0.0089},    // left shoulder
        {-0.0960, 0.0326, -0.0091},   // right shoulder
        {0.2596, -0.0128, -0.0275},   // left elbow
        {-0.2537, -0.0133, -0.0214},  // right elbow
        {0.2492, 0.0090, -0.0012},    // left wrist
        {-0.2553, 0.0078, -0.0056},   // right wrist
        {0.0840, -0.0082, -0.0149},   // left hand
        {-0.0846, -0.0061, -0.0103},  // right hand
    }};
    for (const auto& o : raw) s.offsets.emplace_back(o[0], o[1], o[2]);
    return s;
  }
};

inline const std::array<const char*, kJointCount>& joint_names() {
  static const std::array<const char*, kJointCount> names = {
      "pelvis",         "left_hip",       "right_hip",   "spine1",      "left_knee",   "right_knee",
      "spine2",         "left_ankle",     "right_ankle", "spine3",      "left_foot",   "right_foot",
      "neck",           "left_collar",    "right_collar", "head",       "left_shoulder", "right_shoulder",
      "left_elbow",     "right_elbow",    "left_wrist",  "right_wrist", "left_hand",   "right_hand"};
  return names;
}

}  // namespace megadance::motion
