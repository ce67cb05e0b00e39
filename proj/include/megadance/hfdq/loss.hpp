#pragma once

#include "megadance/errors.hpp"
#include "megadance/motion/body_split.hpp"
#include "megadance/motion/kinematics.hpp"
#include "megadance/tensor/ops.hpp"

namespace megadance::hfdq {

struct LossConfig {
  double alpha1 = 0.5;  // velocity weight
  double alpha2 = 0.25;  // acceleration weight

  void validate() const {
    if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw ConfigError("loss weights alpha1/alpha2 must be >= 0");
  }
};

/// |x - y| + a1 |x' - y'| + a2 |x'' - y''|, each mean-reduced.
inline Tensor kinematic_l1(const Tensor& pred, const Tensor& target, const LossConfig& cfg) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("loss operands differ: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  Tensor loss = l1_mean(pred, target);
  if (cfg.alpha1 != 0.0) {
    loss = add(loss, scale(l1_mean(motion::finite_difference(pred, 1), motion::finite_difference(target, 1)),
                           cfg.alpha1));
  }
  if (cfg.alpha2 != 0.0) {
    loss = add(loss, scale(l1_mean(motion::finite_difference(pred, 2), motion::finite_difference(target, 2)),
                           cfg.alpha2));
  }
  return loss;
}

/// Pose-parameter term plus joint-position term.
inline Tensor reconstruction_loss(const Tensor& pred_poses, const Tensor& poses, const Tensor& pred_joints,
                                  const Tensor& joints, const LossConfig& cfg) {
  return add(kinematic_l1(pred_poses, poses, cfg), kinematic_l1(pred_joints, joints, cfg));
}

/// Convenience form that runs forward kinematics on both pose tensors.
inline Tensor reconstruction_loss(const Tensor& pred_poses, const Tensor& poses, const motion::Skeleton& skeleton,
                                  const LossConfig& cfg) {
  Tensor target_joints;
  {
    NoGradGuard guard;
    target_joints = motion::forward_kinematics(poses, skeleton);
  }
  return reconstruction_loss(pred_poses, poses, motion::forward_kinematics(pred_poses, skeleton), target_joints, cfg);
}

}  // namespace megadance::hfdq
