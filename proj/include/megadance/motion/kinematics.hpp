#pragma once

#include <Eigen/Core>

#include <memory>
#include <vector>

#include "megadance/motion/pose.hpp"
#include "megadance/motion/rotation.hpp"
#include "megadance/motion/skeleton.hpp"
#include "megadance/tensor/tensor.hpp"

namespace megadance::motion {

namespace detail {

struct FrameKinematics {
  std::array<GramSchmidt, kJointCount> local;
  std::array<Eigen::Matrix3d, kJointCount> global;
};

// G_0 = R_0, p_0 = tau; G_j = G_parent R_j, p_j = p_parent + G_parent offset_j.
inline void solve_frame(const double* pose, const Skeleton& skeleton, FrameKinematics& fk, double* positions) {
  for (std::size_t j = 0; j < kJointCount; ++j) {
    fk.local[j] = gram_schmidt(std::span<const double, 6>(pose + rotation_column(j), 6));
    Eigen::Vector3d p;
    if (j == 0) {
      fk.global[0] = fk.local[0].rotation;
      p = {pose[0], pose[1], pose[2]};
    } else {
      const auto parent = static_cast<std::size_t>(skeleton.parents[j]);
      fk.global[j] = fk.global[parent] * fk.local[j].rotation;
      p = Eigen::Vector3d(positions[parent * 3], positions[parent * 3 + 1], positions[parent * 3 + 2]) +
          fk.global[parent] * skeleton.offsets[j];
    }
    positions[j * 3] = p.x();
    positions[j * 3 + 1] = p.y();
    positions[j * 3 + 2] = p.z();
  }
}

inline void check_skeleton(const Skeleton& skeleton) {
  skeleton.validate();
  if (skeleton.joint_count() != kJointCount) {
    throw DimensionError("forward kinematics expects a 24-joint skeleton, got " +
                         std::to_string(skeleton.joint_count()));
  }
}

}  // namespace detail

/// World-space joint positions of every frame.
inline JointPositions forward_kinematics(const MotionSequence& seq, const Skeleton& skeleton) {
  detail::check_skeleton(skeleton);
  JointPositions out(seq.frame_count());
  std::vector<double> buffer(kJointCount * 3);
  detail::FrameKinematics fk;
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    detail::solve_frame(seq.frame(t).data(), skeleton, fk, buffer.data());
    for (std::size_t j = 0; j < kJointCount; ++j) out.set(t, j, {buffer[j * 3], buffer[j * 3 + 1], buffer[j * 3 + 2]});
  }
  return out;
}

/// Differentiable forward kinematics: poses [T x 147] -> joint positions [T x 72].
inline Tensor forward_kinematics(const Tensor& poses, const Skeleton& skeleton) {
  if (poses.dim() != 2 || poses.cols() != kPoseWidth) {
    throw DimensionError("forward kinematics expects [T x 147] poses, got " + shape_str(poses.shape()));
  }
  detail::check_skeleton(skeleton);
  const std::size_t frames = poses.rows();
  auto cache = std::make_shared<std::vector<detail::FrameKinematics>>(frames);
  std::vector<double> out(frames * kJointCount * 3);
  const auto& pv = poses.node()->value;
  for (std::size_t t = 0; t < frames; ++t) {
    detail::solve_frame(pv.data() + t * kPoseWidth, skeleton, (*cache)[t], out.data() + t * kJointCount * 3);
  }
  return Tensor::make_op(
      {frames, kJointCount * 3}, std::move(out), {poses}, [cache, skeleton, frames](megadance::detail::Node& self) {
        double* g = megadance::detail::input_grad(self, 0);
        std::array<Eigen::Vector3d, kJointCount> gp;
        std::array<Eigen::Matrix3d, kJointCount> gG;
        for (std::size_t t = 0; t < frames; ++t) {
          const auto& fk = (*cache)[t];
          const double* gout = self.grad.data() + t * kJointCount * 3;
          double* gpose = g + t * kPoseWidth;
          for (std::size_t j = 0; j < kJointCount; ++j) {
            gp[j] = {gout[j * 3], gout[j * 3 + 1], gout[j * 3 + 2]};
            gG[j].setZero();
          }
          // Children always carry larger indices, so a reverse sweep visits
          // each joint after all of its descendants.
          for (std::size_t j = kJointCount; j-- > 1;) {
            const auto parent = static_cast<std::size_t>(skeleton.parents[j]);
            gp[parent] += gp[j];
            gG[parent] += gp[j] * skeleton.offsets[j].transpose();
            gG[parent] += gG[j] * fk.local[j].rotation.transpose();
            const Eigen::Matrix3d g_local = fk.global[parent].transpose() * gG[j];
            detail::gram_schmidt_backward(fk.local[j], g_local, gpose + rotation_column(j));
          }
          gpose[0] += gp[0].x();
          gpose[1] += gp[0].y();
          gpose[2] += gp[0].z();
          detail::gram_schmidt_backward(fk.local[0], gG[0], gpose + rotation_column(0));
        }
      });
}

}  // namespace megadance::motion
