#pragma once

#include <Eigen/Geometry>

#include <array>
#include <span>

#include "megadance/errors.hpp"

namespace megadance::motion {

using Rot6d = std::array<double, 6>;

inline constexpr double kMinRot6dNorm = 1e-8;

namespace detail {

/// Intermediate quantities of the Gram-Schmidt map, kept for differentiation.
struct GramSchmidt {
  Eigen::Vector3d a, b;      // raw first / second column
  Eigen::Vector3d c1, c2;    // orthonormal columns
  double a_norm = 0, u_norm = 0, b_dot_c1 = 0;
  Eigen::Matrix3d rotation;  // [c1 c2 c1 x c2]
};

inline GramSchmidt gram_schmidt(std::span<const double, 6> r) {
  GramSchmidt gs;
  gs.a = {r[0], r[1], r[2]};
  gs.b = {r[3], r[4], r[5]};
  gs.a_norm = gs.a.norm();
  if (!(gs.a_norm > kMinRot6dNorm)) throw DegeneracyError("6D rotation: first column has near-zero norm");
  gs.c1 = gs.a / gs.a_norm;
  gs.b_dot_c1 = gs.b.dot(gs.c1);
  const Eigen::Vector3d u = gs.b - gs.b_dot_c1 * gs.c1;
  gs.u_norm = u.norm();
  if (!(gs.u_norm > kMinRot6dNorm)) {
    throw DegeneracyError("6D rotation: columns are parallel or the second column is near-zero");
  }
  gs.c2 = u / gs.u_norm;
  gs.rotation.col(0) = gs.c1;
  gs.rotation.col(1) = gs.c2;
  gs.rotation.col(2) = gs.c1.cross(gs.c2);
  return gs;
}

/// Pulls a gradient w.r.t. the rotation matrix back onto the 6 raw inputs.
inline void gram_schmidt_backward(const GramSchmidt& gs, const Eigen::Matrix3d& grad_rotation, double* grad6) {
  Eigen::Vector3d g1 = grad_rotation.col(0);
  Eigen::Vector3d g2 = grad_rotation.col(1);
  const Eigen::Vector3d g3 = grad_rotation.col(2);
  // c3 = c1 x c2
  g1 += gs.c2.cross(g3);
  g2 += g3.cross(gs.c1);
  // c2 = u / |u|
  const Eigen::Vector3d gu = (g2 - gs.c2 * gs.c2.dot(g2)) / gs.u_norm;
  // u = b - (b . c1) c1
  const double c1_gu = gs.c1.dot(gu);
  const Eigen::Vector3d gb = gu - gs.c1 * c1_gu;
  g1 += -gs.b_dot_c1 * gu - c1_gu * gs.b;
  // c1 = a / |a|
  const Eigen::Vector3d ga = (g1 - gs.c1 * gs.c1.dot(g1)) / gs.a_norm;
  for (int i = 0; i < 3; ++i) {
    grad6[i] += ga[i];
    grad6[3 + i] += gb[i];
  }
}

}  // namespace detail

/// Recovers a rotation from its continuous 6D representation (first two columns).
/// Throws DegeneracyError for near-zero or parallel columns instead of repairing them.
inline Eigen::Matrix3d rot6d_to_matrix(std::span<const double, 6> r) { return detail::gram_schmidt(r).rotation; }

inline Eigen::Matrix3d rot6d_to_matrix(const Rot6d& r) { return rot6d_to_matrix(std::span<const double, 6>(r)); }

inline Rot6d matrix_to_rot6d(const Eigen::Matrix3d& m) {
  return {m(0, 0), m(1, 0), m(2, 0), m(0, 1), m(1, 1), m(2, 1)};
}

inline Rot6d identity_rot6d() { return {1, 0, 0, 0, 1, 0}; }

inline Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace megadance::motion
