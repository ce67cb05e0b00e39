#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "megadance/errors.hpp"

namespace megadance::metrics {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

/// Sample mean and unbiased covariance. A single sample has zero covariance.
inline GaussianStats fit_gaussian(const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw InputError("cannot fit a Gaussian to zero samples");
  const auto d = static_cast<Eigen::Index>(samples.front().size());
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(s.size()) != d) throw DimensionError("feature vectors differ in width");
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = s[static_cast<std::size_t>(j)];
  }
  GaussianStats g;
  g.mean = x.colwise().mean().transpose();
  g.cov = Eigen::MatrixXd::Zero(d, d);
  if (n > 1) {
    const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
    g.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  }
  return g;
}

namespace detail {

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

}  // namespace detail

inline constexpr double kFidShrinkage = 1e-6;

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}). The trace of the
/// square root is taken from the symmetric similar matrix S_a^{1/2} S_b S_a^{1/2}.
/// When either covariance has an eigenvalue below the shrinkage, both get
/// shrinkage * I first.
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim() || a.cov.rows() != a.mean.size() || b.cov.rows() != b.mean.size()) {
    throw DimensionError("frechet_distance: dimensions differ (" + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()) + ")");
  }
  Eigen::MatrixXd sa = 0.5 * (a.cov + a.cov.transpose());
  Eigen::MatrixXd sb = 0.5 * (b.cov + b.cov.transpose());
  if (std::min(detail::min_eigenvalue(sa), detail::min_eigenvalue(sb)) < kFidShrinkage) {
    const auto eye = Eigen::MatrixXd::Identity(sa.rows(), sa.cols());
    sa += kFidShrinkage * eye;
    sb += kFidShrinkage * eye;
  }
  const Eigen::MatrixXd ra = detail::psd_sqrt(sa);
  const Eigen::MatrixXd inner = ra * sb * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

}  // namespace megadance::metrics
