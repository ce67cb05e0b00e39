#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/motion/pose.hpp"
#include "megadance/tensor/ops.hpp"

namespace megadance::motion {

/// Upper/lower partition of the joints. Root translation always travels with
/// the lower body.
class BodyPartSplit {
 public:
  BodyPartSplit(std::vector<std::size_t> lower, std::vector<std::size_t> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    std::sort(lower_.begin(), lower_.end());
    std::sort(upper_.begin(), upper_.end());
    std::vector<int> seen(kJointCount, 0);
    for (auto j : lower_) check_joint(j, seen);
    for (auto j : upper_) check_joint(j, seen);
    if (std::count(seen.begin(), seen.end(), 1) != static_cast<long>(kJointCount)) {
      throw ConfigError("body split must cover all 24 joints");
    }
    lower_columns_ = {0, 1, 2};
    for (auto j : lower_) append_rotation(lower_columns_, j);
    for (auto j : upper_) append_rotation(upper_columns_, j);
    // merge gathers from [lower | upper] back into pose order
    std::vector<std::size_t> order = lower_columns_;
    order.insert(order.end(), upper_columns_.begin(), upper_columns_.end());
    merge_columns_.assign(kPoseWidth, 0);
    for (std::size_t i = 0; i < order.size(); ++i) merge_columns_[order[i]] = i;
  }

  /// Lower = pelvis, hips, knees, ankles, feet (9 joints); upper = the other 15.
  static BodyPartSplit standard() {
    std::vector<std::size_t> lower = {0, 1, 2, 4, 5, 7, 8, 10, 11};
    std::vector<std::size_t> upper;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (std::find(lower.begin(), lower.end(), j) == lower.end()) upper.push_back(j);
    }
    return {lower, upper};
  }

  const std::vector<std::size_t>& lower_joints() const { return lower_; }
  const std::vector<std::size_t>& upper_joints() const { return upper_; }
  const std::vector<std::size_t>& lower_columns() const { return lower_columns_; }
  const std::vector<std::size_t>& upper_columns() const { return upper_columns_; }
  std::size_t lower_width() const { return lower_columns_.size(); }
  std::size_t upper_width() const { return upper_columns_.size(); }

  /// Differentiable split of [T x 147] poses into (upper, lower) part tensors.
  std::pair<Tensor, Tensor> split(const Tensor& poses) const {
    check_width(poses);
    return {gather_cols(poses, upper_columns_), gather_cols(poses, lower_columns_)};
  }
  /// Inverse of split(); bit-exact since it only permutes columns.
  Tensor merge(const Tensor& upper, const Tensor& lower) const {
    if (upper.cols() != upper_width() || lower.cols() != lower_width() || upper.rows() != lower.rows()) {
      throw DimensionError("merge expects [T x " + std::to_string(upper_width()) + "] upper and [T x " +
                           std::to_string(lower_width()) + "] lower parts");
    }
    return gather_cols(concat_cols({lower, upper}), merge_columns_);
  }

  std::pair<Tensor, Tensor> split(const MotionSequence& seq) const { return split(seq.to_tensor()); }
  MotionSequence merge_sequence(const Tensor& upper, const Tensor& lower) const {
    NoGradGuard guard;
    return MotionSequence::from_tensor(merge(upper, lower));
  }

 private:
  static void check_joint(std::size_t j, std::vector<int>& seen) {
    if (j >= kJointCount) throw ConfigError("body split joint index " + std::to_string(j) + " out of range");
    if (seen[j]++) throw ConfigError("body split index sets overlap at joint " + std::to_string(j));
  }
  static void append_rotation(std::vector<std::size_t>& cols, std::size_t joint) {
    for (std::size_t k = 0; k < kRotationWidth; ++k) cols.push_back(rotation_column(joint) + k);
  }
  static void check_width(const Tensor& poses) {
    if (poses.dim() != 2 || poses.cols() != kPoseWidth) {
      throw DimensionError("expected [T x 147] poses, got " + shape_str(poses.shape()));
    }
  }

  std::vector<std::size_t> lower_;
  std::vector<std::size_t> upper_;
  std::vector<std::size_t> lower_columns_;
  std::vector<std::size_t> upper_columns_;
  std::vector<std::size_t> merge_columns_;
};

/// Forward temporal differences along rows: order 1 gives x[t+1] - x[t],
/// order 2 gives x[t+2] - 2 x[t+1] + x[t].
inline Tensor finite_difference(const Tensor& seq, int order) {
  if (order != 1 && order != 2) throw ContractError("finite_difference order must be 1 or 2");
  if (seq.dim() != 2) throw DimensionError("finite_difference expects [T x D]");
  const std::size_t t = seq.rows();
  if (t < static_cast<std::size_t>(order) + 1) {
    throw LengthError("finite_difference of order " + std::to_string(order) + " needs at least " +
                      std::to_string(order + 1) + " frames, got " + std::to_string(t));
  }
  if (order == 1) return sub(slice_rows(seq, 1, t), slice_rows(seq, 0, t - 1));
  return add(sub(slice_rows(seq, 2, t), scale(slice_rows(seq, 1, t - 1), 2.0)), slice_rows(seq, 0, t - 2));
}

}  // namespace megadance::motion
