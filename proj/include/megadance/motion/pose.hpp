#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/tensor/tensor.hpp"

namespace megadance::motion {

inline constexpr std::size_t kJointCount = 24;
inline constexpr std::size_t kRotationWidth = 6;
inline constexpr std::size_t kTranslationWidth = 3;
/// [root translation (3); 24 joint rotations in 6D (144)]
inline constexpr std::size_t kPoseWidth = kTranslationWidth + kJointCount * kRotationWidth;
inline constexpr int kFps = 30;

static_assert(kPoseWidth == 147);

/// Column of the first 6D component of joint `j` inside a pose frame.
constexpr std::size_t rotation_column(std::size_t joint) { return kTranslationWidth + joint * kRotationWidth; }

/// Frame-major sequence of 147-wide pose vectors sampled at 30 fps.
/// Joint rotations are parent-relative.
class MotionSequence {
 public:
  MotionSequence() = default;
  explicit MotionSequence(std::size_t frames) : frames_(frames), values_(frames * kPoseWidth, 0.0) {}
  MotionSequence(std::size_t frames, std::vector<double> values) : frames_(frames), values_(std::move(values)) {
    if (values_.size() != frames_ * kPoseWidth) {
      throw DimensionError("motion data holds " + std::to_string(values_.size()) + " values, expected " +
                           std::to_string(frames_) + " x 147");
    }
  }

  std::size_t frame_count() const { return frames_; }
  bool empty() const { return frames_ == 0; }

  std::span<const double> frame(std::size_t t) const { return {values_.data() + t * kPoseWidth, kPoseWidth}; }
  std::span<double> frame(std::size_t t) { return {values_.data() + t * kPoseWidth, kPoseWidth}; }

  Eigen::Vector3d root_translation(std::size_t t) const {
    const double* p = values_.data() + t * kPoseWidth;
    return {p[0], p[1], p[2]};
  }
  void set_root_translation(std::size_t t, const Eigen::Vector3d& v) {
    double* p = values_.data() + t * kPoseWidth;
    p[0] = v.x();
    p[1] = v.y();
    p[2] = v.z();
  }
  std::span<const double, kRotationWidth> rotation6d(std::size_t t, std::size_t joint) const {
    return std::span<const double, kRotationWidth>(values_.data() + t * kPoseWidth + rotation_column(joint),
                                                   kRotationWidth);
  }
  std::span<double, kRotationWidth> rotation6d(std::size_t t, std::size_t joint) {
    return std::span<double, kRotationWidth>(values_.data() + t * kPoseWidth + rotation_column(joint),
                                             kRotationWidth);
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  MotionSequence slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > frames_) throw LengthError("motion slice out of range");
    return MotionSequence(end - begin,
                          std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(begin * kPoseWidth),
                                              values_.begin() + static_cast<std::ptrdiff_t>(end * kPoseWidth)));
  }

  Tensor to_tensor(bool requires_grad = false) const { return Tensor({frames_, kPoseWidth}, values_, requires_grad); }
  static MotionSequence from_tensor(const Tensor& t) {
    if (t.dim() != 2 || t.cols() != kPoseWidth) {
      throw DimensionError("pose tensor must be [T x 147], got " + shape_str(t.shape()));
    }
    return MotionSequence(t.rows(), std::vector<double>(t.values().begin(), t.values().end()));
  }

  friend bool operator==(const MotionSequence&, const MotionSequence&) = default;

 private:
  std::size_t frames_ = 0;
  std::vector<double> values_;
};

/// World-space joint positions, T x 24 x 3, in meters.
class JointPositions {
 public:
  JointPositions() = default;
  explicit JointPositions(std::size_t frames) : frames_(frames), values_(frames * kJointCount * 3, 0.0) {}
  JointPositions(std::size_t frames, std::vector<double> values) : frames_(frames), values_(std::move(values)) {
    if (values_.size() != frames_ * kJointCount * 3) throw DimensionError("joint position buffer size mismatch");
  }

  std::size_t frame_count() const { return frames_; }
  Eigen::Vector3d at(std::size_t t, std::size_t joint) const {
    const double* p = values_.data() + (t * kJointCount + joint) * 3;
    return {p[0], p[1], p[2]};
  }
  void set(std::size_t t, std::size_t joint, const Eigen::Vector3d& v) {
    double* p = values_.data() + (t * kJointCount + joint) * 3;
    p[0] = v.x();
    p[1] = v.y();
    p[2] = v.z();
  }
  const std::vector<double>& values() const { return values_; }

  JointPositions subsample(std::size_t step) const {
    const std::size_t n = (frames_ + step - 1) / step;
    JointPositions out(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < kJointCount; ++j) out.set(i, j, at(i * step, j));
    }
    return out;
  }

 private:
  std::size_t frames_ = 0;
  std::vector<double> values_;
};

}  // namespace megadance::motion
