#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "megadance/io/json_file.hpp"
#include "megadance/motion/pose.hpp"

namespace megadance::motion {

inline constexpr const char* kMotionFormat = "megadance-motion";
inline constexpr int kMotionFormatVersion = 1;

/// Motion file layout:
///   { "format": "megadance-motion", "version": 1, "fps": 30, "joint_count": 24,
///     "frame_count": N, "frames": [[147 numbers], ...] }
inline std::string motion_to_text(const MotionSequence& seq) {
  io::Json header = {{"format", kMotionFormat},
                     {"version", kMotionFormatVersion},
                     {"fps", kFps},
                     {"joint_count", kJointCount},
                     {"frame_count", seq.frame_count()}};
  std::vector<std::vector<double>> frames;
  frames.reserve(seq.frame_count());
  for (std::size_t t = 0; t < seq.frame_count(); ++t) frames.emplace_back(seq.frame(t).begin(), seq.frame(t).end());
  return io::dump_with_frames(header, "frames", frames);
}

inline MotionSequence motion_from_json(const io::Json& doc, const std::string& origin) {
  io::check_envelope(doc, kMotionFormat, kMotionFormatVersion, origin);
  const int fps = io::field_as<int>(doc, "fps", origin);
  if (fps != kFps) throw ValidationError(origin + ": fps must be 30, found " + std::to_string(fps));
  const auto joints = io::field_as<std::size_t>(doc, "joint_count", origin);
  if (joints != kJointCount) {
    throw ValidationError(origin + ": joint_count must be 24, found " + std::to_string(joints));
  }
  const auto frames = io::field_as<std::size_t>(doc, "frame_count", origin);
  return MotionSequence(frames, io::read_frames(doc, "frames", kPoseWidth, frames, origin));
}

inline MotionSequence read_motion(const std::filesystem::path& path) {
  return motion_from_json(io::read_json(path), path.string());
}

inline void write_motion(const std::filesystem::path& path, const MotionSequence& seq) {
  io::write_text(path, motion_to_text(seq));
}

}  // namespace megadance::motion
