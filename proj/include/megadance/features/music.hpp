#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/io/json_file.hpp"
#include "megadance/tensor/tensor.hpp"

namespace megadance::features {

// Channel layout: [MFCC x20, Chroma x12, Peak, Beat, Envelope].
inline constexpr std::size_t kMusicWidth = 35;
inline constexpr std::size_t kMfccBegin = 0;
inline constexpr std::size_t kMfccCount = 20;
inline constexpr std::size_t kChromaBegin = 20;
inline constexpr std::size_t kChromaCount = 12;
inline constexpr std::size_t kPeakChannel = 32;
inline constexpr std::size_t kBeatChannel = 33;
inline constexpr std::size_t kEnvelopeChannel = 34;
inline constexpr int kMusicFps = 30;

inline constexpr const char* kMusicFormat = "megadance-music";
inline constexpr int kMusicFormatVersion = 1;

class MusicFeatureSequence {
 public:
  MusicFeatureSequence() = default;
  MusicFeatureSequence(std::size_t frames, int genre) : frames_(frames), genre_(genre), values_(frames * kMusicWidth) {}
  MusicFeatureSequence(std::size_t frames, int genre, std::vector<double> values)
      : frames_(frames), genre_(genre), values_(std::move(values)) {
    if (values_.size() != frames_ * kMusicWidth) {
      throw DimensionError("music features: " + std::to_string(values_.size()) + " values for " +
                           std::to_string(frames_) + " frames of width 35");
    }
  }

  std::size_t frame_count() const { return frames_; }
  int genre() const { return genre_; }
  void set_genre(int g) { genre_ = g; }
  double at(std::size_t t, std::size_t c) const { return values_[t * kMusicWidth + c]; }
  double& at(std::size_t t, std::size_t c) { return values_[t * kMusicWidth + c]; }
  const std::vector<double>& values() const { return values_; }

  std::vector<std::size_t> beat_frames() const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < frames_; ++t) {
      if (at(t, kBeatChannel) == 1.0) out.push_back(t);
    }
    return out;
  }

  MusicFeatureSequence slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > frames_) throw DimensionError("music slice out of range");
    return {end - begin, genre_,
            std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(begin * kMusicWidth),
                                values_.begin() + static_cast<std::ptrdiff_t>(end * kMusicWidth))};
  }

  Tensor to_tensor() const { return Tensor({frames_, kMusicWidth}, values_); }

  /// Channel invariants: finite values, binary Peak/Beat, Envelope in [0, 1].
  void validate(const std::string& origin = "music") const {
    if (genre_ < 0) throw ValidationError(origin + ": genre_id must be >= 0");
    for (std::size_t t = 0; t < frames_; ++t) {
      for (std::size_t c = 0; c < kMusicWidth; ++c) {
        const double v = at(t, c);
        auto fail = [&](const std::string& why) {
          throw ValidationError(origin + ": frame " + std::to_string(t) + ", channel " + std::to_string(c) + " (" +
                                channel_name(c) + "): " + why + ", got " + std::to_string(v));
        };
        if (!std::isfinite(v)) fail("value must be finite");
        if ((c == kPeakChannel || c == kBeatChannel) && v != 0.0 && v != 1.0) fail("must be 0 or 1");
        if (c == kEnvelopeChannel && (v < 0.0 || v > 1.0)) fail("must lie in [0, 1]");
      }
    }
  }

  static std::string channel_name(std::size_t c) {
    if (c < kChromaBegin) return "mfcc" + std::to_string(c);
    if (c < kPeakChannel) return "chroma" + std::to_string(c - kChromaBegin);
    if (c == kPeakChannel) return "peak";
    if (c == kBeatChannel) return "beat";
    return "envelope";
  }

  bool operator==(const MusicFeatureSequence&) const = default;

 private:
  std::size_t frames_ = 0;
  int genre_ = 0;
  std::vector<double> values_;
};

/// Music file layout:
///   { "format": "megadance-music", "version": 1, "fps": 30, "width": 35, "frame_count": N,
///     "genre_id": g, "frames": [[35 numbers], ...] }
inline std::string music_to_text(const MusicFeatureSequence& m) {
  io::Json header = {{"format", kMusicFormat}, {"version", kMusicFormatVersion}, {"fps", kMusicFps},
                     {"width", kMusicWidth},   {"frame_count", m.frame_count()}, {"genre_id", m.genre()}};
  std::vector<std::vector<double>> frames;
  frames.reserve(m.frame_count());
  for (std::size_t t = 0; t < m.frame_count(); ++t) {
    frames.emplace_back(m.values().begin() + static_cast<std::ptrdiff_t>(t * kMusicWidth),
                        m.values().begin() + static_cast<std::ptrdiff_t>((t + 1) * kMusicWidth));
  }
  return io::dump_with_frames(header, "frames", frames);
}

inline MusicFeatureSequence music_from_json(const io::Json& doc, const std::string& origin) {
  io::check_envelope(doc, kMusicFormat, kMusicFormatVersion, origin);
  const int fps = io::field_as<int>(doc, "fps", origin);
  if (fps != kMusicFps) throw ValidationError(origin + ": fps must be 30, found " + std::to_string(fps));
  const auto width = io::field_as<std::size_t>(doc, "width", origin);
  if (width != kMusicWidth) {
    throw ParseError(origin + ": field 'width': expected width 35, found " + std::to_string(width));
  }
  const auto frames = io::field_as<std::size_t>(doc, "frame_count", origin);
  const int genre = io::field_as<int>(doc, "genre_id", origin);
  std::vector<double> values;
  try {
    values = io::read_frames(doc, "frames", kMusicWidth, frames, origin);
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  MusicFeatureSequence m(frames, genre, std::move(values));
  m.validate(origin);
  return m;
}

inline MusicFeatureSequence read_music(const std::filesystem::path& path) {
  return music_from_json(io::read_json(path), path.string());
}

inline void write_music(const std::filesystem::path& path, const MusicFeatureSequence& m) {
  io::write_text(path, music_to_text(m));
}

}  // namespace megadance::features
