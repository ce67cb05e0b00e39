#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "megadance/features/beats.hpp"
#include "megadance/features/music.hpp"
#include "megadance/features/synth.hpp"
#include "megadance/motion/kinematics.hpp"

using namespace megadance;
using namespace megadance::features;

namespace {

namespace fs = std::filesystem;

class MusicFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("megadance_music_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

MusicFeatureSequence small_music() {
  MusicFeatureSequence m(4, 2);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t c = 0; c < kPeakChannel; ++c) m.at(t, c) = 0.1 * static_cast<double>(t) - 0.01 * c;
    m.at(t, kBeatChannel) = t == 2 ? 1.0 : 0.0;
    m.at(t, kEnvelopeChannel) = 0.25 * t;
  }
  return m;
}

TEST_F(MusicFile, RoundTripPreservesLengthAndValues) {
  const auto m = small_music();
  const auto p = dir_ / "m.music.json";
  write_music(p, m);
  const auto back = read_music(p);
  EXPECT_EQ(back.frame_count(), 4u);
  EXPECT_EQ(back.genre(), 2);
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.beat_frames(), std::vector<std::size_t>{2});
}

TEST_F(MusicFile, NarrowFileNamesWidth35) {
  std::string row = "[";
  for (int c = 0; c < 34; ++c) row += (c ? ",0" : "0");
  row += "]";
  const auto p = write("narrow.json", R"({"format":"megadance-music","version":1,"fps":30,"width":34,"frame_count":1,"genre_id":0,"frames":[)" +
                                          row + "]}");
  try {
    read_music(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("35"), std::string::npos) << e.what();
  }
}

TEST_F(MusicFile, NarrowRowNamesWidth35) {
  std::string row = "[";
  for (int c = 0; c < 34; ++c) row += (c ? ",0" : "0");
  row += "]";
  const auto p = write("row.json", R"({"format":"megadance-music","version":1,"fps":30,"width":35,"frame_count":1,"genre_id":0,"frames":[)" +
                                       row + "]}");
  try {
    read_music(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("35"), std::string::npos) << e.what();
  }
}

TEST_F(MusicFile, HalfBeatIsValidationError) {
  auto m = small_music();
  m.at(1, kBeatChannel) = 0.5;
  const auto p = dir_ / "bad.music.json";
  write_music(p, m);
  try {
    read_music(p);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("beat"), std::string::npos) << e.what();
  }
}

TEST_F(MusicFile, WrongFpsAndVersionAreRejected) {
  auto text = music_to_text(small_music());
  auto fps = text;
  fps.replace(fps.find("\"fps\": 30"), 9, "\"fps\": 60");
  EXPECT_THROW(read_music(write("fps.json", fps)), ValidationError);
  auto ver = text;
  ver.replace(ver.find("\"version\": 1"), 12, "\"version\": 7");
  EXPECT_THROW(read_music(write("ver.json", ver)), ValidationError);
}

TEST_F(MusicFile, EnvelopeOutOfRangeIsValidationError) {
  auto m = small_music();
  m.at(3, kEnvelopeChannel) = 1.5;
  EXPECT_THROW(m.validate(), ValidationError);
}

// --- synthetic pairs -----------------------------------------------------------

TEST(Synth, SameSeedIsBitIdentical) {
  SyntheticPairConfig cfg;
  const auto a = synthesize_pair(cfg, 1), b = synthesize_pair(cfg, 1);
  EXPECT_EQ(a.music, b.music);
  EXPECT_EQ(a.motion, b.motion);
  cfg.seed = 8;
  EXPECT_FALSE(synthesize_pair(cfg, 1).motion == a.motion);
}

TEST(Synth, HundredTwentyBpmBeatsEveryFifteenFrames) {
  SyntheticPairConfig cfg;
  cfg.bpm_min = cfg.bpm_max = 120.0;
  const auto p = synthesize_pair(cfg, 0);
  const auto beats = p.music.beat_frames();
  ASSERT_GE(beats.size(), 10u);
  for (std::size_t i = 1; i < beats.size(); ++i) EXPECT_EQ(beats[i] - beats[i - 1], 15u);
  EXPECT_EQ(beats, p.beats);
}

TEST(Synth, GenresDifferOnRotationChannels) {
  SyntheticPairConfig cfg;
  cfg.variation = 0.0;
  for (int g = 1; g < cfg.genre_count; ++g) {
    const auto a = synthesize_pair(cfg, 0).motion, b = synthesize_pair(cfg, g).motion;
    double linf = 0.0;
    for (std::size_t t = 0; t < a.frame_count(); ++t)
      for (std::size_t c = motion::kTranslationWidth; c < motion::kPoseWidth; ++c)
        linf = std::max(linf, std::abs(a.frame(t)[c] - b.frame(t)[c]));
    EXPECT_GT(linf, 0.1) << "genre " << g;
  }
}

TEST(Synth, OutputPassesLoadValidation) {
  SyntheticPairConfig cfg;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto p = synthesize_clip(cfg, i);
    EXPECT_NO_THROW(p.music.validate());
    EXPECT_EQ(p.music.genre(), static_cast<int>(i % 4));
    EXPECT_EQ(p.music.frame_count(), 240u);
    EXPECT_EQ(p.motion.frame_count(), 240u);
  }
}

TEST(Synth, KinematicBeatsAlignWithMusicBeats) {
  SyntheticPairConfig cfg;
  const auto sk = motion::Skeleton::smpl();
  for (std::size_t i = 0; i < 12; ++i) {
    const auto p = synthesize_clip(cfg, i);
    const auto kin = beat_extract(motion::forward_kinematics(p.motion, sk));
    ASSERT_FALSE(kin.empty());
    for (std::size_t b : p.music.beat_frames()) {
      if (b < 2 || b + 3 > p.motion.frame_count()) continue;
      long best = 1 << 20;
      for (std::size_t k : kin) best = std::min(best, std::abs(static_cast<long>(k) - static_cast<long>(b)));
      EXPECT_LE(best, 1) << "clip " << i << " beat " << b;
    }
  }
}

TEST(Synth, ConfigValidation) {
  SyntheticPairConfig cfg;
  cfg.bpm_max = 200;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  EXPECT_THROW(synthesize_pair(cfg, 4), RoutingError);
}

// --- beats ---------------------------------------------------------------------

motion::JointPositions trajectory(std::size_t frames, const std::function<double(double)>& x) {
  motion::JointPositions pos(frames);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < motion::kJointCount; ++j)
      pos.set(t, j, Eigen::Vector3d(x(static_cast<double>(t)) + 0.1 * j, 0.05 * j, 0.0));
  return pos;
}

TEST(Beats, ConstantVelocityHasNoBeats) {
  EXPECT_TRUE(beat_extract(trajectory(50, [](double t) { return 0.03 * t; })).empty());
  EXPECT_TRUE(beat_extract(trajectory(50, [](double) { return 1.0; })).empty());
}

TEST(Beats, SinusoidBeatsSpacedHalfPeriod) {
  const double period = 24.0;
  const auto beats = beat_extract(trajectory(200, [&](double t) { return std::sin(2.0 * std::numbers::pi * t / period); }));
  ASSERT_GE(beats.size(), 10u);
  for (std::size_t i = 1; i < beats.size(); ++i) {
    EXPECT_NEAR(static_cast<double>(beats[i] - beats[i - 1]), period / 2.0, 1.0);
  }
  // minima of |cos| sit at quarter periods
  EXPECT_NEAR(std::fmod(static_cast<double>(beats[0]) - period / 4.0, period / 2.0), 0.0, 1.0);
}

TEST(Beats, TooShortIsLengthError) {
  EXPECT_THROW(beat_extract(motion::JointPositions(1)), LengthError);
  EXPECT_THROW(beat_extract(motion::JointPositions(2)), LengthError);
}

}  // namespace
