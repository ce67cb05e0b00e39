#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "gradcheck.hpp"
#include "megadance/features/synth.hpp"
#include "megadance/hfdq/codec.hpp"
#include "megadance/hfdq/codes.hpp"
#include "megadance/hfdq/fsq.hpp"
#include "megadance/hfdq/loss.hpp"
#include "megadance/hfdq/train.hpp"

using namespace megadance;
using namespace megadance::hfdq;
using megadance::testing::gradcheck;
using megadance::testing::random_tensor;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

motion::MotionSequence small_random_motion(std::size_t frames, Rng& rng) {
  motion::MotionSequence seq(frames);
  for (auto& v : seq.values()) v = rng.normal(0.0, 0.5);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < motion::kJointCount; ++j) {
      seq.rotation6d(t, j)[0] += 1.0;
      seq.rotation6d(t, j)[4] += 1.0;
    }
  return seq;
}

}  // namespace

TEST(FsqConfig, DefaultLevelsGive4375Codes) {
  FsqConfig cfg;
  EXPECT_EQ(cfg.codebook_size(), 7u * 5 * 5 * 5 * 5);
  EXPECT_EQ(cfg.codebook_size(), 4375u);
  EXPECT_EQ(cfg.latent_dim(), 5u);
  cfg.levels = {7, 1, 5};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Fsq, ZeroMapsToMiddleLevel) {
  FsqConfig cfg;
  auto q = fsq_quantize(Tensor::zeros({1, 5}), cfg);
  EXPECT_EQ(q.levels, (std::vector<int>{3, 2, 2, 2, 2}));
  EXPECT_EQ(q.values[0], 3.0);
}

TEST(Fsq, SaturatesAtTopLevel) {
  FsqConfig cfg;
  auto q = fsq_quantize(Tensor::full({1, 5}, 1e6), cfg);
  EXPECT_EQ(q.levels, (std::vector<int>{6, 4, 4, 4, 4}));
  auto low = fsq_quantize(Tensor::full({1, 5}, -1e6), cfg);
  EXPECT_EQ(low.levels, (std::vector<int>{0, 0, 0, 0, 0}));
}

TEST(Fsq, ForwardValuesOnIntegerGrid) {
  FsqConfig cfg;
  Rng rng(1);
  auto q = fsq_quantize(random_tensor({200, 5}, rng, 3.0), cfg);
  for (std::size_t i = 0; i < q.values.numel(); ++i) {
    const double v = q.values[i];
    EXPECT_EQ(v, std::round(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, cfg.levels[i % 5] - 1);
  }
}

TEST(Fsq, StraightThroughGradientAtPointThree) {
  FsqConfig cfg;
  cfg.levels = {5};
  Tensor z = Tensor::matrix(1, 1, {0.3}, true);
  sum(fsq_quantize(z, cfg).values).backward();
  const double h = 1e-5;
  const double fd = (4 * sig(0.3 + h) - 4 * sig(0.3 - h)) / (2 * h);
  EXPECT_NEAR(z.grad()[0], 4 * sig(0.3) * (1 - sig(0.3)), 1e-12);
  EXPECT_NEAR(z.grad()[0], fd, 1e-6);
}

TEST(Fsq, MixedRadixEndpoints) {
  FsqConfig cfg;
  EXPECT_EQ(levels_to_index(std::vector<int>{0, 0, 0, 0, 0}, cfg), 0);
  EXPECT_EQ(levels_to_index(std::vector<int>{6, 4, 4, 4, 4}, cfg), 4374);
  // oracle: sum level_i * prod_{j>i} L_j
  EXPECT_EQ(levels_to_index(std::vector<int>{2, 1, 3, 0, 4}, cfg), 2 * 625 + 1 * 125 + 3 * 25 + 0 * 5 + 4);
  EXPECT_THROW(levels_to_index(std::vector<int>{7, 0, 0, 0, 0}, cfg), RangeError);
  EXPECT_THROW(levels_to_index(std::vector<int>{0, -1, 0, 0, 0}, cfg), RangeError);
  EXPECT_THROW(index_to_levels(4375, cfg), RangeError);
}

TEST(Fsq, IndexBijectionIsExhaustive) {
  FsqConfig cfg;
  std::set<std::vector<int>> seen;
  for (int k = 0; k < 4375; ++k) {
    const auto lv = index_to_levels(k, cfg);
    ASSERT_EQ(levels_to_index(lv, cfg), k);
    seen.insert(lv);
  }
  EXPECT_EQ(seen.size(), 4375u);
}

TEST(Fsq, RequantizingIsIdempotent) {
  FsqConfig cfg;
  Rng rng(2);
  auto q = fsq_quantize(random_tensor({50, 5}, rng, 2.0), cfg);
  // preimage of each level under the bound: logit(level / (L-1)), nudged off the ends
  std::vector<double> pre(q.levels.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const double span = cfg.levels[i % 5] - 1;
    const double p = std::clamp(q.levels[i] / span, 1e-6, 1 - 1e-6);
    pre[i] = std::log(p / (1 - p));
  }
  auto again = fsq_quantize(Tensor({50, 5}, pre), cfg);
  EXPECT_EQ(again.levels, q.levels);
}

TEST(Fsq, NormalizedLevelsSpanUnitInterval) {
  FsqConfig cfg;
  auto n = normalize_levels(Tensor::matrix(2, 5, {0, 0, 0, 0, 0, 6, 4, 4, 4, 4}), cfg);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_DOUBLE_EQ(n(0, j), -1.0);
    EXPECT_DOUBLE_EQ(n(1, j), 1.0);
  }
}

TEST(Utilization, SimpleStreams) {
  std::vector<int> all(4375);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_DOUBLE_EQ(codebook_utilization(all, 4375), 1.0);
  EXPECT_NEAR(codebook_utilization(std::vector<int>(100, 17), 4375), 1.0 / 4375, 1e-15);
  EXPECT_THROW(codebook_utilization(std::vector<int>{}, 4375), InputError);
}

TEST(Utilization, WideGaussianLatentsCoverGrid) {
  // 10^6 samples of z ~ N(0, 4) per channel.
  FsqConfig cfg;
  Rng rng(3);
  CodeUsage usage(cfg.codebook_size());
  for (int chunk = 0; chunk < 10; ++chunk) {
    auto q = fsq_quantize(random_tensor({100000, 5}, rng, 2.0), cfg);
    usage.add(codes_from_levels(q.levels, cfg));
  }
  EXPECT_EQ(usage.total(), 1000000u);
  EXPECT_DOUBLE_EQ(usage.utilization(), 1.0);
}

TEST(Codec, ShapesFollowDownsampling) {
  FsqConfig cfg;
  cfg.feature_dim = 16;
  MotionCodec codec(cfg, 1);
  Rng rng(4);
  auto x = random_tensor({240, 147}, rng);
  auto [zu, zl] = codec.encode_latents(x);
  EXPECT_EQ(zu.shape(), (Shape{30, 5}));
  EXPECT_EQ(zl.shape(), (Shape{30, 5}));
  auto out = codec.forward(x);
  EXPECT_EQ(out.reconstruction.shape(), (Shape{240, 147}));
  auto tiny = codec.forward(random_tensor({8, 147}, rng));
  EXPECT_EQ(tiny.upper.values.shape(), (Shape{1, 5}));
  EXPECT_EQ(tiny.reconstruction.shape(), (Shape{8, 147}));
  EXPECT_THROW(codec.encode_latents(random_tensor({12, 147}, rng)), PaddingError);
}

TEST(Codec, DecodeZeroCodesGivesValidShape) {
  FsqConfig cfg;
  cfg.feature_dim = 16;
  MotionCodec codec(cfg, 2);
  LatentCodes codes{std::vector<int>(30, 0), std::vector<int>(30, 0)};
  auto seq = codec.decode(codes);
  EXPECT_EQ(seq.frame_count(), 240u);
  EXPECT_EQ(seq.values().size(), 240u * 147);
}

TEST(Codec, ParameterNamesAreUniqueAndScoped) {
  FsqConfig cfg;
  cfg.feature_dim = 8;
  MotionCodec codec(cfg, 3);
  std::set<std::string> names;
  for (const auto& [name, t] : codec.parameters().entries()) {
    EXPECT_TRUE(names.insert(name).second);
    EXPECT_EQ(name.rfind("hfdq.", 0), 0u);
  }
  EXPECT_GT(names.size(), 20u);
}

TEST(Codec, StraightThroughChainRule) {
  // d loss / dz must equal (d loss / d level) * (L - 1) sigma'(z), with the
  // downstream cotangent taken at the quantized point.
  FsqConfig cfg;
  cfg.feature_dim = 4;
  ParameterStore store(5);
  Decoder dec(store, "d", 3, cfg);
  Rng rng(6);
  Tensor z = random_tensor({2, 5}, rng);
  z.set_requires_grad(true);
  Tensor w = random_tensor({16, 3}, rng);
  sum(mul(dec(normalize_levels(fsq_quantize(z, cfg).values, cfg)), w)).backward();

  Tensor levels;
  {
    NoGradGuard off;
    levels = fsq_quantize(z, cfg).values;
  }
  Tensor q(levels.shape(), std::vector<double>(levels.values().begin(), levels.values().end()), true);
  sum(mul(dec(normalize_levels(q, cfg)), w)).backward();
  for (std::size_t i = 0; i < z.numel(); ++i) {
    const double s = sig(z[i]);
    const double expected = q.grad()[i] * (cfg.levels[i % 5] - 1) * s * (1 - s);
    EXPECT_NEAR(z.grad()[i], expected, 1e-12);
  }
}

TEST(Loss, IdentityIsZero) {
  Rng rng(7);
  auto seq = small_random_motion(12, rng);
  auto x = seq.to_tensor();
  EXPECT_EQ(reconstruction_loss(x, x, motion::Skeleton::smpl(), {}).item(), 0.0);
}

TEST(Loss, ConstantShiftOnPoseTermOnly) {
  Rng rng(8);
  auto s = random_tensor({10, 6}, rng);
  auto shifted = add_scalar(s, 0.37);
  // velocity and acceleration unchanged, so only |c| survives
  EXPECT_NEAR(kinematic_l1(shifted, s, {}).item(), 0.37, 1e-12);
}

TEST(Loss, ZeroWeightsReduceToPositionL1) {
  Rng rng(9);
  auto a = random_tensor({10, 4}, rng);
  auto b = random_tensor({10, 4}, rng);
  double oracle = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) oracle += std::abs(a[i] - b[i]);
  oracle /= static_cast<double>(a.numel());
  EXPECT_NEAR(kinematic_l1(a, b, {.alpha1 = 0, .alpha2 = 0}).item(), oracle, 1e-14);
}

TEST(Loss, MatchesHandAssembledTerms) {
  Rng rng(10);
  auto a = random_tensor({7, 3}, rng);
  auto b = random_tensor({7, 3}, rng);
  auto l1 = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
    return s / static_cast<double>(x.size());
  };
  auto diff = [](const Tensor& t, int order) {
    std::vector<double> out;
    for (std::size_t r = 0; r + order < t.rows(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c)
        out.push_back(order == 1 ? t(r + 1, c) - t(r, c) : t(r + 2, c) - 2 * t(r + 1, c) + t(r, c));
    return out;
  };
  const double oracle = l1({a.values().begin(), a.values().end()}, {b.values().begin(), b.values().end()}) +
                        0.5 * l1(diff(a, 1), diff(b, 1)) + 0.25 * l1(diff(a, 2), diff(b, 2));
  EXPECT_NEAR(kinematic_l1(a, b, {}).item(), oracle, 1e-13);
  EXPECT_THROW(kinematic_l1(a, random_tensor({6, 3}, rng), {}), DimensionError);
}

TEST(Loss, PositiveOnlyWhenFramesDiffer) {
  Rng rng(11);
  auto seq = small_random_motion(9, rng);
  auto other = seq;
  other.frame(4)[10] += 0.2;
  EXPECT_GT(reconstruction_loss(other.to_tensor(), seq.to_tensor(), motion::Skeleton::smpl(), {}).item(), 0.0);
}

TEST(Windows, SlidingWindowCounts) {
  auto w = sliding_windows({240, 272, 100}, 240, 16);
  ASSERT_EQ(w.size(), 1u + 3u);
  EXPECT_EQ(w[3].clip, 1u);
  EXPECT_EQ(w[3].start, 32u);
}

TEST(TrainCodec, EmptyDatasetIsInputError) {
  FsqConfig cfg;
  cfg.feature_dim = 8;
  MotionCodec codec(cfg, 1);
  EXPECT_THROW(train_codec(codec, {}, {}, motion::Skeleton::smpl()), InputError);
}

TEST(TrainCodec, InitialLossFinitePositiveAndDecreases) {
  FsqConfig cfg;
  cfg.feature_dim = 16;
  MotionCodec codec(cfg, 2);
  features::SyntheticPairConfig sc;
  std::vector<motion::MotionSequence> clips;
  for (std::size_t i = 0; i < 4; ++i) clips.push_back(features::synthesize_clip(sc, i).motion);
  HfdqTrainConfig tc;
  tc.steps = 60;
  tc.batch = 2;
  tc.lr = 3e-3;
  auto losses = train_codec(codec, clips, tc, motion::Skeleton::smpl());
  ASSERT_EQ(losses.size(), 60u);
  EXPECT_TRUE(std::isfinite(losses.front()));
  EXPECT_GT(losses.front(), 0.0);
  double head = 0, tail = 0;
  for (int i = 0; i < 10; ++i) head += losses[static_cast<std::size_t>(i)], tail += losses[losses.size() - 1 - static_cast<std::size_t>(i)];
  EXPECT_LT(tail, head);
}

TEST(CodeFile, RoundTripAndValidation) {
  const auto dir = std::filesystem::temp_directory_path() / "megadance_codes_test";
  LatentCodes codes{{1, 2, 4374}, {0, 5, 9}};
  write_codes(dir / "c.codes.json", codes, 4375);
  std::size_t k = 0;
  auto back = read_codes(dir / "c.codes.json", &k);
  EXPECT_EQ(back.upper, codes.upper);
  EXPECT_EQ(back.lower, codes.lower);
  EXPECT_EQ(k, 4375u);
  auto doc = io::parse_json(codes_to_text(codes, 4375), "mem");
  doc["upper_codes"][0] = 4375;
  EXPECT_THROW(codes_from_json(doc, "mem"), ValidationError);
  doc = io::parse_json(codes_to_text(codes, 4375), "mem");
  doc["version"] = 2;
  EXPECT_THROW(codes_from_json(doc, "mem"), ValidationError);
  std::filesystem::remove_all(dir);
}
