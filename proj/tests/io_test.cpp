#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "megadance/io/pipeline.hpp"

using namespace megadance;
using namespace megadance::io;

namespace {

class IoDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("megadance_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
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

template <typename E>
std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  ADD_FAILURE() << "no exception of the expected type";
  return {};
}

// Small enough to train in well under a second.
PipelineConfig quick_config() {
  PipelineConfig c;
  c.hfdq_train.steps = 3;
  c.hfdq_train.batch = 2;
  c.hfdq_train.window = 64;
  c.gadg.model_dim = 16;
  c.gadg.layers = 1;
  c.gadg.heads = 2;
  c.gadg.ff_dim = 16;
  c.gadg.state_dim = 4;
  c.gadg_train.steps = 2;
  c.gadg_train.batch = 1;
  c.sync();
  c.validate();
  return c;
}

// --- config ----------------------------------------------------------------------

TEST_F(IoDir, UnknownKeyIsNamedWithItsPath) {
  const auto msg = message_of<ConfigError>([&] { load_config(write("c.json", R"({"gadg":{"layerz":3}})").string()); });
  EXPECT_NE(msg.find("gadg.layerz"), std::string::npos) << msg;
  EXPECT_THROW(load_config(write("top.json", R"({"training":{}})").string()), ConfigError);
}

TEST_F(IoDir, WrongTypeIsConfigError) {
  const auto msg = message_of<ConfigError>([&] { load_config(write("c.json", R"({"hfdq":{"lr":"fast"}})").string()); });
  EXPECT_NE(msg.find("hfdq.lr"), std::string::npos) << msg;
}

TEST_F(IoDir, MalformedJsonIsParseError) {
  EXPECT_THROW(load_config(write("c.json", "{\"hfdq\": ").string()), ParseError);
}

TEST_F(IoDir, MissingConfigFileIsIoError) { EXPECT_THROW(load_config((dir_ / "none.json").string()), IoError); }

TEST_F(IoDir, EnvironmentVariableSuppliesDefaultPath) {
  const auto p = write("env.json", R"({"data":{"clips":5}})");
  setenv(kConfigEnv, p.c_str(), 1);
  const auto c = load_config();
  unsetenv(kConfigEnv);
  EXPECT_EQ(c.data.clips, 5u);
  EXPECT_EQ(load_config().data.clips, PipelineConfig{}.data.clips);
}

TEST(Config, JsonRoundTripIsIdentity) {
  auto c = PipelineConfig{};
  c.gadg.layers = 2;
  c.hfdq_train.lr = 7e-4;
  c.metrics.geometric = false;
  c.sampling.sampling = gadg::Sampling::top_k;
  const Json j = c.to_json();
  EXPECT_EQ(PipelineConfig::from_json(j).to_json(), j);
}

TEST(Config, CodebookFollowsLevels) {
  const auto c = PipelineConfig::from_json(Json::parse(R"({"hfdq":{"levels":[3,3]}})"));
  EXPECT_EQ(c.gadg.codebook_size, 9u);
  EXPECT_EQ(PipelineConfig{}.gadg.codebook_size, 4375u);
}

TEST(Config, BadSamplingAndWindowRejected) {
  EXPECT_THROW(PipelineConfig::from_json(Json::parse(R"({"gadg":{"sampling":"nucleus"}})")), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(Json::parse(R"({"hfdq":{"window":60}})")), ConfigError);
}

TEST(Config, HashIsStableAndSensitive) {
  const Json a = {{"x", 1}, {"y", {1, 2}}};
  Json b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b["x"] = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  // FNV-1a 64 of "" is the offset basis
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

// --- checkpoints -----------------------------------------------------------------

Checkpoint sample_checkpoint() {
  Checkpoint c{"hfdq", {{"levels", {7, 5}}, {"seed", 3}}, {}};
  c.tensors.emplace_back("a", Tensor({2, 2}, {1.0, -2.5, 3.25, 1e-300}));
  c.tensors.emplace_back("b", Tensor({1, 3}, {0.1, 0.2, 0.3}));
  return c;
}

TEST_F(IoDir, CheckpointRoundTripIsExact) {
  const auto p = dir_ / "x.ckpt";
  write_checkpoint(p, sample_checkpoint());
  const auto back = read_checkpoint(p);
  EXPECT_EQ(back.kind, "hfdq");
  EXPECT_EQ(back.config, sample_checkpoint().config);
  ASSERT_EQ(back.tensors.size(), 2u);
  const auto got = back.tensors[0].second.values();
  const std::vector<double> want{1.0, -2.5, 3.25, 1e-300};
  EXPECT_EQ(std::vector<double>(got.begin(), got.end()), want);
  EXPECT_EQ(back.tensors[1].second.shape(), (Shape{1, 3}));
}

TEST_F(IoDir, CheckpointCorruptionIsDetected) {
  const auto p = dir_ / "x.ckpt";
  write_checkpoint(p, sample_checkpoint());
  std::string bytes = read_text(p);

  write_text(dir_ / "magic.ckpt", "XXXX" + bytes.substr(4));
  EXPECT_THROW(read_checkpoint(dir_ / "magic.ckpt"), ParseError);

  write_text(dir_ / "short.ckpt", bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(read_checkpoint(dir_ / "short.ckpt"), ParseError);

  write_text(dir_ / "tail.ckpt", bytes + "z");
  EXPECT_THROW(read_checkpoint(dir_ / "tail.ckpt"), ParseError);

  auto tampered = bytes;
  const auto at = tampered.find("\"seed\":3");
  ASSERT_NE(at, std::string::npos);
  tampered[at + 7] = '4';
  write_text(dir_ / "hash.ckpt", tampered);
  EXPECT_THROW(read_checkpoint(dir_ / "hash.ckpt"), ValidationError);

  EXPECT_THROW(read_checkpoint(dir_ / "absent.ckpt"), IoError);
}

TEST(Checkpoint, LoadParametersChecksNamesAndShapes) {
  ParameterStore store;
  store.add("a", Tensor::full({2, 2}, 0.0));
  store.add("b", Tensor::full({1, 3}, 0.0));
  auto ck = sample_checkpoint();
  load_parameters(store, ck);
  EXPECT_EQ(store.at("a").values()[1], -2.5);

  ParameterStore wrong;
  wrong.add("a", Tensor::full({4, 1}, 0.0));
  wrong.add("b", Tensor::full({1, 3}, 0.0));
  EXPECT_THROW(load_parameters(wrong, ck), ValidationError);

  ParameterStore more;
  more.add("a", Tensor::full({2, 2}, 0.0));
  more.add("b", Tensor::full({1, 3}, 0.0));
  more.add("c", Tensor::full({1, 1}, 0.0));
  EXPECT_THROW(load_parameters(more, ck), ValidationError);

  ParameterStore fewer;
  fewer.add("a", Tensor::full({2, 2}, 0.0));
  EXPECT_THROW(load_parameters(fewer, ck), ValidationError);
  EXPECT_NO_THROW(load_parameters(fewer, ck, {"b"}));
}

TEST_F(IoDir, CodecCheckpointReproducesEncoding) {
  hfdq::MotionCodec codec(hfdq::FsqConfig{}, 4);
  const auto seq = features::synthesize_clip(features::SyntheticPairConfig{}, 0).motion;
  save_codec(dir_ / "c.ckpt", codec, hfdq::LossConfig{}, 4);
  const auto loaded = load_codec(dir_ / "c.ckpt");
  const auto a = codec.encode(seq), b = loaded.codec->encode(seq);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(codec.decode(a), loaded.codec->decode(a));
  EXPECT_THROW(load_generator(dir_ / "c.ckpt"), ValidationError);
}

// --- pipeline ----------------------------------------------------------------------

TEST_F(IoDir, SynthDataIsByteIdenticalAcrossRuns) {
  PipelineConfig c;
  synth_data(c, dir_ / "a", 3);
  synth_data(c, dir_ / "b", 3);
  for (const auto* f : {"manifest.json", "clip_00002.motion.json", "clip_00002.music.json"}) {
    EXPECT_EQ(read_text(dir_ / "a" / f), read_text(dir_ / "b" / f)) << f;
  }
  const auto m = read_json(dir_ / "a" / "manifest.json");
  EXPECT_EQ(m.at("clips").size(), 3u);
  EXPECT_EQ(m.at("clips")[1].at("genre"), 1);
}

TEST_F(IoDir, ZeroClipsWritesEmptyManifest) {
  const auto m = synth_data(PipelineConfig{}, dir_ / "empty", 0);
  EXPECT_TRUE(m.at("clips").empty());
  EXPECT_TRUE(fs::exists(dir_ / "empty" / "manifest.json"));
  EXPECT_THROW(load_clips(dir_ / "empty"), InputError);
}

TEST_F(IoDir, GeneratorTrainingNeedsCodecCheckpoint) {
  const auto c = quick_config();
  synth_data(c, dir_ / "d", 2);
  EXPECT_THROW(train_gadg(c, dir_ / "d", dir_ / "missing.ckpt", dir_ / "g.ckpt", {}), DependencyError);
  EXPECT_THROW(train_gadg(c, dir_ / "d", {}, dir_ / "g.ckpt", {}), DependencyError);
}

TEST_F(IoDir, EncodeRejectsUnpaddedLength) {
  hfdq::MotionCodec codec(hfdq::FsqConfig{}, 0);
  save_codec(dir_ / "c.ckpt", codec, hfdq::LossConfig{}, 0);
  motion::write_motion(dir_ / "odd.motion.json", motion::MotionSequence(13));
  const auto msg =
      message_of<PaddingError>([&] { encode_file(dir_ / "c.ckpt", dir_ / "odd.motion.json", dir_ / "o.json"); });
  EXPECT_NE(msg.find("13"), std::string::npos) << msg;
}

TEST_F(IoDir, EncodeDecodeShapes) {
  hfdq::MotionCodec codec(hfdq::FsqConfig{}, 0);
  save_codec(dir_ / "c.ckpt", codec, hfdq::LossConfig{}, 0);
  motion::write_motion(dir_ / "m.motion.json", features::synthesize_clip(features::SyntheticPairConfig{}, 0).motion);
  encode_file(dir_ / "c.ckpt", dir_ / "m.motion.json", dir_ / "codes.json");
  std::size_t k = 0;
  const auto codes = hfdq::read_codes(dir_ / "codes.json", &k);
  EXPECT_EQ(k, 4375u);
  EXPECT_EQ(codes.upper.size(), 30u);
  EXPECT_EQ(codes.lower.size(), 30u);
  decode_file(dir_ / "c.ckpt", dir_ / "codes.json", dir_ / "back.motion.json");
  EXPECT_EQ(motion::read_motion(dir_ / "back.motion.json").frame_count(), 240u);

  hfdq::write_codes(dir_ / "zeros.json", hfdq::LatentCodes{{0, 0, 0}, {0, 0, 0}}, 4375);
  decode_file(dir_ / "c.ckpt", dir_ / "zeros.json", dir_ / "zeros.motion.json");
  const auto zeros_doc = read_json(dir_ / "zeros.motion.json");
  EXPECT_EQ(motion::read_motion(dir_ / "zeros.motion.json").frame_count(), 24u);
  EXPECT_EQ(zeros_doc.at("frames")[0].size(), 147u);

  hfdq::write_codes(dir_ / "none.json", hfdq::LatentCodes{}, 4375);
  EXPECT_THROW(decode_file(dir_ / "c.ckpt", dir_ / "none.json", dir_ / "x.json"), LengthError);

  hfdq::write_codes(dir_ / "k9.json", hfdq::LatentCodes{{1}, {2}}, 9);
  EXPECT_THROW(decode_file(dir_ / "c.ckpt", dir_ / "k9.json", dir_ / "x.json"), ValidationError);
}

TEST_F(IoDir, EndToEndTinyPipeline) {
  const auto c = quick_config();
  synth_data(c, dir_ / "d", 2);
  const auto log = dir_ / "h.log.jsonl";
  train_hfdq(c, dir_ / "d", dir_ / "h.ckpt", log);
  std::ifstream in(log);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    EXPECT_NO_THROW(Json::parse(line));
    ++lines;
  }
  EXPECT_EQ(lines, 1u + c.hfdq_train.steps);

  train_gadg(c, dir_ / "d", dir_ / "h.ckpt", dir_ / "g.ckpt", dir_ / "g.log.jsonl");
  GenerateRequest req;
  req.gadg_ckpt = dir_ / "g.ckpt";
  req.hfdq_ckpt = dir_ / "h.ckpt";
  req.music = dir_ / "d" / "clip_00001.music.json";
  req.frames = 64;
  const auto a = generate_motion(req);
  EXPECT_EQ(a.frame_count(), 64u);
  EXPECT_EQ(a, generate_motion(req));

  req.frames = 60;
  EXPECT_THROW(generate_motion(req), PaddingError);
  req.frames = 480;
  EXPECT_THROW(generate_motion(req), LengthError);
  req.frames = 64;
  req.genre = 9;
  EXPECT_THROW(generate_motion(req), RoutingError);
  req.genre.reset();
  req.gadg_ckpt = dir_ / "nope.ckpt";
  EXPECT_THROW(generate_motion(req), DependencyError);

  // a codec with other weights breaks the hash link
  auto other = c;
  other.hfdq_train.seed = 9;
  train_hfdq(other, dir_ / "d", dir_ / "h2.ckpt", {});
  req.gadg_ckpt = dir_ / "g.ckpt";
  req.hfdq_ckpt = dir_ / "h2.ckpt";
  EXPECT_THROW(generate_motion(req), ValidationError);
}

TEST_F(IoDir, EvaluateDirectories) {
  PipelineConfig c;
  synth_data(c, dir_ / "ref", 4);
  fs::create_directories(dir_ / "gen");
  for (std::size_t i = 0; i < 4; ++i) {
    const auto n = clip_name(i) + kMotionSuffix;
    fs::copy_file(dir_ / "ref" / n, dir_ / "gen" / n);
  }
  const auto rep = evaluate_dirs(c, dir_ / "gen", dir_ / "ref");
  EXPECT_NEAR(rep.fid_k.value(), 0.0, 1e-6);
  EXPECT_GT(rep.n_bas, 0u);
  fs::create_directories(dir_ / "void");
  EXPECT_THROW(evaluate_dirs(c, dir_ / "void", dir_ / "ref"), InputError);
  EXPECT_THROW(evaluate_dirs(c, dir_ / "absent", dir_ / "ref"), IoError);
}

// --- command line --------------------------------------------------------------------

#ifdef MEGADANCE_CLI

int run(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(MEGADANCE_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return -1;
  std::string out;
  char buf[512];
  while (fgets(buf, sizeof buf, p)) out += buf;
  const int status = pclose(p);
  if (output) *output = out;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(IoDir, CliExitCodes) {
  const std::string d = dir_.string();
  std::string out;
  EXPECT_EQ(run("--help", &out), 0);
  EXPECT_NE(out.find("generate"), std::string::npos);
  EXPECT_EQ(run("", &out), 2);
  EXPECT_EQ(run("synth-data", &out), 2);
  EXPECT_EQ(run("frobnicate", &out), 2);

  EXPECT_EQ(run("synth-data --out " + d + "/d --clips 2", &out), 0) << out;
  EXPECT_TRUE(fs::exists(dir_ / "d" / "clip_00001.music.json"));
  EXPECT_EQ(run("synth-data --out " + d + "/e --clips 0", &out), 0) << out;
  EXPECT_NE(out.find("warning"), std::string::npos) << out;

  EXPECT_EQ(run("train-gadg --data " + d + "/d --hfdq-ckpt " + d + "/no.ckpt --out-ckpt " + d + "/g.ckpt", &out), 3)
      << out;
  EXPECT_EQ(run("train-hfdq --data " + d + "/missing --out-ckpt " + d + "/h.ckpt --steps 1", &out), 4) << out;

  write("bad.json", R"({"hfdq":{"bogus":1}})");
  EXPECT_EQ(run("--config " + d + "/bad.json synth-data --out " + d + "/f", &out), 2) << out;
  EXPECT_NE(out.find("hfdq.bogus"), std::string::npos) << out;
  EXPECT_EQ(run("synth-data --out " + d + "/f --config " + d + "/bad.json", &out), 2) << out;
}

#endif

}  // namespace
