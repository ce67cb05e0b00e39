#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/features/music.hpp"
#include "megadance/features/synth.hpp"
#include "megadance/gadg/generate.hpp"
#include "megadance/gadg/train.hpp"
#include "megadance/hfdq/codes.hpp"
#include "megadance/hfdq/train.hpp"
#include "megadance/io/checkpoint.hpp"
#include "megadance/io/config.hpp"
#include "megadance/io/json_file.hpp"
#include "megadance/metrics/report.hpp"
#include "megadance/motion/motion_io.hpp"
#include "megadance/motion/skeleton.hpp"

namespace megadance::io {

namespace fs = std::filesystem;

inline constexpr const char* kMotionSuffix = ".motion.json";
inline constexpr const char* kMusicSuffix = ".music.json";

/// Append-only JSON-lines log.
class LossLog {
 public:
  explicit LossLog(const fs::path& path) {
    if (path.empty()) return;
    if (path.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(path.parent_path(), ec);
    }
    out_.open(path, std::ios::app);
    if (!out_) throw IoError("cannot open loss log '" + path.string() + "'");
  }
  void write(const Json& line) {
    if (!out_.is_open()) return;
    out_ << line.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct DatasetClip {
  std::string name;
  motion::MotionSequence motion;
  std::optional<features::MusicFeatureSequence> music;
};

inline std::string clip_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%05zu", i);
  return buf;
}

/// Writes N synthetic pairs plus manifest.json. Returns the manifest.
inline Json synth_data(const PipelineConfig& cfg, const fs::path& out, std::size_t clips) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory '" + out.string() + "'");
  Json manifest = {{"format", "megadance-dataset"},
                   {"version", 1},
                   {"seed", cfg.data.synth.seed},
                   {"genre_count", cfg.data.synth.genre_count},
                   {"clips", Json::array()}};
  for (std::size_t i = 0; i < clips; ++i) {
    const auto pair = features::synthesize_clip(cfg.data.synth, i);
    const std::string name = clip_name(i);
    motion::write_motion(out / (name + kMotionSuffix), pair.motion);
    features::write_music(out / (name + kMusicSuffix), pair.music);
    manifest["clips"].push_back({{"name", name},
                                 {"genre", pair.music.genre()},
                                 {"bpm", pair.bpm},
                                 {"frames", pair.motion.frame_count()},
                                 {"motion", name + kMotionSuffix},
                                 {"music", name + kMusicSuffix}});
  }
  write_text(out / "manifest.json", manifest.dump(1) + "\n");
  return manifest;
}

/// Every <stem>.motion.json in `dir` (sorted by name), paired with
/// <stem>.music.json from the first of `music_dirs` that has one.
inline std::vector<DatasetClip> load_clips(const fs::path& dir, const std::vector<fs::path>& music_dirs = {}) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string file = entry.path().filename().string();
    const std::string suffix = kMotionSuffix;
    if (entry.is_regular_file() && file.size() > suffix.size() &&
        file.compare(file.size() - suffix.size(), suffix.size(), suffix) == 0) {
      stems.push_back(file.substr(0, file.size() - suffix.size()));
    }
  }
  if (stems.empty()) throw InputError("no *" + std::string(kMotionSuffix) + " files in '" + dir.string() + "'");
  std::sort(stems.begin(), stems.end());
  std::vector<fs::path> search = {dir};
  search.insert(search.end(), music_dirs.begin(), music_dirs.end());
  std::vector<DatasetClip> clips;
  for (const auto& stem : stems) {
    DatasetClip c{stem, motion::read_motion(dir / (stem + kMotionSuffix)), std::nullopt};
    for (const auto& d : search) {
      const fs::path m = d / (stem + kMusicSuffix);
      if (fs::exists(m)) {
        c.music = features::read_music(m);
        break;
      }
    }
    clips.push_back(std::move(c));
  }
  return clips;
}

inline std::string train_hfdq(const PipelineConfig& cfg, const fs::path& data, const fs::path& out_ckpt,
                              const fs::path& log_path, const std::function<void(const hfdq::StepLog&)>& progress = {}) {
  cfg.validate();
  const auto clips = load_clips(data);
  std::vector<motion::MotionSequence> motions;
  for (const auto& c : clips) motions.push_back(c.motion);
  hfdq::MotionCodec codec(cfg.fsq, cfg.hfdq_train.seed);
  LossLog log(log_path);
  const Json codec_cfg = codec_config_json(cfg.fsq, cfg.hfdq_train.loss, cfg.hfdq_train.seed);
  log.write({{"event", "start"}, {"kind", "hfdq"}, {"config_hash", config_hash(codec_cfg)}, {"clips", clips.size()}});
  hfdq::train_codec(codec, motions, cfg.hfdq_train, motion::Skeleton::smpl(), [&](const hfdq::StepLog& s) {
    log.write({{"step", s.step}, {"loss", s.loss}});
    if (progress) progress(s);
  });
  save_codec(out_ckpt, codec, cfg.hfdq_train.loss, cfg.hfdq_train.seed);
  return config_hash(codec_cfg);
}

/// Motion trimmed to a whole number of latent steps.
inline motion::MotionSequence trim_to_latent(const motion::MotionSequence& seq, std::size_t downsample) {
  const std::size_t frames = seq.frame_count() / downsample * downsample;
  if (frames == 0) throw LengthError("clip shorter than one latent step (" + std::to_string(downsample) + " frames)");
  return seq.slice(0, frames);
}

/// Encodes every clip with the codec and pairs it with its aligned music.
inline std::vector<gadg::GadgSample> build_gadg_samples(const std::vector<DatasetClip>& clips,
                                                        const hfdq::MotionCodec& codec) {
  std::vector<gadg::GadgSample> samples;
  const std::size_t ds = codec.config().downsample;
  for (const auto& c : clips) {
    if (!c.music) throw InputError("clip '" + c.name + "' has no paired music file");
    const auto motion = trim_to_latent(c.motion, ds);
    if (c.music->frame_count() < motion.frame_count()) {
      throw LengthError("clip '" + c.name + "': music is shorter than the motion");
    }
    const auto codes = codec.encode(motion);
    const Tensor music = gadg::align_music(c.music->slice(0, motion.frame_count()), ds);
    samples.push_back({music, c.music->genre(), codes.upper, codes.lower});
  }
  return samples;
}

inline void train_gadg(const PipelineConfig& cfg, const fs::path& data, const fs::path& hfdq_ckpt,
                       const fs::path& out_ckpt, const fs::path& log_path,
                       const std::function<void(const gadg::GadgStepLog&)>& progress = {}) {
  cfg.validate();
  if (hfdq_ckpt.empty() || !fs::exists(hfdq_ckpt)) {
    throw DependencyError("train-gadg needs a trained hfdq checkpoint; '" + hfdq_ckpt.string() +
                          "' does not exist (run train-hfdq first)");
  }
  const LoadedCodec codec = load_codec(hfdq_ckpt);
  if (codec.codec->config().codebook_size() != cfg.gadg.codebook_size) {
    throw ValidationError("hfdq checkpoint codebook size " + std::to_string(codec.codec->config().codebook_size()) +
                          " differs from the configured " + std::to_string(cfg.gadg.codebook_size));
  }
  const auto samples = build_gadg_samples(load_clips(data), *codec.codec);
  gadg::GadgModel model(cfg.gadg, cfg.gadg_train.seed);
  LossLog log(log_path);
  log.write({{"event", "start"}, {"kind", "gadg"}, {"hfdq_config_hash", codec.hash}, {"samples", samples.size()}});
  gadg::train_generator(model, samples, cfg.gadg_train, [&](const gadg::GadgStepLog& s) {
    log.write({{"step", s.step}, {"loss", s.ce.total()}, {"ce_upper", s.ce.upper}, {"ce_lower", s.ce.lower}});
    if (progress) progress(s);
  });
  save_generator(out_ckpt, model, cfg.gadg_train.seed, codec.hash);
}

inline void encode_file(const fs::path& ckpt, const fs::path& in, const fs::path& out) {
  const LoadedCodec codec = load_codec(ckpt);
  const auto seq = motion::read_motion(in);
  if (seq.frame_count() % codec.codec->config().downsample != 0) {
    throw PaddingError(in.string() + ": " + std::to_string(seq.frame_count()) +
                       " frames is not a multiple of 8; pad the clip first");
  }
  hfdq::write_codes(out, codec.codec->encode(seq), codec.codec->config().codebook_size());
}

inline void decode_file(const fs::path& ckpt, const fs::path& in, const fs::path& out) {
  const LoadedCodec codec = load_codec(ckpt);
  std::size_t k = 0;
  const auto codes = hfdq::read_codes(in, &k);
  if (k != codec.codec->config().codebook_size()) {
    throw ValidationError(in.string() + ": codebook size " + std::to_string(k) + " does not match the checkpoint's " +
                          std::to_string(codec.codec->config().codebook_size()));
  }
  motion::write_motion(out, codec.codec->decode(codes));
}

struct GenerateRequest {
  fs::path gadg_ckpt, hfdq_ckpt, music, out;
  std::optional<int> genre;  // defaults to the music file's genre id
  std::size_t frames = 0;
  gadg::GenerateOptions options;
};

inline motion::MotionSequence generate_motion(const GenerateRequest& req) {
  if (req.frames == 0) throw LengthError("--frames must be positive");
  if (!fs::exists(req.hfdq_ckpt)) throw DependencyError("hfdq checkpoint '" + req.hfdq_ckpt.string() + "' not found");
  if (!fs::exists(req.gadg_ckpt)) throw DependencyError("gadg checkpoint '" + req.gadg_ckpt.string() + "' not found");
  const LoadedCodec codec = load_codec(req.hfdq_ckpt);
  const LoadedGenerator gen = load_generator(req.gadg_ckpt);
  const std::size_t ds = codec.codec->config().downsample;
  if (req.frames % ds != 0) {
    throw PaddingError("--frames " + std::to_string(req.frames) + " is not a multiple of " + std::to_string(ds));
  }
  if (gen.model->config().codebook_size != codec.codec->config().codebook_size()) {
    throw ValidationError("gadg checkpoint predicts " + std::to_string(gen.model->config().codebook_size) +
                          " codes but the hfdq codebook has " + std::to_string(codec.codec->config().codebook_size()));
  }
  if (gen.hfdq_hash != codec.hash) {
    throw ValidationError("gadg checkpoint was trained against hfdq config " + gen.hfdq_hash + ", got " + codec.hash);
  }
  const auto music = features::read_music(req.music);
  if (music.frame_count() < req.frames) {
    throw LengthError(req.music.string() + ": music has " + std::to_string(music.frame_count()) + " frames, " +
                      std::to_string(req.frames) + " requested");
  }
  const int genre = req.genre.value_or(music.genre());
  const Tensor aligned = gadg::align_music(music.slice(0, req.frames), ds);
  const auto codes = gadg::generate(*gen.model, aligned, genre, req.frames / ds, req.options);
  return codec.codec->decode(codes);
}

inline metrics::EvaluationReport evaluate_dirs(const PipelineConfig& cfg, const fs::path& generated,
                                               const fs::path& reference) {
  cfg.validate();
  auto to_items = [](std::vector<DatasetClip> clips) {
    std::vector<metrics::EvalItem> items;
    for (auto& c : clips) items.push_back({c.name, std::move(c.motion), std::move(c.music)});
    return items;
  };
  const auto gen = to_items(load_clips(generated, {reference}));
  const auto ref = to_items(load_clips(reference));
  auto rep = metrics::evaluate(gen, ref, motion::Skeleton::smpl(), cfg.metrics);
  rep.config_hash = config_hash(cfg.to_json().at("metrics"));
  return rep;
}

}  // namespace megadance::io
