#pragma once

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/features/synth.hpp"
#include "megadance/gadg/generate.hpp"
#include "megadance/gadg/model.hpp"
#include "megadance/gadg/train.hpp"
#include "megadance/hfdq/fsq.hpp"
#include "megadance/hfdq/train.hpp"
#include "megadance/io/json_file.hpp"
#include "megadance/metrics/report.hpp"
#include "megadance/tensor/nn.hpp"

namespace megadance::io {

inline constexpr const char* kConfigEnv = "MEGADANCE_CONFIG";

/// Reads known keys of one config object and rejects the rest by full path.
class StrictSection {
 public:
  StrictSection(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError("config key '" + path_ + "." + key + "' has the wrong type");
    }
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!used_.contains(key)) throw ConfigError("unknown config key '" + path_ + "." + key + "'");
    }
  }

 private:
  const Json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

struct DataConfig {
  features::SyntheticPairConfig synth;
  std::size_t clips = 64;
};

/// Every tunable of the pipeline. The generator's codebook size and genre
/// count follow the codec levels and the data section.
struct PipelineConfig {
  hfdq::FsqConfig fsq;
  hfdq::HfdqTrainConfig hfdq_train;
  gadg::GadgConfig gadg;
  gadg::GadgTrainConfig gadg_train;
  gadg::GenerateOptions sampling;
  DataConfig data;
  metrics::MetricsConfig metrics;

  PipelineConfig() { sync(); }

  void sync() {
    gadg.codebook_size = fsq.codebook_size();
    data.synth.genre_count = static_cast<int>(gadg.genres);
  }

  void validate() const {
    fsq.validate();
    hfdq_train.validate();
    gadg.validate();
    gadg_train.validate();
    sampling.validate();
    data.synth.validate();
    metrics.validate();
    if (gadg.codebook_size != fsq.codebook_size()) {
      throw ConfigError("gadg codebook size " + std::to_string(gadg.codebook_size) +
                        " differs from the product of hfdq.levels (" + std::to_string(fsq.codebook_size()) + ")");
    }
    if (hfdq_train.window % fsq.downsample != 0) throw ConfigError("hfdq.window must be a multiple of hfdq.downsample");
  }

  Json to_json() const {
    std::vector<std::string> kinds;
    if (metrics.kinetic) kinds.emplace_back("kinetic");
    if (metrics.geometric) kinds.emplace_back("geometric");
    return {
        {"hfdq",
         {{"levels", fsq.levels},
          {"feature_dim", fsq.feature_dim},
          {"downsample", fsq.downsample},
          {"alpha1", hfdq_train.loss.alpha1},
          {"alpha2", hfdq_train.loss.alpha2},
          {"lr", hfdq_train.lr},
          {"beta1", hfdq_train.beta1},
          {"beta2", hfdq_train.beta2},
          {"steps", hfdq_train.steps},
          {"batch", hfdq_train.batch},
          {"window", hfdq_train.window},
          {"stride", hfdq_train.stride},
          {"seed", hfdq_train.seed},
          {"normalize", hfdq_train.normalize}}},
        {"gadg",
         {{"model_dim", gadg.model_dim},
          {"genres", gadg.genres},
          {"layers", gadg.layers},
          {"heads", gadg.heads},
          {"ff_dim", gadg.ff_dim},
          {"dropout", gadg.dropout},
          {"state_dim", gadg.state_dim},
          {"conv_kernel", gadg.conv_kernel},
          {"expand", gadg.expand},
          {"a_step", gadg.a_step},
          {"window_step", gadg.window_step},
          {"head_init_scale", gadg.head_init_scale},
          {"lr", gadg_train.lr},
          {"beta1", gadg_train.beta1},
          {"beta2", gadg_train.beta2},
          {"steps", gadg_train.steps},
          {"batch", gadg_train.batch},
          {"seed", gadg_train.seed},
          {"sampling", sampling.sampling == gadg::Sampling::argmax ? "argmax" : "top_k"},
          {"top_k", sampling.top_k},
          {"temperature", sampling.temperature}}},
        {"data",
         {{"seed", data.synth.seed},
          {"clips", data.clips},
          {"clip_len", data.synth.clip_len},
          {"bpm_min", data.synth.bpm_min},
          {"bpm_max", data.synth.bpm_max},
          {"variation", data.synth.variation}}},
        {"metrics", {{"sigma", metrics.sigma}, {"kinds", kinds}}},
    };
  }

  static PipelineConfig from_json(const Json& doc) {
    PipelineConfig c;
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
      if (key != "hfdq" && key != "gadg" && key != "data" && key != "metrics") {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
    if (doc.contains("hfdq")) {
      StrictSection s(doc.at("hfdq"), "hfdq");
      s.get("levels", c.fsq.levels);
      s.get("feature_dim", c.fsq.feature_dim);
      s.get("downsample", c.fsq.downsample);
      s.get("alpha1", c.hfdq_train.loss.alpha1);
      s.get("alpha2", c.hfdq_train.loss.alpha2);
      s.get("lr", c.hfdq_train.lr);
      s.get("beta1", c.hfdq_train.beta1);
      s.get("beta2", c.hfdq_train.beta2);
      s.get("steps", c.hfdq_train.steps);
      s.get("batch", c.hfdq_train.batch);
      s.get("window", c.hfdq_train.window);
      s.get("stride", c.hfdq_train.stride);
      s.get("seed", c.hfdq_train.seed);
      s.get("normalize", c.hfdq_train.normalize);
      s.finish();
    }
    if (doc.contains("gadg")) {
      StrictSection s(doc.at("gadg"), "gadg");
      s.get("model_dim", c.gadg.model_dim);
      s.get("genres", c.gadg.genres);
      s.get("layers", c.gadg.layers);
      s.get("heads", c.gadg.heads);
      s.get("ff_dim", c.gadg.ff_dim);
      s.get("dropout", c.gadg.dropout);
      s.get("state_dim", c.gadg.state_dim);
      s.get("conv_kernel", c.gadg.conv_kernel);
      s.get("expand", c.gadg.expand);
      s.get("a_step", c.gadg.a_step);
      s.get("window_step", c.gadg.window_step);
      s.get("head_init_scale", c.gadg.head_init_scale);
      s.get("lr", c.gadg_train.lr);
      s.get("beta1", c.gadg_train.beta1);
      s.get("beta2", c.gadg_train.beta2);
      s.get("steps", c.gadg_train.steps);
      s.get("batch", c.gadg_train.batch);
      s.get("seed", c.gadg_train.seed);
      std::string sampling = "argmax";
      s.get("sampling", sampling);
      if (sampling == "argmax") {
        c.sampling.sampling = gadg::Sampling::argmax;
      } else if (sampling == "top_k") {
        c.sampling.sampling = gadg::Sampling::top_k;
      } else {
        throw ConfigError("config key 'gadg.sampling' must be \"argmax\" or \"top_k\", got \"" + sampling + "\"");
      }
      s.get("top_k", c.sampling.top_k);
      s.get("temperature", c.sampling.temperature);
      s.finish();
    }
    if (doc.contains("data")) {
      StrictSection s(doc.at("data"), "data");
      s.get("seed", c.data.synth.seed);
      s.get("clips", c.data.clips);
      s.get("clip_len", c.data.synth.clip_len);
      s.get("bpm_min", c.data.synth.bpm_min);
      s.get("bpm_max", c.data.synth.bpm_max);
      s.get("variation", c.data.synth.variation);
      s.finish();
    }
    if (doc.contains("metrics")) {
      StrictSection s(doc.at("metrics"), "metrics");
      s.get("sigma", c.metrics.sigma);
      std::vector<std::string> kinds{"kinetic", "geometric"};
      s.get("kinds", kinds);
      c.metrics.kinetic = c.metrics.geometric = false;
      for (const auto& k : kinds) {
        (metrics::parse_feature_kind(k) == metrics::FeatureKind::kinetic ? c.metrics.kinetic : c.metrics.geometric) =
            true;
      }
      s.finish();
    }
    c.sync();
    c.validate();
    return c;
  }
};

/// 16 hex digits of FNV-1a over the canonical (sorted-key, compact) dump.
inline std::string config_hash(const Json& config) {
  const std::uint64_t h = fnv1a64(config.dump());
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[static_cast<std::size_t>(15 - i)] = hex[(h >> (4 * i)) & 0xF];
  return out;
}

/// Loads `path`, else the file named by MEGADANCE_CONFIG, else the defaults.
inline PipelineConfig load_config(const std::string& path = {}) {
  std::string chosen = path;
  if (chosen.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env && *env) chosen = env;
  }
  if (chosen.empty()) {
    PipelineConfig c;
    c.validate();
    return c;
  }
  const Json doc = read_json(chosen);
  try {
    return PipelineConfig::from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(chosen + ": " + e.what());
  }
}

}  // namespace megadance::io
