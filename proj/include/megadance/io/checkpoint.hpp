#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/gadg/model.hpp"
#include "megadance/hfdq/codec.hpp"
#include "megadance/hfdq/loss.hpp"
#include "megadance/io/config.hpp"
#include "megadance/io/json_file.hpp"
#include "megadance/tensor/nn.hpp"

namespace megadance::io {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are little-endian doubles");

inline constexpr char kCheckpointMagic[4] = {'M', 'G', 'D', 'C'};
inline constexpr int kCheckpointVersion = 1;

/// Layout: "MGDC", u64 header length, JSON header, then each tensor's doubles
/// in header order. Header: {format, version, kind, config, config_hash,
/// tensors: [{name, shape}]}.
struct Checkpoint {
  std::string kind;  // "hfdq" or "gadg"
  Json config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  std::string hash() const { return config_hash(config); }
  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return &t;
    }
    return nullptr;
  }
};

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Json header = {{"format", "megadance-checkpoint"}, {"version", kCheckpointVersion}, {"kind", ckpt.kind},
                 {"config", ckpt.config},            {"config_hash", ckpt.hash()}, {"tensors", Json::array()}};
  for (const auto& [name, t] : ckpt.tensors) header["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
  const std::string text = header.dump();
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kCheckpointMagic, 4);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [_, t] : ckpt.tensors) {
    out.write(reinterpret_cast<const char*>(t.values().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const std::string origin = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + origin + "'");
  char magic[4];
  std::uint64_t len = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ParseError(origin + ": not a checkpoint (bad magic)");
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1ULL << 30)) {
    throw ParseError(origin + ": truncated checkpoint header");
  }
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw ParseError(origin + ": truncated checkpoint header");
  const Json header = parse_json(text, origin);
  check_envelope(header, "megadance-checkpoint", kCheckpointVersion, origin);
  Checkpoint ckpt;
  ckpt.kind = field_as<std::string>(header, "kind", origin);
  ckpt.config = field(header, "config", origin);
  const auto stored = field_as<std::string>(header, "config_hash", origin);
  if (stored != ckpt.hash()) throw ValidationError(origin + ": config hash mismatch (file is corrupt)");
  for (const auto& entry : field(header, "tensors", origin)) {
    const auto name = field_as<std::string>(entry, "name", origin);
    const auto shape = field_as<Shape>(entry, "shape", origin);
    std::vector<double> values(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw ParseError(origin + ": truncated payload for tensor '" + name + "'");
    }
    ckpt.tensors.emplace_back(name, Tensor(shape, std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(origin + ": trailing bytes after the last tensor");
  return ckpt;
}

/// Copies every parameter of `store` from the checkpoint. Names the
/// checkpoint holds beyond the store must be listed in `extra`.
inline void load_parameters(ParameterStore& store, const Checkpoint& ckpt, const std::set<std::string>& extra = {}) {
  std::set<std::string> seen;
  for (const auto& [name, t] : ckpt.tensors) {
    if (!store.contains(name)) {
      if (extra.contains(name)) continue;
      throw ValidationError("checkpoint tensor '" + name + "' has no matching parameter");
    }
    Tensor& p = store.at(name);
    if (p.shape() != t.shape()) {
      throw ValidationError("checkpoint tensor '" + name + "' has shape " + shape_str(t.shape()) + ", expected " +
                            shape_str(p.shape()));
    }
    auto dst = p.mutable_values();
    std::copy(t.values().begin(), t.values().end(), dst.begin());
    seen.insert(name);
  }
  for (const auto& [name, _] : store.entries()) {
    if (!seen.contains(name)) throw ValidationError("checkpoint lacks parameter '" + name + "'");
  }
}

inline std::vector<std::pair<std::string, Tensor>> store_tensors(const ParameterStore& store) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : store.entries()) out.emplace_back(name, t.detach());
  return out;
}

// --- codec -----------------------------------------------------------------

inline const std::string kNormMean = "hfdq.norm.mean";
inline const std::string kNormStd = "hfdq.norm.std";

inline Json codec_config_json(const hfdq::FsqConfig& fsq, const hfdq::LossConfig& loss, std::uint64_t seed) {
  return {{"levels", fsq.levels}, {"feature_dim", fsq.feature_dim}, {"downsample", fsq.downsample},
          {"alpha1", loss.alpha1}, {"alpha2", loss.alpha2}, {"seed", seed}};
}

inline void save_codec(const std::filesystem::path& path, const hfdq::MotionCodec& codec, const hfdq::LossConfig& loss,
                       std::uint64_t seed) {
  Checkpoint ckpt{"hfdq", codec_config_json(codec.config(), loss, seed), store_tensors(codec.parameters())};
  ckpt.tensors.emplace_back(kNormMean, codec.norm_mean().detach());
  ckpt.tensors.emplace_back(kNormStd, codec.norm_std().detach());
  write_checkpoint(path, ckpt);
}

inline hfdq::FsqConfig fsq_from_checkpoint(const Checkpoint& ckpt, const std::string& origin) {
  hfdq::FsqConfig fsq;
  fsq.levels = field_as<std::vector<int>>(ckpt.config, "levels", origin);
  fsq.feature_dim = field_as<std::size_t>(ckpt.config, "feature_dim", origin);
  fsq.downsample = field_as<std::size_t>(ckpt.config, "downsample", origin);
  fsq.validate();
  return fsq;
}

struct LoadedCodec {
  std::unique_ptr<hfdq::MotionCodec> codec;
  std::string hash;
};

inline LoadedCodec load_codec(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  const std::string origin = path.string();
  if (ckpt.kind != "hfdq") throw ValidationError(origin + ": expected an hfdq checkpoint, found '" + ckpt.kind + "'");
  auto codec = std::make_unique<hfdq::MotionCodec>(fsq_from_checkpoint(ckpt, origin),
                                                   field_as<std::uint64_t>(ckpt.config, "seed", origin));
  load_parameters(codec->parameters(), ckpt, {kNormMean, kNormStd});
  const Tensor* mean = ckpt.find(kNormMean);
  const Tensor* sd = ckpt.find(kNormStd);
  if (!mean || !sd) throw ValidationError(origin + ": checkpoint lacks normalization statistics");
  codec->set_normalization({mean->values().begin(), mean->values().end()}, {sd->values().begin(), sd->values().end()});
  return {std::move(codec), ckpt.hash()};
}

// --- generator -------------------------------------------------------------

inline Json gadg_config_json(const gadg::GadgConfig& c, std::uint64_t seed, const std::string& hfdq_hash) {
  return {{"model_dim", c.model_dim},     {"genres", c.genres},         {"layers", c.layers},
          {"heads", c.heads},             {"ff_dim", c.ff_dim},         {"dropout", c.dropout},
          {"state_dim", c.state_dim},     {"conv_kernel", c.conv_kernel}, {"expand", c.expand},
          {"codebook_size", c.codebook_size}, {"a_step", c.a_step},     {"window_step", c.window_step},
          {"head_init_scale", c.head_init_scale}, {"seed", seed},       {"hfdq_config_hash", hfdq_hash}};
}

inline void save_generator(const std::filesystem::path& path, const gadg::GadgModel& model, std::uint64_t seed,
                           const std::string& hfdq_hash) {
  write_checkpoint(path, {"gadg", gadg_config_json(model.config(), seed, hfdq_hash), store_tensors(model.parameters())});
}

struct LoadedGenerator {
  std::unique_ptr<gadg::GadgModel> model;
  std::string hfdq_hash;  // codec the generator was trained against
};

inline LoadedGenerator load_generator(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  const std::string origin = path.string();
  if (ckpt.kind != "gadg") throw ValidationError(origin + ": expected a gadg checkpoint, found '" + ckpt.kind + "'");
  const Json& j = ckpt.config;
  gadg::GadgConfig c;
  c.model_dim = field_as<std::size_t>(j, "model_dim", origin);
  c.genres = field_as<std::size_t>(j, "genres", origin);
  c.layers = field_as<std::size_t>(j, "layers", origin);
  c.heads = field_as<std::size_t>(j, "heads", origin);
  c.ff_dim = field_as<std::size_t>(j, "ff_dim", origin);
  c.dropout = field_as<double>(j, "dropout", origin);
  c.state_dim = field_as<std::size_t>(j, "state_dim", origin);
  c.conv_kernel = field_as<std::size_t>(j, "conv_kernel", origin);
  c.expand = field_as<std::size_t>(j, "expand", origin);
  c.codebook_size = field_as<std::size_t>(j, "codebook_size", origin);
  c.a_step = field_as<std::size_t>(j, "a_step", origin);
  c.window_step = field_as<std::size_t>(j, "window_step", origin);
  c.head_init_scale = field_as<double>(j, "head_init_scale", origin);
  auto model = std::make_unique<gadg::GadgModel>(c, field_as<std::uint64_t>(j, "seed", origin));
  load_parameters(model->parameters(), ckpt);
  return {std::move(model), field_as<std::string>(j, "hfdq_config_hash", origin)};
}

}  // namespace megadance::io
