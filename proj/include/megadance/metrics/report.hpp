#pragma once

#include <optional>
#include <string>
#include <vector>

#include "megadance/errors.hpp"
#include "megadance/features/beats.hpp"
#include "megadance/features/music.hpp"
#include "megadance/io/json_file.hpp"
#include "megadance/metrics/features.hpp"
#include "megadance/metrics/fid.hpp"
#include "megadance/metrics/scores.hpp"
#include "megadance/motion/kinematics.hpp"

namespace megadance::metrics {

struct MetricsConfig {
  double sigma = kDefaultBeatSigma;
  bool kinetic = true;
  bool geometric = true;

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("metrics.sigma must be positive");
    if (!kinetic && !geometric) throw ConfigError("metrics.kinds must name at least one feature kind");
  }
};

/// One motion of an evaluation set, with its music when available.
struct EvalItem {
  std::string name;
  motion::MotionSequence motion;
  std::optional<features::MusicFeatureSequence> music;
};

struct EvaluationReport {
  std::optional<double> fid_k, fid_g, div_k, div_g, bas;
  std::size_t n_sequences = 0;
  std::size_t n_reference = 0;
  std::size_t n_bas = 0;  // generated sequences that had music to align against
  std::string config_hash;

  io::Json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? io::Json(*v) : io::Json(nullptr); };
    return {{"format", "megadance-report"}, {"version", 1},           {"fid_k", opt(fid_k)},
            {"fid_g", opt(fid_g)},          {"div_k", opt(div_k)},    {"div_g", opt(div_g)},
            {"bas", opt(bas)},              {"n_sequences", n_sequences}, {"n_reference", n_reference},
            {"n_bas", n_bas},               {"config_hash", config_hash}};
  }
};

namespace detail {

inline std::vector<std::vector<double>> feature_set(const std::vector<motion::JointPositions>& joints, FeatureKind kind) {
  std::vector<std::vector<double>> out;
  out.reserve(joints.size());
  for (const auto& j : joints) out.push_back(extract_features(j, kind).values);
  return out;
}

}  // namespace detail

/// FID of generated vs reference features, diversity of the generated set and
/// mean BAS over generated items that carry music.
inline EvaluationReport evaluate(const std::vector<EvalItem>& generated, const std::vector<EvalItem>& reference,
                                 const motion::Skeleton& skeleton, const MetricsConfig& cfg) {
  cfg.validate();
  if (generated.empty()) throw InputError("generated set is empty");
  if (reference.empty()) throw InputError("reference set is empty");
  std::vector<motion::JointPositions> gen_joints, ref_joints;
  for (const auto& g : generated) gen_joints.push_back(motion::forward_kinematics(g.motion, skeleton));
  for (const auto& r : reference) ref_joints.push_back(motion::forward_kinematics(r.motion, skeleton));

  EvaluationReport rep;
  rep.n_sequences = generated.size();
  rep.n_reference = reference.size();
  auto fill = [&](FeatureKind kind, std::optional<double>& fid, std::optional<double>& div) {
    const auto gf = detail::feature_set(gen_joints, kind);
    const auto rf = detail::feature_set(ref_joints, kind);
    fid = frechet_distance(fit_gaussian(gf), fit_gaussian(rf));
    if (gf.size() >= 2) div = diversity(gf);
  };
  if (cfg.kinetic) fill(FeatureKind::kinetic, rep.fid_k, rep.div_k);
  if (cfg.geometric) fill(FeatureKind::geometric, rep.fid_g, rep.div_g);

  double total = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const auto& music = generated[i].music;
    if (!music) continue;
    const auto beats = music->beat_frames();
    if (beats.empty()) continue;
    total += beat_align_score(beats, features::beat_extract(gen_joints[i]), cfg.sigma);
    ++rep.n_bas;
  }
  if (rep.n_bas > 0) rep.bas = total / static_cast<double>(rep.n_bas);
  return rep;
}

}  // namespace megadance::metrics
