#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "megadance/errors.hpp"
#include "megadance/io/pipeline.hpp"

namespace {

using namespace megadance;

// 0 ok, 2 bad input or config, 3 missing dependency, 4 I/O, 1 anything else.
int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DependencyError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e)) return 4;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const RoutingError*>(&e) || dynamic_cast<const RangeError*>(&e) ||
      dynamic_cast<const InputError*>(&e) || dynamic_cast<const LengthError*>(&e) ||
      dynamic_cast<const PaddingError*>(&e)) {
    return 2;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"megadance: motion tokenization and genre-routed dance generation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "pipeline config (JSON); defaults to $MEGADANCE_CONFIG, then built-ins");

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "write synthetic music/motion pairs and a manifest");
  std::string synth_out;
  std::optional<std::size_t> synth_clips;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--clips", synth_clips, "number of clips (default: data.clips)");
  synth->add_option("--seed", synth_seed, "data seed (default: data.seed)");

  // train-hfdq
  auto* thfdq = app.add_subcommand("train-hfdq", "train the motion codec");
  std::string th_data, th_out, th_log;
  std::optional<std::size_t> th_steps;
  thfdq->add_option("--data", th_data, "dataset directory")->required();
  thfdq->add_option("--out-ckpt", th_out, "checkpoint to write")->required();
  thfdq->add_option("--log", th_log, "loss log (JSON lines, appended); default <out-ckpt>.log.jsonl");
  thfdq->add_option("--steps", th_steps, "override hfdq.steps");

  // train-gadg
  auto* tgadg = app.add_subcommand("train-gadg", "train the generator on codes from a frozen codec");
  std::string tg_data, tg_hfdq, tg_out, tg_log;
  std::optional<std::size_t> tg_steps;
  tgadg->add_option("--data", tg_data, "dataset directory")->required();
  tgadg->add_option("--hfdq-ckpt", tg_hfdq, "trained codec checkpoint");
  tgadg->add_option("--out-ckpt", tg_out, "checkpoint to write")->required();
  tgadg->add_option("--log", tg_log, "loss log (JSON lines, appended); default <out-ckpt>.log.jsonl");
  tgadg->add_option("--steps", tg_steps, "override gadg.steps");

  // encode / decode
  auto* enc = app.add_subcommand("encode", "motion file -> code file");
  auto* dec = app.add_subcommand("decode", "code file -> motion file");
  std::string ed_ckpt, ed_in, ed_out;
  for (auto* sub : {enc, dec}) {
    sub->add_option("--ckpt", ed_ckpt, "codec checkpoint")->required();
    sub->add_option("--in", ed_in, "input file")->required();
    sub->add_option("--out", ed_out, "output file")->required();
  }

  // generate
  auto* gen = app.add_subcommand("generate", "music -> dance motion");
  io::GenerateRequest req;
  std::string g_gadg, g_hfdq, g_music, g_out;
  std::optional<int> g_genre;
  std::optional<std::uint64_t> g_seed;
  std::optional<std::size_t> g_top_k;
  gen->add_option("--gadg-ckpt", g_gadg, "generator checkpoint")->required();
  gen->add_option("--hfdq-ckpt", g_hfdq, "codec checkpoint")->required();
  gen->add_option("--music", g_music, "music feature file")->required();
  gen->add_option("--genre", g_genre, "genre id (default: the music file's genre_id)");
  gen->add_option("--frames", req.frames, "frames to generate (multiple of 8)")->required();
  gen->add_option("--seed", g_seed, "sampling seed");
  gen->add_option("--top-k", g_top_k, "sample from the k most likely codes instead of argmax");
  gen->add_option("--out", g_out, "motion file to write")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "FID, diversity and beat alignment of a generated set");
  std::string ev_gen, ev_ref, ev_out;
  eval->add_option("--generated-dir", ev_gen, "generated motions")->required();
  eval->add_option("--reference-dir", ev_ref, "reference motions")->required();
  eval->add_option("--out-report", ev_out, "report file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    io::PipelineConfig cfg = io::load_config(config_path);
    if (*synth) {
      if (synth_seed) cfg.data.synth.seed = *synth_seed;
      const std::size_t n = synth_clips.value_or(cfg.data.clips);
      io::synth_data(cfg, synth_out, n);
      if (n == 0) std::cerr << "warning: --clips 0 wrote an empty manifest\n";
      std::cout << "wrote " << n << " clips to " << synth_out << "\n";
    } else if (*thfdq) {
      if (th_steps) cfg.hfdq_train.steps = *th_steps;
      const std::string log = th_log.empty() ? th_out + ".log.jsonl" : th_log;
      const std::size_t every = std::max<std::size_t>(1, cfg.hfdq_train.steps / 10);
      io::train_hfdq(cfg, th_data, th_out, log, [&](const hfdq::StepLog& s) {
        if (s.step % every == 0 || s.step + 1 == cfg.hfdq_train.steps) {
          std::cout << "hfdq step " << s.step << " loss " << s.loss << std::endl;
        }
      });
      std::cout << "wrote " << th_out << "\n";
    } else if (*tgadg) {
      if (tg_steps) cfg.gadg_train.steps = *tg_steps;
      const std::string log = tg_log.empty() ? tg_out + ".log.jsonl" : tg_log;
      const std::size_t every = std::max<std::size_t>(1, cfg.gadg_train.steps / 10);
      io::train_gadg(cfg, tg_data, tg_hfdq, tg_out, log, [&](const gadg::GadgStepLog& s) {
        if (s.step % every == 0 || s.step + 1 == cfg.gadg_train.steps) {
          std::cout << "gadg step " << s.step << " ce_upper " << s.ce.upper << " ce_lower " << s.ce.lower << std::endl;
        }
      });
      std::cout << "wrote " << tg_out << "\n";
    } else if (*enc) {
      io::encode_file(ed_ckpt, ed_in, ed_out);
    } else if (*dec) {
      io::decode_file(ed_ckpt, ed_in, ed_out);
    } else if (*gen) {
      req.gadg_ckpt = g_gadg;
      req.hfdq_ckpt = g_hfdq;
      req.music = g_music;
      req.genre = g_genre;
      req.options = cfg.sampling;
      if (g_seed) req.options.seed = *g_seed;
      if (g_top_k) {
        req.options.sampling = gadg::Sampling::top_k;
        req.options.top_k = *g_top_k;
      }
      motion::write_motion(g_out, io::generate_motion(req));
      std::cout << "wrote " << req.frames << " frames to " << g_out << "\n";
    } else if (*eval) {
      const auto rep = io::evaluate_dirs(cfg, ev_gen, ev_ref);
      io::write_text(ev_out, rep.to_json().dump(1) + "\n");
      std::cout << rep.to_json().dump() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
