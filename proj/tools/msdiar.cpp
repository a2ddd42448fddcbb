// msdiar: command-line front end for the multi-scale diarization pipeline.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "msdiar/msdiar.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace msdiar;

namespace {

// JSON-lines event log; a no-op when no path is given.
class EventLog {
 public:
  void open(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::app);
    if (!out_) throw Error("cannot open log file: " + path);
  }
  void write(json j) {
    if (!out_.is_open()) return;
    j["ts"] = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct Common {
  std::string log_path;
  std::size_t jobs = 1;
  bool quiet = false;
};

json weights_json(const std::vector<WeightVector>& ws) {
  json arr = json::array();
  for (const auto& w : ws) arr.push_back(w.w);
  return arr;
}

std::string format_matrix(const Eigen::MatrixXd& m) {
  std::string out = std::to_string(m.rows()) + "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), j ? " %.6f" : "%.6f", m(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<SessionInput> load_all(const std::vector<ManifestEntry>& entries, EventLog& log, int& failures) {
  std::vector<SessionInput> out;
  for (const auto& e : entries) {
    try {
      out.push_back(load_session(e));
    } catch (const Error& err) {
      ++failures;
      std::cerr << "error: " << err.what() << '\n';
      log.write({{"event", "session_error"}, {"session", e.id}, {"error", err.what()}});
    }
  }
  return out;
}

// Options shared by every subcommand that runs the pipeline.
struct PipelineOpts {
  std::string mode = "equal";
  std::size_t pairs = nasf::kDefaultInferencePairs;
  std::uint64_t seed = 7;
  std::size_t k_max = 8;
  std::size_t max_p = 100;
  double collar = 0.25;
  bool score_overlap = false;

  void add(CLI::App* app, bool with_mode) {
    if (with_mode) app->add_option("--mode", mode, "equal | nasf-s | nasf-d")->capture_default_str();
    app->add_option("--pairs", pairs, "sampled pairs per weight estimate")->capture_default_str();
    app->add_option("--seed", seed, "inference sampling seed")->capture_default_str();
    app->add_option("--k-max", k_max, "largest speaker count considered")->capture_default_str();
    app->add_option("--max-p", max_p, "cap on p candidates in the eigengap search")->capture_default_str();
    app->add_option("--collar", collar, "scoring collar in seconds")->capture_default_str();
    app->add_flag("--score-overlap", score_overlap, "score overlapped reference speech");
  }

  PipelineConfig config() const {
    PipelineConfig c;
    c.mode = nasf::parse_mode(mode);
    c.num_pairs = pairs;
    c.seed = seed;
    c.clustering.k_max = k_max;
    c.clustering.max_p_candidates = max_p;
    c.scoring.collar = to_millis(collar);
    c.scoring.score_overlap = score_overlap;
    c.validate();
    return c;
  }
};

std::optional<nasf::Params> maybe_model(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return nasf::load_checkpoint(path);
}

// ---------------------------------------------------------------------------

int cmd_synth(const Common& common, const CorpusSpec& spec, const std::string& out_dir) {
  EventLog log;
  log.open(common.log_path);
  const auto corpus = generate_corpus(spec);
  const auto entries = write_corpus(corpus, out_dir);
  log.write({{"event", "synth"}, {"sessions", entries.size()}, {"out", out_dir}, {"seed", spec.seed}});
  if (!common.quiet) std::cout << "wrote " << entries.size() << " sessions to " << out_dir << '\n';
  return 0;
}

int cmd_segment(const Common& common, const std::string& manifest, const std::string& out_dir) {
  EventLog log;
  log.open(common.log_path);
  fs::create_directories(out_dir);
  int failures = 0;
  for (const auto& e : read_manifest(manifest)) {
    try {
      const auto turns = read_rttm_file(e.rttm);
      const auto set = build_multiscale(oracle_sad(turns), default_scales());
      for (std::size_t s = 0; s < set.num_scales(); ++s) {
        std::string text;
        for (const auto& seg : set.segments[s])
          text += std::to_string(seg.scale_id) + " " + std::to_string(seg.start) + " " + std::to_string(seg.end) + "\n";
        write_text_file((fs::path(out_dir) / (e.id + ".s" + std::to_string(s) + ".seg")).string(), text);
      }
      std::string map_text;
      for (const auto& row : set.map) {
        for (std::size_t s = 0; s < row.size(); ++s) map_text += (s ? " " : "") + std::to_string(row[s]);
        map_text += '\n';
      }
      write_text_file((fs::path(out_dir) / (e.id + ".map")).string(), map_text);
      log.write({{"event", "segment"}, {"session", e.id}, {"base_segments", set.num_base()}});
    } catch (const Error& err) {
      ++failures;
      std::cerr << "error: session " << e.id << ": " << err.what() << '\n';
      log.write({{"event", "session_error"}, {"session", e.id}, {"error", err.what()}});
    }
  }
  return failures ? 2 : 0;
}

struct TrainOpts {
  std::string manifest, out, dump_labels;
  nasf::TrainConfig train;
  nasf::ModelConfig model;
};

int cmd_train(const Common& common, const TrainOpts& o) {
  EventLog log;
  log.open(common.log_path);
  int failures = 0;
  const auto sessions = load_all(read_manifest(o.manifest), log, failures);
  // Any unreadable session aborts training before a checkpoint is written.
  if (failures) {
    std::cerr << "error: " << failures << " session(s) failed to load; no checkpoint written\n";
    return 2;
  }
  if (sessions.empty()) throw ValidationError("train: manifest lists no sessions");
  PipelineConfig cfg;
  std::vector<nasf::LabelledSession> labelled(sessions.size());
  parallel_for(sessions.size(), common.jobs, [&](std::size_t i) { labelled[i] = labelled_session(sessions[i], cfg); });
  nasf::ModelConfig model = o.model;
  model.scales = static_cast<int>(cfg.scales.size());
  model.dim = static_cast<int>(labelled.front().features.embeddings.front().cols());

  if (!o.dump_labels.empty()) {
    fs::create_directories(o.dump_labels);
    for (std::size_t k = 0; k < labelled.size(); ++k) {
      const auto lp = nasf::labelled_pairs(labelled[k], o.train.pairs_per_session, o.train.seed + k);
      std::vector<PairLabel> labels;
      for (std::size_t q = 0; q < lp.pairs.size(); ++q) labels.push_back({lp.pairs[q].first, lp.pairs[q].second, lp.d[q]});
      write_text_file((fs::path(o.dump_labels) / (sessions[k].id + ".pairs")).string(), format_pair_labels(labels));
    }
  }

  auto res = nasf::train(labelled, model, o.train, [&](const nasf::EpochLog& e) {
    log.write({{"event", "epoch"},
               {"epoch", e.epoch},
               {"train_mse", e.train_mse},
               {"val_mse", e.val_mse},
               {"val_mse_equal", e.val_mse_equal}});
    if (!common.quiet)
      std::printf("epoch %zu  train %.5f  val %.5f  (equal weights %.5f)\n", e.epoch, e.train_mse, e.val_mse,
                  e.val_mse_equal);
  });
  nasf::save_checkpoint(res.params, o.out);
  log.write({{"event", "train_done"},
             {"checkpoint", o.out},
             {"best_epoch", res.best_epoch},
             {"best_val_mse", res.best_val_mse},
             {"equal_weight_val_mse", res.equal_weight_val_mse}});
  if (!common.quiet)
    std::printf("best epoch %zu  val %.5f  equal-weight val %.5f -> %s\n", res.best_epoch, res.best_val_mse,
                res.equal_weight_val_mse, o.out.c_str());
  return 0;
}

struct DiarizeOpts {
  std::string manifest, model, out;
  PipelineOpts pipe;
  bool dump_weights = false, dump_matrices = false, dump_trace = false;
};

int cmd_diarize(const Common& common, const DiarizeOpts& o) {
  EventLog log;
  log.open(common.log_path);
  const PipelineConfig cfg = o.pipe.config();
  const auto model = maybe_model(o.model);
  if (cfg.mode != nasf::Mode::EqualWeight && !model)
    throw ValidationError("mode " + to_string(cfg.mode) + " needs --model");
  fs::create_directories(o.out);
  int failures = 0;
  const auto entries = read_manifest(o.manifest);
  std::vector<std::string> errors(entries.size());
  std::vector<std::optional<DiarizeOutput>> results(entries.size());
  parallel_for(entries.size(), common.jobs, [&](std::size_t i) {
    try {
      results[i] = diarize_session(load_session(entries[i]), cfg, model ? &*model : nullptr);
    } catch (const std::exception& err) {
      errors[i] = err.what();
    }
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& id = entries[i].id;
    if (!results[i]) {
      ++failures;
      std::cerr << "error: session " << id << ": " << errors[i] << '\n';
      log.write({{"event", "session_error"}, {"session", id}, {"error", errors[i]}});
      continue;
    }
    const auto& r = *results[i];
    const fs::path base = fs::path(o.out) / id;
    write_text_file(base.string() + ".rttm", emit_rttm(r.rttm));
    if (o.dump_weights) {
      std::string text;
      for (const auto& w : r.weights) {
        char buf[64];
        for (std::size_t s = 0; s < w.size(); ++s) {
          std::snprintf(buf, sizeof(buf), s ? " %.6f" : "%.6f", w[s]);
          text += buf;
        }
        text += '\n';
      }
      write_text_file(base.string() + ".weights", text);
    }
    if (o.dump_matrices) {
      const auto input = load_session(entries[i]);
      const auto features = session_features(input, cfg, r.segments);
      for (std::size_t s = 0; s < features.tensor.num_scales(); ++s)
        write_text_file(base.string() + ".aff.s" + std::to_string(s), format_matrix(features.tensor.scales[s]));
      write_text_file(base.string() + ".aff.fused", format_matrix(r.fused));
    }
    if (o.dump_trace) write_text_file(base.string() + ".nme", format_nme_trace(r.clusters.trace));
    log.write({{"event", "diarize"},
               {"session", id},
               {"mode", to_string(cfg.mode)},
               {"weights", weights_json(r.weights)},
               {"speakers", r.clusters.k},
               {"base_segments", r.segments.num_base()}});
  }
  if (!common.quiet) std::cout << "diarized " << entries.size() - static_cast<std::size_t>(failures) << "/" << entries.size() << " sessions into " << o.out << '\n';
  return failures ? 2 : 0;
}

struct ScoreOpts {
  std::string manifest, hyp_dir;
  double collar = 0.25;
  bool score_overlap = false;
};

int cmd_score(const Common& common, const ScoreOpts& o) {
  EventLog log;
  log.open(common.log_path);
  DerConfig cfg;
  cfg.collar = to_millis(o.collar);
  cfg.score_overlap = o.score_overlap;
  int failures = 0;
  DerReport total;
  std::cout << format_der_header();
  for (const auto& e : read_manifest(o.manifest)) {
    try {
      const auto hyp_path = (fs::path(o.hyp_dir) / (e.id + ".rttm")).string();
      if (!fs::exists(hyp_path)) throw Error("missing hypothesis " + hyp_path);
      const auto r = der(read_rttm_file(e.rttm), read_rttm_file(hyp_path), cfg);
      total += r;
      std::cout << format_der_line(e.id, r);
      log.write({{"event", "score"},
                 {"session", e.id},
                 {"miss", r.miss},
                 {"false_alarm", r.false_alarm},
                 {"confusion", r.confusion},
                 {"total", r.total_speech},
                 {"der", r.der()}});
    } catch (const Error& err) {
      ++failures;
      std::cerr << "error: session " << e.id << ": " << err.what() << '\n';
      log.write({{"event", "session_error"}, {"session", e.id}, {"error", err.what()}});
    }
  }
  total.collar = o.collar;
  std::cout << format_der_line("ALL", total);
  log.write({{"event", "score_total"}, {"der", total.der()}, {"total", total.total_speech}});
  (void)common;
  return failures ? 2 : 0;
}

int cmd_ablate(const Common& common, const std::string& manifest, const std::string& model_path,
               const PipelineOpts& pipe) {
  EventLog log;
  log.open(common.log_path);
  const PipelineConfig cfg = pipe.config();
  const auto model = maybe_model(model_path);
  int failures = 0;
  const auto sessions = load_all(read_manifest(manifest), log, failures);
  if (sessions.empty()) throw ValidationError("ablate: no sessions loaded");
  const auto rows = run_ablation(sessions, cfg, model ? &*model : nullptr, common.jobs);
  std::cout << format_ablation_table(rows);
  for (const auto& r : rows)
    log.write({{"event", "ablation"},
               {"system", r.system},
               {"der", r.total.der()},
               {"miss", r.total.miss},
               {"false_alarm", r.total.false_alarm},
               {"confusion", r.total.confusion},
               {"total", r.total.total_speech}});
  return failures ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale speaker diarization with learned affinity fusion"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values");

  Common common;
  app.add_option("--log", common.log_path, "append JSON-lines events to this file")->envname("MSDIAR_LOG");
  app.add_option("-j,--jobs", common.jobs, "worker threads")->capture_default_str();
  app.add_flag("-q,--quiet", common.quiet, "suppress progress output and warnings");

  // synth
  CorpusSpec spec;
  std::string synth_out = "corpus";
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with manifest");
  synth->add_option("-o,--out", synth_out, "output directory")->envname("MSDIAR_OUT")->capture_default_str();
  synth->add_option("--sessions", spec.sessions)->capture_default_str();
  synth->add_option("--min-speakers", spec.min_speakers)->capture_default_str();
  synth->add_option("--max-speakers", spec.max_speakers)->capture_default_str();
  synth->add_option("--session-len", spec.session.session_len, "seconds")->capture_default_str();
  synth->add_option("--mean-turn", spec.session.mean_turn, "seconds")->capture_default_str();
  synth->add_option("--silence", spec.session.silence_fraction, "expected silence share")->capture_default_str();
  synth->add_option("--dim", spec.session.dim, "embedding dimension")->capture_default_str();
  synth->add_option("--noise", spec.session.noise, "noise deviation at 1 s of speech")->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();

  // segment
  std::string seg_manifest, seg_out = "segments";
  auto* segment = app.add_subcommand("segment", "write multi-scale segments and the base-to-scale map");
  segment->add_option("-m,--manifest", seg_manifest)->required()->envname("MSDIAR_MANIFEST");
  segment->add_option("-o,--out", seg_out)->envname("MSDIAR_OUT")->capture_default_str();

  // train
  TrainOpts topts;
  topts.out = "nasf.ckpt";
  auto* trainc = app.add_subcommand("train", "train the fusion network");
  trainc->add_option("-m,--manifest", topts.manifest)->required()->envname("MSDIAR_MANIFEST");
  trainc->add_option("-o,--out", topts.out, "checkpoint path")->envname("MSDIAR_MODEL")->capture_default_str();
  trainc->add_option("--epochs", topts.train.epochs)->capture_default_str();
  trainc->add_option("--batch-size", topts.train.batch_size)->capture_default_str();
  trainc->add_option("--lr", topts.train.adam.learning_rate)->capture_default_str();
  trainc->add_option("--pairs-per-session", topts.train.pairs_per_session)->capture_default_str();
  trainc->add_option("--val-fraction", topts.train.val_fraction)->capture_default_str();
  trainc->add_option("--hidden", topts.model.hidden)->capture_default_str();
  trainc->add_option("--seed", topts.train.seed)->capture_default_str();
  trainc->add_option("--dump-labels", topts.dump_labels, "directory for per-session 'i j d' label files");

  // diarize
  DiarizeOpts dopts;
  dopts.out = "hyp";
  auto* diar = app.add_subcommand("diarize", "cluster every session and write hypothesis RTTMs");
  diar->add_option("-m,--manifest", dopts.manifest)->required()->envname("MSDIAR_MANIFEST");
  diar->add_option("--model", dopts.model, "checkpoint for nasf-s / nasf-d")->envname("MSDIAR_MODEL");
  diar->add_option("-o,--out", dopts.out)->envname("MSDIAR_OUT")->capture_default_str();
  dopts.pipe.add(diar, true);
  diar->add_flag("--dump-weights", dopts.dump_weights, "write <id>.weights");
  diar->add_flag("--dump-matrices", dopts.dump_matrices, "write per-scale and fused affinity matrices");
  diar->add_flag("--dump-trace", dopts.dump_trace, "write the eigengap search trace");

  // score
  ScoreOpts sopts;
  auto* score = app.add_subcommand("score", "DER of hypothesis RTTMs against the manifest references");
  score->add_option("-m,--manifest", sopts.manifest)->required()->envname("MSDIAR_MANIFEST");
  score->add_option("--hyp", sopts.hyp_dir, "directory with <id>.rttm")->required();
  score->add_option("--collar", sopts.collar, "seconds")->capture_default_str();
  score->add_flag("--score-overlap", sopts.score_overlap);

  // ablate
  std::string ab_manifest, ab_model;
  PipelineOpts ab_pipe;
  auto* ablate = app.add_subcommand("ablate", "compare single scales, equal weights and learned fusion");
  ablate->add_option("-m,--manifest", ab_manifest)->required()->envname("MSDIAR_MANIFEST");
  ablate->add_option("--model", ab_model)->envname("MSDIAR_MODEL");
  ab_pipe.add(ablate, false);

  CLI11_PARSE(app, argc, argv);

  std::optional<log::ScopedSilence> silence;
  if (common.quiet) silence.emplace();
  try {
    if (*synth) return cmd_synth(common, spec, synth_out);
    if (*segment) return cmd_segment(common, seg_manifest, seg_out);
    if (*trainc) return cmd_train(common, topts);
    if (*diar) return cmd_diarize(common, dopts);
    if (*score) return cmd_score(common, sopts);
    if (*ablate) return cmd_ablate(common, ab_manifest, ab_model, ab_pipe);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
