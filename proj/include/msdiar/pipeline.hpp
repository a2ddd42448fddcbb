#pragma once

// End-to-end session processing: oracle SAD -> multi-scale segmentation ->
// affinity tensor -> scale weights -> fusion -> NME-SC -> timeline -> DER.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "msdiar/affinity.hpp"
#include "msdiar/embeddings.hpp"
#include "msdiar/nasf.hpp"
#include "msdiar/nmesc.hpp"
#include "msdiar/rttm.hpp"
#include "msdiar/scorer.hpp"
#include "msdiar/segmenter.hpp"
#include "msdiar/synth.hpp"
#include "msdiar/truth_labels.hpp"

namespace msdiar {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Corpus manifest: one session per line, tab separated:
//   session_id  rttm_path  embeddings_scale0  embeddings_scale1 ...
// Relative paths resolve against the manifest's directory.

struct ManifestEntry {
  std::string id;
  std::string rttm;
  std::vector<std::string> embeddings;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path);
  const fs::path dir = fs::path(path).parent_path();
  auto resolve = [&dir](std::string_view p) {
    fs::path q{std::string(p)};
    return (q.is_absolute() ? q : dir / q).lexically_normal().string();
  };
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = detail::split_ws(line);
    if (f.empty() || f[0].starts_with('#')) continue;
    if (f.size() < 3) throw ParseError("manifest needs 'id rttm emb...'", lineno);
    ManifestEntry e{std::string(f[0]), resolve(f[1]), {}};
    for (std::size_t k = 2; k < f.size(); ++k) e.embeddings.push_back(resolve(f[k]));
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest: " + path);
  for (const auto& e : entries) {
    out << e.id << '\t' << e.rttm;
    for (const auto& p : e.embeddings) out << '\t' << p;
    out << '\n';
  }
}

inline std::vector<RttmTurn> read_rttm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open RTTM: " + path);
  try {
    return parse_rttm(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------------------

struct SessionInput {
  std::string id;
  std::vector<RttmTurn> turns;
  std::vector<EmbeddingMatrix> embeddings;  // every archive listed for the session
};

inline SessionInput load_session(const ManifestEntry& e) {
  std::vector<std::string> missing;
  if (!fs::exists(e.rttm)) missing.push_back(e.rttm);
  for (const auto& p : e.embeddings)
    if (!fs::exists(p)) missing.push_back(p);
  if (!missing.empty()) {
    std::string msg = "session " + e.id + ": missing files:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(msg);
  }
  SessionInput s;
  s.id = e.id;
  s.turns = read_rttm_file(e.rttm);
  for (const auto& p : e.embeddings) s.embeddings.push_back(read_embeddings(p));
  return s;
}

inline SessionInput from_synth(const SynthSession& s) { return {s.id, s.turns, s.embeddings}; }

struct PipelineConfig {
  std::vector<ScaleConfig> scales = default_scales();  // coarse -> fine, last is base
  std::vector<int> scale_ids = {0, 1, 2};              // archive scale_id feeding each scale
  nasf::Mode mode = nasf::Mode::EqualWeight;
  std::size_t num_pairs = nasf::kDefaultInferencePairs;
  NmescConfig clustering;
  DerConfig scoring;
  std::uint64_t seed = 7;

  void validate() const {
    if (scales.empty()) throw ValidationError("no scales configured");
    if (scale_ids.size() != scales.size()) throw ValidationError("scale_ids must match scales");
    for (const auto& s : scales) s.validate();
    for (std::size_t k = 1; k < scales.size(); ++k)
      if (scales[k].window >= scales[k - 1].window)
        throw ValidationError("scales must be ordered coarse to fine with a single finest base scale");
    if (num_pairs < 1) throw ValidationError("num_pairs must be >= 1");
  }

  // The same pipeline restricted to one scale (single-scale baselines).
  PipelineConfig single_scale(std::size_t which) const {
    PipelineConfig c = *this;
    c.scales = {scales.at(which)};
    c.scale_ids = {scale_ids.at(which)};
    c.mode = nasf::Mode::EqualWeight;
    return c;
  }
};

inline std::vector<EmbeddingMatrix> select_embeddings(const SessionInput& s, const std::vector<int>& scale_ids) {
  std::vector<EmbeddingMatrix> out;
  for (int id : scale_ids) {
    auto it = std::find_if(s.embeddings.begin(), s.embeddings.end(),
                           [id](const EmbeddingMatrix& m) { return m.scale_id == id; });
    if (it == s.embeddings.end())
      throw ValidationError("session " + s.id + ": no embedding archive with scale_id " + std::to_string(id));
    out.push_back(*it);
  }
  return out;
}

inline MultiScaleSegmentSet segment_session(const SessionInput& s, const PipelineConfig& cfg) {
  return build_multiscale(oracle_sad(s.turns), cfg.scales);
}

inline nasf::SessionFeatures session_features(const SessionInput& s, const PipelineConfig& cfg,
                                              const MultiScaleSegmentSet& set) {
  return nasf::make_features(s.id, set, select_embeddings(s, cfg.scale_ids));
}

inline nasf::LabelledSession labelled_session(const SessionInput& s, const PipelineConfig& cfg) {
  const auto set = segment_session(s, cfg);
  nasf::LabelledSession out{session_features(s, cfg, set), label_vectors(set.base(), s.turns)};
  return out;
}

struct DiarizeOutput {
  std::string id;
  MultiScaleSegmentSet segments;
  std::vector<WeightVector> weights;
  Eigen::MatrixXd fused;
  ClusterResult clusters;
  DiarizationHypothesis hypothesis;
  std::vector<RttmTurn> rttm;
};

inline DiarizeOutput diarize_session(const SessionInput& s, const PipelineConfig& cfg, const nasf::Params* model) {
  cfg.validate();
  DiarizeOutput out;
  out.id = s.id;
  out.segments = segment_session(s, cfg);
  const auto features = session_features(s, cfg, out.segments);
  if (model && cfg.mode != nasf::Mode::EqualWeight)
    nasf::check_compatible(*model, static_cast<int>(cfg.scales.size()),
                           static_cast<int>(features.embeddings.front().cols()));
  out.weights = nasf::infer_weights(model, features, cfg.mode, cfg.num_pairs, cfg.seed);
  out.fused = out.weights.size() == 6
                  ? fuse_blockwise(features.tensor, out.weights, split_session(features.num_base()))
                  : fuse(features.tensor, out.weights.front());
  out.clusters = nmesc_cluster(out.fused, cfg.clustering);
  out.hypothesis = labels_to_timeline(out.segments, out.clusters.labels);
  const std::string rec = s.turns.empty() ? s.id : s.turns.front().recording_id;
  out.rttm = hypothesis_to_rttm(out.hypothesis, rec);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpora on disk

struct CorpusSpec {
  std::size_t sessions = 10;
  SynthConfig session;   // recording_id and seed are derived per session
  int min_speakers = 2;
  int max_speakers = 4;
  std::uint64_t seed = 1;
};

inline SynthConfig corpus_session_config(const CorpusSpec& spec, std::size_t k) {
  SynthConfig c = spec.session;
  char id[32];
  std::snprintf(id, sizeof(id), "sess%04zu", k);
  c.recording_id = id;
  std::mt19937_64 rng(spec.seed * 1000003ULL + k);
  c.seed = rng();
  c.speakers = std::uniform_int_distribution<int>(spec.min_speakers, spec.max_speakers)(rng);
  return c;
}

inline std::vector<SynthSession> generate_corpus(const CorpusSpec& spec,
                                                 const std::vector<ScaleConfig>& scales = default_scales()) {
  std::vector<SynthSession> out;
  for (std::size_t k = 0; k < spec.sessions; ++k) out.push_back(gen_session(corpus_session_config(spec, k), scales));
  return out;
}

inline std::vector<ManifestEntry> write_corpus(const std::vector<SynthSession>& corpus, const std::string& dir) {
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (const auto& s : corpus) {
    ManifestEntry e{s.id, s.id + ".rttm", {}};
    write_text_file((fs::path(dir) / e.rttm).string(), emit_rttm(s.turns));
    for (const auto& m : s.embeddings) {
      e.embeddings.push_back(s.id + ".s" + std::to_string(m.scale_id) + ".emb");
      write_embeddings(m, (fs::path(dir) / e.embeddings.back()).string());
    }
    entries.push_back(std::move(e));
  }
  write_manifest((fs::path(dir) / "manifest.tsv").string(), entries);
  return entries;
}

// ---------------------------------------------------------------------------

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results are written
// by index, so output order does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

struct SessionScore {
  std::string id;
  DerReport report;
  std::size_t estimated_speakers = 0;
  std::vector<WeightVector> weights;
};

struct SystemScore {
  std::string system;
  DerReport total;  // time-weighted aggregate
  std::vector<SessionScore> sessions;
};

inline SystemScore score_system(const std::string& name, const std::vector<SessionInput>& sessions,
                                const PipelineConfig& cfg, const nasf::Params* model, std::size_t jobs = 1) {
  SystemScore out;
  out.system = name;
  out.sessions.resize(sessions.size());
  parallel_for(sessions.size(), jobs, [&](std::size_t i) {
    const auto d = diarize_session(sessions[i], cfg, model);
    out.sessions[i] = {sessions[i].id, der(sessions[i].turns, d.hypothesis, cfg.scoring), d.clusters.k, d.weights};
  });
  for (const auto& s : out.sessions) out.total += s.report;
  out.total.collar = to_seconds(cfg.scoring.collar);
  return out;
}

// Single scales, equal weights, NASF-S and NASF-D over one corpus.
inline std::vector<SystemScore> run_ablation(const std::vector<SessionInput>& sessions, const PipelineConfig& cfg,
                                             const nasf::Params* model, std::size_t jobs = 1) {
  std::vector<SystemScore> rows;
  for (std::size_t s = 0; s < cfg.scales.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "%.1fs", to_seconds(cfg.scales[s].window));
    rows.push_back(score_system(name, sessions, cfg.single_scale(s), nullptr, jobs));
  }
  PipelineConfig c = cfg;
  c.mode = nasf::Mode::EqualWeight;
  rows.push_back(score_system("equal", sessions, c, nullptr, jobs));
  if (model) {
    c.mode = nasf::Mode::Single;
    rows.push_back(score_system("nasf-s", sessions, c, model, jobs));
    c.mode = nasf::Mode::Divided;
    rows.push_back(score_system("nasf-d", sessions, c, model, jobs));
  }
  return rows;
}

inline std::string format_ablation_table(const std::vector<SystemScore>& rows) {
  std::string out = "system      MISS(s)   FA(s)     CONF(s)   TOTAL(s)  DER(%)\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-10s  %-8.2f  %-8.2f  %-8.2f  %-8.2f  %.2f\n", r.system.c_str(), r.total.miss,
                  r.total.false_alarm, r.total.confusion, r.total.total_speech, 100.0 * r.total.der());
    out += buf;
  }
  return out;
}

}  // namespace msdiar
