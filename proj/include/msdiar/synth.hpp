#pragma once

// Synthetic sessions whose embeddings get cleaner as segments get longer:
// each speaker owns a unit centroid (the centroids are orthonormal), and a
// segment embedding is the duration-weighted mix of the centroids of the
// speakers inside it plus isotropic noise with per-component deviation
// sigma0 / sqrt(speech seconds in the segment).

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "msdiar/common.hpp"
#include "msdiar/embeddings.hpp"
#include "msdiar/rttm.hpp"
#include "msdiar/segmenter.hpp"
#include "msdiar/truth_labels.hpp"

namespace msdiar {

struct SynthConfig {
  std::string recording_id = "synth";
  int speakers = 3;
  double session_len = 60.0;       // seconds
  double mean_turn = 2.17;         // seconds
  double min_turn = 0.3;           // seconds, floor of the turn-length distribution
  double silence_fraction = 0.1;   // expected share of the session without speech
  double gap_probability = 0.3;    // chance of a pause after each turn
  double follow_probability = 0.75;  // next speaker is (current + 1) mod K
  int dim = 16;
  double noise = 0.1;              // sigma0
  std::uint64_t seed = 1;

  void validate() const {
    if (speakers < 1) throw ValidationError("synth: speakers must be >= 1");
    if (!(mean_turn > 0.0)) throw ValidationError("synth: mean_turn must be > 0");
    if (!(session_len > 0.0)) throw ValidationError("synth: session_len must be > 0");
    if (noise < 0.0) throw ValidationError("synth: noise must be >= 0");
    if (min_turn < 0.0) throw ValidationError("synth: min_turn must be >= 0");
    if (silence_fraction < 0.0 || silence_fraction >= 1.0)
      throw ValidationError("synth: silence_fraction must be in [0, 1)");
    if (dim < speakers) throw ValidationError("synth: dim must be >= speakers to orthogonalize centroids");
  }
};

struct SynthSession {
  std::string id;
  std::vector<RttmTurn> turns;
  std::vector<EmbeddingMatrix> embeddings;  // one per scale, rows follow the segmenter
  Eigen::MatrixXd centroids;                // dim x speakers, orthonormal columns
};

inline std::string speaker_name(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%02d", k);
  return buf;
}

inline std::vector<RttmTurn> synth_turns(const SynthConfig& cfg, std::mt19937_64& rng) {
  const Millis end = to_millis(cfg.session_len);
  const double floor_turn = std::min(cfg.min_turn, cfg.mean_turn);
  std::exponential_distribution<double> turn_tail(1.0 / std::max(cfg.mean_turn - floor_turn, 1e-9));
  const double gap_mean = cfg.silence_fraction > 0.0 && cfg.gap_probability > 0.0
                              ? cfg.silence_fraction * cfg.mean_turn /
                                    (cfg.gap_probability * (1.0 - cfg.silence_fraction))
                              : 0.0;
  std::exponential_distribution<double> gap_len(gap_mean > 0.0 ? 1.0 / gap_mean : 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<RttmTurn> turns;
  int spk = std::uniform_int_distribution<int>(0, cfg.speakers - 1)(rng);
  Millis t = 0;
  while (t < end) {
    Millis dur = to_millis(floor_turn + (cfg.mean_turn > floor_turn ? turn_tail(rng) : 0.0));
    dur = std::max<Millis>(dur, 1);
    dur = std::min(dur, end - t);
    if (dur >= 10) turns.push_back({cfg.recording_id, t, dur, speaker_name(spk)});
    t += dur;
    if (gap_mean > 0.0 && unit(rng) < cfg.gap_probability) t += std::max<Millis>(1, to_millis(gap_len(rng)));
    if (cfg.speakers > 1) {
      if (unit(rng) < cfg.follow_probability) {
        spk = (spk + 1) % cfg.speakers;
      } else {
        int other = std::uniform_int_distribution<int>(0, cfg.speakers - 2)(rng);
        spk = other >= spk ? other + 1 : other;
      }
    }
  }
  return turns;
}

// Gaussian columns, then modified Gram-Schmidt.
inline Eigen::MatrixXd orthonormal_centroids(int dim, int speakers, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd c(dim, speakers);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = g(rng);
  for (int k = 0; k < speakers; ++k) {
    for (int j = 0; j < k; ++j) c.col(k) -= c.col(j).dot(c.col(k)) * c.col(j);
    const double n = c.col(k).norm();
    if (n < 1e-12) throw Error("synth: degenerate centroid draw");
    c.col(k) /= n;
  }
  return c;
}

// Embedding of one segment given the session turns and centroids.
inline Eigen::VectorXd synth_embedding(const Segment& seg, const std::vector<RttmTurn>& turns,
                                       const std::vector<std::string>& speakers, const Eigen::MatrixXd& centroids,
                                       double noise, std::mt19937_64& rng) {
  const SpeakerLabelVector v = label_vector(seg, turns, speakers);
  double speech = 0.0;
  for (double x : v) speech += x;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(centroids.rows());
  if (speech > 0.0) {
    for (std::size_t k = 0; k < v.size(); ++k)
      if (v[k] > 0.0) {
        // speaker ids are S00, S01, ...; columns follow the same order
        const int col = std::stoi(speakers[k].substr(1));
        e += (v[k] / speech) * centroids.col(col);
      }
  }
  if (noise > 0.0) {
    std::normal_distribution<double> g(0.0, noise / std::sqrt(std::max(speech, 1e-3)));
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) += g(rng);
  }
  const double n = e.norm();
  if (n > 0.0) e /= n;
  return e;
}

inline SynthSession gen_session(const SynthConfig& cfg, const std::vector<ScaleConfig>& scales = default_scales()) {
  cfg.validate();
  std::mt19937_64 turn_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  std::mt19937_64 centroid_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 2);
  std::mt19937_64 noise_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 3);

  SynthSession out;
  out.id = cfg.recording_id;
  out.turns = synth_turns(cfg, turn_rng);
  out.centroids = orthonormal_centroids(cfg.dim, cfg.speakers, centroid_rng);
  const auto speakers = speaker_list(out.turns);
  const auto set = build_multiscale(oracle_sad(out.turns), scales);
  for (std::size_t s = 0; s < scales.size(); ++s) {
    EmbeddingMatrix m;
    m.scale_id = static_cast<int>(s);
    m.rows.resize(static_cast<Eigen::Index>(set.segments[s].size()), cfg.dim);
    for (std::size_t i = 0; i < set.segments[s].size(); ++i)
      m.rows.row(static_cast<Eigen::Index>(i)) =
          synth_embedding(set.segments[s][i], out.turns, speakers, out.centroids, cfg.noise, noise_rng)
              .cast<float>()
              .transpose();
    out.embeddings.push_back(std::move(m));
  }
  return out;
}

}  // namespace msdiar
