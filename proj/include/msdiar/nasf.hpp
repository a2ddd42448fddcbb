#pragma once

// Neural affinity score fusion.
//
// Each scale has its own MLP tower (two ReLU layers). A pair of segment
// sets A and B runs through the same towers, the per-scale outputs are
// concatenated, and the elementwise absolute difference of the two merged
// vectors feeds a linear head whose softmax gives a per-pair scale weight
// w_n. The session weight is the mean of w_n over the N pairs, and the
// fused affinity of pair n is y_n = w . c_n. Training minimizes the mean
// squared error between y_n and the label-vector cosine d_n.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "msdiar/affinity.hpp"
#include "msdiar/common.hpp"
#include "msdiar/truth_labels.hpp"

namespace msdiar::nasf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ModelConfig {
  int scales = 3;
  int dim = 16;
  int hidden = 128;  // both hidden layers; also the tower output width
  bool head_bias = true;

  bool operator==(const ModelConfig&) const = default;
};

struct Tower {
  MatrixXd w1, b1;  // hidden x dim, hidden x 1
  MatrixXd w2, b2;  // hidden x hidden, hidden x 1
};

struct Params {
  ModelConfig config;
  std::vector<Tower> towers;
  MatrixXd head_w;  // scales x (scales * hidden)
  MatrixXd head_b;  // scales x 1
  std::uint64_t seed = 0;

  static Params zeros(const ModelConfig& cfg) {
    if (cfg.scales < 1 || cfg.dim < 1 || cfg.hidden < 1) throw ValidationError("nasf: invalid model dims");
    Params p;
    p.config = cfg;
    for (int s = 0; s < cfg.scales; ++s)
      p.towers.push_back({MatrixXd::Zero(cfg.hidden, cfg.dim), MatrixXd::Zero(cfg.hidden, 1),
                          MatrixXd::Zero(cfg.hidden, cfg.hidden), MatrixXd::Zero(cfg.hidden, 1)});
    p.head_w = MatrixXd::Zero(cfg.scales, cfg.scales * cfg.hidden);
    p.head_b = MatrixXd::Zero(cfg.scales, 1);
    return p;
  }

  // He-uniform towers, Glorot-uniform head, zero biases.
  static Params init(const ModelConfig& cfg, std::uint64_t seed) {
    Params p = zeros(cfg);
    p.seed = seed;
    std::mt19937_64 rng(seed);
    auto fill = [&rng](MatrixXd& m, double bound) {
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    };
    for (auto& t : p.towers) {
      fill(t.w1, std::sqrt(6.0 / cfg.dim));
      fill(t.w2, std::sqrt(6.0 / cfg.hidden));
    }
    fill(p.head_w, std::sqrt(6.0 / (cfg.scales * cfg.hidden + cfg.scales)));
    return p;
  }

  // Every parameter tensor in a fixed order (checkpoints, optimizer state).
  std::vector<MatrixXd*> tensors() {
    std::vector<MatrixXd*> out;
    for (auto& t : towers) out.insert(out.end(), {&t.w1, &t.b1, &t.w2, &t.b2});
    out.push_back(&head_w);
    if (config.head_bias) out.push_back(&head_b);
    return out;
  }
  std::vector<const MatrixXd*> tensors() const {
    std::vector<const MatrixXd*> out;
    for (const auto* m : const_cast<Params*>(this)->tensors()) out.push_back(m);
    return out;
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto* m : tensors()) n += static_cast<std::size_t>(m->size());
    return n;
  }

  bool all_finite() const {
    for (const auto* m : tensors())
      if (!m->allFinite()) return false;
    return true;
  }
};

using Gradients = Params;

// N pairs of segment sets. a[s] and b[s] hold the scale-s embeddings of
// the two sides, one row per pair.
struct PairBatch {
  std::vector<MatrixXd> a, b;  // S matrices, N x dim
  MatrixXd c;                  // N x S normalized cosines
  VectorXd d;                  // N ground-truth affinities

  Eigen::Index size() const { return c.rows(); }
};

inline void check_batch(const Params& p, const PairBatch& batch) {
  const auto S = static_cast<std::size_t>(p.config.scales);
  if (batch.size() == 0) throw ValidationError("nasf: empty batch");
  if (batch.a.size() != S || batch.b.size() != S || batch.c.cols() != p.config.scales)
    throw ValidationError("nasf: batch scale count mismatch");
  for (std::size_t s = 0; s < S; ++s)
    if (batch.a[s].rows() != batch.size() || batch.b[s].rows() != batch.size() ||
        batch.a[s].cols() != p.config.dim || batch.b[s].cols() != p.config.dim)
      throw ValidationError("nasf: batch embedding dims mismatch");
}

namespace detail {

struct TowerTrace {
  MatrixXd h1, h2;  // post-activation, N x hidden
};

inline TowerTrace run_tower(const Tower& t, const MatrixXd& x) {
  TowerTrace tr;
  tr.h1 = ((x * t.w1.transpose()).rowwise() + t.b1.col(0).transpose()).cwiseMax(0.0);
  tr.h2 = ((tr.h1 * t.w2.transpose()).rowwise() + t.b2.col(0).transpose()).cwiseMax(0.0);
  return tr;
}

inline MatrixXd row_softmax(const MatrixXd& z) {
  MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index n = 0; n < z.rows(); ++n) {
    const double mx = z.row(n).maxCoeff();
    out.row(n) = (z.row(n).array() - mx).exp().matrix();
    out.row(n) /= out.row(n).sum();
  }
  return out;
}

}  // namespace detail

struct Forward {
  WeightVector w;
  VectorXd y;
  // cached intermediates for backward
  std::vector<detail::TowerTrace> ta, tb;
  MatrixXd diff;      // m_A - m_B, N x (S*h)
  MatrixXd pair_w;    // per-pair softmax, N x S
};

// Logits of the head applied to |m_A - m_B|.
inline MatrixXd head_logits(const Params& p, const MatrixXd& absdiff) {
  MatrixXd z = absdiff * p.head_w.transpose();
  if (p.config.head_bias) z.rowwise() += p.head_b.col(0).transpose();
  return z;
}

inline Forward forward(const Params& p, const PairBatch& batch) {
  check_batch(p, batch);
  const int S = p.config.scales, h = p.config.hidden;
  const Eigen::Index N = batch.size();
  Forward f;
  f.diff.resize(N, S * h);
  for (int s = 0; s < S; ++s) {
    f.ta.push_back(detail::run_tower(p.towers[s], batch.a[s]));
    f.tb.push_back(detail::run_tower(p.towers[s], batch.b[s]));
    f.diff.middleCols(s * h, h) = f.ta.back().h2 - f.tb.back().h2;
  }
  f.pair_w = detail::row_softmax(head_logits(p, f.diff.cwiseAbs()));
  const VectorXd mean = f.pair_w.colwise().mean().transpose();
  f.w.w.assign(mean.data(), mean.data() + mean.size());
  f.y = batch.c * mean;
  return f;
}

inline double loss(const VectorXd& y, const VectorXd& d) {
  if (y.size() != d.size()) throw ValidationError("nasf loss: length mismatch");
  if (y.size() == 0) throw ValidationError("nasf loss: empty input");
  return (y - d).squaredNorm() / static_cast<double>(y.size());
}

struct LossAndGrad {
  double loss = 0.0;
  Gradients grad;
};

inline LossAndGrad backward(const Params& p, const PairBatch& batch) {
  const Forward f = forward(p, batch);
  const int S = p.config.scales, h = p.config.hidden;
  const Eigen::Index N = batch.size();
  const double inv_n = 1.0 / static_cast<double>(N);

  LossAndGrad out;
  out.loss = loss(f.y, batch.d);
  out.grad = Params::zeros(p.config);
  Gradients& g = out.grad;

  // dL/dy_n, then dL/dw through y_n = w . c_n
  const VectorXd gy = 2.0 * inv_n * (f.y - batch.d);
  const VectorXd gw = batch.c.transpose() * gy;
  // w is the mean of the per-pair softmax outputs, so each pair sees gw / N.
  const Eigen::RowVectorXd gpair = (gw * inv_n).transpose();
  MatrixXd gz(N, S);
  for (Eigen::Index n = 0; n < N; ++n) {
    const double dot = f.pair_w.row(n).dot(gpair);
    gz.row(n) = f.pair_w.row(n).cwiseProduct((gpair.array() - dot).matrix());
  }
  const MatrixXd absdiff = f.diff.cwiseAbs();
  g.head_w = gz.transpose() * absdiff;
  if (p.config.head_bias) g.head_b = gz.colwise().sum().transpose();
  const MatrixXd gdiff = (gz * p.head_w).cwiseProduct(f.diff.unaryExpr([](double x) {
    return static_cast<double>((x > 0.0) - (x < 0.0));
  }));

  for (int s = 0; s < S; ++s) {
    const Tower& tw = p.towers[s];
    Tower& gt = g.towers[s];
    auto side = [&](const detail::TowerTrace& tr, const MatrixXd& x, double sign) {
      MatrixXd g2 = sign * gdiff.middleCols(s * h, h);
      g2 = g2.cwiseProduct((tr.h2.array() > 0.0).cast<double>().matrix());
      gt.w2 += g2.transpose() * tr.h1;
      gt.b2 += g2.colwise().sum().transpose();
      MatrixXd g1 = (g2 * tw.w2).cwiseProduct((tr.h1.array() > 0.0).cast<double>().matrix());
      gt.w1 += g1.transpose() * x;
      gt.b1 += g1.colwise().sum().transpose();
    };
    side(f.ta[s], batch.a[s], 1.0);
    side(f.tb[s], batch.b[s], -1.0);
  }
  return out;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const Params& like, AdamConfig cfg) : cfg_(cfg) {
    for (const auto* m : like.tensors()) {
      m1_.push_back(MatrixXd::Zero(m->rows(), m->cols()));
      m2_.push_back(MatrixXd::Zero(m->rows(), m->cols()));
    }
  }

  void step(Params& p, Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto params = p.tensors();
    auto grads = g.tensors();
    for (std::size_t k = 0; k < params.size(); ++k) {
      m1_[k] = cfg_.beta1 * m1_[k] + (1.0 - cfg_.beta1) * *grads[k];
      m2_[k] = cfg_.beta2 * m2_[k] + (1.0 - cfg_.beta2) * grads[k]->cwiseProduct(*grads[k]);
      *params[k] -= (cfg_.learning_rate * (m1_[k] / c1).array() /
                     ((m2_[k] / c2).array().sqrt() + cfg_.epsilon))
                        .matrix();
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<MatrixXd> m1_, m2_;
  std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Session features and batch assembly

// What the network needs from one session: embeddings per scale, the
// base-to-scale mapping, and the normalized affinity tensor.
struct SessionFeatures {
  std::string id;
  std::vector<MatrixXd> embeddings;            // [scale] rows x dim
  std::vector<std::vector<std::size_t>> map;   // [base][scale]
  AffinityTensor tensor;

  std::size_t num_base() const { return map.size(); }
};

inline SessionFeatures make_features(std::string id, const MultiScaleSegmentSet& set,
                                     const std::vector<EmbeddingMatrix>& embeddings) {
  SessionFeatures f;
  f.id = std::move(id);
  f.tensor = build_affinity_tensor(set, embeddings);
  for (const auto& e : embeddings) f.embeddings.push_back(e.rows.cast<double>());
  f.map = set.map;
  return f;
}

// Pairs are (i, j) base indices; labels may be empty for inference.
inline PairBatch make_batch(const SessionFeatures& f, std::span<const IndexPair> pairs,
                            std::span<const double> labels = {}) {
  const std::size_t S = f.embeddings.size();
  const auto N = static_cast<Eigen::Index>(pairs.size());
  PairBatch b;
  b.c.resize(N, static_cast<Eigen::Index>(S));
  b.d = VectorXd::Zero(N);
  for (std::size_t s = 0; s < S; ++s) {
    const MatrixXd& e = f.embeddings[s];
    MatrixXd a(N, e.cols()), bb(N, e.cols());
    for (Eigen::Index n = 0; n < N; ++n) {
      const auto [i, j] = pairs[static_cast<std::size_t>(n)];
      a.row(n) = e.row(static_cast<Eigen::Index>(f.map[i][s]));
      bb.row(n) = e.row(static_cast<Eigen::Index>(f.map[j][s]));
      b.c(n, static_cast<Eigen::Index>(s)) =
          f.tensor.scales[s](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    b.a.push_back(std::move(a));
    b.b.push_back(std::move(bb));
  }
  for (std::size_t n = 0; n < labels.size(); ++n) b.d(static_cast<Eigen::Index>(n)) = labels[n];
  return b;
}

// Labelled training pairs of one session (zero label vectors dropped).
struct LabelledSession {
  SessionFeatures features;
  std::vector<SpeakerLabelVector> label_vectors;  // per base segment
};

struct LabelledPairs {
  std::vector<IndexPair> pairs;
  std::vector<double> d;
};

inline LabelledPairs labelled_pairs(const LabelledSession& s, std::size_t n_pairs, std::uint64_t seed) {
  LabelledPairs out;
  if (s.features.num_base() < 2) return out;
  const auto pairs = sample_pairs(s.features.num_base(), n_pairs, seed);
  const auto labels = pair_labels(s.label_vectors, pairs);
  for (const auto& l : labels.labels) {
    out.pairs.emplace_back(l.i, l.j);
    out.d.push_back(l.d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 256;
  std::size_t epochs = 20;
  std::size_t pairs_per_session = 4096;  // sampled per session per epoch
  std::size_t val_pairs_per_session = 4096;
  double val_fraction = 0.1;
  std::uint64_t seed = 1234;

  void validate() const {
    if (!(adam.learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw ValidationError("val_fraction must be in [0, 1)");
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_mse_equal = 0.0;  // same pairs, weights fixed to 1/S
};

struct TrainResult {
  Params params;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  double equal_weight_val_mse = 0.0;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct EvalBatch {
  PairBatch batch;
  std::size_t session = 0;
};

// Mean squared error over fixed evaluation batches (one batch per session,
// so w is the session-level mean). Returns {model mse, equal-weight mse}.
inline std::pair<double, double> evaluate(const Params& p, const std::vector<EvalBatch>& batches) {
  double se = 0.0, se_eq = 0.0;
  double count = 0.0;
  for (const auto& eb : batches) {
    const Forward f = forward(p, eb.batch);
    const auto n = static_cast<double>(eb.batch.size());
    se += loss(f.y, eb.batch.d) * n;
    const VectorXd eq = VectorXd::Constant(p.config.scales, 1.0 / p.config.scales);
    se_eq += loss(eb.batch.c * eq, eb.batch.d) * n;
    count += n;
  }
  if (count == 0.0) return {0.0, 0.0};
  return {se / count, se_eq / count};
}

inline std::vector<EvalBatch> make_eval_batches(const std::vector<LabelledSession>& sessions,
                                                const std::vector<std::size_t>& which, std::size_t n_pairs,
                                                std::uint64_t seed) {
  std::vector<EvalBatch> out;
  for (std::size_t k : which) {
    auto lp = labelled_pairs(sessions[k], n_pairs, seed + 7919 * (k + 1));
    if (lp.pairs.empty()) continue;
    out.push_back({make_batch(sessions[k].features, lp.pairs, lp.d), k});
  }
  return out;
}

using ProgressFn = std::function<void(const EpochLog&)>;

inline TrainResult train(const std::vector<LabelledSession>& sessions, const ModelConfig& model,
                         const TrainConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  if (sessions.empty()) throw ValidationError("train: no training sessions");
  for (const auto& s : sessions) {
    if (s.features.embeddings.size() != static_cast<std::size_t>(model.scales))
      throw ValidationError("train: session " + s.features.id + " scale count mismatch");
    for (const auto& e : s.features.embeddings)
      if (e.cols() != model.dim) throw ValidationError("train: session " + s.features.id + " dim mismatch");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(sessions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = 0;
  if (sessions.size() >= 2 && cfg.val_fraction > 0.0)
    n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(cfg.val_fraction * sessions.size())), 1,
                                    sessions.size() - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  // A single session validates on itself.
  if (val_idx.empty()) val_idx = train_idx;

  const auto val_batches = make_eval_batches(sessions, val_idx, cfg.val_pairs_per_session, cfg.seed ^ 0x5eed);

  TrainResult result;
  Params p = Params::init(model, cfg.seed);
  Adam opt(p, cfg.adam);
  result.params = p;
  auto [v0, veq] = evaluate(p, val_batches);
  result.best_val_mse = v0;
  result.equal_weight_val_mse = veq;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double se = 0.0, count = 0.0;
    for (std::size_t k : train_idx) {
      auto lp = labelled_pairs(sessions[k], cfg.pairs_per_session, rng());
      std::vector<std::size_t> perm(lp.pairs.size());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t at = 0; at < perm.size(); at += cfg.batch_size) {
        const std::size_t end = std::min(perm.size(), at + cfg.batch_size);
        std::vector<IndexPair> pairs;
        std::vector<double> d;
        for (std::size_t q = at; q < end; ++q) {
          pairs.push_back(lp.pairs[perm[q]]);
          d.push_back(lp.d[perm[q]]);
        }
        const PairBatch batch = make_batch(sessions[k].features, pairs, d);
        auto lg = backward(p, batch);
        if (!std::isfinite(lg.loss))
          throw TrainingDiverged("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", session " + sessions[k].features.id + ", step " + std::to_string(opt.steps()));
        opt.step(p, lg.grad);
        if (!p.all_finite())
          throw TrainingDiverged("training diverged: non-finite parameters after step " +
                                 std::to_string(opt.steps()));
        se += lg.loss * static_cast<double>(pairs.size());
        count += static_cast<double>(pairs.size());
      }
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_mse = count > 0.0 ? se / count : 0.0;
    std::tie(entry.val_mse, entry.val_mse_equal) = evaluate(p, val_batches);
    result.log.push_back(entry);
    if (progress) progress(entry);
    if (entry.val_mse < result.best_val_mse || result.best_epoch == 0) {
      result.best_val_mse = entry.val_mse;
      result.best_epoch = epoch;
      result.params = p;
    }
  }
  result.params.seed = cfg.seed;
  return result;
}

// ---------------------------------------------------------------------------
// Inference

enum class Mode { EqualWeight, Single, Divided };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::EqualWeight: return "equal";
    case Mode::Single: return "nasf-s";
    case Mode::Divided: return "nasf-d";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "equal" || s == "equal-weight" || s == "EqualWeight") return Mode::EqualWeight;
  if (s == "nasf-s" || s == "NASF-S") return Mode::Single;
  if (s == "nasf-d" || s == "NASF-D") return Mode::Divided;
  throw ValidationError("unknown inference mode '" + s + "' (expected equal, nasf-s, nasf-d)");
}

inline constexpr std::size_t kDefaultInferencePairs = 500000;

// Tower outputs per segment are shared by every pair, so they are computed
// once per session and only the head runs per pair.
class SessionScorer {
 public:
  SessionScorer(const Params& p, const SessionFeatures& f) : p_(p), f_(f) {
    if (f.embeddings.size() != static_cast<std::size_t>(p.config.scales))
      throw ValidationError("model expects " + std::to_string(p.config.scales) + " scales, session has " +
                            std::to_string(f.embeddings.size()));
    for (int s = 0; s < p.config.scales; ++s) {
      if (f.embeddings[s].cols() != p.config.dim)
        throw ValidationError("model expects dim " + std::to_string(p.config.dim) + ", session has " +
                              std::to_string(f.embeddings[s].cols()));
      outputs_.push_back(detail::run_tower(p.towers[s], f.embeddings[s]).h2);
    }
  }

  // Mean softmax over the given pairs.
  WeightVector mean_weights(const std::vector<IndexPair>& pairs) const {
    if (pairs.empty()) throw ValidationError("nasf inference: no pairs");
    const int S = p_.config.scales, h = p_.config.hidden;
    constexpr std::size_t kChunk = 4096;
    VectorXd acc = VectorXd::Zero(S);
    for (std::size_t at = 0; at < pairs.size(); at += kChunk) {
      const std::size_t end = std::min(pairs.size(), at + kChunk);
      MatrixXd absdiff(static_cast<Eigen::Index>(end - at), S * h);
      for (std::size_t q = at; q < end; ++q) {
        const auto [i, j] = pairs[q];
        for (int s = 0; s < S; ++s)
          absdiff.row(static_cast<Eigen::Index>(q - at)).segment(s * h, h) =
              (outputs_[s].row(static_cast<Eigen::Index>(f_.map[i][s])) -
               outputs_[s].row(static_cast<Eigen::Index>(f_.map[j][s])))
                  .cwiseAbs();
      }
      acc += detail::row_softmax(head_logits(p_, absdiff)).colwise().sum().transpose();
    }
    acc /= acc.sum();
    return WeightVector(std::vector<double>(acc.data(), acc.data() + acc.size()));
  }

 private:
  const Params& p_;
  const SessionFeatures& f_;
  std::vector<MatrixXd> outputs_;
};

// One weight vector (EqualWeight, NASF-S) or six (NASF-D: intra blocks
// 0, 1, 2 then inter (0,1), (0,2), (1,2)).
inline std::vector<WeightVector> infer_weights(const Params* p, const SessionFeatures& f, Mode mode,
                                               std::size_t n_pairs, std::uint64_t seed) {
  const std::size_t L = f.num_base();
  if (mode == Mode::EqualWeight) return {WeightVector::equal(f.embeddings.size())};
  if (p == nullptr) throw ValidationError("nasf inference requires a trained model");
  if (mode == Mode::Single) {
    if (L < 2) throw ValidationError("NASF-S needs at least 2 base segments");
    SessionScorer scorer(*p, f);
    return {scorer.mean_weights(sample_pairs(L, n_pairs, seed))};
  }
  if (L < 6) throw ValidationError("NASF-D needs at least 6 base segments");
  SessionScorer scorer(*p, f);
  const auto split = split_session(L);
  std::vector<WeightVector> out;
  for (std::size_t b = 0; b < 3; ++b) {
    auto pairs = sample_pairs(split[b].size(), n_pairs, seed + b);
    for (auto& [i, j] : pairs) {
      i += split[b].first;
      j += split[b].first;
    }
    out.push_back(scorer.mean_weights(pairs));
  }
  const std::pair<std::size_t, std::size_t> inter[3] = {{0, 1}, {0, 2}, {1, 2}};
  for (std::size_t k = 0; k < 3; ++k)
    out.push_back(scorer.mean_weights(sample_cross_pairs(split[inter[k].first], split[inter[k].second], n_pairs,
                                                         seed + 3 + k)));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: text, versioned, row-major tensors at full precision.

inline constexpr const char* kCheckpointMagic = "msdiar-nasf";
inline constexpr int kCheckpointVersion = 1;

inline std::string serialize(const Params& p) {
  std::ostringstream out;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "scales " << p.config.scales << " dim " << p.config.dim << " hidden " << p.config.hidden << " head_bias "
      << (p.config.head_bias ? 1 : 0) << " seed " << p.seed << '\n';
  char buf[40];
  for (const auto* m : p.tensors()) {
    out << "tensor " << m->rows() << ' ' << m->cols() << '\n';
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) {
        std::snprintf(buf, sizeof(buf), c ? " %.17g" : "%.17g", (*m)(r, c));
        out << buf;
      }
      out << '\n';
    }
  }
  return out.str();
}

inline Params deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string magic, key;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic)
    throw FormatError("not a NASF checkpoint");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  ModelConfig cfg;
  int bias = 1;
  std::uint64_t seed = 0;
  std::string k1, k2, k3, k4, k5;
  if (!(in >> k1 >> cfg.scales >> k2 >> cfg.dim >> k3 >> cfg.hidden >> k4 >> bias >> k5 >> seed) ||
      k1 != "scales" || k2 != "dim" || k3 != "hidden" || k4 != "head_bias" || k5 != "seed")
    throw FormatError("malformed checkpoint header");
  cfg.head_bias = bias != 0;
  Params p = Params::zeros(cfg);
  p.seed = seed;
  for (auto* m : p.tensors()) {
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> key >> rows >> cols) || key != "tensor")
      throw FormatError("malformed checkpoint tensor header");
    if (rows != m->rows() || cols != m->cols())
      throw FormatError("checkpoint tensor shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " does not match model " + std::to_string(m->rows()) + "x" + std::to_string(m->cols()));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        std::string tok;
        double v = 0.0;
        if (!(in >> tok) || !msdiar::detail::parse_double(tok, v) || !std::isfinite(v))
          throw FormatError("checkpoint: bad parameter value");
        (*m)(r, c) = v;
      }
  }
  if (in >> key) throw FormatError("checkpoint: trailing data");
  return p;
}

inline void save_checkpoint(const Params& p, const std::string& path) {
  const std::string text = serialize(p);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + tmp);
    out << text;
    if (!out) throw Error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot move checkpoint into place: " + path);
}

inline Params load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// Dims must agree with the session configuration.
inline void check_compatible(const Params& p, int scales, int dim) {
  if (p.config.scales != scales || p.config.dim != dim)
    throw ValidationError("checkpoint dims (scales " + std::to_string(p.config.scales) + ", dim " +
                          std::to_string(p.config.dim) + ") do not match session (scales " + std::to_string(scales) +
                          ", dim " + std::to_string(dim) + ")");
}

}  // namespace msdiar::nasf
