#pragma once

// Spectral clustering with normalized-maximum-eigengap (NME) search over
// the row-binarization parameter p. The speaker count is read from the
// largest eigengap of the graph Laplacian at the selected p.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "msdiar/common.hpp"

namespace msdiar {

struct NmescConfig {
  std::size_t k_max = 8;
  std::size_t max_p_candidates = 100;
  std::size_t kmeans_restarts = 10;
  std::size_t kmeans_iterations = 300;
  std::uint64_t seed = 2020;
};

struct PDiagnostic {
  std::size_t p = 0;
  double gap = 0.0;    // max eigengap / largest eigenvalue
  double ratio = 0.0;  // (p / L) / gap
  std::size_t k = 0;
};

struct NmeResult {
  std::size_t p = 0;
  std::size_t k = 0;
  std::vector<PDiagnostic> trace;
};

struct ClusterResult {
  std::size_t k = 0;
  std::vector<int> labels;
  std::vector<PDiagnostic> trace;
};

// Integers in [2, L/2], uniformly subsampled to at most max_candidates.
// Sessions too short for that range fall back to {min(2, L)}.
inline std::vector<std::size_t> default_p_grid(std::size_t n, std::size_t max_candidates) {
  std::vector<std::size_t> grid;
  const std::size_t hi = n / 2;
  if (hi < 2) return {std::min<std::size_t>(2, n)};
  const std::size_t count = hi - 1;
  if (max_candidates == 0 || count <= max_candidates) {
    for (std::size_t p = 2; p <= hi; ++p) grid.push_back(p);
    return grid;
  }
  for (std::size_t k = 0; k < max_candidates; ++k) {
    const double t = max_candidates == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(max_candidates - 1);
    const auto p = static_cast<std::size_t>(std::llround(2.0 + t * static_cast<double>(hi - 2)));
    if (grid.empty() || grid.back() != p) grid.push_back(p);
  }
  return grid;
}

// Keeps the p largest entries of each row (self always kept, ties by
// lower column index), then symmetrizes by averaging: B = (B0 + B0^T) / 2.
// Zero-valued affinities never become edges.
inline Eigen::MatrixXd binarize(const Eigen::MatrixXd& a, std::size_t p) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd b0 = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index x, Eigen::Index y) {
      if (x == i || y == i) return x == i && y != i;
      return a(i, x) > a(i, y);
    });
    const std::size_t keep = std::min<std::size_t>(p, static_cast<std::size_t>(n));
    b0(i, i) = 1.0;
    for (std::size_t k = 1; k < keep; ++k)
      if (a(i, idx[k]) > 0.0) b0(i, idx[k]) = 1.0;
  }
  return 0.5 * (b0 + b0.transpose());
}

// Unnormalized Laplacian D - B.
inline Eigen::MatrixXd laplacian(const Eigen::MatrixXd& b) {
  Eigen::MatrixXd lap = -b;
  for (Eigen::Index i = 0; i < b.rows(); ++i) lap(i, i) = b.row(i).sum() - b(i, i);
  return lap;
}

inline Eigen::VectorXd laplacian_eigenvalues(const Eigen::MatrixXd& lap) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("eigen-solver did not converge on " + std::to_string(lap.rows()) + "x" +
                                               std::to_string(lap.rows()) + " Laplacian");
  return es.eigenvalues();  // ascending
}

inline void check_affinity(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ValidationError("affinity must be square");
  if (a.rows() < 1) throw ValidationError("affinity is empty");
  if (!a.allFinite()) throw ValidationError("affinity has non-finite entries");
  if (a.cwiseAbs().maxCoeff() == 0.0) throw ValidationError("degenerate graph: all-zero affinity");
}

// Eigengap analysis of one binarized graph.
inline PDiagnostic eigengap_at(const Eigen::MatrixXd& a, std::size_t p, std::size_t k_max) {
  const auto n = static_cast<std::size_t>(a.rows());
  const Eigen::VectorXd lambda = laplacian_eigenvalues(laplacian(binarize(a, p)));
  PDiagnostic d;
  d.p = p;
  const double top = lambda(lambda.size() - 1);
  if (top <= 1e-10) {
    // No edges at all: every node is its own component.
    d.k = std::min(n, k_max);
    d.gap = 1.0;
  } else {
    const std::size_t kk = std::min(k_max, n - 1);
    double best = -1.0;
    for (std::size_t k = 1; k <= kk; ++k) {
      const double g = lambda(static_cast<Eigen::Index>(k)) - lambda(static_cast<Eigen::Index>(k - 1));
      if (g > best) {
        best = g;
        d.k = k;
      }
    }
    d.gap = best / top;
  }
  d.ratio = d.gap > 0.0 ? (static_cast<double>(p) / static_cast<double>(n)) / d.gap
                        : std::numeric_limits<double>::infinity();
  return d;
}

inline NmeResult nme_search(const Eigen::MatrixXd& a, const std::vector<std::size_t>& p_grid, std::size_t k_max) {
  check_affinity(a);
  if (a.rows() < 2) throw ValidationError("nme_search needs at least 2 segments");
  if (p_grid.empty()) throw ValidationError("nme_search: empty p grid");
  if (k_max < 1) throw ValidationError("k_max must be >= 1");
  NmeResult r;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t p : p_grid) {
    if (p < 1) throw ValidationError("p must be >= 1");
    r.trace.push_back(eigengap_at(a, p, k_max));
    if (r.trace.back().ratio < best) {
      best = r.trace.back().ratio;
      r.p = p;
      r.k = r.trace.back().k;
    }
  }
  if (r.p == 0) {  // every ratio infinite
    r.p = r.trace.front().p;
    r.k = r.trace.front().k;
  }
  return r;
}

// ---------------------------------------------------------------------------
// k-means with k-means++ seeding

struct KMeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
};

inline KMeansResult kmeans_once(const Eigen::MatrixXd& x, std::size_t k, std::size_t iterations,
                                std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), x.cols());
  // k-means++
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Eigen::Index first = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
  centers.row(0) = x.row(first);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(i) - centers.row(static_cast<Eigen::Index>(c - 1))).squaredNorm());
      total += d2[i];
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    } else {
      pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    }
    centers.row(static_cast<Eigen::Index>(c)) = x.row(pick);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (std::size_t it = 0; it < iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c) {
        const double dd = (x.row(i) - centers.row(c)).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    // update, re-seeding empty clusters at the farthest point
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += x.row(i);
      ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
        continue;
      }
      Eigen::Index far = 0;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dd = (x.row(i) - centers.row(labels[i])).squaredNorm();
        if (dd > fd && counts[static_cast<std::size_t>(labels[i])] > 1) {
          fd = dd;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      counts[c] = 1;
      centers.row(static_cast<Eigen::Index>(c)) = x.row(far);
      changed = true;
    }
    if (!changed) break;
  }
  KMeansResult r;
  r.labels = std::move(labels);
  for (Eigen::Index i = 0; i < n; ++i) r.inertia += (x.row(i) - centers.row(r.labels[i])).squaredNorm();
  return r;
}

// Renames clusters in order of first appearance.
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::vector<int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    if (l >= remap.size()) remap.resize(l + 1, -1);
    if (remap[l] < 0) remap[l] = static_cast<int>(std::count_if(remap.begin(), remap.end(), [](int v) { return v >= 0; }));
    out[i] = remap[l];
  }
  return out;
}

inline KMeansResult kmeans(const Eigen::MatrixXd& x, std::size_t k, std::size_t restarts, std::size_t iterations,
                           std::uint64_t seed) {
  if (k < 1 || static_cast<Eigen::Index>(k) > x.rows()) throw ValidationError("kmeans: need 1 <= k <= n");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    auto res = kmeans_once(x, k, iterations, rng);
    if (res.inertia < best.inertia - 1e-12) best = std::move(res);
  }
  best.labels = canonical_labels(best.labels);
  return best;
}

// Rows of the k smallest-eigenvalue eigenvectors of the Laplacian at p,
// row-normalized, clustered by k-means.
inline std::vector<int> spectral_cluster(const Eigen::MatrixXd& a, std::size_t p, std::size_t k,
                                         const NmescConfig& cfg = {}) {
  check_affinity(a);
  const Eigen::Index n = a.rows();
  if (k < 1) throw ValidationError("spectral_cluster: k must be >= 1");
  if (static_cast<Eigen::Index>(k) > n) throw ValidationError("spectral_cluster: k exceeds segment count");
  if (k == 1) return std::vector<int>(static_cast<std::size_t>(n), 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian(binarize(a, p)));
  if (es.info() != Eigen::Success)
    throw Error("eigen-solver did not converge on " + std::to_string(n) + "x" + std::to_string(n) +
                " Laplacian (p = " + std::to_string(p) + ")");
  Eigen::MatrixXd emb = es.eigenvectors().leftCols(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = emb.row(i).norm();
    if (norm > 0.0) emb.row(i) /= norm;
  }
  return kmeans(emb, k, cfg.kmeans_restarts, cfg.kmeans_iterations, cfg.seed).labels;
}

inline ClusterResult nmesc_cluster(const Eigen::MatrixXd& a, const NmescConfig& cfg = {}) {
  check_affinity(a);
  const auto n = static_cast<std::size_t>(a.rows());
  ClusterResult out;
  if (n == 1) {
    out.k = 1;
    out.labels = {0};
    return out;
  }
  auto nme = nme_search(a, default_p_grid(n, cfg.max_p_candidates), cfg.k_max);
  out.k = nme.k;
  out.trace = std::move(nme.trace);
  out.labels = spectral_cluster(a, nme.p, nme.k, cfg);
  return out;
}

inline std::string format_nme_trace(const std::vector<PDiagnostic>& trace) {
  std::string out;
  char buf[96];
  for (const auto& d : trace) {
    std::snprintf(buf, sizeof(buf), "%zu %.6g %.6g %zu\n", d.p, d.gap, d.ratio, d.k);
    out += buf;
  }
  return out;
}

}  // namespace msdiar
