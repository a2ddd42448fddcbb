#pragma once

// Per-scale cosine affinities over base-segment pairs, min-max
// normalization, and weighted fusion of the scales.

#include <Eigen/Dense>

#include <array>
#include <numeric>
#include <span>
#include <vector>

#include "msdiar/common.hpp"
#include "msdiar/embeddings.hpp"
#include "msdiar/segmenter.hpp"

namespace msdiar {

// Nonnegative scale weights summing to one.
struct WeightVector {
  std::vector<double> w;

  WeightVector() = default;
  explicit WeightVector(std::vector<double> values) : w(std::move(values)) { validate(); }

  static WeightVector equal(std::size_t scales) {
    return WeightVector(std::vector<double>(scales, 1.0 / static_cast<double>(scales)));
  }
  static WeightVector one_hot(std::size_t scales, std::size_t which) {
    std::vector<double> v(scales, 0.0);
    v.at(which) = 1.0;
    return WeightVector(std::move(v));
  }

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t i) const { return w[i]; }

  void validate() const {
    if (w.empty()) throw ValidationError("weight vector is empty");
    double sum = 0.0;
    for (double x : w) {
      if (!std::isfinite(x) || x < 0.0) throw ValidationError("weights must be finite and nonnegative");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("weights must sum to 1");
  }
};

struct AffinityTensor {
  std::vector<Eigen::MatrixXd> scales;  // S matrices, each L x L

  std::size_t num_scales() const { return scales.size(); }
  Eigen::Index size() const { return scales.empty() ? 0 : scales.front().rows(); }
};

template <typename T>
double cosine(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) throw ValidationError("cosine: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += static_cast<double>(u[k]) * static_cast<double>(v[k]);
    nu += static_cast<double>(u[k]) * static_cast<double>(u[k]);
    nv += static_cast<double>(v[k]) * static_cast<double>(v[k]);
  }
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine: zero-norm vector");
  return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine(std::span<const double>(u), std::span<const double>(v));
}

// Maps off-diagonal entries affinely onto [0, 1]; the diagonal is fixed to 1.
// A constant off-diagonal falls back to 0.5 everywhere.
inline Eigen::MatrixXd minmax_normalize(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ValidationError("minmax_normalize: matrix must be square");
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd out(n, n);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) {
        lo = std::min(lo, m(i, j));
        hi = std::max(hi, m(i, j));
      }
  const bool constant = n > 1 && !(hi > lo);
  if (constant) log::warn("minmax_normalize: constant off-diagonal, using 0.5");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j)
        out(i, j) = 1.0;
      else if (constant)
        out(i, j) = 0.5;
      else
        out(i, j) = std::clamp((m(i, j) - lo) / (hi - lo), 0.0, 1.0);
    }
  return out;
}

namespace detail {

// Unit-normalized double copy of the embedding rows.
inline Eigen::MatrixXd unit_rows(const EmbeddingRows& rows) {
  Eigen::MatrixXd e = rows.cast<double>();
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    const double n = e.row(r).norm();
    if (n == 0.0) throw ValidationError("cosine: zero-norm embedding at row " + std::to_string(r));
    e.row(r) /= n;
  }
  return e;
}

}  // namespace detail

// Raw (un-normalized) cosine matrix over base-segment pairs at scale s.
inline Eigen::MatrixXd raw_scale_cosines(const MultiScaleSegmentSet& set, const EmbeddingMatrix& emb,
                                         std::size_t s) {
  if (static_cast<std::size_t>(emb.size()) != set.segments[s].size())
    throw ValidationError("scale " + std::to_string(s) + ": embedding rows (" + std::to_string(emb.size()) +
                          ") != segments (" + std::to_string(set.segments[s].size()) + ")");
  const Eigen::MatrixXd unit = detail::unit_rows(emb.rows);
  const Eigen::MatrixXd gram = (unit * unit.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
  const auto n = static_cast<Eigen::Index>(set.num_base());
  Eigen::MatrixXd raw(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      raw(i, j) = gram(static_cast<Eigen::Index>(set.map[i][s]), static_cast<Eigen::Index>(set.map[j][s]));
  return raw;
}

inline AffinityTensor build_affinity_tensor(const MultiScaleSegmentSet& set,
                                            const std::vector<EmbeddingMatrix>& embeddings) {
  if (embeddings.size() != set.num_scales())
    throw ValidationError("expected one embedding matrix per scale");
  const Eigen::Index dim = embeddings.front().dim();
  AffinityTensor t;
  for (std::size_t s = 0; s < set.num_scales(); ++s) {
    if (embeddings[s].dim() != dim) throw ValidationError("embedding dimension differs across scales");
    t.scales.push_back(minmax_normalize(raw_scale_cosines(set, embeddings[s], s)));
  }
  return t;
}

inline Eigen::MatrixXd fuse(const AffinityTensor& t, const WeightVector& w) {
  if (w.size() != t.num_scales())
    throw ValidationError("fuse: weight length " + std::to_string(w.size()) + " != scales " +
                          std::to_string(t.num_scales()));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t.size(), t.size());
  for (std::size_t s = 0; s < t.num_scales(); ++s) out += w[s] * t.scales[s];
  return out;
}

struct IndexRange {
  std::size_t first = 0;
  std::size_t last = 0;  // exclusive

  std::size_t size() const { return last - first; }
  bool contains(std::size_t i) const { return i >= first && i < last; }
  bool operator==(const IndexRange&) const = default;
};

// Three contiguous sub-sessions by segment count; leftovers go to the
// earliest blocks (L = 10 -> 4, 3, 3).
inline std::array<IndexRange, 3> split_session(std::size_t n) {
  std::array<IndexRange, 3> out;
  std::size_t at = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t len = n / 3 + (b < n % 3 ? 1 : 0);
    out[b] = {at, at + len};
    at += len;
  }
  return out;
}

// Position of the weight vector for block pair (a, b) in the six-vector
// layout: intra 0, 1, 2 then inter (0,1), (0,2), (1,2).
inline std::size_t block_weight_index(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  if (a == b) return a;
  return a == 0 ? (b == 1 ? 3 : 4) : 5;
}

inline Eigen::MatrixXd fuse_blockwise(const AffinityTensor& t, const std::vector<WeightVector>& weights,
                                      const std::array<IndexRange, 3>& split) {
  if (weights.size() != 6) throw ValidationError("fuse_blockwise: expected 6 weight vectors");
  for (const auto& w : weights)
    if (w.size() != t.num_scales()) throw ValidationError("fuse_blockwise: weight length mismatch");
  const auto n = static_cast<std::size_t>(t.size());
  if (split[0].first != 0 || split[0].last != split[1].first || split[1].last != split[2].first ||
      split[2].last != n || split[0].last < split[0].first || split[1].last < split[1].first ||
      split[2].last < split[2].first)
    throw ValidationError("fuse_blockwise: ranges do not partition 0..L");

  std::vector<std::size_t> block(n);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t i = split[b].first; i < split[b].last; ++i) block[i] = b;

  Eigen::MatrixXd out(t.size(), t.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const WeightVector& w = weights[block_weight_index(block[i], block[j])];
      double v = 0.0;
      for (std::size_t s = 0; s < t.num_scales(); ++s) v += w[s] * t.scales[s](i, j);
      out(i, j) = v;
    }
  return out;
}

}  // namespace msdiar
