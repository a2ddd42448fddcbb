#pragma once

// Speaker label vectors and ground-truth pair affinities for training.

#include <cstdint>
#include <random>
#include <unordered_set>
#include <utility>
#include <vector>

#include "msdiar/affinity.hpp"
#include "msdiar/rttm.hpp"
#include "msdiar/segmenter.hpp"

namespace msdiar {

// v[k] = seconds of speaker k inside the segment.
using SpeakerLabelVector = std::vector<double>;

struct PairLabel {
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
};

using IndexPair = std::pair<std::size_t, std::size_t>;

inline SpeakerLabelVector label_vector(const Segment& seg, const std::vector<RttmTurn>& turns,
                                       const std::vector<std::string>& speakers) {
  SpeakerLabelVector v(speakers.size(), 0.0);
  const Interval span{seg.start, seg.end};
  // clipped pieces per speaker, merged so self-overlapping turns count once
  std::vector<std::vector<Interval>> pieces(speakers.size());
  for (const auto& t : turns) {
    const Interval iv{std::max(span.start, t.onset), std::min(span.end, t.end())};
    if (iv.end <= iv.start) continue;
    auto it = std::lower_bound(speakers.begin(), speakers.end(), t.speaker_id);
    if (it == speakers.end() || *it != t.speaker_id)
      throw ValidationError("speaker '" + t.speaker_id + "' missing from speaker list");
    pieces[static_cast<std::size_t>(it - speakers.begin())].push_back(iv);
  }
  for (std::size_t k = 0; k < speakers.size(); ++k)
    if (!pieces[k].empty()) v[k] = to_seconds(total_length(merge_intervals(std::move(pieces[k]))));
  return v;
}

inline std::vector<SpeakerLabelVector> label_vectors(const std::vector<Segment>& segments,
                                                     const std::vector<RttmTurn>& turns) {
  const auto speakers = speaker_list(turns);
  std::vector<SpeakerLabelVector> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(label_vector(s, turns, speakers));
  return out;
}

inline bool is_zero(const SpeakerLabelVector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

struct PairLabelSet {
  std::vector<PairLabel> labels;
  std::size_t dropped = 0;  // pairs with an all-zero label vector
};

inline PairLabelSet pair_labels(const std::vector<SpeakerLabelVector>& vectors,
                                const std::vector<IndexPair>& pairs) {
  PairLabelSet out;
  out.labels.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    if (i == j) throw ValidationError("pair_labels: i == j");
    if (is_zero(vectors.at(i)) || is_zero(vectors.at(j))) {
      ++out.dropped;
      continue;
    }
    out.labels.push_back({i, j, std::clamp(cosine(vectors[i], vectors[j]), 0.0, 1.0)});
  }
  return out;
}

// Unordered pair (i < j) at row-major position k of the strict upper triangle.
inline IndexPair decode_pair(std::uint64_t k, std::uint64_t n) {
  // Row i starts at offset i*n - i*(i+1)/2 and holds n-1-i entries.
  const double nn = static_cast<double>(n);
  auto i = static_cast<std::uint64_t>(
      std::floor(((2.0 * nn - 1.0) - std::sqrt((2.0 * nn - 1.0) * (2.0 * nn - 1.0) - 8.0 * static_cast<double>(k))) / 2.0));
  auto row_start = [n](std::uint64_t r) { return r * n - r * (r + 1) / 2; };
  while (i > 0 && row_start(i) > k) --i;
  while (i + 1 < n && row_start(i + 1) <= k) ++i;
  const std::uint64_t j = k - row_start(i) + i + 1;
  return {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
}

// Floyd's sampling of `count` distinct values from [0, total).
inline std::vector<std::uint64_t> sample_distinct(std::uint64_t total, std::uint64_t count, std::mt19937_64& rng) {
  std::vector<std::uint64_t> out;
  if (count >= total) {
    out.resize(total);
    std::iota(out.begin(), out.end(), std::uint64_t{0});
    return out;
  }
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count * 2);
  out.reserve(count);
  for (std::uint64_t r = total - count; r < total; ++r) {
    const std::uint64_t x = std::uniform_int_distribution<std::uint64_t>(0, r)(rng);
    if (seen.insert(x).second)
      out.push_back(x);
    else {
      seen.insert(r);
      out.push_back(r);
    }
  }
  return out;
}

// N distinct unordered pairs from L items, uniformly without replacement;
// every pair when N >= C(L, 2).
inline std::vector<IndexPair> sample_pairs(std::size_t n_items, std::size_t n_pairs, std::uint64_t seed) {
  if (n_items < 2) throw ValidationError("sample_pairs: need at least 2 items");
  const std::uint64_t total = static_cast<std::uint64_t>(n_items) * (n_items - 1) / 2;
  std::mt19937_64 rng(seed);
  std::vector<IndexPair> out;
  for (std::uint64_t k : sample_distinct(total, n_pairs, rng)) out.push_back(decode_pair(k, n_items));
  return out;
}

// Pairs (i in a, j in b) for two disjoint ranges, sampled the same way.
inline std::vector<IndexPair> sample_cross_pairs(const IndexRange& a, const IndexRange& b, std::size_t n_pairs,
                                                 std::uint64_t seed) {
  const std::uint64_t total = static_cast<std::uint64_t>(a.size()) * b.size();
  if (total == 0) throw ValidationError("sample_cross_pairs: empty range");
  std::mt19937_64 rng(seed);
  std::vector<IndexPair> out;
  for (std::uint64_t k : sample_distinct(total, n_pairs, rng))
    out.emplace_back(a.first + static_cast<std::size_t>(k / b.size()), b.first + static_cast<std::size_t>(k % b.size()));
  return out;
}

inline std::string format_pair_labels(const std::vector<PairLabel>& labels) {
  std::string out;
  char buf[64];
  for (const auto& p : labels) {
    std::snprintf(buf, sizeof(buf), "%zu %zu %.6f\n", p.i, p.j, p.d);
    out += buf;
  }
  return out;
}

}  // namespace msdiar
