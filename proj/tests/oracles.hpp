#pragma once

// Brute-force reference computations used only by the tests. None of these
// call into the library code paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "msdiar/rttm.hpp"
#include "msdiar/segmenter.hpp"

namespace oracle {

using msdiar::Millis;

// 1 ms boolean grid of the union of turns.
inline std::vector<bool> speech_grid(const std::vector<msdiar::RttmTurn>& turns, Millis horizon) {
  std::vector<bool> g(static_cast<std::size_t>(horizon), false);
  for (const auto& t : turns)
    for (Millis m = t.onset; m < t.onset + t.duration && m < horizon; ++m) g[static_cast<std::size_t>(m)] = true;
  return g;
}

// Seconds of each speaker inside [start, end), counted frame by frame.
inline std::vector<double> grid_label_vector(Millis start, Millis end, const std::vector<msdiar::RttmTurn>& turns,
                                             const std::vector<std::string>& speakers) {
  std::vector<double> v(speakers.size(), 0.0);
  for (std::size_t k = 0; k < speakers.size(); ++k) {
    long frames = 0;
    for (Millis m = start; m < end; ++m) {
      bool on = false;
      for (const auto& t : turns)
        if (t.speaker_id == speakers[k] && m >= t.onset && m < t.onset + t.duration) on = true;
      frames += on;
    }
    v[k] = static_cast<double>(frames) / 1000.0;
  }
  return v;
}

inline double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Exhaustive nearest-center scan over segments of the same region;
// earliest index wins ties. Centers are compared in doubled milliseconds.
inline std::size_t nearest_same_region(const std::vector<msdiar::Segment>& pool, const msdiar::Segment& probe) {
  std::size_t best = pool.size();
  Millis best_d = 0;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (pool[k].region != probe.region) continue;
    const Millis d = std::abs((pool[k].start + pool[k].end) - (probe.start + probe.end));
    if (best == pool.size() || d < best_d) {
      best = k;
      best_d = d;
    }
  }
  return best;
}

// Same-region scan; a region with no segment at this scale falls back to
// an exhaustive scan over every segment of the scale.
inline std::size_t nearest_mapped(const std::vector<msdiar::Segment>& pool, const msdiar::Segment& probe) {
  const std::size_t local = nearest_same_region(pool, probe);
  if (local != pool.size()) return local;
  std::size_t best = 0;
  for (std::size_t k = 1; k < pool.size(); ++k)
    if (std::abs(pool[k].start + pool[k].end - probe.start - probe.end) <
        std::abs(pool[best].start + pool[best].end - probe.start - probe.end))
      best = k;
  return best;
}

// Frame-level diarization error rate at 1 ms with brute-force optimal
// speaker mapping (all injective hyp -> ref assignments).
struct FrameDer {
  double miss = 0, fa = 0, conf = 0, total = 0;
  double der() const { return total > 0 ? (miss + fa + conf) / total : 0.0; }
};

struct Labelled {
  Millis start, end;
  std::string label;
};

inline FrameDer frame_der(const std::vector<Labelled>& ref, const std::vector<Labelled>& hyp, Millis collar,
                          bool score_overlap) {
  Millis horizon = 0;
  for (const auto& r : ref) horizon = std::max(horizon, r.end + collar + 1);
  for (const auto& h : hyp) horizon = std::max(horizon, h.end + 1);
  std::vector<std::string> rn, hn;
  for (const auto& r : ref)
    if (std::find(rn.begin(), rn.end(), r.label) == rn.end()) rn.push_back(r.label);
  for (const auto& h : hyp)
    if (std::find(hn.begin(), hn.end(), h.label) == hn.end()) hn.push_back(h.label);
  const std::size_t H = static_cast<std::size_t>(horizon);
  std::vector<bool> scored(H, true);
  for (const auto& r : ref)
    for (Millis b : {r.start, r.end})
      for (Millis m = std::max<Millis>(0, b - collar); m < b + collar && m < horizon; ++m)
        scored[static_cast<std::size_t>(m)] = false;
  std::vector<std::vector<bool>> ra(rn.size(), std::vector<bool>(H, false)), ha(hn.size(), std::vector<bool>(H, false));
  for (const auto& r : ref) {
    auto k = static_cast<std::size_t>(std::find(rn.begin(), rn.end(), r.label) - rn.begin());
    for (Millis m = r.start; m < r.end; ++m) ra[k][static_cast<std::size_t>(m)] = true;
  }
  for (const auto& h : hyp) {
    auto k = static_cast<std::size_t>(std::find(hn.begin(), hn.end(), h.label) - hn.begin());
    for (Millis m = h.start; m < h.end; ++m) ha[k][static_cast<std::size_t>(m)] = true;
  }
  std::vector<int> nref(H, 0);
  for (std::size_t m = 0; m < H; ++m) {
    for (std::size_t k = 0; k < rn.size(); ++k) nref[m] += ra[k][m];
    if (!score_overlap && nref[m] > 1) scored[m] = false;
  }
  // overlap matrix in scored frames
  std::vector<std::vector<long>> ov(hn.size(), std::vector<long>(rn.size(), 0));
  for (std::size_t m = 0; m < H; ++m)
    if (scored[m])
      for (std::size_t h = 0; h < hn.size(); ++h)
        for (std::size_t r = 0; r < rn.size(); ++r) ov[h][r] += ha[h][m] && ra[r][m];
  // brute force: each hyp label maps to a distinct ref index or to nothing (-1)
  std::vector<int> best_map(hn.size(), -1), cur(hn.size(), -1);
  long best_total = -1;
  std::vector<bool> used(rn.size(), false);
  auto rec = [&](auto&& self, std::size_t h, long acc) -> void {
    if (h == hn.size()) {
      if (acc > best_total) {
        best_total = acc;
        best_map = cur;
      }
      return;
    }
    cur[h] = -1;
    self(self, h + 1, acc);
    for (std::size_t r = 0; r < rn.size(); ++r) {
      if (used[r]) continue;
      used[r] = true;
      cur[h] = static_cast<int>(r);
      self(self, h + 1, acc + ov[h][r]);
      used[r] = false;
    }
    cur[h] = -1;
  };
  rec(rec, 0, 0);
  FrameDer out;
  for (std::size_t m = 0; m < H; ++m) {
    if (!scored[m]) continue;
    int nh = 0, correct = 0;
    for (std::size_t h = 0; h < hn.size(); ++h) {
      if (!ha[h][m]) continue;
      ++nh;
      if (best_map[h] >= 0 && ra[static_cast<std::size_t>(best_map[h])][m]) ++correct;
    }
    const int nr = nref[m];
    out.total += nr;
    out.miss += std::max(0, nr - nh);
    out.fa += std::max(0, nh - nr);
    out.conf += std::min(nr, nh) - correct;
  }
  out.miss /= 1000.0;
  out.fa /= 1000.0;
  out.conf /= 1000.0;
  out.total /= 1000.0;
  return out;
}

// Label of each 1 ms frame inside speech: nearest base-segment center in the
// same region, judged at the frame midpoint; -1 outside speech or when the
// region has no base segment.
inline std::vector<int> frame_labels(const msdiar::MultiScaleSegmentSet& set, const std::vector<int>& labels,
                                     Millis horizon) {
  std::vector<int> out(static_cast<std::size_t>(horizon), -1);
  const auto& base = set.segments.back();
  for (std::size_t r = 0; r < set.regions.size(); ++r) {
    for (Millis m = set.regions[r].start; m < set.regions[r].end && m < horizon; ++m) {
      const double t = static_cast<double>(m) + 0.5;
      double best = 1e300;
      int lab = -1;
      for (std::size_t k = 0; k < base.size(); ++k) {
        if (base[k].region != r) continue;
        const double c = 0.5 * static_cast<double>(base[k].start + base[k].end);
        if (std::abs(c - t) < best) {
          best = std::abs(c - t);
          lab = labels[k];
        }
      }
      out[static_cast<std::size_t>(m)] = lab;
    }
  }
  return out;
}

// Number of connected components of the graph with edges where b(i,j) > 0.
template <typename Matrix>
int components(const Matrix& b) {
  const auto n = static_cast<int>(b.rows());
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  int count = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = count;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v)
        if (comp[v] < 0 && (b(u, v) > 0 || b(v, u) > 0)) {
          comp[v] = count;
          stack.push_back(v);
        }
    }
    ++count;
  }
  return count;
}

// True when two labelings induce the same partition.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [x, fx] = ab.emplace(a[i], b[i]);
    auto [y, fy] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

}  // namespace oracle
