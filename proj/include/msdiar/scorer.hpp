#pragma once

// Base-segment labels to a speaker timeline, and diarization error rate.

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "msdiar/common.hpp"
#include "msdiar/rttm.hpp"
#include "msdiar/segmenter.hpp"

namespace msdiar {

struct TimelineSpan {
  Millis start = 0;
  Millis end = 0;
  int cluster = 0;
  bool operator==(const TimelineSpan&) const = default;
};

struct DiarizationHypothesis {
  std::vector<int> labels;           // per base segment
  std::vector<TimelineSpan> spans;   // disjoint, sorted
};

// Every point of a speech region takes the label of the base segment with
// the nearest center (ties to the earlier one). A 1 ms frame [t, t+1) is
// judged at t + 0.5, so boundaries land on whole milliseconds.
inline DiarizationHypothesis labels_to_timeline(const MultiScaleSegmentSet& set, const std::vector<int>& labels) {
  const auto& base = set.base();
  if (labels.size() != base.size())
    throw ValidationError("labels_to_timeline: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(base.size()) + " base segments");
  DiarizationHypothesis hyp;
  hyp.labels = labels;
  std::size_t k = 0;
  for (std::size_t r = 0; r < set.regions.size(); ++r) {
    const std::size_t first = k;
    while (k < base.size() && base[k].region == r) ++k;
    if (first == k) continue;
    Millis at = set.regions[r].start;
    for (std::size_t s = first; s < k; ++s) {
      Millis until = set.regions[r].end;
      if (s + 1 < k) {
        // first frame t with t + 0.5 strictly past the midpoint of the two centers:
        // 4t + 2 > c2(s) + c2(s+1)
        const Millis sum = base[s].center2() + base[s + 1].center2();
        Millis q = (sum - 2) / 4;
        if ((sum - 2) % 4 != 0 && sum - 2 < 0) --q;
        until = std::clamp<Millis>(q + 1, at, set.regions[r].end);
      }
      if (until > at) {
        if (!hyp.spans.empty() && hyp.spans.back().end == at && hyp.spans.back().cluster == labels[s])
          hyp.spans.back().end = until;
        else
          hyp.spans.push_back({at, until, labels[s]});
      }
      at = std::max(at, until);
    }
  }
  return hyp;
}

inline std::vector<RttmTurn> hypothesis_to_rttm(const DiarizationHypothesis& hyp, const std::string& recording_id) {
  std::vector<RttmTurn> out;
  for (const auto& s : hyp.spans)
    out.push_back({recording_id, s.start, s.end - s.start, "spk" + std::to_string(s.cluster)});
  return out;
}

// Any RTTM (possibly with overlapping speakers) as scoring input.
struct LabelledInterval {
  Interval span;
  std::string label;
};

inline std::vector<LabelledInterval> as_intervals(const std::vector<RttmTurn>& turns) {
  std::vector<LabelledInterval> out;
  for (const auto& t : turns) out.push_back({t.interval(), t.speaker_id});
  return out;
}

inline std::vector<LabelledInterval> as_intervals(const DiarizationHypothesis& hyp) {
  std::vector<LabelledInterval> out;
  for (const auto& s : hyp.spans) out.push_back({{s.start, s.end}, "spk" + std::to_string(s.cluster)});
  return out;
}

// ---------------------------------------------------------------------------
// Hungarian method (rectangular, maximizing total weight).

// assignment[r] = column assigned to row r, or -1.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  double maxw = 0.0;
  for (const auto& r : weight)
    for (double w : r) maxw = std::max(maxw, w);
  // cost[i][j] on a 1-based square matrix
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, maxw));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) cost[i + 1][j + 1] = maxw - weight[i][j];

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] <= rows && j <= cols) out[p[j] - 1] = static_cast<int>(j - 1);
  return out;
}

// ---------------------------------------------------------------------------
// DER

struct DerConfig {
  Millis collar = 250;
  bool score_overlap = false;
};

struct DerReport {
  double miss = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  double total_speech = 0.0;
  double collar = 0.0;

  double der() const { return total_speech > 0.0 ? (miss + false_alarm + confusion) / total_speech : 0.0; }

  DerReport& operator+=(const DerReport& o) {
    miss += o.miss;
    false_alarm += o.false_alarm;
    confusion += o.confusion;
    total_speech += o.total_speech;
    return *this;
  }
};

namespace detail {

struct Elementary {
  Interval span;
  bool scored = true;
  std::vector<int> ref;  // speaker indices active
  std::vector<int> hyp;  // cluster indices active
};

inline std::vector<int> index_labels(const std::vector<LabelledInterval>& items, std::vector<std::string>& names) {
  std::map<std::string, int> ids;
  std::vector<int> out;
  for (const auto& it : items) {
    auto [pos, fresh] = ids.emplace(it.label, static_cast<int>(ids.size()));
    out.push_back(pos->second);
  }
  names.assign(ids.size(), {});
  for (const auto& [name, id] : ids) names[static_cast<std::size_t>(id)] = name;
  return out;
}

// Splits the timeline at every boundary and records who is active where.
inline std::vector<Elementary> elementary_segments(const std::vector<LabelledInterval>& ref,
                                                   const std::vector<int>& ref_id,
                                                   const std::vector<LabelledInterval>& hyp,
                                                   const std::vector<int>& hyp_id, const DerConfig& cfg) {
  std::vector<Interval> no_score;
  std::set<Millis> cuts;
  for (const auto& r : ref) {
    cuts.insert(r.span.start);
    cuts.insert(r.span.end);
    if (cfg.collar > 0) {
      no_score.push_back({std::max<Millis>(0, r.span.start - cfg.collar), r.span.start + cfg.collar});
      no_score.push_back({std::max<Millis>(0, r.span.end - cfg.collar), r.span.end + cfg.collar});
    }
  }
  for (const auto& h : hyp) {
    cuts.insert(h.span.start);
    cuts.insert(h.span.end);
  }
  no_score = merge_intervals(std::move(no_score));
  for (const auto& z : no_score) {
    cuts.insert(z.start);
    cuts.insert(z.end);
  }
  std::vector<Elementary> out;
  if (cuts.size() < 2) return out;
  for (auto it = cuts.begin(), nx = std::next(cuts.begin()); nx != cuts.end(); ++it, ++nx) {
    Elementary e;
    e.span = {*it, *nx};
    out.push_back(std::move(e));
  }
  auto mark = [&out](const Interval& span, auto&& fn) {
    auto lo = std::lower_bound(out.begin(), out.end(), span.start,
                               [](const Elementary& e, Millis t) { return e.span.start < t; });
    for (; lo != out.end() && lo->span.start < span.end; ++lo) fn(*lo);
  };
  for (std::size_t k = 0; k < ref.size(); ++k)
    mark(ref[k].span, [&](Elementary& e) { e.ref.push_back(ref_id[k]); });
  for (std::size_t k = 0; k < hyp.size(); ++k)
    mark(hyp[k].span, [&](Elementary& e) { e.hyp.push_back(hyp_id[k]); });
  for (const auto& z : no_score) mark(z, [](Elementary& e) { e.scored = false; });
  for (auto& e : out) {
    std::sort(e.ref.begin(), e.ref.end());
    e.ref.erase(std::unique(e.ref.begin(), e.ref.end()), e.ref.end());
    std::sort(e.hyp.begin(), e.hyp.end());
    e.hyp.erase(std::unique(e.hyp.begin(), e.hyp.end()), e.hyp.end());
    if (!cfg.score_overlap && e.ref.size() > 1) e.scored = false;
  }
  return out;
}

}  // namespace detail

struct DerResult {
  DerReport report;
  std::map<std::string, std::string> mapping;  // hypothesis label -> reference speaker
};

inline DerResult der_detailed(const std::vector<LabelledInterval>& ref, const std::vector<LabelledInterval>& hyp,
                              const DerConfig& cfg = {}) {
  if (ref.empty()) throw ValidationError("der: empty reference");
  if (cfg.collar < 0) throw ValidationError("der: collar must be >= 0");
  std::vector<std::string> ref_names, hyp_names;
  const auto ref_id = detail::index_labels(ref, ref_names);
  const auto hyp_id = detail::index_labels(hyp, hyp_names);
  const auto segs = detail::elementary_segments(ref, ref_id, hyp, hyp_id, cfg);

  std::vector<std::vector<double>> ov(ref_names.size(), std::vector<double>(hyp_names.size(), 0.0));
  for (const auto& e : segs) {
    if (!e.scored) continue;
    for (int r : e.ref)
      for (int h : e.hyp) ov[static_cast<std::size_t>(r)][static_cast<std::size_t>(h)] += static_cast<double>(e.span.length());
  }
  const auto assign = max_weight_assignment(ov);
  std::vector<int> hyp_to_ref(hyp_names.size(), -1);
  DerResult res;
  for (std::size_t r = 0; r < assign.size(); ++r)
    if (assign[r] >= 0 && ov[r][static_cast<std::size_t>(assign[r])] > 0.0) {
      hyp_to_ref[static_cast<std::size_t>(assign[r])] = static_cast<int>(r);
      res.mapping[hyp_names[static_cast<std::size_t>(assign[r])]] = ref_names[r];
    }

  Millis miss = 0, fa = 0, conf = 0, total = 0;
  for (const auto& e : segs) {
    if (!e.scored) continue;
    const Millis len = e.span.length();
    const auto nref = static_cast<Millis>(e.ref.size());
    const auto nhyp = static_cast<Millis>(e.hyp.size());
    Millis correct = 0;
    for (int h : e.hyp) {
      const int r = hyp_to_ref[static_cast<std::size_t>(h)];
      if (r >= 0 && std::binary_search(e.ref.begin(), e.ref.end(), r)) ++correct;
    }
    total += nref * len;
    miss += std::max<Millis>(0, nref - nhyp) * len;
    fa += std::max<Millis>(0, nhyp - nref) * len;
    conf += (std::min(nref, nhyp) - correct) * len;
  }
  res.report.miss = to_seconds(miss);
  res.report.false_alarm = to_seconds(fa);
  res.report.confusion = to_seconds(conf);
  res.report.total_speech = to_seconds(total);
  res.report.collar = to_seconds(cfg.collar);
  return res;
}

inline DerReport der(const std::vector<RttmTurn>& reference, const DiarizationHypothesis& hyp,
                     const DerConfig& cfg = {}) {
  return der_detailed(as_intervals(reference), as_intervals(hyp), cfg).report;
}

inline DerReport der(const std::vector<RttmTurn>& reference, const std::vector<RttmTurn>& hypothesis,
                     const DerConfig& cfg = {}) {
  if (!reference.empty() && !hypothesis.empty()) {
    for (const auto& t : hypothesis)
      if (t.recording_id != reference.front().recording_id)
        throw ValidationError("der: recording id mismatch ('" + t.recording_id + "' vs '" +
                              reference.front().recording_id + "')");
  }
  return der_detailed(as_intervals(reference), as_intervals(hypothesis), cfg).report;
}

inline std::string format_der_header() { return "SESSION MISS FA CONF TOTAL DER\n"; }

inline std::string format_der_line(const std::string& session, const DerReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s %.3f %.3f %.3f %.3f %.2f\n", session.c_str(), r.miss, r.false_alarm,
                r.confusion, r.total_speech, 100.0 * r.der());
  return buf;
}

}  // namespace msdiar
