#pragma once

// Uniform multi-scale segmentation of speech regions and the
// base-to-coarse nearest-center mapping.

#include <cstdlib>
#include <limits>
#include <vector>

#include "msdiar/common.hpp"
#include "msdiar/rttm.hpp"

namespace msdiar {

struct ScaleConfig {
  Millis window = 0;
  Millis hop = 0;
  Millis min_len = 0;

  void validate() const {
    if (window <= 0 || hop <= 0) throw ValidationError("scale window and hop must be positive");
    if (min_len <= 0 || min_len > window) throw ValidationError("scale min_len must be in (0, window]");
  }
  bool operator==(const ScaleConfig&) const = default;
};

// 1.5 s / 1.0 s / 0.5 s, ordered coarse to fine; the last one is the base scale.
inline std::vector<ScaleConfig> default_scales() {
  return {{1500, 750, 500}, {1000, 500, 250}, {500, 250, 170}};
}

struct Segment {
  int scale_id = 0;
  Millis start = 0;
  Millis end = 0;
  std::size_t region = 0;  // index into the speech region list

  Millis length() const { return end - start; }
  // Twice the center, kept integral.
  Millis center2() const { return start + end; }
  double center() const { return 0.5 * to_seconds(start + end); }
  bool operator==(const Segment&) const = default;
};

struct MultiScaleSegmentSet {
  std::vector<ScaleConfig> scales;              // coarse -> fine
  SpeechRegionList regions;
  std::vector<std::vector<Segment>> segments;   // [scale][index]
  std::vector<std::vector<std::size_t>> map;    // [base index][scale] -> segment index

  std::size_t num_scales() const { return scales.size(); }
  std::size_t base_scale() const { return scales.size() - 1; }
  const std::vector<Segment>& base() const { return segments.back(); }
  std::size_t num_base() const { return segments.back().size(); }
};

inline std::vector<Segment> segment_region(const Interval& region, const ScaleConfig& cfg,
                                           int scale_id = 0, std::size_t region_index = 0) {
  cfg.validate();
  std::vector<Segment> out;
  if (region.length() <= 0) return out;
  for (Millis s = region.start; s < region.end; s += cfg.hop) {
    const Millis e = std::min(s + cfg.window, region.end);
    if (e - s < cfg.min_len) break;  // every later start is shorter still
    out.push_back({scale_id, s, e, region_index});
  }
  return out;
}

// Index of the segment in `pool[first, last)` whose center is closest to
// `center2`; ties go to the earlier segment.
inline std::size_t nearest_center(const std::vector<Segment>& pool, std::size_t first, std::size_t last,
                                  Millis center2) {
  std::size_t best = first;
  Millis best_d = std::numeric_limits<Millis>::max();
  for (std::size_t k = first; k < last; ++k) {
    const Millis d = std::llabs(pool[k].center2() - center2);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

inline MultiScaleSegmentSet build_multiscale(const SpeechRegionList& regions,
                                             const std::vector<ScaleConfig>& scales) {
  if (scales.empty()) throw ValidationError("at least one scale is required");
  MultiScaleSegmentSet set;
  set.scales = scales;
  set.regions = regions;
  set.segments.resize(scales.size());
  // [scale][region] -> [first, last) range of segment indices
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> ranges(scales.size());
  for (std::size_t s = 0; s < scales.size(); ++s) {
    for (std::size_t r = 0; r < regions.size(); ++r) {
      const std::size_t first = set.segments[s].size();
      auto segs = segment_region(regions[r], scales[s], static_cast<int>(s), r);
      set.segments[s].insert(set.segments[s].end(), segs.begin(), segs.end());
      ranges[s].emplace_back(first, set.segments[s].size());
    }
  }
  const std::size_t base = scales.size() - 1;
  if (set.segments[base].empty()) throw ValidationError("degenerate session: no base-scale segments");
  for (std::size_t s = 0; s < base; ++s)
    if (set.segments[s].empty())
      throw ValidationError("degenerate session: scale " + std::to_string(s) + " has no segments");

  set.map.assign(set.segments[base].size(), std::vector<std::size_t>(scales.size(), 0));
  for (std::size_t b = 0; b < set.segments[base].size(); ++b) {
    const Segment& seg = set.segments[base][b];
    set.map[b][base] = b;
    for (std::size_t s = 0; s < base; ++s) {
      auto [first, last] = ranges[s][seg.region];
      // A region too short for this scale's min_len has no local candidate.
      if (first == last) {
        first = 0;
        last = set.segments[s].size();
      }
      set.map[b][s] = nearest_center(set.segments[s], first, last, seg.center2());
    }
  }
  return set;
}

}  // namespace msdiar
