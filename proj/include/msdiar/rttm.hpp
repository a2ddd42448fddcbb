#pragma once

// RTTM reading/writing and oracle speech activity regions.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "msdiar/common.hpp"

namespace msdiar {

struct RttmTurn {
  std::string recording_id;
  Millis onset = 0;
  Millis duration = 0;
  std::string speaker_id;

  Millis end() const { return onset + duration; }
  Interval interval() const { return {onset, onset + duration}; }
  bool operator==(const RttmTurn&) const = default;
};

// Sorted, disjoint [start, end) speech intervals.
using SpeechRegionList = std::vector<Interval>;

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace detail

inline std::vector<RttmTurn> parse_rttm(std::istream& in) {
  std::vector<RttmTurn> turns;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (fields[0].starts_with(";;")) continue;
    if (fields.size() < 8) throw ParseError("expected at least 8 fields", lineno);
    if (fields[0] != "SPEAKER")
      throw ParseError("unsupported record type '" + std::string(fields[0]) + "'", lineno);
    double onset = 0.0, dur = 0.0;
    if (!detail::parse_double(fields[3], onset) || !std::isfinite(onset))
      throw ParseError("bad onset '" + std::string(fields[3]) + "'", lineno);
    if (!detail::parse_double(fields[4], dur) || !std::isfinite(dur))
      throw ParseError("bad duration '" + std::string(fields[4]) + "'", lineno);
    if (onset < 0.0)
      throw ValidationError("line " + std::to_string(lineno) + ": negative onset");
    if (dur <= 0.0)
      throw ValidationError("line " + std::to_string(lineno) + ": non-positive duration");
    RttmTurn t{std::string(fields[1]), to_millis(onset), to_millis(dur), std::string(fields[7])};
    if (t.duration <= 0)
      throw ValidationError("line " + std::to_string(lineno) + ": duration below 1 ms");
    turns.push_back(std::move(t));
  }
  std::stable_sort(turns.begin(), turns.end(), [](const RttmTurn& a, const RttmTurn& b) {
    if (a.recording_id != b.recording_id) return a.recording_id < b.recording_id;
    return a.onset < b.onset;
  });
  return turns;
}

inline std::vector<RttmTurn> parse_rttm(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_rttm(in);
}

inline std::string format_rttm_line(const RttmTurn& t) {
  char buf[64];
  std::string line = "SPEAKER " + t.recording_id + " 1 ";
  std::snprintf(buf, sizeof(buf), "%.3f %.3f", to_seconds(t.onset), to_seconds(t.duration));
  line += buf;
  line += " <NA> <NA> " + t.speaker_id + " <NA> <NA>\n";
  return line;
}

inline std::string emit_rttm(const std::vector<RttmTurn>& turns) {
  std::string out;
  for (const auto& t : turns) out += format_rttm_line(t);
  return out;
}

// Groups turns by recording id, preserving order.
inline std::map<std::string, std::vector<RttmTurn>> by_recording(const std::vector<RttmTurn>& turns) {
  std::map<std::string, std::vector<RttmTurn>> out;
  for (const auto& t : turns) out[t.recording_id].push_back(t);
  return out;
}

// Lexicographically ordered distinct speaker ids.
inline std::vector<std::string> speaker_list(const std::vector<RttmTurn>& turns) {
  std::set<std::string> ids;
  for (const auto& t : turns) ids.insert(t.speaker_id);
  return {ids.begin(), ids.end()};
}

inline SpeechRegionList merge_intervals(std::vector<Interval> iv) {
  std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  SpeechRegionList out;
  for (const auto& x : iv) {
    if (x.end <= x.start) continue;
    if (!out.empty() && x.start <= out.back().end)
      out.back().end = std::max(out.back().end, x.end);
    else
      out.push_back(x);
  }
  return out;
}

// Oracle speech activity: union of all reference turns.
inline SpeechRegionList oracle_sad(const std::vector<RttmTurn>& turns) {
  std::vector<Interval> iv;
  iv.reserve(turns.size());
  for (const auto& t : turns) iv.push_back(t.interval());
  return merge_intervals(std::move(iv));
}

inline Millis total_length(const SpeechRegionList& regions) {
  Millis s = 0;
  for (const auto& r : regions) s += r.length();
  return s;
}

}  // namespace msdiar
