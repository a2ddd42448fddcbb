#pragma once

// Per-scale embedding archives: "dim L scale_id" header followed by L rows.

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "msdiar/common.hpp"
#include "msdiar/rttm.hpp"

namespace msdiar {

// Row-major so that row(i) is contiguous; float because archives carry
// 9 significant digits, which round-trips single precision exactly.
using EmbeddingRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EmbeddingMatrix {
  int scale_id = 0;
  EmbeddingRows rows;

  Eigen::Index dim() const { return rows.cols(); }
  Eigen::Index size() const { return rows.rows(); }
};

inline EmbeddingMatrix parse_embeddings(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!detail::split_ws(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw FormatError("embedding archive: missing header");
  auto head = detail::split_ws(line);
  long long hdr[3] = {0, 0, 0};
  if (head.size() != 3) throw ParseError("header must be 'dim L scale_id'", lineno);
  for (int k = 0; k < 3; ++k) {
    auto [p, ec] = std::from_chars(head[k].data(), head[k].data() + head[k].size(), hdr[k]);
    if (ec != std::errc() || p != head[k].data() + head[k].size())
      throw ParseError("header must be 'dim L scale_id'", lineno);
  }
  if (hdr[0] <= 0 || hdr[1] < 0 || hdr[2] < 0) throw FormatError("embedding archive: invalid header values");

  EmbeddingMatrix m;
  m.scale_id = static_cast<int>(hdr[2]);
  m.rows.resize(hdr[1], hdr[0]);
  for (long long r = 0; r < hdr[1]; ++r) {
    if (!next_line())
      throw FormatError("embedding archive: expected " + std::to_string(hdr[1]) + " rows, got " +
                        std::to_string(r));
    auto toks = detail::split_ws(line);
    if (static_cast<long long>(toks.size()) != hdr[0])
      throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(hdr[0]) +
                        " values, got " + std::to_string(toks.size()));
    for (long long c = 0; c < hdr[0]; ++c) {
      double v = 0.0;
      if (!detail::parse_double(toks[c], v) || !std::isfinite(v))
        throw FormatError("line " + std::to_string(lineno) + ": non-finite or malformed value '" +
                          std::string(toks[c]) + "'");
      m.rows(r, c) = static_cast<float>(v);
    }
  }
  if (next_line()) throw FormatError("embedding archive: trailing rows beyond L");
  return m;
}

inline EmbeddingMatrix read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding archive: " + path);
  try {
    return parse_embeddings(in);
  } catch (const Error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline std::string format_embeddings(const EmbeddingMatrix& m) {
  std::string out = std::to_string(m.dim()) + " " + std::to_string(m.size()) + " " +
                    std::to_string(m.scale_id) + "\n";
  char buf[32];
  for (Eigen::Index r = 0; r < m.size(); ++r) {
    for (Eigen::Index c = 0; c < m.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), c ? " %.9g" : "%.9g", static_cast<double>(m.rows(r, c)));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline void write_embeddings(const EmbeddingMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding archive: " + path);
  out << format_embeddings(m);
  if (!out) throw Error("write failed: " + path);
}

}  // namespace msdiar
