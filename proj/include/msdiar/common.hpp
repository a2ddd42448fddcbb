#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

namespace msdiar {

// All interval arithmetic runs on integer milliseconds.
using Millis = std::int64_t;

inline Millis to_millis(double seconds) {
  return static_cast<Millis>(std::llround(seconds * 1000.0));
}

inline double to_seconds(Millis ms) { return static_cast<double>(ms) / 1000.0; }

struct Interval {
  Millis start = 0;
  Millis end = 0;

  Millis length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

inline Millis overlap(const Interval& a, const Interval& b) {
  const Millis lo = std::max(a.start, b.start);
  const Millis hi = std::min(a.end, b.end);
  return hi > lo ? hi - lo : 0;
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

namespace log {

using Sink = std::function<void(const std::string&)>;

inline Sink& warning_sink() {
  static Sink sink = [](const std::string& msg) {
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::clog << "WARNING: " << msg << '\n';
  };
  return sink;
}

inline void warn(const std::string& msg) {
  if (warning_sink()) warning_sink()(msg);
}

// Silences warnings for the lifetime of the guard (tests, batch tools).
class ScopedSilence {
 public:
  ScopedSilence() : saved_(warning_sink()) { warning_sink() = nullptr; }
  ~ScopedSilence() { warning_sink() = saved_; }
  ScopedSilence(const ScopedSilence&) = delete;
  ScopedSilence& operator=(const ScopedSilence&) = delete;

 private:
  Sink saved_;
};

}  // namespace log

}  // namespace msdiar
