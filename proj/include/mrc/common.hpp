#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

// Base error type for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " at position " + std::to_string(pos)), position(pos) {}
  std::size_t position;
};

class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

class NoPathError : public Error {
 public:
  using Error::Error;
};

class UnsatisfiableError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::vector<std::string>& problems)
      : Error(join(problems)), problems(problems) {}
  std::vector<std::string> problems;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "validation failed:";
    for (const auto& p : v) out += "\n  - " + p;
    return out;
  }
};

// Half-open time interval [begin, end).
struct Interval {
  double begin = 0.0;
  double end = 0.0;

  bool empty() const { return !(begin < end); }
  bool contains(double t) const { return begin <= t && t < end; }
  bool intersects(const Interval& o) const {
    return std::max(begin, o.begin) < std::min(end, o.end);
  }
  bool operator==(const Interval&) const = default;
};

// Sorted, disjoint list of half-open intervals.
class IntervalSet {
 public:
  IntervalSet() = default;

  void add(Interval iv) {
    if (iv.empty()) return;
    std::vector<Interval> out;
    out.reserve(items_.size() + 1);
    bool placed = false;
    for (const auto& cur : items_) {
      if (cur.end < iv.begin) {
        out.push_back(cur);
      } else if (iv.end < cur.begin) {
        if (!placed) {
          out.push_back(iv);
          placed = true;
        }
        out.push_back(cur);
      } else {
        iv.begin = std::min(iv.begin, cur.begin);
        iv.end = std::max(iv.end, cur.end);
      }
    }
    if (!placed) out.push_back(iv);
    items_ = std::move(out);
  }

  bool intersects(const Interval& iv) const {
    for (const auto& cur : items_) {
      if (cur.intersects(iv)) return true;
      if (cur.begin >= iv.end) break;
    }
    return false;
  }

  bool intersects(const IntervalSet& o) const {
    std::size_t a = 0, b = 0;
    while (a < items_.size() && b < o.items_.size()) {
      if (items_[a].intersects(o.items_[b])) return true;
      if (items_[a].end <= o.items_[b].end) {
        ++a;
      } else {
        ++b;
      }
    }
    return false;
  }

  bool contains(double t) const {
    for (const auto& cur : items_)
      if (cur.contains(t)) return true;
    return false;
  }

  const std::vector<Interval>& items() const { return items_; }
  bool empty() const { return items_.empty(); }

 private:
  std::vector<Interval> items_;
};

// FNV-1a, used for content hashes of cached artifacts.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a;
}

// Absolute angular difference in [0, pi].
inline double angle_diff(double a, double b) {
  double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, 2.0 * kPi - d);
}

}  // namespace mrc
