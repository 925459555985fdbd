#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "nhld/errors.hpp"

namespace nhld {

// Extended real line with the conventions used throughout:
//   (+-inf) * 0 = 0   and   log 0 = -inf.
// The multiply convention differs from IEEE (inf*0 = NaN), so arithmetic on
// ExtReal goes through explicit operators rather than raw doubles.
struct ExtReal {
  double v = 0.0;

  ExtReal() = default;
  explicit constexpr ExtReal(double x) : v(x) {}

  static constexpr ExtReal inf() { return ExtReal(std::numeric_limits<double>::infinity()); }
  static constexpr ExtReal neg_inf() { return ExtReal(-std::numeric_limits<double>::infinity()); }

  bool finite() const { return std::isfinite(v); }
  bool is_pos_inf() const { return std::isinf(v) && v > 0; }
  bool is_neg_inf() const { return std::isinf(v) && v < 0; }

  friend bool operator==(ExtReal a, ExtReal b) { return a.v == b.v; }
  friend bool operator<(ExtReal a, ExtReal b) { return a.v < b.v; }
  friend bool operator<=(ExtReal a, ExtReal b) { return a.v <= b.v; }
  friend bool operator>(ExtReal a, ExtReal b) { return a.v > b.v; }
  friend bool operator>=(ExtReal a, ExtReal b) { return a.v >= b.v; }
};

inline ExtReal ext_mul(ExtReal a, ExtReal b) {
  if ((std::isinf(a.v) && b.v == 0.0) || (std::isinf(b.v) && a.v == 0.0)) return ExtReal(0.0);
  return ExtReal(a.v * b.v);
}

// Addition is total except for inf + (-inf), which never arises in valid
// flows (costs live in [-inf, 0], rates in [0, +inf]) and is rejected.
inline ExtReal ext_add(ExtReal a, ExtReal b) {
  if ((a.is_pos_inf() && b.is_neg_inf()) || (a.is_neg_inf() && b.is_pos_inf()))
    throw error(errc::invalid_spec, "extended addition of +inf and -inf");
  return ExtReal(a.v + b.v);
}

// A probability held as its natural logarithm; -inf encodes probability 0.
struct LogProb {
  double lg = -std::numeric_limits<double>::infinity();

  LogProb() = default;
  explicit LogProb(double log_value) : lg(log_value) {
    if (lg > 1e-9) throw error(errc::invalid_spec, "log-probability above 0");
    if (lg > 0.0) lg = 0.0;  // rounding slack
  }
  static LogProb from_prob(double p) {
    if (p < 0.0 || p > 1.0 + 1e-12) throw error(errc::invalid_spec, "probability outside [0,1]");
    return LogProb(p <= 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::min(p, 1.0)));
  }
  double value() const { return lg; }
  double prob() const { return std::exp(lg); }
};

inline constexpr double neg_infinity() { return -std::numeric_limits<double>::infinity(); }

// log(e^a + e^b), stable under large negative magnitudes.
inline double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// log sum_i e^{x_i} via a max shift; empty input -> -inf.
inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;  // empty, all -inf, or a +inf slipped in
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_sum_exp(const std::vector<double>& xs) {
  return log_sum_exp(std::span<const double>(xs.data(), xs.size()));
}

inline LogProb log_sum_exp(const std::vector<LogProb>& xs) {
  std::vector<double> raw;
  raw.reserve(xs.size());
  for (const auto& x : xs) raw.push_back(x.value());
  return LogProb(std::min(0.0, log_sum_exp(raw)));
}

}  // namespace nhld
