#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nhld/errors.hpp"
#include "nhld/numerics.hpp"

namespace nhld {

inline constexpr double kRowSumTol = 1e-12;
// Entries below this are treated as exact zeros when building digraphs,
// avoiding phantom edges from underflow.
inline constexpr double kZeroEntry = 1e-300;

struct StateSpace {
  std::vector<std::string> labels;

  StateSpace() = default;
  explicit StateSpace(std::vector<std::string> l) : labels(std::move(l)) {
    if (labels.empty()) throw error(errc::invalid_spec, "state space must be nonempty");
    for (size_t i = 0; i < labels.size(); ++i)
      for (size_t j = i + 1; j < labels.size(); ++j)
        if (labels[i] == labels[j])
          throw error(errc::invalid_spec, "duplicate state label '" + labels[i] + "'");
  }
  static StateSpace numbered(size_t r) {
    std::vector<std::string> l(r);
    for (size_t i = 0; i < r; ++i) l[i] = std::to_string(i + 1);
    return StateSpace(std::move(l));
  }
  size_t size() const { return labels.size(); }
};

// Bounded observable f : states -> R^d, stored row-major as vals[state*d + k].
struct Observable {
  size_t dim = 1;
  size_t states = 0;
  std::vector<double> vals;

  Observable() = default;
  Observable(size_t r, size_t d, std::vector<double> v) : dim(d), states(r), vals(std::move(v)) {
    if (dim < 1) throw error(errc::invalid_spec, "observable dimension must be >= 1");
    if (vals.size() != r * d) throw error(errc::invalid_spec, "observable value table has wrong size");
    for (double x : vals)
      if (!std::isfinite(x)) throw error(errc::invalid_spec, "observable values must be finite");
  }
  static Observable scalar(std::vector<double> v) {
    size_t r = v.size();
    return Observable(r, 1, std::move(v));
  }

  double operator()(size_t state, size_t coord) const { return vals[state * dim + coord]; }

  // ||f|| = max_k max_x |f_k(x)|; the cube K is [-||f||, ||f||]^d.
  double sup_norm() const {
    double m = 0.0;
    for (double x : vals) m = std::max(m, std::abs(x));
    return m;
  }
  bool in_cube(const std::vector<double>& x, double slack = 1e-12) const {
    double m = sup_norm();
    for (double xi : x)
      if (std::abs(xi) > m + slack) return false;
    return true;
  }
};

struct TransitionMatrix {
  size_t n = 0;
  std::vector<double> p;  // row-major

  TransitionMatrix() = default;
  explicit TransitionMatrix(size_t r) : n(r), p(r * r, 0.0) {}
  TransitionMatrix(size_t r, std::vector<double> entries) : n(r), p(std::move(entries)) {
    if (p.size() != r * r) throw error(errc::invalid_spec, "matrix entry list has wrong length");
  }

  double& operator()(size_t i, size_t j) { return p[i * n + j]; }
  double operator()(size_t i, size_t j) const { return p[i * n + j]; }

  // Row index of the first failing row, or -1 when stochastic.
  int first_bad_row(double tol = kRowSumTol) const {
    for (size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (size_t j = 0; j < n; ++j) {
        double v = p[i * n + j];
        if (v < -tol || v > 1.0 + tol) return static_cast<int>(i);
        s += v;
      }
      if (std::abs(s - 1.0) > tol * std::max(1.0, s)) return static_cast<int>(i);
    }
    return -1;
  }
  void validate(const char* what = "transition matrix") const {
    int bad = first_bad_row();
    if (bad >= 0)
      throw error(errc::not_stochastic,
                  std::string(what) + ": row " + std::to_string(bad + 1) + " is not stochastic");
  }
};

// --------------------------------------------------------------------------
// Cooling schedules for the Metropolis family.

struct CoolingSchedule {
  enum class Kind { Linear, Logarithmic, Power, Tabulated };
  Kind kind = Kind::Linear;
  double c = 1.0;        // multiplier
  double exponent = 1.0; // for Power: beta_n = c * n^exponent
  std::vector<double> table;

  static CoolingSchedule linear(double c) { return {Kind::Linear, c, 1.0, {}}; }
  static CoolingSchedule logarithmic(double c) { return {Kind::Logarithmic, c, 1.0, {}}; }
  static CoolingSchedule power(double c, double p) { return {Kind::Power, c, p, {}}; }
  static CoolingSchedule tabulated(std::vector<double> t) { return {Kind::Tabulated, 0.0, 1.0, std::move(t)}; }

  double beta(uint64_t n) const {
    switch (kind) {
      case Kind::Linear: return c * static_cast<double>(n);
      case Kind::Logarithmic: return c * std::log(static_cast<double>(n));
      case Kind::Power: return c * std::pow(static_cast<double>(n), exponent);
      case Kind::Tabulated: {
        if (table.empty()) throw error(errc::out_of_range, "empty cooling table");
        size_t i = std::min<size_t>(n >= 1 ? n - 1 : 0, table.size() - 1);
        return table[i];
      }
    }
    return 0.0;
  }

  bool diverges() const {
    switch (kind) {
      case Kind::Linear: return c > 0.0;
      case Kind::Logarithmic: return c > 0.0;
      case Kind::Power: return c > 0.0 && exponent > 0.0;
      case Kind::Tabulated: return false;  // unknown beyond the table; treat as bounded
    }
    return false;
  }

  // lim beta_n / n, when the closed form pins it down.
  std::optional<ExtReal> beta_over_n_limit() const {
    switch (kind) {
      case Kind::Linear: return ExtReal(c);
      case Kind::Logarithmic: return ExtReal(0.0);
      case Kind::Power:
        if (exponent < 1.0) return ExtReal(0.0);
        if (exponent == 1.0) return ExtReal(c);
        return c > 0.0 ? ExtReal::inf() : ExtReal(0.0);
      case Kind::Tabulated: return std::nullopt;
    }
    return std::nullopt;
  }
};

struct MetropolisSpec {
  TransitionMatrix proposal;   // g, irreducible stochastic
  std::vector<double> energy;  // H
  CoolingSchedule cooling;
};

// p_n(i,j) = g(i,j) exp{-beta_n (H(j)-H(i))_+} off the diagonal; the diagonal
// absorbs the rejected mass.
inline TransitionMatrix metropolis_kernel(const MetropolisSpec& spec, uint64_t n) {
  if (n < 1) throw error(errc::invalid_spec, "metropolis kernel index must be >= 1");
  if (spec.proposal.first_bad_row() >= 0)
    throw error(errc::invalid_spec, "metropolis proposal kernel is not stochastic");
  size_t r = spec.proposal.n;
  if (spec.energy.size() != r) throw error(errc::invalid_spec, "energy table size mismatch");
  double beta = spec.cooling.beta(n);
  TransitionMatrix out(r);
  for (size_t i = 0; i < r; ++i) {
    double off = 0.0;
    for (size_t j = 0; j < r; ++j) {
      if (i == j) continue;
      double up = std::max(spec.energy[j] - spec.energy[i], 0.0);
      double v = spec.proposal(i, j) * std::exp(-beta * up);
      out(i, j) = v;
      off += v;
    }
    out(i, i) = std::max(0.0, 1.0 - off);
  }
  return out;
}

// Zero-temperature limit: moves only downhill or flat.
inline TransitionMatrix metropolis_limit(const MetropolisSpec& spec) {
  if (spec.proposal.first_bad_row() >= 0)
    throw error(errc::invalid_spec, "metropolis proposal kernel is not stochastic");
  if (!spec.cooling.diverges())
    throw error(errc::invalid_spec,
                "bounded cooling schedule: the limit would be a finite-temperature kernel");
  size_t r = spec.proposal.n;
  TransitionMatrix out(r);
  for (size_t i = 0; i < r; ++i) {
    double diag = spec.proposal(i, i);
    for (size_t j = 0; j < r; ++j) {
      if (i == j) continue;
      if (spec.energy[j] <= spec.energy[i])
        out(i, j) = spec.proposal(i, j);
      else
        diag += spec.proposal(i, j);
    }
    out(i, i) = diag;
  }
  return out;
}

// --------------------------------------------------------------------------
// Schedule families.

enum class ScheduleFamily { Constant, Tabulated, Metropolis, AlternatingTwoState, BlockAlternating, Custom };

inline const char* family_name(ScheduleFamily f) {
  switch (f) {
    case ScheduleFamily::Constant: return "constant";
    case ScheduleFamily::Tabulated: return "tabulated";
    case ScheduleFamily::Metropolis: return "metropolis";
    case ScheduleFamily::AlternatingTwoState: return "alternating";
    case ScheduleFamily::BlockAlternating: return "block-alternating";
    case ScheduleFamily::Custom: return "custom";
  }
  return "?";
}

// Analytic decay exponents attached to closed-form families: block-pair
// matrices v (limsup) and tau (liminf), indexed in canonical block order.
struct AnalyticRates {
  size_t blocks = 0;
  std::vector<ExtReal> v, tau;  // row-major blocks x blocks, diagonal unused
  // true when per state-pair limits lim (1/n) log p_n(x,y) all exist,
  // establishing LIM (and hence Assumptions A and B).
  bool entrywise_limits = false;

  ExtReal vv(size_t i, size_t j) const { return v[i * blocks + j]; }
  ExtReal tt(size_t i, size_t j) const { return tau[i * blocks + j]; }
};

struct TabulatedParams {
  std::vector<TransitionMatrix> table;  // P_1, P_2, ...
  bool has_tail = false;                // tail == limit matrix
};

struct AlternatingParams {
  // Section-type two-state family: A_n for n even, B_n for n odd, with
  // off-diagonal masses a_base^-n and b_base^-n from state 0 to 1.
  double a_base = 2.0;
  double b_base = 3.0;
};

struct BlockAlternatingParams {
  // Runs of A_i / B_i matrices between boundaries g(k) = 2^(k^2), capped at
  // the largest representable boundary; indices past the cap stay in the
  // final run. Identity up to g(2).
  double a_base = 2.0;
  double b_base = 3.0;
  std::vector<uint64_t> boundaries;  // g(1), g(2), ...

  static std::vector<uint64_t> default_boundaries() {
    std::vector<uint64_t> b;
    for (uint64_t k = 1; k * k <= 62; ++k) b.push_back(uint64_t(1) << (k * k));
    return b;
  }
};

struct CustomParams {
  std::function<TransitionMatrix(uint64_t)> matrix;
  // Optional exact log-entries; when absent, logs are taken of matrix(n).
  std::function<std::vector<double>(uint64_t)> log_matrix;
};

struct Schedule {
  ScheduleFamily family = ScheduleFamily::Constant;
  size_t r = 0;
  TransitionMatrix limit;
  std::vector<double> pi;  // initial distribution
  std::variant<std::monostate, TabulatedParams, MetropolisSpec, AlternatingParams,
               BlockAlternatingParams, CustomParams>
      params;
  std::optional<AnalyticRates> rates;

  void validate() const {
    if (r == 0) throw error(errc::invalid_spec, "empty schedule");
    limit.validate("limit matrix");
    if (pi.size() != r) throw error(errc::invalid_spec, "initial distribution size mismatch");
    double s = 0.0;
    for (double x : pi) {
      if (x < -kRowSumTol) throw error(errc::invalid_spec, "negative initial probability");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw error(errc::invalid_spec, "initial distribution does not sum to 1");
  }
};

namespace detail {

inline TransitionMatrix alternating_matrix(const AlternatingParams& ap, uint64_t n) {
  double base = (n % 2 == 0) ? ap.a_base : ap.b_base;
  double q = std::exp(-static_cast<double>(n) * std::log(base));
  TransitionMatrix m(2);
  m(0, 0) = 1.0 - q;
  m(0, 1) = q;
  m(1, 0) = 0.0;
  m(1, 1) = 1.0;
  return m;
}

inline std::vector<double> alternating_log_matrix(const AlternatingParams& ap, uint64_t n) {
  double base = (n % 2 == 0) ? ap.a_base : ap.b_base;
  double lq = -static_cast<double>(n) * std::log(base);
  std::vector<double> lm(4, neg_infinity());
  lm[0 * 2 + 0] = std::log1p(-std::exp(lq));
  lm[0 * 2 + 1] = lq;
  lm[1 * 2 + 1] = 0.0;
  return lm;
}

// Which matrix the block-alternating family uses at step n:
// 0 = identity, 1 = B-run base (b_base), 2 = A-run base (a_base).
// B-runs follow even boundaries so that the first non-identity run uses
// b_base, matching the trace demonstration points.
inline int block_alternating_regime(const BlockAlternatingParams& bp, uint64_t n) {
  const auto& g = bp.boundaries;
  if (g.size() < 2 || n <= g[1]) return 0;
  size_t k = 1;  // largest index with g[k] < n
  while (k + 1 < g.size() && g[k + 1] < n) ++k;
  // run over (g[k], g[k+1]] (or unbounded past the cap)
  return (k % 2 == 1) ? 1 : 2;
}

inline TransitionMatrix block_alternating_matrix(const BlockAlternatingParams& bp, uint64_t n) {
  int reg = block_alternating_regime(bp, n);
  if (reg == 0) {
    TransitionMatrix m(2);
    m(0, 0) = m(1, 1) = 1.0;
    return m;
  }
  double base = reg == 1 ? bp.b_base : bp.a_base;
  double q = std::exp(-static_cast<double>(n) * std::log(base));
  TransitionMatrix m(2);
  m(0, 0) = 1.0 - q;
  m(0, 1) = q;
  m(1, 1) = 1.0;
  return m;
}

inline std::vector<double> block_alternating_log_matrix(const BlockAlternatingParams& bp, uint64_t n) {
  int reg = block_alternating_regime(bp, n);
  std::vector<double> lm(4, neg_infinity());
  lm[1 * 2 + 1] = 0.0;
  if (reg == 0) {
    lm[0 * 2 + 0] = 0.0;
    return lm;
  }
  double base = reg == 1 ? bp.b_base : bp.a_base;
  double lq = -static_cast<double>(n) * std::log(base);
  lm[0 * 2 + 0] = std::log1p(-std::exp(lq));
  lm[0 * 2 + 1] = lq;
  return lm;
}

inline std::vector<double> metropolis_log_matrix(const MetropolisSpec& spec, uint64_t n) {
  size_t r = spec.proposal.n;
  double beta = spec.cooling.beta(n);
  std::vector<double> lm(r * r, neg_infinity());
  TransitionMatrix lin = metropolis_kernel(spec, n);
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < r; ++j) {
      if (i == j) continue;
      double g = spec.proposal(i, j);
      if (g <= 0.0) continue;
      double up = std::max(spec.energy[j] - spec.energy[i], 0.0);
      lm[i * r + j] = std::log(g) - beta * up;  // exact even when it underflows linearly
    }
    if (lin(i, i) > 0.0) lm[i * r + i] = std::log(lin(i, i));
  }
  return lm;
}

}  // namespace detail

inline TransitionMatrix schedule_matrix(const Schedule& s, uint64_t n) {
  if (n < 1) throw error(errc::invalid_spec, "schedule index must be >= 1");
  switch (s.family) {
    case ScheduleFamily::Constant:
      return s.limit;
    case ScheduleFamily::Tabulated: {
      const auto& tp = std::get<TabulatedParams>(s.params);
      if (n <= tp.table.size()) return tp.table[n - 1];
      if (!tp.has_tail) throw error(errc::out_of_range, "tabulated schedule has no entry for n=" + std::to_string(n));
      return s.limit;
    }
    case ScheduleFamily::Metropolis:
      return metropolis_kernel(std::get<MetropolisSpec>(s.params), n);
    case ScheduleFamily::AlternatingTwoState:
      return detail::alternating_matrix(std::get<AlternatingParams>(s.params), n);
    case ScheduleFamily::BlockAlternating:
      return detail::block_alternating_matrix(std::get<BlockAlternatingParams>(s.params), n);
    case ScheduleFamily::Custom:
      return std::get<CustomParams>(s.params).matrix(n);
  }
  throw error(errc::invalid_spec, "unknown schedule family");
}

// Entrywise log p_n(x,y). Closed-form families produce exact logs even where
// the linear entries underflow; everything else takes logs of the entries.
inline std::vector<double> schedule_log_matrix(const Schedule& s, uint64_t n) {
  switch (s.family) {
    case ScheduleFamily::AlternatingTwoState:
      return detail::alternating_log_matrix(std::get<AlternatingParams>(s.params), n);
    case ScheduleFamily::BlockAlternating:
      return detail::block_alternating_log_matrix(std::get<BlockAlternatingParams>(s.params), n);
    case ScheduleFamily::Metropolis:
      return detail::metropolis_log_matrix(std::get<MetropolisSpec>(s.params), n);
    case ScheduleFamily::Custom: {
      const auto& cp = std::get<CustomParams>(s.params);
      if (cp.log_matrix) return cp.log_matrix(n);
      break;
    }
    default:
      break;
  }
  TransitionMatrix m = schedule_matrix(s, n);
  std::vector<double> lm(s.r * s.r, neg_infinity());
  for (size_t i = 0; i < s.r * s.r; ++i)
    if (m.p[i] > 0.0) lm[i] = std::log(m.p[i]);
  return lm;
}

inline Schedule constant_schedule(TransitionMatrix P, std::vector<double> pi) {
  Schedule s;
  s.family = ScheduleFamily::Constant;
  s.r = P.n;
  s.limit = std::move(P);
  s.pi = std::move(pi);
  s.validate();
  return s;
}

inline Schedule metropolis_schedule(MetropolisSpec spec, std::vector<double> pi) {
  Schedule s;
  s.family = ScheduleFamily::Metropolis;
  s.r = spec.proposal.n;
  s.limit = metropolis_limit(spec);
  s.pi = std::move(pi);
  s.params = std::move(spec);
  s.validate();
  return s;
}

}  // namespace nhld
