#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nhld/chain.hpp"
#include "nhld/errors.hpp"
#include "nhld/numerics.hpp"

namespace nhld {

struct Fixture {
  std::string name;
  Schedule schedule;
  Observable f;
  // expected composite rate on the d = 1 line, +inf outside the finite range
  std::function<double(double)> expected_J;
  std::function<double(double)> expected_J_lower;  // only when it differs (T0-based)
};

// ---------------------------------------------------------------------------
// Nine-state geometrically cooling Metropolis chain on a double-well energy
// landscape with three local minima. The proposal is a nearest-neighbor walk
// with lazy steps at the two barrier states; the holding weights a, b are
// calibrated so the transient resting rates are exactly 1/3 and 2/3.
inline Fixture metropolis_well_fixture(CoolingSchedule cooling = CoolingSchedule::linear(1.0)) {
  const size_t r = 9;
  const double a = 2.0 * std::exp(-1.0 / 3.0) - 1.0;
  const double b = 2.0 * std::exp(-2.0 / 3.0) - 1.0;

  TransitionMatrix g(r);
  auto set = [&](int i, int j, double v) { g(i - 1, j - 1) = v; };
  set(1, 2, 1.0);
  set(2, 1, 0.5);
  set(2, 3, 0.5);
  set(3, 2, 0.5);
  set(3, 4, 0.5);
  set(4, 3, (1.0 - a) / 2.0);
  set(4, 4, a);
  set(4, 5, (1.0 - a) / 2.0);
  set(5, 4, (1.0 - b) / 2.0);
  set(5, 5, b);
  set(5, 6, (1.0 - b) / 2.0);
  set(6, 5, 0.5);  // completes row 6 of the nearest-neighbor walk
  set(6, 7, 0.5);
  set(7, 6, 0.5);
  set(7, 8, 0.5);
  set(8, 7, 0.5);
  set(8, 9, 0.5);
  set(9, 8, 1.0);
  g.validate("well-fixture proposal");

  // Energy profile over states 1..9; minima at 2, 6, 8, barriers at 3 and 7.
  std::vector<double> H{4, 3, 5, 2, 1, 0, 1, -1, 0};

  MetropolisSpec spec{g, H, cooling};
  std::vector<double> pi(r, 1.0 / r);

  Fixture fx;
  fx.name = "s3-metropolis";
  fx.schedule = metropolis_schedule(spec, pi);
  fx.f = Observable::scalar(H);
  fx.expected_J = [](double z) {
    if (z < -1.0 || z > 3.0) return std::numeric_limits<double>::infinity();
    if (z <= -2.0 / 11.0) return 4.0 * z / 9.0 + 4.0 / 9.0;
    if (z <= 0.0) return -2.0 * z;
    if (z <= 2.0) return z / 6.0;
    if (z <= 12.0 / 5.0) return 5.0 * z / 3.0 - 3.0;
    return -5.0 * z / 3.0 + 5.0;
  };
  return fx;
}

// ---------------------------------------------------------------------------
// Two-state chain alternating between matrices whose switch mass decays as
// 2^-n (even steps) and 3^-n (odd steps). The limsup/liminf exponents differ,
// yet the averages still satisfy an LDP with rate z log 2 on [0,1).
inline Fixture alternating_fixture() {
  Fixture fx;
  fx.name = "s12-1";
  Schedule s;
  s.family = ScheduleFamily::AlternatingTwoState;
  s.r = 2;
  s.limit = TransitionMatrix(2, {1.0, 0.0, 0.0, 1.0});
  s.pi = {0.5, 0.5};
  s.params = AlternatingParams{};
  AnalyticRates ar;
  ar.blocks = 2;
  ar.v.assign(4, ExtReal::neg_inf());
  ar.tau.assign(4, ExtReal::neg_inf());
  ar.v[0 * 2 + 1] = ExtReal(-std::log(2.0));
  ar.tau[0 * 2 + 1] = ExtReal(-std::log(3.0));
  ar.entrywise_limits = false;  // the per-entry exponent oscillates by parity
  s.rates = ar;
  s.validate();
  fx.schedule = s;
  fx.f = Observable::scalar({1.0, 0.0});
  fx.expected_J = [](double z) {
    if (z < 0.0 || z > 1.0) return std::numeric_limits<double>::infinity();
    if (z == 1.0) return 0.0;
    return z * std::log(2.0);
  };
  return fx;
}

// ---------------------------------------------------------------------------
// Same two matrices arranged in runs between the fast-diverging boundaries
// g(k) = 2^(k^2), so the optimal switch regime depends on the horizon and the
// upper/lower bounds z log 2 and z log 3 are both attained along
// subsequences.
inline Fixture block_alternating_fixture() {
  Fixture fx;
  fx.name = "s12-2";
  Schedule s;
  s.family = ScheduleFamily::BlockAlternating;
  s.r = 2;
  s.limit = TransitionMatrix(2, {1.0, 0.0, 0.0, 1.0});
  s.pi = {0.5, 0.5};
  BlockAlternatingParams bp;
  bp.boundaries = BlockAlternatingParams::default_boundaries();
  s.params = bp;
  AnalyticRates ar;
  ar.blocks = 2;
  ar.v.assign(4, ExtReal::neg_inf());
  ar.tau.assign(4, ExtReal::neg_inf());
  // declared for the uncapped family: runs of both bases recur unboundedly
  ar.v[0 * 2 + 1] = ExtReal(-std::log(2.0));
  ar.tau[0 * 2 + 1] = ExtReal(-std::log(3.0));
  ar.entrywise_limits = false;
  s.rates = ar;
  s.validate();
  fx.schedule = s;
  fx.f = Observable::scalar({1.0, 0.0});
  fx.expected_J = [](double z) {  // upper-cost curve
    if (z < 0.0 || z > 1.0) return std::numeric_limits<double>::infinity();
    if (z == 1.0) return 0.0;
    return z * std::log(2.0);
  };
  fx.expected_J_lower = [](double z) {  // lower-cost curve
    if (z < 0.0 || z > 1.0) return std::numeric_limits<double>::infinity();
    if (z == 1.0) return 0.0;
    return z * std::log(3.0);
  };
  return fx;
}

// ---------------------------------------------------------------------------
// Nine-state chain with a periodic middle block. Three closed classes in the
// limit; the middle one is a deterministic 3-cycle whose exit opportunities
// rotate with the step index, so paths entering from the first class are
// phase-locked away from the fast exits except at sparse exceptional times.
struct PeriodicCycleParams {
  double A = -1.0;        // exponent of the fast class-2 -> class-3 exit
  double eps = 0.1;       // the slow exit decays at 2A + eps < A
  int max_exceptional = 5;  // exceptional steps 3^(2^j) + 1 for j = 1..max
};

namespace detail {

inline std::vector<uint64_t> exceptional_steps(int max_j) {
  std::vector<uint64_t> out;
  uint64_t x = 9;  // 3^(2^1)
  for (int j = 1; j <= max_j; ++j) {
    out.push_back(x + 1);
    if (x > 3000000000ull) break;  // next square would overflow
    x *= x;
  }
  return out;
}

// Raw (unnormalized) pattern for step n, plus exact log entries. States
// 0..2 / 3..5 / 6..8; the middle cycle is 3->4->5->3.
struct PeriodicPattern {
  int entry_row, entry_col;      // class-1 -> class-2, weight t12(n)
  int fast_row, fast_col;        // class-2 -> class-3, weight e^{An}
  int slow_row, slow_col;        // class-2 -> class-3, weight e^{(2A+eps)n}
};

inline PeriodicPattern periodic_pattern(uint64_t n, const std::vector<uint64_t>& exceptional) {
  for (uint64_t e : exceptional)
    if (n == e) return {1, 5, 3, 8, 4, 8};
  switch (n % 3) {
    case 1: return {1, 5, 3, 8, 5, 8};
    case 2: return {2, 3, 4, 6, 3, 6};
    default: return {0, 4, 5, 7, 4, 7};
  }
}

}  // namespace detail

inline Fixture periodic_cycle_fixture(PeriodicCycleParams pp = {}) {
  if (!(pp.A < 0.0) || !(pp.eps > 0.0) || !(2.0 * pp.A + pp.eps < pp.A))
    throw error(errc::invalid_spec, "periodic fixture needs A < 0 and 2A + eps < A");
  const size_t r = 9;
  std::vector<uint64_t> exceptional = detail::exceptional_steps(pp.max_exceptional);

  auto log_t12 = [](uint64_t n) { return -std::log(std::log(static_cast<double>(n) + 2.0)); };
  double A = pp.A, slow = 2.0 * pp.A + pp.eps;

  auto raw_logs = [=](uint64_t n) {
    auto pat = detail::periodic_pattern(n, exceptional);
    std::vector<double> lm(r * r, neg_infinity());
    double third = std::log(1.0 / 3.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        lm[i * 9 + j] = third;
        lm[(i + 6) * 9 + (j + 6)] = third;
      }
    lm[3 * 9 + 4] = 0.0;
    lm[4 * 9 + 5] = 0.0;
    lm[5 * 9 + 3] = 0.0;
    lm[pat.entry_row * 9 + pat.entry_col] = log_t12(n);
    lm[pat.fast_row * 9 + pat.fast_col] = A * static_cast<double>(n);
    lm[pat.slow_row * 9 + pat.slow_col] = slow * static_cast<double>(n);
    return lm;
  };

  // normalization: divide each raw row by its sum (the diagonal scaling of
  // the construction); done on logs so vanished weights keep exact exponents
  auto normalized_logs = [raw_logs, r](uint64_t n) {
    std::vector<double> lm = raw_logs(n);
    for (size_t i = 0; i < r; ++i) {
      double row_sum = 0.0;
      for (size_t j = 0; j < r; ++j)
        if (lm[i * r + j] != neg_infinity()) row_sum += std::exp(lm[i * r + j]);
      double corr = std::log(row_sum);
      for (size_t j = 0; j < r; ++j)
        if (lm[i * r + j] != neg_infinity()) lm[i * r + j] -= corr;
    }
    return lm;
  };

  CustomParams cp;
  cp.log_matrix = normalized_logs;
  cp.matrix = [normalized_logs, r](uint64_t n) {
    std::vector<double> lm = normalized_logs(n);
    TransitionMatrix m(r);
    for (size_t i = 0; i < r * r; ++i)
      if (lm[i] != neg_infinity()) m.p[i] = std::exp(lm[i]);
    return m;
  };

  TransitionMatrix limit(r);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      limit(i, j) = 1.0 / 3.0;
      limit(i + 6, j + 6) = 1.0 / 3.0;
    }
  limit(3, 4) = 1.0;
  limit(4, 5) = 1.0;
  limit(5, 3) = 1.0;

  Schedule s;
  s.family = ScheduleFamily::Custom;
  s.r = r;
  s.limit = limit;
  s.pi.assign(r, 1.0 / r);
  s.params = std::move(cp);
  AnalyticRates ar;
  ar.blocks = 3;
  ar.v.assign(9, ExtReal::neg_inf());
  ar.tau.assign(9, ExtReal::neg_inf());
  ar.v[0 * 3 + 1] = ar.tau[0 * 3 + 1] = ExtReal(0.0);
  ar.v[1 * 3 + 2] = ar.tau[1 * 3 + 2] = ExtReal(pp.A);
  ar.entrywise_limits = false;  // per-entry exponents rotate with n mod 3
  s.rates = ar;
  s.validate();

  Fixture fx;
  fx.name = "s12-3";
  fx.schedule = s;
  fx.f = Observable::scalar({1, 1, 1, 2, 2, 2, 3, 3, 3});
  // lower-cost curve on [2+eps, 2+2eps] per the T0-based formula; the actual
  // decay violates it, which is the point of the fixture
  double Aa = pp.A;
  fx.expected_J_lower = [Aa](double z) {
    if (z < 1.0 || z > 3.0) return std::numeric_limits<double>::infinity();
    if (z <= 2.0) return 0.0 * z;  // reachable mixes of classes 1 and 2 cost nothing
    return (3.0 - z) / 2.0 * (-Aa);
  };
  return fx;
}

inline Fixture fixture_by_name(const std::string& name) {
  if (name == "s3-metropolis") return metropolis_well_fixture();
  if (name == "s12-1") return alternating_fixture();
  if (name == "s12-2") return block_alternating_fixture();
  if (name == "s12-3") return periodic_cycle_fixture();
  throw error(errc::invalid_spec,
              "unknown fixture '" + name +
                  "' (available: s3-metropolis, s12-1, s12-2, s12-3)");
}

}  // namespace nhld
