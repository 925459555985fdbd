#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nhld/chain.hpp"
#include "nhld/decomposition.hpp"
#include "nhld/errors.hpp"
#include "nhld/numerics.hpp"

namespace nhld {

// Square matrix of extended nonpositive routing costs over blocks; the
// diagonal is unused.
struct CostMatrix {
  size_t blocks = 0;
  std::vector<ExtReal> u;

  explicit CostMatrix(size_t b = 0) : blocks(b), u(b * b, ExtReal(0.0)) {}
  ExtReal& operator()(size_t i, size_t j) { return u[i * blocks + j]; }
  ExtReal operator()(size_t i, size_t j) const { return u[i * blocks + j]; }

  void validate() const {
    for (const auto& e : u)
      if (e.v > 0.0) throw error(errc::invalid_spec, "routing costs must lie in [-inf, 0]");
  }
};

enum class RateProvenance { Analytic, Estimated };

// v(i,j) = limsup (1/n) log t(n,(i,j)) and tau = liminf, per block pair.
struct RatePair {
  CostMatrix v, tau;
  RateProvenance provenance = RateProvenance::Estimated;
  std::vector<double> stderr_diag;  // least-squares slope standard error per pair (estimated only)
  bool entrywise_limits = false;    // per state-pair limits exist (establishes LIM)
};

// t(n,(i,j)): largest one-step probability from block i to block j at time n.
inline double connection_weight(const Schedule& s, const CanonicalDecomposition& dec, uint64_t n,
                                int bi, int bj) {
  if (bi == bj) throw error(errc::invalid_spec, "connection weight needs distinct blocks");
  TransitionMatrix m = schedule_matrix(s, n);
  double best = 0.0;
  for (int x : dec.blocks[bi])
    for (int y : dec.blocks[bj]) best = std::max(best, m(x, y));
  return best;
}

namespace detail {

inline double log_connection_weight(const std::vector<double>& logm, size_t r,
                                    const std::vector<int>& from, const std::vector<int>& to) {
  double best = neg_infinity();
  for (int x : from)
    for (int y : to) best = std::max(best, logm[static_cast<size_t>(x) * r + y]);
  return best;
}

// Analytic rates for Metropolis families whose cooling pins down
// lim beta_n/n: the pair rate is -(min connecting uphill gap) * lim beta_n/n.
inline RatePair metropolis_rates(const MetropolisSpec& ms, const CanonicalDecomposition& dec,
                                 ExtReal beta_limit) {
  size_t B = dec.block_count();
  RatePair rp;
  rp.v = CostMatrix(B);
  rp.tau = CostMatrix(B);
  rp.provenance = RateProvenance::Analytic;
  rp.entrywise_limits = true;
  for (size_t i = 0; i < B; ++i)
    for (size_t j = 0; j < B; ++j) {
      if (i == j) continue;
      double min_up = std::numeric_limits<double>::infinity();
      bool edge = false;
      for (int x : dec.blocks[i])
        for (int y : dec.blocks[j])
          if (ms.proposal(x, y) > kZeroEntry) {
            edge = true;
            min_up = std::min(min_up, std::max(ms.energy[y] - ms.energy[x], 0.0));
          }
      ExtReal rate = edge ? ext_mul(ExtReal(-min_up), beta_limit) : ExtReal::neg_inf();
      rp.v(i, j) = rate;
      rp.tau(i, j) = rate;
    }
  return rp;
}

}  // namespace detail

// Decay exponents of the connection weights. Closed-form schedules return
// their analytic rates; otherwise the exponents are fitted on the tail of a
// sampled window and labeled as estimates.
inline RatePair rate_limits(const Schedule& s, const CanonicalDecomposition& dec,
                            uint64_t window = 10000) {
  size_t B = dec.block_count();

  if (s.rates) {
    if (s.rates->blocks != B)
      throw error(errc::invalid_spec, "analytic rate matrices sized for " +
                                          std::to_string(s.rates->blocks) + " blocks, chain has " +
                                          std::to_string(B));
    RatePair rp;
    rp.v = CostMatrix(B);
    rp.tau = CostMatrix(B);
    for (size_t i = 0; i < B; ++i)
      for (size_t j = 0; j < B; ++j) {
        rp.v(i, j) = s.rates->vv(i, j);
        rp.tau(i, j) = s.rates->tt(i, j);
      }
    rp.v.validate();
    rp.tau.validate();
    rp.provenance = RateProvenance::Analytic;
    rp.entrywise_limits = s.rates->entrywise_limits;
    return rp;
  }

  if (s.family == ScheduleFamily::Metropolis) {
    const auto& ms = std::get<MetropolisSpec>(s.params);
    if (auto lim = ms.cooling.beta_over_n_limit()) return detail::metropolis_rates(ms, dec, *lim);
  }

  if (s.family == ScheduleFamily::Constant || s.family == ScheduleFamily::Tabulated) {
    // limits are set by the constant tail: rate 0 where the limit connects,
    // -inf where it does not
    RatePair rp;
    rp.v = CostMatrix(B);
    rp.tau = CostMatrix(B);
    rp.provenance = RateProvenance::Analytic;
    rp.entrywise_limits = true;
    for (size_t i = 0; i < B; ++i)
      for (size_t j = 0; j < B; ++j) {
        if (i == j) continue;
        double t = 0.0;
        for (int x : dec.blocks[i])
          for (int y : dec.blocks[j]) t = std::max(t, s.limit(x, y));
        rp.v(i, j) = rp.tau(i, j) = t > kZeroEntry ? ExtReal(0.0) : ExtReal::neg_inf();
      }
    return rp;
  }

  // windowed estimate on the last 20%
  RatePair rp;
  rp.v = CostMatrix(B);
  rp.tau = CostMatrix(B);
  rp.provenance = RateProvenance::Estimated;
  rp.stderr_diag.assign(B * B, 0.0);
  uint64_t W = std::max<uint64_t>(window, 32);
  uint64_t start = W - W / 5;
  uint64_t stride = std::max<uint64_t>(1, (W - start) / 64);
  std::vector<uint64_t> ns;
  for (uint64_t n = start; n <= W; n += stride) ns.push_back(n);

  std::vector<std::vector<double>> samples(B * B);
  for (uint64_t n : ns) {
    std::vector<double> lm = schedule_log_matrix(s, n);
    for (size_t i = 0; i < B; ++i)
      for (size_t j = 0; j < B; ++j) {
        if (i == j) continue;
        samples[i * B + j].push_back(
            detail::log_connection_weight(lm, s.r, dec.blocks[i], dec.blocks[j]));
      }
  }
  for (size_t i = 0; i < B; ++i)
    for (size_t j = 0; j < B; ++j) {
      if (i == j) continue;
      const auto& logt = samples[i * B + j];
      double vmax = neg_infinity(), tmin = 0.0;
      bool any = false, all = true;
      for (size_t k = 0; k < logt.size(); ++k) {
        if (logt[k] == neg_infinity()) {
          all = false;
          continue;
        }
        any = true;
        double a = logt[k] / static_cast<double>(ns[k]);
        vmax = std::max(vmax, a);
        tmin = std::min(tmin, a);
      }
      if (!any) {
        rp.v(i, j) = rp.tau(i, j) = ExtReal::neg_inf();
        continue;
      }
      rp.v(i, j) = ExtReal(std::min(0.0, vmax));
      rp.tau(i, j) = all ? ExtReal(std::min(0.0, tmin)) : ExtReal::neg_inf();
      // least-squares slope of log t vs n with standard error, as a
      // quality diagnostic
      if (all && logt.size() >= 3) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        size_t m = logt.size();
        for (size_t k = 0; k < m; ++k) {
          double xk = static_cast<double>(ns[k]);
          sx += xk;
          sy += logt[k];
          sxx += xk * xk;
          sxy += xk * logt[k];
        }
        double denom = m * sxx - sx * sx;
        if (denom > 0) {
          double slope = (m * sxy - sx * sy) / denom;
          double icept = (sy - slope * sx) / m;
          double sse = 0;
          for (size_t k = 0; k < m; ++k) {
            double ek = logt[k] - (icept + slope * ns[k]);
            sse += ek * ek;
          }
          double se = m > 2 ? std::sqrt(sse / (m - 2) / (denom / m)) : 0.0;
          rp.stderr_diag[i * B + j] = se;
        }
      }
    }
  return rp;
}

// --------------------------------------------------------------------------
// Monotone envelope of a [0,1]-valued sequence with a declared limit.

struct EnvelopeInput {
  std::vector<double> t;      // t_1..t_W
  double limit = 0.0;         // delta
  double limsup_rate = 0.0;   // limsup (1/n) log t_n, needed when delta = 0
};

// Envelope t_hat with t <= t_hat, t_hat monotone down to the limit, and
// (1/n) log t_hat converging to the declared limsup rate. Finite windows
// extend suprema past W with the declared tail values.
inline std::vector<double> monotone_envelope(const EnvelopeInput& in) {
  size_t W = in.t.size();
  if (W == 0) throw error(errc::invalid_spec, "empty envelope input");
  for (double x : in.t)
    if (!(x >= 0.0) || x > 1.0) throw error(errc::invalid_spec, "envelope values must lie in [0,1]");
  if (in.limit < 0.0 || in.limit > 1.0) throw error(errc::invalid_spec, "envelope limit outside [0,1]");
  std::vector<double> out(W);

  if (in.limit > 0.0) {
    // suffix supremum, tail extended by the limit
    double run = in.limit;
    for (size_t n = W; n-- > 0;) {
      run = std::max(run, in.t[n]);
      out[n] = run;
    }
    return out;
  }

  if (in.limsup_rate < 0.0) {
    // eventually-zero inputs get the explicit 1 / e^{-n^2} envelope
    size_t n0 = W;
    while (n0 > 0 && in.t[n0 - 1] == 0.0) --n0;
    bool eventually_zero = n0 < W;
    for (size_t k = n0; k < W; ++k)
      if (in.t[k] != 0.0) eventually_zero = false;
    if (eventually_zero) {
      for (size_t n = 0; n < W; ++n) {
        double idx = static_cast<double>(n + 1);
        out[n] = (n < n0) ? 1.0 : std::exp(-idx * idx);
      }
      return out;
    }
    // a_l = sup_{j>=l} (1/j) log t_j ; t_hat_n = exp sup_{l>=n} l a_l
    std::vector<double> a(W);
    double run = in.limsup_rate;  // declared tail
    for (size_t l = W; l-- > 0;) {
      double al = in.t[l] > 0.0 ? std::log(in.t[l]) / static_cast<double>(l + 1) : neg_infinity();
      run = std::max(run, al);
      a[l] = run;
    }
    double sup_la = (static_cast<double>(W) + 1.0) * in.limsup_rate;  // tail term l > W
    for (size_t n = W; n-- > 0;) {
      sup_la = std::max(sup_la, static_cast<double>(n + 1) * a[n]);
      out[n] = std::exp(sup_la);
    }
    return out;
  }

  // delta = 0 with limsup rate 0: b_j construction from the first index N2
  // with t_n < 1 from there on; reject when no such window suffix exists.
  size_t n2 = 0;  // 0-based index of N2
  {
    size_t last_one = 0;
    bool seen = false;
    for (size_t k = 0; k < W; ++k)
      if (in.t[k] >= 1.0) {
        last_one = k;
        seen = true;
      }
    n2 = seen ? last_one + 1 : 0;
    if (n2 >= W)
      throw error(errc::invalid_spec,
                  "envelope: t_n = 1 at the window end; the zero-rate construction needs t_n < 1 eventually");
  }
  std::vector<double> b(W, neg_infinity());
  double run = neg_infinity();
  for (size_t j = n2; j < W; ++j) {
    double cand = in.t[j] > 0.0 ? std::log(in.t[j]) / static_cast<double>(j + 1) : neg_infinity();
    run = std::max(run, cand);
    b[j] = run;  // max_{N2 <= l <= j} (1/l) log t_l
  }
  double sup_jb = b[W - 1] == neg_infinity() ? neg_infinity()
                                             : (static_cast<double>(W) + 1.0) * std::min(0.0, b[W - 1]);
  for (size_t n = W; n-- > 0;) {
    if (n < n2) {
      out[n] = 1.0;
      continue;
    }
    if (b[n] != neg_infinity()) sup_jb = std::max(sup_jb, static_cast<double>(n + 1) * b[n]);
    out[n] = sup_jb == neg_infinity() ? 0.0 : std::exp(sup_jb);
  }
  return out;
}

// --------------------------------------------------------------------------
// Longest-path routing costs.

// Best total decay exponent over simple block paths i -> j: max over k and
// tuples of distinct indices of the summed base rates. Exact subset DP for
// up to 16 blocks, exhaustive DFS beyond.
inline ExtReal path_cost(const CostMatrix& base, int i, int j) {
  int B = static_cast<int>(base.blocks);
  if (i == j || B < 2) throw error(errc::invalid_spec, "path_cost needs distinct blocks");
  if (B <= 16) {
    // dp[mask][c]: best cost from i to c visiting exactly 'mask' (i included)
    size_t full = size_t(1) << B;
    std::vector<double> dp(full * B, neg_infinity());
    dp[(size_t(1) << i) * B + i] = 0.0;
    double best = neg_infinity();
    for (size_t mask = 0; mask < full; ++mask) {
      if (!(mask & (size_t(1) << i))) continue;
      for (int c = 0; c < B; ++c) {
        double cur = dp[mask * B + c];
        if (cur == neg_infinity()) continue;
        if (c == j) {
          best = std::max(best, cur);
          continue;
        }
        for (int nx = 0; nx < B; ++nx) {
          if (mask & (size_t(1) << nx)) continue;
          double w = base(c, nx).v;
          if (w == neg_infinity()) continue;
          double cand = cur + w;
          double& slot = dp[(mask | (size_t(1) << nx)) * B + nx];
          if (cand > slot) slot = cand;
        }
      }
    }
    return best == neg_infinity() ? ExtReal::neg_inf() : ExtReal(best);
  }
  // DFS with pruning at running total -inf
  std::vector<char> used(B, 0);
  used[i] = 1;
  double best = neg_infinity();
  auto dfs = [&](auto&& self, int cur, double total) -> void {
    if (cur == j) {
      best = std::max(best, total);
      return;
    }
    for (int nx = 0; nx < B; ++nx) {
      if (used[nx]) continue;
      double w = base(cur, nx).v;
      if (w == neg_infinity()) continue;
      used[nx] = 1;
      self(self, nx, total + w);
      used[nx] = 0;
    }
  };
  dfs(dfs, i, 0.0);
  return best == neg_infinity() ? ExtReal::neg_inf() : ExtReal(best);
}

// All-pairs variant; cost_U0 = all_path_costs(v), cost_T0 = all_path_costs(tau).
inline CostMatrix all_path_costs(const CostMatrix& base) {
  CostMatrix out(base.blocks);
  if (base.blocks < 2) return out;
  for (size_t i = 0; i < base.blocks; ++i)
    for (size_t j = 0; j < base.blocks; ++j) {
      if (i == j) continue;
      out(i, j) = path_cost(base, static_cast<int>(i), static_cast<int>(j));
    }
  return out;
}

// --------------------------------------------------------------------------
// Assumptions and regimes.

struct AssumptionReport {
  bool assumption_A = false;
  bool LIM = false;
  bool PRM_limit = false;   // all P(i), i in G, primitive
  bool assumption_C = false;
  bool lower_cost_valid = false;  // B (via LIM) or C established
  std::vector<std::pair<int, int>> A_violations;
};

inline AssumptionReport check_assumptions(const RatePair& rp, const CanonicalDecomposition& dec,
                                          const StarMatrices& star,
                                          const TransitionMatrix& limit) {
  AssumptionReport rep;
  size_t B = rp.v.blocks;
  rep.assumption_A = true;
  double tol = rp.provenance == RateProvenance::Analytic ? 0.0 : 1e-9;
  for (size_t i = 0; i < B; ++i)
    for (size_t j = 0; j < B; ++j) {
      if (i == j) continue;
      ExtReal v = rp.v(i, j), t = rp.tau(i, j);
      bool eq = (v.v == t.v) || (v.finite() && t.finite() && std::abs(v.v - t.v) <= tol);
      if (!eq) {
        rep.assumption_A = false;
        rep.A_violations.push_back({static_cast<int>(i), static_cast<int>(j)});
      }
    }
  rep.LIM = rp.entrywise_limits && rep.assumption_A;
  rep.PRM_limit = true;
  for (size_t gi = 0; gi < dec.G.size(); ++gi)
    if (!is_primitive(limit, dec.blocks[dec.G[gi]])) rep.PRM_limit = false;
  rep.assumption_C = star.all_primitive;
  // Assumption B is not independently checkable from a black-box schedule;
  // it is established through LIM.
  rep.lower_cost_valid = rep.LIM || rep.assumption_C;
  return rep;
}

enum class Regime { Homogeneous, Trivial, Intermediate, Mixed, SingleBlock };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Homogeneous: return "homogeneous";
    case Regime::Trivial: return "trivial";
    case Regime::Intermediate: return "intermediate";
    case Regime::Mixed: return "mixed";
    case Regime::SingleBlock: return "single-block";
  }
  return "?";
}

// Decay-regime classification:
//   single-block when |G| = 1 (the rate is I_1, independent of the approach);
//   homogeneous when every vanished connection decays superexponentially
//   (v = -inf), so routing costs match the time-homogeneous chain;
//   trivial / intermediate by the pairwise costs among stochastic blocks.
inline Regime classify_regime(const RatePair& rp, const CostMatrix& U0,
                              const CanonicalDecomposition& dec, const TransitionMatrix& limit) {
  if (dec.M == 1) return Regime::SingleBlock;
  size_t B = dec.block_count();
  bool homogeneous = true;
  for (size_t i = 0; i < B && homogeneous; ++i)
    for (size_t j = 0; j < B; ++j) {
      if (i == j) continue;
      double t_limit = 0.0;
      for (int x : dec.blocks[i])
        for (int y : dec.blocks[j]) t_limit = std::max(t_limit, limit(x, y));
      if (t_limit <= kZeroEntry && !rp.v(i, j).is_neg_inf()) {
        homogeneous = false;
        break;
      }
    }
  if (homogeneous) return Regime::Homogeneous;
  if (dec.M_set.size() >= 2) {
    bool all_zero = true, all_finite_neg = true;
    for (int a : dec.M_set)
      for (int b : dec.M_set) {
        if (a == b) continue;
        ExtReal c = U0(a, b);
        if (!(c.v == 0.0)) all_zero = false;
        if (!(c.finite() && c.v < 0.0)) all_finite_neg = false;
      }
    if (all_zero) return Regime::Trivial;
    if (all_finite_neg) return Regime::Intermediate;
  }
  return Regime::Mixed;
}

}  // namespace nhld
