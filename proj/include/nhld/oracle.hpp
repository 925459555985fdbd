#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <thread>
#include <vector>

#include "nhld/chain.hpp"
#include "nhld/errors.hpp"
#include "nhld/numerics.hpp"
#include "nhld/rng.hpp"

namespace nhld {

// Exact distribution of the additive average Z_n = (1/n) sum f(X_i) under the
// CON measure, on the integer lattice of Q-scaled sums.
struct ExactDistribution {
  uint64_t n = 0;
  long long Q = 1;               // f scaled so Q*f is integral
  long long s_min = 0;           // smallest lattice sum at the horizon
  std::vector<double> logp;      // marginal over sums, log space
  std::vector<std::vector<double>> logp_by_state;  // [state][sum-index]

  size_t support_size() const { return logp.size(); }
  double z_of(size_t idx) const {
    return static_cast<double>(s_min + static_cast<long long>(idx)) /
           (static_cast<double>(n) * static_cast<double>(Q));
  }
  double total_log_mass() const { return log_sum_exp(logp); }

  double mean() const {
    double m = 0.0;
    for (size_t i = 0; i < logp.size(); ++i)
      if (logp[i] != neg_infinity()) m += std::exp(logp[i]) * z_of(i);
    return m;
  }
  // P(Z_n <= z), linear space (values are well scaled after exponentiation).
  double cdf(double z) const {
    double acc = 0.0;
    for (size_t i = 0; i < logp.size(); ++i)
      if (z_of(i) <= z && logp[i] != neg_infinity()) acc += std::exp(logp[i]);
    return acc;
  }
};

namespace detail {

// Best rational approximation with denominator <= max_den (continued
// fractions); fails when nothing lands within tol.
inline bool to_rational(double x, long long max_den, long long& num, long long& den,
                        double tol = 1e-12) {
  long long p0 = 1, q0 = 0, p1 = 0, q1 = 1;  // p0/q0 and p1/q1 convergents
  double v = x;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(v);
    long long a = static_cast<long long>(fl);
    long long p2 = a * p0 + p1, q2 = a * q0 + q1;
    if (q2 > max_den) break;
    p1 = p0;
    q1 = q0;
    p0 = p2;
    q0 = q2;
    double approx = static_cast<double>(p0) / static_cast<double>(q0);
    if (std::abs(approx - x) <= tol * std::max(1.0, std::abs(x))) {
      num = p0;
      den = q0;
      return true;
    }
    double frac = v - fl;
    if (frac < 1e-15) break;
    v = 1.0 / frac;
  }
  if (q0 >= 1 && std::abs(static_cast<double>(p0) / q0 - x) <= tol * std::max(1.0, std::abs(x))) {
    num = p0;
    den = q0;
    return true;
  }
  return false;
}

inline long long observable_denominator(const Observable& f, long long max_den = 1000000) {
  long long q = 1;
  for (size_t s = 0; s < f.states; ++s) {
    long long num, den;
    if (!to_rational(f(s, 0), max_den, num, den))
      throw error(errc::invalid_spec,
                  "oracle requires rational observable values (denominator <= 1e6)");
    q = std::lcm(q, den);
    if (q > max_den)
      throw error(errc::invalid_spec, "observable denominators exceed the 1e6 lattice budget");
  }
  return q;
}

}  // namespace detail

// Forward DP over (step, state, scaled sum) in log space. X_0 ~ pi carries
// sum 0; step i applies P_i and adds Q*f(X_i).
inline ExactDistribution exact_distribution(const Schedule& s, const Observable& f, uint64_t n,
                                            uint64_t cell_budget = 400000000ull) {
  if (f.dim != 1) throw error(errc::unsupported_dimension, "exact oracle supports d = 1");
  if (f.states != s.r) throw error(errc::invalid_spec, "observable/state-space size mismatch");
  if (n < 1) throw error(errc::invalid_spec, "horizon must be >= 1");
  long long Q = detail::observable_denominator(f);

  std::vector<long long> q(s.r);
  long long qmin = 0, qmax = 0;
  for (size_t st = 0; st < s.r; ++st) {
    q[st] = llround(f(st, 0) * static_cast<double>(Q));
    qmin = std::min(qmin, q[st]);
    qmax = std::max(qmax, q[st]);
  }
  qmin = *std::min_element(q.begin(), q.end());
  qmax = *std::max_element(q.begin(), q.end());

  long long span = qmax - qmin;
  unsigned long long cells =
      static_cast<unsigned long long>(n) * static_cast<unsigned long long>(span * (long long)n + 1) *
      s.r;
  if (cells > cell_budget)
    throw error(errc::budget_exceeded,
                "exact oracle needs about " + std::to_string(cells) + " cells (budget " +
                    std::to_string(cell_budget) + ")");

  double qnorm = 0.0;
  for (long long v : q) qnorm = std::max(qnorm, static_cast<double>(std::abs(v)));
  const double prune_below = -(static_cast<double>(n) * qnorm * 10.0 + 700.0);

  // layer t: sums in [t*qmin, t*qmax]; index = sum - t*qmin
  auto width_at = [&](uint64_t t) -> size_t { return static_cast<size_t>(span * (long long)t) + 1; };
  std::vector<std::vector<double>> cur(s.r, std::vector<double>(1, neg_infinity()));
  for (size_t st = 0; st < s.r; ++st)
    cur[st][0] = s.pi[st] > 0.0 ? std::log(s.pi[st]) : neg_infinity();

  std::vector<double> acc;
  acc.reserve(s.r);
  for (uint64_t t = 1; t <= n; ++t) {
    std::vector<double> lm = schedule_log_matrix(s, t);
    size_t w_new = width_at(t);
    long long base_new = qmin * (long long)t;
    long long base_old = qmin * (long long)(t - 1);
    std::vector<std::vector<double>> nxt(s.r, std::vector<double>(w_new, neg_infinity()));
    for (size_t y = 0; y < s.r; ++y) {
      long long shift = q[y];
      for (size_t idx = 0; idx < w_new; ++idx) {
        long long sum_new = base_new + static_cast<long long>(idx);
        long long sum_old = sum_new - shift;
        long long old_idx = sum_old - base_old;
        if (old_idx < 0 || old_idx >= static_cast<long long>(width_at(t - 1))) continue;
        acc.clear();
        for (size_t x = 0; x < s.r; ++x) {
          double lp = lm[x * s.r + y];
          if (lp == neg_infinity()) continue;
          double prev = cur[x][static_cast<size_t>(old_idx)];
          if (prev == neg_infinity()) continue;
          acc.push_back(prev + lp);
        }
        if (!acc.empty()) {
          double v = log_sum_exp(acc);
          nxt[y][idx] = v >= prune_below ? v : neg_infinity();
        }
      }
    }
    cur.swap(nxt);
  }

  ExactDistribution out;
  out.n = n;
  out.Q = Q;
  out.s_min = qmin * (long long)n;
  size_t w = width_at(n);
  out.logp.assign(w, neg_infinity());
  out.logp_by_state = cur;
  for (size_t idx = 0; idx < w; ++idx) {
    acc.clear();
    for (size_t st = 0; st < s.r; ++st)
      if (cur[st][idx] != neg_infinity()) acc.push_back(cur[st][idx]);
    if (!acc.empty()) out.logp[idx] = log_sum_exp(acc);
  }
  return out;
}

// Interval with independently open/closed endpoints; a finite union of these
// describes the target event.
struct IntervalSet {
  double a = 0.0, b = 0.0;
  bool open_a = true, open_b = false;  // default (a, b]

  bool contains(double z) const {
    const double eps = 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
    bool left = open_a ? z > a + eps : z >= a - eps;
    bool right = open_b ? z < b - eps : z <= b + eps;
    return left && right;
  }
};

inline double event_log_prob(const ExactDistribution& ed, const std::vector<IntervalSet>& B) {
  std::vector<double> acc;
  for (size_t i = 0; i < ed.logp.size(); ++i) {
    if (ed.logp[i] == neg_infinity()) continue;
    double z = ed.z_of(i);
    for (const auto& iv : B)
      if (iv.contains(z)) {
        acc.push_back(ed.logp[i]);
        break;
      }
  }
  return log_sum_exp(acc);
}

struct RateTraceRow {
  uint64_t n = 0;
  double log_prob = 0.0;  // log P(Z_n in B)
  double rate = 0.0;      // (1/n) log P
};

inline std::vector<RateTraceRow> rate_trace(const Schedule& s, const Observable& f,
                                            const std::vector<IntervalSet>& B,
                                            const std::vector<uint64_t>& horizons,
                                            uint64_t cell_budget = 400000000ull) {
  std::vector<RateTraceRow> rows;
  for (uint64_t n : horizons) {
    ExactDistribution ed = exact_distribution(s, f, n, cell_budget);
    double lp = event_log_prob(ed, B);
    rows.push_back({n, lp, lp / static_cast<double>(n)});
  }
  return rows;
}

// --------------------------------------------------------------------------
// Monte Carlo simulator.

struct SimulationReport {
  uint64_t replicas = 0;
  uint64_t horizon = 0;
  uint64_t seed = 0;
  std::vector<std::vector<double>> z_samples;  // [replica][coord]
  std::vector<int> terminal_block;             // block index of X_n, -1 if no map given
  std::vector<uint64_t> absorption_histogram;  // counts per block
};

namespace detail {

inline size_t sample_row(const std::vector<double>& cdf_row, size_t r, size_t row, double u) {
  const double* c = cdf_row.data() + row * r;
  for (size_t j = 0; j < r; ++j)
    if (u < c[j]) return j;
  return r - 1;
}

inline unsigned thread_budget() {
  unsigned hw = std::thread::hardware_concurrency();
  unsigned cap = hw == 0 ? 1 : std::min(hw, 8u);
  if (const char* env = std::getenv("NHLD_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = std::min<unsigned>(cap, static_cast<unsigned>(v));
  }
  return std::max(1u, cap);
}

}  // namespace detail

// R independent trajectories; replica i uses a stream derived from (seed, i),
// so results are identical regardless of execution order or thread count.
inline SimulationReport simulate(const Schedule& s, const Observable& f, uint64_t n, uint64_t R,
                                 uint64_t seed, const std::vector<int>* block_of_state = nullptr,
                                 size_t block_count = 0) {
  if (R < 1) throw error(errc::invalid_spec, "at least one replica");
  if (f.states != s.r) throw error(errc::invalid_spec, "observable/state-space size mismatch");

  // row CDFs for every step, shared by all replicas
  std::vector<std::vector<double>> cdfs(n);
  for (uint64_t t = 1; t <= n; ++t) {
    TransitionMatrix m = schedule_matrix(s, t);
    std::vector<double> c(s.r * s.r);
    for (size_t i = 0; i < s.r; ++i) {
      double run = 0.0;
      for (size_t j = 0; j < s.r; ++j) {
        run += m(i, j);
        c[i * s.r + j] = run;
      }
      c[i * s.r + s.r - 1] = std::max(c[i * s.r + s.r - 1], 1.0);
    }
    cdfs[t - 1] = std::move(c);
  }
  std::vector<double> pi_cdf(s.r);
  {
    double run = 0.0;
    for (size_t j = 0; j < s.r; ++j) {
      run += s.pi[j];
      pi_cdf[j] = run;
    }
    pi_cdf[s.r - 1] = std::max(pi_cdf[s.r - 1], 1.0);
  }

  SimulationReport rep;
  rep.replicas = R;
  rep.horizon = n;
  rep.seed = seed;
  rep.z_samples.assign(R, std::vector<double>(f.dim, 0.0));
  rep.terminal_block.assign(R, -1);
  rep.absorption_histogram.assign(block_count, 0);

  auto run_range = [&](uint64_t lo, uint64_t hi) {
    for (uint64_t i = lo; i < hi; ++i) {
      SplitMix64 rng = replica_stream(seed, i);
      double u0 = rng.u01();
      size_t x = 0;
      while (x + 1 < s.r && u0 >= pi_cdf[x]) ++x;
      std::vector<double> sum(f.dim, 0.0);
      for (uint64_t t = 1; t <= n; ++t) {
        x = detail::sample_row(cdfs[t - 1], s.r, x, rng.u01());
        for (size_t c = 0; c < f.dim; ++c) sum[c] += f(x, c);
      }
      for (size_t c = 0; c < f.dim; ++c) rep.z_samples[i][c] = sum[c] / static_cast<double>(n);
      if (block_of_state) rep.terminal_block[i] = (*block_of_state)[x];
    }
  };

  unsigned threads = detail::thread_budget();
  if (threads <= 1 || R < 1024) {
    run_range(0, R);
  } else {
    std::vector<std::thread> pool;
    uint64_t chunk = (R + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      uint64_t lo = t * chunk, hi = std::min<uint64_t>(R, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  if (block_of_state && block_count > 0)
    for (uint64_t i = 0; i < R; ++i)
      if (rep.terminal_block[i] >= 0) ++rep.absorption_histogram[rep.terminal_block[i]];
  return rep;
}

}  // namespace nhld
