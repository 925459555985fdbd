#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "nhld/errors.hpp"
#include "nhld/numerics.hpp"
#include "nhld/routing.hpp"
#include "nhld/spectral.hpp"

namespace nhld {

// Probability vector on visit positions.
struct SimplexVector {
  std::vector<double> w;

  SimplexVector() = default;
  explicit SimplexVector(std::vector<double> v) : w(std::move(v)) { validate(); }
  void validate() const {
    double s = 0.0;
    for (double x : w) {
      if (x < -1e-15) throw error(errc::invalid_spec, "simplex entries must be nonnegative");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-12) throw error(errc::invalid_spec, "simplex vector must sum to 1");
  }
  size_t size() const { return w.size(); }
};

// Witness of a composite-rate evaluation: visit order sigma over the G-blocks
// (0-based indices into the block-rate list), time proportions v aligned with
// sigma positions, and block means x for the supported positions.
struct JWitness {
  std::vector<int> order;
  std::vector<double> v;
  std::vector<std::vector<double>> x;  // empty vector at zero-weight positions
  bool primal_verified = false;
};

struct JResult {
  ExtReal value = ExtReal(0.0);
  std::optional<JWitness> witness;
};

// Composite rate J_U over the nondegenerate blocks: outer minimum over visit
// orders, time proportions on the simplex, and block means subject to the
// convex-combination constraint; the inner infimum is solved through the
// conjugacy of each block rate with its pressure.
struct CompositeRate {
  std::vector<BlockRate> rates;  // aligned with dec.G
  CostMatrix cost;               // G x G, extracted from U0/T0 at the G indices
  size_t dim = 1;
  double lambda_cap = 40.0;
  double inf_threshold = 1e6;
  double slope_floor = 1e-8;
  int max_exhaustive_orders = 7;  // refuse beyond 7! permutations without an override
  bool allow_large = false;

  CompositeRate() = default;
  CompositeRate(std::vector<BlockRate> block_rates, CostMatrix g_cost)
      : rates(std::move(block_rates)), cost(std::move(g_cost)) {
    if (rates.empty()) throw error(errc::invalid_spec, "composite rate needs at least one block");
    if (cost.blocks != rates.size())
      throw error(errc::invalid_spec, "cost matrix size does not match block count");
    dim = rates[0].dim();
    lambda_cap = rates[0].lambda_cap;
    for (const auto& br : rates) lambda_cap = std::min(lambda_cap, br.lambda_cap);
    cost.validate();
  }

  size_t blocks() const { return rates.size(); }
};

inline CompositeRate make_composite_rate(const TransitionMatrix& limit,
                                         const CanonicalDecomposition& dec, const Observable& f,
                                         const CostMatrix& full_cost) {
  std::vector<BlockRate> rates;
  for (int b : dec.G) rates.emplace_back(limit, dec.blocks[b], f);
  CostMatrix g_cost(dec.G.size());
  for (size_t i = 0; i < dec.G.size(); ++i)
    for (size_t j = 0; j < dec.G.size(); ++j) {
      if (i == j) continue;
      g_cost(i, j) = full_cost(dec.G[i], dec.G[j]);
    }
  return CompositeRate(rates, g_cost);
}

namespace detail {

// Maximize a concave function on [-cap, cap] by golden-section, with a slope
// probe at the ends to detect unbounded ascent. Returns the value, or +inf
// when the objective still climbs at the boundary.
template <typename F, typename SlopeAt>
inline ExtReal concave_max_1d(F&& value, SlopeAt&& end_slope, double cap, double slope_floor,
                              double inf_threshold, double* argmax = nullptr) {
  double sr = end_slope(cap);    // right derivative proxy at +cap
  double sl = end_slope(-cap);   // at -cap
  if (sr >= slope_floor) return ExtReal::inf();
  if (sl <= -slope_floor) return ExtReal::inf();
  double lo = -cap, hi = cap;
  const double gr = 0.6180339887498949;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = value(x1), f2 = value(x2);
  for (int it = 0; it < 220 && hi - lo > 1e-14 * std::max(1.0, cap); ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = value(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = value(x1);
    }
  }
  double xm = 0.5 * (lo + hi);
  double fm = value(xm);
  // guard the ends: a maximum pinned at the cap with a sub-floor slope is a
  // legitimate (finite) supremum value
  double fe = std::max(value(cap), value(-cap));
  double best = std::max(fm, fe);
  if (argmax) *argmax = fm >= fe ? xm : (value(cap) >= value(-cap) ? cap : -cap);
  if (best > inf_threshold) return ExtReal::inf();
  return ExtReal(best);
}

struct SigmaDual {
  // For a fixed visit order: ell[j] = total routing cost carried by positions
  // j..M-1, finite only past the last -inf edge.
  std::vector<double> ell;
  int first_usable = 0;  // positions before this are forced to zero weight
};

inline SigmaDual sigma_costs(const CompositeRate& cr, const std::vector<int>& order) {
  size_t M = order.size();
  SigmaDual sd;
  sd.ell.assign(M, 0.0);
  sd.first_usable = 0;
  for (size_t j = M - 1; j-- > 0;) {
    ExtReal u = cr.cost(order[j], order[j + 1]);
    if (u.is_neg_inf()) {
      // every position up to j must carry zero weight
      sd.first_usable = std::max(sd.first_usable, static_cast<int>(j) + 1);
      sd.ell[j] = std::numeric_limits<double>::infinity();
    } else {
      sd.ell[j] = sd.ell[j + 1] - u.v;
    }
  }
  // positions before a dead edge are unusable even if their own ell is finite
  for (int j = sd.first_usable - 1; j >= 0; --j) sd.ell[j] = std::numeric_limits<double>::infinity();
  return sd;
}

}  // namespace detail

// Evaluate C_{v,U}(sigma, x) directly from the definition: cumulative-weight
// routing plus weighted block rates, with the (+-inf)*0 = 0 convention.
inline ExtReal primal_cost(const CompositeRate& cr, const std::vector<int>& order,
                           const SimplexVector& v, const std::vector<std::vector<double>>& x) {
  size_t M = cr.blocks();
  if (order.size() != M || v.size() != M || x.size() != M)
    throw error(errc::invalid_spec, "primal_cost: size mismatch");
  ExtReal total(0.0);
  double cum = 0.0;
  for (size_t i = 0; i + 1 < M; ++i) {
    cum += v.w[i];
    total = ext_add(total, ext_mul(ExtReal(-cum), cr.cost(order[i], order[i + 1])));
  }
  for (size_t i = 0; i < M; ++i) {
    if (v.w[i] == 0.0) continue;  // zero-weight blocks contribute nothing
    ExtReal ri = cr.rates[order[i]].rate_eval(x[i]);
    total = ext_add(total, ext_mul(ExtReal(v.w[i]), ri));
  }
  return total;
}

// inf over x with sum_i v_i x_i = z of sum_i v_i I_i(x_i), through the dual
// sup_lambda { <lambda,z> - sum_{v_i>0} v_i Lambda_i(lambda) }.
inline ExtReal inner_cost(const CompositeRate& cr, const SimplexVector& v,
                          const std::vector<int>& order, const std::vector<double>& z) {
  size_t M = cr.blocks();
  if (order.size() != M || v.size() != M)
    throw error(errc::invalid_spec, "inner_cost: size mismatch");
  if (cr.dim == 1) {
    auto weighted = [&](double l) {
      double val = 0.0, grad = 0.0;
      for (size_t i = 0; i < M; ++i) {
        if (v.w[i] == 0.0) continue;
        auto pr = cr.rates[order[i]].pressure({l});
        val += v.w[i] * pr.value;
        grad += v.w[i] * pr.gradient[0];
      }
      return std::pair<double, double>(val, grad);
    };
    auto value = [&](double l) { return l * z[0] - weighted(l).first; };
    auto slope = [&](double l) { return z[0] - weighted(l).second; };
    return detail::concave_max_1d(value, slope, cr.lambda_cap, cr.slope_floor, cr.inf_threshold);
  }
  if (cr.dim == 2) {
    // smooth concave objective in two variables; gradient ascent with
    // backtracking, divergence at the cap treated as +inf
    std::vector<double> lambda(2, 0.0);
    double cur = 0.0;
    for (int it = 0; it < 800; ++it) {
      double val = 0.0;
      std::vector<double> grad(z);
      for (size_t i = 0; i < M; ++i) {
        if (v.w[i] == 0.0) continue;
        auto pr = cr.rates[order[i]].pressure(lambda);
        val -= v.w[i] * pr.value;
        for (size_t c = 0; c < 2; ++c) grad[c] -= v.w[i] * pr.gradient[c];
      }
      for (size_t c = 0; c < 2; ++c) val += lambda[c] * z[c];
      cur = val;
      double gn = std::hypot(grad[0], grad[1]);
      double ln = std::hypot(lambda[0], lambda[1]);
      if (gn <= 1e-10) return cur > cr.inf_threshold ? ExtReal::inf() : ExtReal(cur);
      if (ln >= cr.lambda_cap * (1 - 1e-9) && gn >= cr.slope_floor &&
          grad[0] * lambda[0] + grad[1] * lambda[1] > 0)
        return ExtReal::inf();
      double t = 1.0;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        std::vector<double> cand{lambda[0] + t * grad[0], lambda[1] + t * grad[1]};
        double cn = std::hypot(cand[0], cand[1]);
        if (cn > cr.lambda_cap)
          for (auto& cc : cand) cc *= cr.lambda_cap / cn;
        double cv = 0.0;
        for (size_t i = 0; i < M; ++i) {
          if (v.w[i] == 0.0) continue;
          cv -= v.w[i] * cr.rates[order[i]].pressure(cand).value;
        }
        for (size_t c = 0; c < 2; ++c) cv += cand[c] * z[c];
        if (cv > cur + 1e-18) {
          lambda = cand;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) return cur > cr.inf_threshold ? ExtReal::inf() : ExtReal(cur);
    }
    throw error(errc::not_converged, "inner_cost: ascent stalled");
  }
  throw error(errc::unsupported_dimension, "inner_cost supports d <= 2");
}

namespace detail {

// Dual of the per-order subproblem: J_sigma(z) = sup_lambda { <lambda,z> +
// min_{usable j} (ell_j - Lambda_{order[j]}(lambda)) }. The minimum over the
// simplex of a linear form picks out the best single position, which makes
// the weight optimization implicit and exact.
struct SigmaEval {
  ExtReal value = ExtReal(0.0);
  double lambda_star = 0.0;
};

inline SigmaEval eval_order_1d(const CompositeRate& cr, const std::vector<int>& order,
                               const SigmaDual& sd, double z) {
  size_t M = order.size();
  auto piece = [&](double l, size_t j) {
    auto pr = cr.rates[order[j]].pressure({l});
    return sd.ell[j] - pr.value;
  };
  auto value = [&](double l) {
    double m = std::numeric_limits<double>::infinity();
    for (size_t j = sd.first_usable; j < M; ++j) m = std::min(m, piece(l, j));
    return l * z + m;
  };
  auto end_slope = [&](double l) {
    // one-sided derivative of the min: the relevant piece derivative
    double m = std::numeric_limits<double>::infinity();
    double deriv = 0.0;
    for (size_t j = sd.first_usable; j < M; ++j) {
      auto pr = cr.rates[order[j]].pressure({l});
      double val = sd.ell[j] - pr.value;
      double dj = z - pr.gradient[0];
      if (val < m - 1e-12) {
        m = val;
        deriv = dj;
      } else if (val < m + 1e-12) {
        // at a tie the outward derivative is the least favorable one
        deriv = l > 0 ? std::min(deriv, dj) : std::max(deriv, dj);
      }
    }
    return deriv;
  };
  SigmaEval out;
  double arg = 0.0;
  out.value =
      concave_max_1d(value, end_slope, cr.lambda_cap, cr.slope_floor, cr.inf_threshold, &arg);
  out.lambda_star = arg;
  return out;
}

inline ExtReal eval_order_2d(const CompositeRate& cr, const std::vector<int>& order,
                             const SigmaDual& sd, const std::vector<double>& z,
                             std::vector<double>* lambda_out) {
  size_t M = order.size();
  auto eval = [&](const std::vector<double>& l, std::vector<double>* grad) {
    double m = std::numeric_limits<double>::infinity();
    std::vector<double> gbest(2, 0.0);
    for (size_t j = sd.first_usable; j < M; ++j) {
      auto pr = cr.rates[order[j]].pressure(l);
      double val = sd.ell[j] - pr.value;
      if (val < m) {
        m = val;
        gbest = {z[0] - pr.gradient[0], z[1] - pr.gradient[1]};
      }
    }
    if (grad) *grad = gbest;
    return l[0] * z[0] + l[1] * z[1] + m;
  };
  // subgradient ascent with a shrinking step and cap projection
  std::vector<double> lambda(2, 0.0), best_l(2, 0.0);
  double best = eval(lambda, nullptr);
  double step = 0.5 * cr.lambda_cap;
  for (int it = 0; it < 2000; ++it) {
    std::vector<double> g;
    eval(lambda, &g);
    double gn = std::hypot(g[0], g[1]);
    if (gn < 1e-12) break;
    for (size_t c = 0; c < 2; ++c) lambda[c] += step * g[c] / gn;
    double ln = std::hypot(lambda[0], lambda[1]);
    if (ln > cr.lambda_cap)
      for (auto& l : lambda) l *= cr.lambda_cap / ln;
    double v = eval(lambda, nullptr);
    if (v > best) {
      best = v;
      best_l = lambda;
    } else {
      step *= 0.97;
    }
    if (step < 1e-12 * cr.lambda_cap) break;
  }
  // divergence probe: still climbing at the cap radius
  std::vector<double> g;
  eval(best_l, &g);
  double ln = std::hypot(best_l[0], best_l[1]);
  if (ln >= cr.lambda_cap * (1 - 1e-6) && std::hypot(g[0], g[1]) >= cr.slope_floor &&
      g[0] * best_l[0] + g[1] * best_l[1] > 0)
    return ExtReal::inf();
  if (lambda_out) *lambda_out = best_l;
  if (best > cr.inf_threshold) return ExtReal::inf();
  return ExtReal(best);
}

inline std::vector<std::vector<double>> fill_unused_means(const CompositeRate& cr,
                                                          const JWitness& w) {
  std::vector<std::vector<double>> x = w.x;
  for (size_t i = 0; i < x.size(); ++i)
    if (x[i].empty()) x[i].assign(cr.dim, 0.0);  // weight 0: value irrelevant
  return x;
}

// Recover a (v, x) witness from the active positions at the dual optimum.
inline std::optional<JWitness> recover_witness_1d(const CompositeRate& cr,
                                                  const std::vector<int>& order,
                                                  const SigmaDual& sd, double z, double lstar,
                                                  double jval) {
  size_t M = order.size();
  std::vector<double> vals(M, std::numeric_limits<double>::infinity());
  std::vector<double> means(M, 0.0);
  double m = std::numeric_limits<double>::infinity();
  for (size_t j = sd.first_usable; j < M; ++j) {
    auto pr = cr.rates[order[j]].pressure({lstar});
    vals[j] = sd.ell[j] - pr.value;
    means[j] = pr.gradient[0];
    m = std::min(m, vals[j]);
  }
  std::vector<size_t> active;
  for (size_t j = sd.first_usable; j < M; ++j)
    if (vals[j] <= m + 1e-7 * std::max(1.0, std::abs(m))) active.push_back(j);
  if (active.empty()) return std::nullopt;

  JWitness w;
  w.order = order;
  w.v.assign(M, 0.0);
  w.x.assign(M, {});
  // single active position, or a bracketing pair of block means around z
  size_t lo = active[0], hi = active[0];
  for (size_t j : active) {
    if (means[j] < means[lo]) lo = j;
    if (means[j] > means[hi]) hi = j;
  }
  if (active.size() == 1 || std::abs(means[hi] - means[lo]) < 1e-12) {
    w.v[active[0]] = 1.0;
    w.x[active[0]] = {z};
  } else {
    // deterministic choice: tightest bracket with lexicographically smallest
    // positions
    size_t bl = lo, bh = hi;
    for (size_t a : active)
      for (size_t b : active) {
        if (means[a] > z || means[b] < z || a == b) continue;
        if (means[b] - means[a] < means[bh] - means[bl] - 1e-15 ||
            (std::abs((means[b] - means[a]) - (means[bh] - means[bl])) <= 1e-15 &&
             std::make_pair(a, b) < std::make_pair(bl, bh)))
          bl = a, bh = b;
      }
    double span = means[bh] - means[bl];
    double zz = std::clamp(z, means[bl], means[bh]);
    double theta = span > 0 ? (means[bh] - zz) / span : 1.0;
    w.v[bl] = theta;
    w.v[bh] = 1.0 - theta;
    w.x[bl] = {means[bl]};
    w.x[bh] = {means[bh]};
  }
  // verify against the primal definition
  try {
    ExtReal pc = primal_cost(cr, order, SimplexVector(w.v), fill_unused_means(cr, w));
    w.primal_verified = pc.finite() && std::abs(pc.v - jval) <= 1e-6 * std::max(1.0, std::abs(jval));
  } catch (const error&) {
    w.primal_verified = false;
  }
  return w;
}

}  // namespace detail

// J_U(z). For one block this is I_1(z); otherwise the minimum over all visit
// orders of the per-order dual. Permutations are enumerated exhaustively
// (correctness over scale); more than max_exhaustive_orders blocks requires
// allow_large.
inline JResult j_eval(const CompositeRate& cr, const std::vector<double>& z) {
  if (z.size() != cr.dim) throw error(errc::invalid_spec, "j_eval: dimension mismatch");
  if (cr.dim > 2) throw error(errc::unsupported_dimension, "j_eval supports d <= 2");
  size_t M = cr.blocks();
  JResult res;
  if (M == 1) {
    res.value = cr.rates[0].rate_eval(z);
    if (res.value.finite()) {
      JWitness w;
      w.order = {0};
      w.v = {1.0};
      w.x = {z};
      w.primal_verified = true;
      res.witness = w;
    }
    return res;
  }
  if (static_cast<int>(M) > cr.max_exhaustive_orders && !cr.allow_large)
    throw error(errc::invalid_spec,
                "j_eval over " + std::to_string(M) +
                    " blocks enumerates every visit order; pass allow_large to proceed");

  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  ExtReal best = ExtReal::inf();
  std::optional<JWitness> best_witness;
  do {
    detail::SigmaDual sd = detail::sigma_costs(cr, order);
    if (sd.first_usable >= static_cast<int>(M)) continue;
    if (cr.dim == 1) {
      auto se = detail::eval_order_1d(cr, order, sd, z[0]);
      if (se.value < best) {
        best = se.value;
        if (best.finite())
          best_witness = detail::recover_witness_1d(cr, order, sd, z[0], se.lambda_star, best.v);
      }
    } else {
      std::vector<double> lstar;
      ExtReal v = detail::eval_order_2d(cr, order, sd, z, &lstar);
      if (v < best) {
        best = v;
        best_witness.reset();  // witness reporting is d = 1 only
      }
    }
  } while (std::next_permutation(order.begin(), order.end()));

  res.value = best;
  res.witness = best_witness;
  return res;
}

struct JCurveRow {
  std::vector<double> z;
  ExtReal J = ExtReal(0.0);
  std::string order_summary;    // visit order restricted to the support
  std::string support_summary;  // weights on the supported blocks
};

// Pointwise evaluation over a grid, with the witness summarized so the
// piecewise structure (optimal order, support of v) is visible.
inline std::vector<JCurveRow> j_curve(const CompositeRate& cr,
                                      const std::vector<std::vector<double>>& grid,
                                      const std::vector<std::string>& block_names) {
  if (cr.dim != 1) throw error(errc::unsupported_dimension, "j_curve emits d = 1 tables");
  std::vector<JCurveRow> rows;
  rows.reserve(grid.size());
  for (const auto& z : grid) {
    JResult jr = j_eval(cr, z);
    JCurveRow row;
    row.z = z;
    row.J = jr.value;
    if (jr.witness) {
      const auto& w = *jr.witness;
      std::string ord, sup;
      for (size_t i = 0; i < w.order.size(); ++i) {
        if (w.v[i] <= 0.0) continue;
        if (!ord.empty()) {
          ord += ">";
          sup += " ";
        }
        ord += block_names.empty() ? std::to_string(w.order[i] + 1) : block_names[w.order[i]];
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", w.v[i]);
        sup += buf;
      }
      row.order_summary = ord;
      row.support_summary = sup;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nhld
