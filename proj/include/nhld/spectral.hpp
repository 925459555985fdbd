#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nhld/chain.hpp"
#include "nhld/decomposition.hpp"
#include "nhld/errors.hpp"
#include "nhld/numerics.hpp"

namespace nhld {

// Small dense nonnegative matrix, row-major.
struct NonnegMatrix {
  size_t n = 0;
  std::vector<double> a;
  explicit NonnegMatrix(size_t k = 0) : n(k), a(k * k, 0.0) {}
  double& operator()(size_t i, size_t j) { return a[i * n + j]; }
  double operator()(size_t i, size_t j) const { return a[i * n + j]; }
};

// Pi_{C,lambda}: block submatrix with columns tilted by exp<lambda, f(j)>.
inline NonnegMatrix tilted_matrix(const TransitionMatrix& P, const std::vector<int>& block,
                                  const Observable& f, const std::vector<double>& lambda) {
  size_t k = block.size();
  if (k == 0) throw error(errc::invalid_spec, "tilted matrix of an empty block");
  NonnegMatrix m(k);
  std::vector<double> colw(k);
  for (size_t j = 0; j < k; ++j) {
    double dot = 0.0;
    for (size_t c = 0; c < f.dim; ++c) dot += lambda[c] * f(block[j], c);
    colw[j] = std::exp(dot);
  }
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) m(i, j) = P(block[i], block[j]) * colw[j];
  return m;
}

struct PfResult {
  double rho = 0.0;
  std::vector<double> right, left;  // ||right||_1 = 1, left . right = 1
};

// Perron-Frobenius pair of an irreducible nonnegative matrix by power
// iteration on A + cI; the shift removes periodicity and keeps eigenvectors.
inline PfResult pf_eigen(const NonnegMatrix& A, double tol = 1e-12, int max_iter = 100000) {
  size_t k = A.n;
  if (k == 0) throw error(errc::not_irreducible, "empty matrix");
  if (k == 1) {
    if (A(0, 0) <= 0.0) throw error(errc::not_irreducible, "1x1 zero matrix is not irreducible");
    return {A(0, 0), {1.0}, {1.0}};
  }
  // shift: the largest off-diagonal row mass; zero means the matrix is
  // diagonal, hence reducible
  double shift = 0.0;
  for (size_t i = 0; i < k; ++i) {
    double off = 0.0;
    for (size_t j = 0; j < k; ++j)
      if (i != j) off += A(i, j);
    shift = std::max(shift, off);
  }
  if (shift <= 0.0) throw error(errc::not_irreducible, "diagonal matrix is not irreducible");

  std::vector<double> v(k, 1.0 / k), u(k, 1.0 / k), Av(k), uA(k);
  double rho_shifted = 0.0;
  double resid = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    for (size_t i = 0; i < k; ++i) {
      double s = shift * v[i];
      for (size_t j = 0; j < k; ++j) s += A(i, j) * v[j];
      Av[i] = s;
    }
    for (size_t j = 0; j < k; ++j) {
      double s = shift * u[j];
      for (size_t i = 0; i < k; ++i) s += u[i] * A(i, j);
      uA[j] = s;
    }
    double nv = 0.0, nu = 0.0;
    for (size_t i = 0; i < k; ++i) {
      nv += Av[i];
      nu += uA[i];
    }
    if (!(nv > 0.0) || !(nu > 0.0)) throw error(errc::not_irreducible, "power iteration collapsed");
    double uv = 0.0, uAv = 0.0;
    for (size_t i = 0; i < k; ++i) {
      v[i] = Av[i] / nv;
      u[i] = uA[i] / nu;
    }
    for (size_t i = 0; i < k; ++i) {
      uv += u[i] * v[i];
      double s = shift * v[i];
      for (size_t j = 0; j < k; ++j) s += A(i, j) * v[j];
      Av[i] = s;
      uAv += u[i] * s;
    }
    rho_shifted = uAv / uv;  // Rayleigh quotient
    resid = 0.0;
    for (size_t i = 0; i < k; ++i) resid = std::max(resid, std::abs(Av[i] - rho_shifted * v[i]));
    if (resid <= tol * std::max(1.0, rho_shifted)) {
      double rho = rho_shifted - shift;
      if (!(rho > 0.0)) throw error(errc::not_irreducible, "nonpositive spectral radius");
      double dot = 0.0;
      for (size_t i = 0; i < k; ++i) dot += u[i] * v[i];
      for (size_t i = 0; i < k; ++i) u[i] /= dot;
      return {rho, v, u};
    }
  }
  throw error(errc::not_converged,
              "pf_eigen: residual " + std::to_string(resid) + " after max iterations");
}

struct PressureValue {
  double value = 0.0;
  std::vector<double> gradient;
};

struct Interval {
  double lo = 0.0, hi = 0.0;
};

// Per-block pressure Lambda_C(lambda) = log rho(Pi_{C,lambda}) and its
// Legendre transform I_C. Defined for irreducible (sub)stochastic blocks.
struct BlockRate {
  std::vector<int> block;
  const TransitionMatrix* P = nullptr;
  const Observable* f = nullptr;
  bool substochastic = false;
  double lambda_cap = 40.0;
  double inf_threshold = 1e6;
  double slope_floor = 1e-8;

  BlockRate() = default;
  BlockRate(const TransitionMatrix& mat, std::vector<int> blk, const Observable& obs)
      : block(std::move(blk)), P(&mat), f(&obs) {
    lambda_cap = 40.0 / std::max(1.0, obs.sup_norm());
    double worst = 1.0;
    for (int s : block) {
      double row = 0.0;
      for (int t : block) row += mat(s, t);
      worst = std::min(worst, row);
    }
    substochastic = worst < 1.0 - kRowSumTol;
  }

  size_t dim() const { return f->dim; }

  // value = log rho(Pi_{C,lambda}); gradient from the left/right eigenvector
  // formula d rho / d lambda_k = u^T (dPi/dlambda_k) v / (u^T v).
  PressureValue pressure(const std::vector<double>& lambda) const {
    NonnegMatrix tilt = tilted_matrix(*P, block, *f, lambda);
    PfResult pf = pf_eigen(tilt);
    size_t k = block.size();
    PressureValue out;
    out.value = std::log(pf.rho);
    out.gradient.assign(f->dim, 0.0);
    for (size_t c = 0; c < f->dim; ++c) {
      double acc = 0.0;
      for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < k; ++j) acc += pf.left[i] * tilt(i, j) * f->operator()(block[j], c) * pf.right[j];
      out.gradient[c] = acc / pf.rho;  // left.right already normalized to 1
    }
    return out;
  }

  // I_C(x) = sup_lambda {<lambda,x> - Lambda_C(lambda)}. Unbounded ascent at
  // the search radius is reported as +inf (the domain of finiteness is a
  // compact subset of the cube K).
  ExtReal rate_eval(const std::vector<double>& x) const {
    if (x.size() != f->dim) throw error(errc::invalid_spec, "rate_eval: dimension mismatch");
    double norm = f->sup_norm();
    for (double xi : x)
      if (std::abs(xi) > norm + 1e-12) return ExtReal::inf();
    if (f->dim == 1) return rate_eval_1d(x[0]);
    return rate_eval_ascent(x);
  }

  // Per-coordinate gradient range over axis points and sign-grid corners at
  // the search radius; contains the domain of finiteness Q_C.
  std::vector<Interval> domain_box() const {
    size_t d = f->dim;
    if (d > 3) throw error(errc::unsupported_dimension, "domain_box supports d <= 3");
    std::vector<std::vector<double>> probes;
    for (size_t c = 0; c < d; ++c) {
      std::vector<double> lp(d, 0.0), lm(d, 0.0);
      lp[c] = lambda_cap;
      lm[c] = -lambda_cap;
      probes.push_back(lp);
      probes.push_back(lm);
    }
    for (size_t mask = 0; mask < (size_t(1) << d); ++mask) {
      std::vector<double> l(d);
      for (size_t c = 0; c < d; ++c) l[c] = (mask >> c) & 1 ? lambda_cap : -lambda_cap;
      probes.push_back(l);
    }
    std::vector<Interval> box(d);
    bool first = true;
    for (const auto& l : probes) {
      auto pr = pressure(l);
      for (size_t c = 0; c < d; ++c) {
        if (first) {
          box[c].lo = box[c].hi = pr.gradient[c];
        } else {
          box[c].lo = std::min(box[c].lo, pr.gradient[c]);
          box[c].hi = std::max(box[c].hi, pr.gradient[c]);
        }
      }
      first = false;
    }
    return box;
  }

 private:
  // d = 1: the objective lambda -> lambda x - Lambda(lambda) is smooth and
  // concave with nonincreasing derivative x - Lambda'(lambda); bracket the
  // root of the derivative and bisect, then polish with the gradient.
  ExtReal rate_eval_1d(double x) const {
    auto slope = [&](double l) { return x - pressure({l}).gradient[0]; };
    double lo = -lambda_cap, hi = lambda_cap;
    double slo = slope(lo), shi = slope(hi);
    if (shi >= slope_floor) return ExtReal::inf();   // still climbing at +cap
    if (slo <= -slope_floor) return ExtReal::inf();  // still climbing at -cap
    double value;
    if (shi >= 0.0) {
      value = eval_obj(x, hi);
    } else if (slo <= 0.0) {
      value = eval_obj(x, lo);
    } else {
      for (int it = 0; it < 200 && hi - lo > 1e-13 * lambda_cap; ++it) {
        double mid = 0.5 * (lo + hi);
        if (slope(mid) >= 0.0)
          lo = mid;
        else
          hi = mid;
      }
      value = eval_obj(x, 0.5 * (lo + hi));
    }
    if (value > inf_threshold) return ExtReal::inf();
    return ExtReal(value);
  }

  double eval_obj(double x, double l) const {
    auto pr = pressure({l});
    return l * x - pr.value;
  }

  // d >= 2: gradient ascent with backtracking line search on the smooth
  // concave objective; divergence at the cap radius reports +inf.
  ExtReal rate_eval_ascent(const std::vector<double>& x) const {
    size_t d = f->dim;
    std::vector<double> lambda(d, 0.0);
    double step = 1.0;
    double cur = 0.0;
    {
      auto pr = pressure(lambda);
      cur = -pr.value;
    }
    for (int it = 0; it < 500; ++it) {
      auto pr = pressure(lambda);
      std::vector<double> grad(d);
      double gnorm = 0.0;
      for (size_t c = 0; c < d; ++c) {
        grad[c] = x[c] - pr.gradient[c];
        gnorm += grad[c] * grad[c];
      }
      gnorm = std::sqrt(gnorm);
      double lnorm = 0.0;
      for (double lc : lambda) lnorm += lc * lc;
      lnorm = std::sqrt(lnorm);
      if (gnorm <= 1e-10) {
        double val = 0.0;
        for (size_t c = 0; c < d; ++c) val += lambda[c] * x[c];
        val -= pr.value;
        return val > inf_threshold ? ExtReal::inf() : ExtReal(val);
      }
      if (lnorm >= lambda_cap * (1.0 - 1e-9) && gnorm >= slope_floor) {
        // ascending against the cap: check the ascent direction points outward
        double dot = 0.0;
        for (size_t c = 0; c < d; ++c) dot += grad[c] * lambda[c];
        if (dot > 0.0) return ExtReal::inf();
      }
      double base = 0.0;
      for (size_t c = 0; c < d; ++c) base += lambda[c] * x[c];
      base -= pr.value;
      cur = base;
      double t = step;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        std::vector<double> cand(d);
        double cnorm = 0.0;
        for (size_t c = 0; c < d; ++c) {
          cand[c] = lambda[c] + t * grad[c];
          cnorm += cand[c] * cand[c];
        }
        cnorm = std::sqrt(cnorm);
        if (cnorm > lambda_cap) {
          for (size_t c = 0; c < d; ++c) cand[c] *= lambda_cap / cnorm;
        }
        auto prc = pressure(cand);
        double val = -prc.value;
        for (size_t c = 0; c < d; ++c) val += cand[c] * x[c];
        if (val > cur + 1e-18) {
          lambda = cand;
          cur = val;
          step = t * 2.0;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) {
        return cur > inf_threshold ? ExtReal::inf() : ExtReal(cur);
      }
    }
    throw error(errc::not_converged, "rate_eval: ascent did not converge or diverge");
  }
};

inline BlockRate make_block_rate(const TransitionMatrix& P, const CanonicalDecomposition& dec,
                                 int block_index, const Observable& f) {
  if (dec.cls[block_index] == BlockClass::DegenerateTransient)
    throw error(errc::invalid_spec, "degenerate transient blocks have no spectral rate");
  return BlockRate(P, dec.blocks[block_index], f);
}

}  // namespace nhld
