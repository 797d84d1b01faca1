#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dust/common.hpp"
#include "dust/model.hpp"
#include "dust/stat_store.hpp"

namespace dust {

//======================================================================
// strategy plumbing
//======================================================================

enum class Strategy {
  exact1d,        // closed-form argmax of the 1-d decision function
  at_zero,        // dual at mu = 0 (the PELT inequality)
  random_uniform, // dual at one uniform draw in [0, 0.999 mu_max]
  quasi_newton,   // projected gradient ascent on the dual
  meanvar_closed, // mean-variance closed forms (1 or 2 constraints)
  gauss_closed,   // Gaussian closed-form max of the 1-constraint dual
};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::exact1d: return "exact1d";
    case Strategy::at_zero: return "zero";
    case Strategy::random_uniform: return "random";
    case Strategy::quasi_newton: return "qn";
    case Strategy::meanvar_closed: return "meanvar";
    case Strategy::gauss_closed: return "gauss";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  for (Strategy st : {Strategy::exact1d, Strategy::at_zero,
                      Strategy::random_uniform, Strategy::quasi_newton,
                      Strategy::meanvar_closed, Strategy::gauss_closed}) {
    if (s == strategy_name(st)) return st;
  }
  throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

struct DualEvalPlan {
  Strategy strategy = Strategy::exact1d;
  std::uint64_t rng_seed = 0;
  int qn_max_iters = 20;
  double qn_tol = 1e-8;
  // constraints used by the meanvar/qn strategies (capped by availability)
  int constraints = 1;
  // draw r uniformly among live candidates below s instead of the largest
  bool random_r = false;
};

// Constraint set for the duals: candidate s tested against indices r at time
// t. Entries of r may sit on either side of s.
struct ConstraintSelection {
  std::size_t s = 0;
  std::size_t t = 0;
  std::vector<std::size_t> r;
};

// Feasible range of the normalised multiplier for one constraint r < s:
// x in [0, x_max), mu = x / (1 + x) in [0, mu_max) with mu_max <= 1.
struct DualDomain {
  double x_max = kInf;
  double mu_max = 1.0;
};

// Per-run diagnostics.
struct DualStats {
  long gauss_mu0_radicand = 0;  // closed gauss max saw R^2 <= 0 (max at mu=0)
  long skipped_tests = 0;       // pruning test skipped (degenerate segment)
};

namespace detail {

inline void require_order(std::size_t r, std::size_t s, std::size_t t,
                          const char* op) {
  if (!(r < s && s < t)) {
    throw IndexError(std::string(op) + ": need r < s < t");
  }
}

}  // namespace detail

//======================================================================
// 1-constraint dual (r < s < t)
//======================================================================

inline DualDomain dual_domain_1c(const ModelFamily& m, const StatStore& st,
                                 std::size_t r, std::size_t s, std::size_t t) {
  detail::require_order(r, s, t, "dual_domain_1c");
  const std::size_t d = st.dim();
  std::vector<double> mst = st.mean_stat(s, t);
  std::vector<double> mrs = st.mean_stat(r, s);
  double xmax = kInf;
  if (m.family == Family::meanvar) {
    for (std::size_t c = 0; c * 2 + 1 < d; ++c) {
      const double u = mst[2 * c], v = mst[2 * c + 1];
      const double V = v - u * u;
      if (!(V > kDomainEps)) return {0.0, 0.0};
      const double du = u - mrs[2 * c];
      const double dv = v - mrs[2 * c + 1];
      // v(x) - u(x)^2 = -du^2 x^2 + L x + V stays positive up to its root
      const double L = dv - 2.0 * u * du;
      double root = kInf;
      if (du != 0.0) {
        const double disc = L * L + 4.0 * du * du * V;  // always > 0
        root = (L + std::sqrt(disc)) / (2.0 * du * du);
      } else if (L < 0.0) {
        root = -V / L;
      }
      xmax = std::min(xmax, root);
    }
  } else {
    const Interval om = mean_domain1(m.family);
    for (std::size_t c = 0; c < d; ++c) {
      const double s1 = mst[c];
      if (!om.contains_strict(s1)) return {0.0, 0.0};
      const double dir = s1 - mrs[c];
      if (dir > 0 && std::isfinite(om.hi)) {
        xmax = std::min(xmax, (om.hi - s1) / dir);
      } else if (dir < 0 && std::isfinite(om.lo)) {
        xmax = std::min(xmax, (om.lo - s1) / dir);
      }
    }
  }
  const double mumax = std::isinf(xmax) ? 1.0 : xmax / (1.0 + xmax);
  return {xmax, mumax};
}

inline double mu_max_1c(const ModelFamily& m, const StatStore& st,
                        std::size_t r, std::size_t s, std::size_t t) {
  return dual_domain_1c(m, st, r, s, t).mu_max;
}

// D(mu) = (t-s) [ -(1-mu) D*(m(mu)) + mu Qbar_rs ] + Q_s + beta with
// m(mu) = (Sbar_st - mu Sbar_rs) / (1 - mu).
inline double dual_1c(const ModelFamily& m, const StatStore& st, std::size_t r,
                      std::size_t s, std::size_t t, double mu, double beta) {
  detail::require_order(r, s, t, "dual_1c");
  if (!(mu >= 0.0 && mu < 1.0)) {
    throw DomainError("dual_1c: mu must lie in [0, 1)");
  }
  const std::size_t d = st.dim();
  std::vector<double> mm = st.mean_stat(s, t);
  std::vector<double> mrs = st.mean_stat(r, s);
  const double om = 1.0 - mu;
  for (std::size_t c = 0; c < d; ++c) mm[c] = (mm[c] - mu * mrs[c]) / om;
  if (!mean_domain_contains(m, mm)) {
    throw DomainError("dual_1c: m(mu) outside the statistic domain");
  }
  const double len = static_cast<double>(t - s);
  return len * (-om * dstar(m, mm) + mu * st.qbar(r, s)) + st.q(s) + beta;
}

// Decision function (x-parameterised dual, threshold folded in):
// D(x) = -D*(sigma(x)) - phi(x); positive at any feasible x implies the dual
// exceeds Q_t + beta there.
inline double decision_1d(const ModelFamily& m, const StatStore& st,
                          std::size_t r, std::size_t s, std::size_t t,
                          double x) {
  if (r == s || s >= t) throw IndexError("decision_1d: need r != s < t");
  if (x < 0) throw DomainError("decision_1d: x must be >= 0");
  const std::size_t d = st.dim();
  std::vector<double> sig = st.mean_stat(s, t);
  std::vector<double> dm(d);
  st.delta_mean(r, s, t, dm.data());
  for (std::size_t c = 0; c < d; ++c) sig[c] += x * dm[c];
  const double phi = st.qbar(s, t) + x * st.delta_q(r, s, t);
  return -dstar(m, sig) - phi;
}

//======================================================================
// exact 1-d maximisation (one-parameter statistic, one constraint)
//======================================================================

struct Max1d {
  double x = 0;      // argmax over [0, x_max] (+inf when the sup is a limit)
  double value = 0;  // sup of the decision function (+inf possible)
};

namespace detail {

struct Eval1d {
  // 0: max at x=0, 1: interior critical point, 2: finite x_max endpoint,
  // 3: sup approached as x -> inf (mu -> 1)
  int kind = 0;
  double x = 0;
  double value = 0;
  double h = 0;   // delta Qbar, for the kind-3 limit excess
  double v0 = 0;  // decision value at x = 0 when available
};

inline Eval1d exact_eval_1d(const ModelFamily& m, const StatStore& st,
                            std::size_t r, std::size_t s, std::size_t t) {
  if (st.dim() != 1) {
    throw ConfigError("exact_test_1d: needs a one-dimensional statistic");
  }
  require_order(r, s, t, "exact_test_1d");
  const Family f = m.family;
  const double u = st.sum_stat(s, t, 0) / static_cast<double>(t - s);
  const double qst = st.qbar(s, t);
  const Interval om = mean_domain1(f);
  if (!om.contains_strict(u)) {
    // x_max = 0: only the boundary limit at x = 0 is available
    const double dl = dstar1_limit(f, std::clamp(u, om.lo, om.hi));
    const double v = std::isinf(dl) ? -kInf : -dl - qst;
    return {0, 0.0, v, 0.0, v};
  }
  const double w = st.sum_stat(r, s, 0) / static_cast<double>(s - r);
  const double h = qst - st.qbar(r, s);
  const double delta = u - w;
  const double v0 = -dstar1(f, u) - qst;
  // segment means that agree to rounding noise are one constraint direction
  // (exact rational ties reach here with a few ulps of residue, which would
  // otherwise fabricate a critical point at astronomical x)
  const double tie_eps =
      1e-11 * std::max({1.0, std::abs(u), std::abs(w)});
  if (std::abs(delta) <= tie_eps) {
    // affine decision function with slope -h
    if (h >= 0) return {0, 0.0, v0, h, v0};
    return {3, kInf, kInf, h, v0};
  }
  double xmax = kInf;
  if (delta > 0 && std::isfinite(om.hi)) {
    xmax = (om.hi - u) / delta;
  } else if (delta < 0 && std::isfinite(om.lo)) {
    xmax = (om.lo - u) / delta;
  }
  const double thstar = -h / delta;
  if (natural_domain1(f).contains_strict(thstar, 0.0)) {
    const double xstar = (mean_map1(f, thstar) - u) / delta;
    if (xstar <= 0) return {0, 0.0, v0, h, v0};
    if (xstar < xmax) {
      const double val = log_partition1(f, thstar) - thstar * u - qst;
      return {1, xstar, val, h, v0};
    }
  } else {
    // no interior critical point: the decision function is monotone
    const double d0 = -delta * mean_map_inv1(f, u) - h;
    if (d0 <= 0) return {0, 0.0, v0, h, v0};
  }
  if (std::isinf(xmax)) return {3, kInf, kInf, h, v0};
  const double sb = std::clamp(u + xmax * delta, om.lo, om.hi);
  const double dl = dstar1_limit(f, sb);
  const double val = std::isinf(dl) ? -kInf : -dl - (qst + xmax * h);
  return {2, xmax, val, h, v0};
}

}  // namespace detail

// Closed-form sup of the 1-d decision function over [0, x_max].
inline Max1d exact_max_1d(const ModelFamily& m, const StatStore& st,
                          std::size_t r, std::size_t s, std::size_t t) {
  const auto e = detail::exact_eval_1d(m, st, r, s, t);
  return {e.x, e.value};
}

// Exact pruning test: true when the dual provably exceeds Q_t + beta (with
// the pruning slack). The threshold is already folded into the decision
// scale, so beta only documents the contract.
inline bool exact_test_1d(const ModelFamily& m, const StatStore& st,
                          std::size_t r, std::size_t s, std::size_t t,
                          double beta) {
  (void)beta;
  const auto e = detail::exact_eval_1d(m, st, r, s, t);
  const double len = static_cast<double>(t - s);
  switch (e.kind) {
    case 0:
    case 1:
      return len * e.value > kPruneSlack;
    case 2:
      return len * e.value / (1.0 + e.x) > kPruneSlack;
    default:
      // sup approached as mu -> 1: the dual limit excess is -(t-s) h; the
      // value at x = 0 may still dominate after normalisation
      return len * std::max(e.v0, -e.h) > kPruneSlack;
  }
}

//======================================================================
// multi-constraint dual
//======================================================================

// D(mu) = (t-s) [ -l(mu) D*(m(mu)) + sum_r mu_r psi_r Qbar_rs ] + Q_s + beta,
// m(mu) = (Sbar_st - sum_r mu_r psi_r Sbar_rs) / l(mu), l(mu) = 1 - sum mu psi.
inline double dual_multi(const ModelFamily& m, const StatStore& st,
                         const ConstraintSelection& sel,
                         std::span<const double> mu, double beta) {
  if (!(sel.s < sel.t)) throw IndexError("dual_multi: need s < t");
  if (mu.size() != sel.r.size()) {
    throw ConfigError("dual_multi: one multiplier per constraint");
  }
  const std::size_t d = st.dim();
  std::vector<double> num = st.mean_stat(sel.s, sel.t);
  std::vector<double> mrs(d);
  double l = 1.0, lin = 0.0;
  for (std::size_t i = 0; i < sel.r.size(); ++i) {
    const std::size_t r = sel.r[i];
    if (r == sel.s) throw IndexError("dual_multi: r == s");
    if (mu[i] < 0) throw DomainError("dual_multi: multipliers must be >= 0");
    const double psi = r < sel.s ? 1.0 : -1.0;
    st.mean_stat(r, sel.s, mrs.data());
    for (std::size_t c = 0; c < d; ++c) num[c] -= mu[i] * psi * mrs[c];
    l -= mu[i] * psi;
    lin += mu[i] * psi * st.qbar(r, sel.s);
  }
  if (!(l > kDomainEps)) throw DomainError("dual_multi: l(mu) <= 0");
  for (std::size_t c = 0; c < d; ++c) num[c] /= l;
  if (!mean_domain_contains(m, num)) {
    throw DomainError("dual_multi: m(mu) outside the statistic domain");
  }
  const double len = static_cast<double>(sel.t - sel.s);
  return len * (-l * dstar(m, num) + lin) + st.q(sel.s) + beta;
}

// x-parameterised decision function; positive anywhere feasible implies the
// dual exceeds Q_t + beta.
inline double decision_multi(const ModelFamily& m, const StatStore& st,
                             const ConstraintSelection& sel,
                             std::span<const double> x) {
  if (!(sel.s < sel.t)) throw IndexError("decision_multi: need s < t");
  if (x.size() != sel.r.size()) {
    throw ConfigError("decision_multi: one coordinate per constraint");
  }
  const std::size_t d = st.dim();
  std::vector<double> sig = st.mean_stat(sel.s, sel.t);
  std::vector<double> dm(d);
  double phi = st.qbar(sel.s, sel.t);
  for (std::size_t i = 0; i < sel.r.size(); ++i) {
    if (x[i] < 0) throw DomainError("decision_multi: x must be >= 0");
    st.delta_mean(sel.r[i], sel.s, sel.t, dm.data());
    for (std::size_t c = 0; c < d; ++c) sig[c] += x[i] * dm[c];
    phi += x[i] * st.delta_q(sel.r[i], sel.s, sel.t);
  }
  return -dstar(m, sig) - phi;
}

namespace detail {

// Gauss-Jordan inverse with partial pivoting for small dense systems.
// Throws SingularSystem on a vanishing pivot; writes the 1-norm condition
// estimate to cond.
inline std::vector<double> invert_dense(std::vector<double> a, std::size_t d,
                                        double* cond) {
  std::vector<double> inv(d * d, 0.0);
  double norm_a = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double colsum = 0.0;
    for (std::size_t i = 0; i < d; ++i) colsum += std::abs(a[i * d + j]);
    norm_a = std::max(norm_a, colsum);
  }
  for (std::size_t i = 0; i < d; ++i) inv[i * d + i] = 1.0;
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < d; ++i) {
      if (std::abs(a[i * d + col]) > std::abs(a[piv * d + col])) piv = i;
    }
    const double p = a[piv * d + col];
    if (p == 0.0 || !std::isfinite(p)) {
      throw SingularSystem("invert_dense: rank-deficient system");
    }
    if (piv != col) {
      for (std::size_t j = 0; j < d; ++j) {
        std::swap(a[col * d + j], a[piv * d + j]);
        std::swap(inv[col * d + j], inv[piv * d + j]);
      }
    }
    const double ip = 1.0 / a[col * d + col];
    for (std::size_t j = 0; j < d; ++j) {
      a[col * d + j] *= ip;
      inv[col * d + j] *= ip;
    }
    for (std::size_t i = 0; i < d; ++i) {
      if (i == col) continue;
      const double f = a[i * d + col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        a[i * d + j] -= f * a[col * d + j];
        inv[i * d + j] -= f * inv[col * d + j];
      }
    }
  }
  double norm_i = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double colsum = 0.0;
    for (std::size_t i = 0; i < d; ++i) colsum += std::abs(inv[i * d + j]);
    norm_i = std::max(norm_i, colsum);
  }
  if (cond) *cond = norm_a * norm_i;
  return inv;
}

}  // namespace detail

// Critical point of the decision function for |R| == stat_dim constraints:
// solve (Delta S)^T y = -Delta Q for the natural parameter, map through the
// mean map, then solve (Delta S) x = grad A(y) - Sbar_st. Returns nullopt
// when y leaves the natural domain, x leaves the positive orthant, or the
// system is too ill-conditioned to trust.
inline std::optional<std::vector<double>> decision_multi_critical(
    const ModelFamily& m, const StatStore& st, const ConstraintSelection& sel) {
  const std::size_t d = st.dim();
  if (sel.r.size() != d) {
    throw ConfigError("decision_multi_critical: needs |R| == stat_dim");
  }
  if (!(sel.s < sel.t)) throw IndexError("decision_multi_critical: s < t");
  // column j of B is the delta-mean vector of constraint j
  std::vector<double> B(d * d), g(d), dm(d);
  for (std::size_t j = 0; j < d; ++j) {
    st.delta_mean(sel.r[j], sel.s, sel.t, dm.data());
    for (std::size_t i = 0; i < d; ++i) B[i * d + j] = dm[i];
    g[j] = st.delta_q(sel.r[j], sel.s, sel.t);
  }
  double cond = 0.0;
  const std::vector<double> Binv = detail::invert_dense(B, d, &cond);
  if (!(cond < 1e12)) return std::nullopt;
  // y = -(B^T)^{-1} g = -(B^{-1})^T g
  std::vector<double> y(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += Binv[j * d + i] * g[j];
    y[i] = -acc;
  }
  if (!natural_domain_contains(m, y)) return std::nullopt;
  std::vector<double> sig(d);
  mean_map(m, y, sig);
  const std::vector<double> mst = st.mean_stat(sel.s, sel.t);
  std::vector<double> x(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += Binv[j * d + i] * (sig[i] - mst[i]);
    x[j] = acc;
  }
  for (double xi : x) {
    if (!(xi >= 0.0) || !std::isfinite(xi)) return std::nullopt;
  }
  return x;
}

//======================================================================
// projected gradient ascent on the dual (quasi-Newton step length)
//======================================================================

// Maximises the concave dual over the nonnegative multipliers with projected
// gradient ascent and Barzilai-Borwein step lengths. Every iterate is a
// genuine dual evaluation, so the returned value never exceeds the true sup.
inline double quasi_newton_max(const ModelFamily& m, const StatStore& st,
                               const ConstraintSelection& sel,
                               const DualEvalPlan& plan, double beta) {
  const std::size_t q = sel.r.size();
  const std::size_t d = st.dim();
  if (q == 0) throw ConfigError("quasi_newton_max: empty constraint set");
  const double len = static_cast<double>(sel.t - sel.s);

  std::vector<double> mst = st.mean_stat(sel.s, sel.t);
  std::vector<double> psi(q), qb(q), mrs(q * d);
  for (std::size_t i = 0; i < q; ++i) {
    psi[i] = sel.r[i] < sel.s ? 1.0 : -1.0;
    qb[i] = st.qbar(sel.r[i], sel.s);
    st.mean_stat(sel.r[i], sel.s, &mrs[i * d]);
  }

  std::vector<double> mm(d), inv(d);
  // dual value and gradient at mu; false when infeasible
  auto eval = [&](const std::vector<double>& mu, double* D,
                  double* grad) -> bool {
    double l = 1.0, lin = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      l -= mu[i] * psi[i];
      lin += mu[i] * psi[i] * qb[i];
    }
    if (!(l > 1e-12)) return false;
    for (std::size_t c = 0; c < d; ++c) {
      double acc = mst[c];
      for (std::size_t i = 0; i < q; ++i) acc -= mu[i] * psi[i] * mrs[i * d + c];
      mm[c] = acc / l;
    }
    if (!mean_domain_contains(m, mm)) return false;
    const double ds = dstar(m, mm);
    *D = len * (-l * ds + lin) + st.q(sel.s) + beta;
    if (grad) {
      grad_a_inv(m, mm, inv);
      for (std::size_t i = 0; i < q; ++i) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          dot += inv[c] * (mm[c] - mrs[i * d + c]);
        }
        grad[i] = len * psi[i] * (ds - dot + qb[i]);
      }
    }
    return true;
  };

  std::vector<double> mu(q, 0.0), g(q), mu_new(q), g_new(q), dir(q);
  double cur = 0.0;
  if (!eval(mu, &cur, g.data())) {
    throw DegenerateSegment("quasi_newton_max: infeasible at mu = 0");
  }
  double gnorm0 = 0.0;
  for (double gi : g) gnorm0 += gi * gi;
  double eta = 1.0 / (1.0 + std::sqrt(gnorm0));

  for (int iter = 0; iter < plan.qn_max_iters; ++iter) {
    double pgnorm = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      dir[i] = (mu[i] <= 0.0 && g[i] < 0.0) ? 0.0 : g[i];
      pgnorm += dir[i] * dir[i];
    }
    if (std::sqrt(pgnorm) <= plan.qn_tol * (1.0 + std::abs(cur))) break;

    double step = eta;
    double val = 0.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k) {
      for (std::size_t i = 0; i < q; ++i) {
        mu_new[i] = std::max(0.0, mu[i] + step * dir[i]);
      }
      if (eval(mu_new, &val, g_new.data()) && val > cur) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    double sy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      const double si = mu_new[i] - mu[i];
      const double yi = g_new[i] - g[i];
      sy += si * yi;
      yy += yi * yi;
    }
    eta = yy > 0.0 ? std::clamp(std::abs(sy) / yy, 1e-14, 1e14) : step * 2.0;
    mu.swap(mu_new);
    g.swap(g_new);
    cur = val;
  }
  return cur;
}

//======================================================================
// Gaussian closed-form max of the 1-constraint dual
//======================================================================

// With R^2 = ||Sbar_rs||^2 + 2 Qbar_rs:
//   ||Delta|| >= R      -> max at mu = 0 (the PELT value)
//   0 < R, ||Delta|| < R -> PELT value + (t-s)/2 (||Delta|| - R)^2
//   R^2 <= 0            -> the dual is decreasing in mu, so the max is again
//                          the PELT value (occurrence counted in stats).
inline double gauss_closed_max(const ModelFamily& m, const StatStore& st,
                               std::size_t r, std::size_t s, std::size_t t,
                               double beta, DualStats* stats = nullptr) {
  if (m.family != Family::gauss) {
    throw ConfigError("gauss_closed_max: gauss model only");
  }
  detail::require_order(r, s, t, "gauss_closed_max");
  const std::size_t d = st.dim();
  const double ilst = 1.0 / static_cast<double>(t - s);
  const double ilrs = 1.0 / static_cast<double>(s - r);
  double nst = 0.0, nd = 0.0, nrs = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double a = st.sum_stat(s, t, c) * ilst;
    const double b = st.sum_stat(r, s, c) * ilrs;
    nst += a * a;
    nrs += b * b;
    nd += (a - b) * (a - b);
  }
  const double len = static_cast<double>(t - s);
  const double pelt = -0.5 * len * nst + st.q(s) + beta;
  const double r2 = nrs + 2.0 * st.qbar(r, s);
  if (r2 <= 0.0) {
    if (stats) stats->gauss_mu0_radicand++;
    return pelt;
  }
  const double gap = std::sqrt(nd) - std::sqrt(r2);
  if (gap >= 0.0) return pelt;
  return pelt + 0.5 * len * gap * gap;
}

//======================================================================
// mean-variance closed forms (single component)
//======================================================================

namespace detail {

struct MeanvarEval {
  double x = 0;      // clamped argmax
  double value = 0;  // decision value there
};

// One-constraint closed form: the decision function is
//   0.5 (1 + log P(x)) - Qbar_st - x h,  P(x) = -du^2 x^2 + L x + V,
// concave on {P > 0}; its critical points solve
//   2 h du^2 x^2 - 2 (h L + du^2) x + (L - 2 h V) = 0.
inline MeanvarEval meanvar_max_1c(const StatStore& st, std::size_t r,
                                  std::size_t s, std::size_t t) {
  require_order(r, s, t, "meanvar_closed");
  const double ilst = 1.0 / static_cast<double>(t - s);
  const double ilrs = 1.0 / static_cast<double>(s - r);
  const double u = st.sum_stat(s, t, 0) * ilst;
  const double v = st.sum_stat(s, t, 1) * ilst;
  const double V = v - u * u;
  if (!(V > kDomainEps)) {
    throw DegenerateSegment("meanvar_closed: constant test segment");
  }
  const double du = u - st.sum_stat(r, s, 0) * ilrs;
  const double dv = v - st.sum_stat(r, s, 1) * ilrs;
  const double qst = st.qbar(s, t);
  const double h = qst - st.qbar(r, s);
  if (!std::isfinite(h)) {
    // infinitely costly candidate on one side: every x > 0 is -inf (or +inf
    // when s itself is the infinite one), so only the x = 0 value remains
    return {0.0, 0.5 * (1.0 + std::log(V)) - qst};
  }
  const double D2 = du * du;
  const double L = dv - 2.0 * u * du;

  const double a = 2.0 * h * D2;
  const double b = -2.0 * (h * L + D2);
  const double c = L - 2.0 * h * V;

  auto P = [&](double x) { return V + x * (L - x * D2); };
  auto value_at = [&](double x) {
    const double px = P(x);
    if (!(px > kDomainEps)) return -kInf;
    return 0.5 * (1.0 + std::log(px)) - qst - x * h;
  };

  double best_x = 0.0;
  double best_v = value_at(0.0);
  auto consider = [&](double x) {
    if (!std::isfinite(x)) return;
    const double xc = std::max(0.0, x);
    const double val = value_at(xc);
    if (val > best_v) {
      best_v = val;
      best_x = xc;
    }
  };
  if (a != 0.0) {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      if (b != 0.0) {
        const double qq = -0.5 * (b + std::copysign(sq, b));
        consider(qq / a);
        if (qq != 0.0) consider(c / qq);
      } else {
        consider(sq / (2.0 * a));
        consider(-sq / (2.0 * a));
      }
    }
  } else if (b != 0.0) {
    consider(-c / b);
  }
  return {best_x, best_v};
}

}  // namespace detail

// Closed-form sup of the mean-variance decision function. One constraint by
// default; with two_constraints the result is the best of the two axis
// problems and the joint interior critical point (r < r2 < s required).
inline double meanvar_closed(const ModelFamily& m, const StatStore& st,
                             std::size_t r, std::size_t s, std::size_t t,
                             double beta, bool two_constraints = false,
                             std::size_t r2 = 0) {
  (void)beta;
  if (m.family != Family::meanvar || st.dim() != 2) {
    throw ConfigError("meanvar_closed: univariate meanvar model only");
  }
  const auto e1 = detail::meanvar_max_1c(st, r, s, t);
  if (!two_constraints) return e1.value;
  if (!(r < r2 && r2 < s)) {
    throw IndexError("meanvar_closed: need r < r2 < s");
  }
  const auto e2 = detail::meanvar_max_1c(st, r2, s, t);
  double best = std::max(e1.value, e2.value);

  // joint interior critical point via the 2x2 system
  const double ilst = 1.0 / static_cast<double>(t - s);
  const double u = st.sum_stat(s, t, 0) * ilst;
  const double v = st.sum_stat(s, t, 1) * ilst;
  const double qst = st.qbar(s, t);
  double du1, dv1, du2, dv2;
  {
    const double il = 1.0 / static_cast<double>(s - r);
    du1 = u - st.sum_stat(r, s, 0) * il;
    dv1 = v - st.sum_stat(r, s, 1) * il;
  }
  {
    const double il = 1.0 / static_cast<double>(s - r2);
    du2 = u - st.sum_stat(r2, s, 0) * il;
    dv2 = v - st.sum_stat(r2, s, 1) * il;
  }
  const double h1 = qst - st.qbar(r, s);
  const double h2 = qst - st.qbar(r2, s);
  const double det = du1 * dv2 - du2 * dv1;
  if (det != 0.0 && std::isfinite(det)) {
    // (B^T) y = -h
    const double y1 = (-h1 * dv2 + h2 * dv1) / det;
    const double y2 = (-du1 * h2 + du2 * h1) / det;
    if (y2 < -kDomainEps) {
      const double sv2 = -0.5 / y2;      // sigma variance
      const double smn = y1 * sv2;       // sigma mean
      const double a1 = smn - u;
      const double a2 = (smn * smn + sv2) - v;
      const double x1 = (a1 * dv2 - du2 * a2) / det;
      const double x2 = (du1 * a2 - a1 * dv1) / det;
      if (x1 >= 0.0 && x2 >= 0.0 && std::isfinite(x1) && std::isfinite(x2)) {
        const double val =
            0.5 * (1.0 + std::log(sv2)) - (qst + x1 * h1 + x2 * h2);
        best = std::max(best, val);
      }
    }
  }
  return best;
}

namespace detail {

// Pruning test on the meanvar closed forms, slack applied on the dual scale.
inline bool meanvar_test(const ModelFamily& m, const StatStore& st,
                         std::size_t r, std::size_t s, std::size_t t,
                         bool two_constraints, std::size_t r2) {
  const double len = static_cast<double>(t - s);
  const auto e1 = meanvar_max_1c(st, r, s, t);
  if (len * e1.value / (1.0 + e1.x) > kPruneSlack) return true;
  if (!two_constraints) return false;
  const auto e2 = meanvar_max_1c(st, r2, s, t);
  if (len * e2.value / (1.0 + e2.x) > kPruneSlack) return true;
  // joint evaluation through the generic closed form; a strictly positive
  // decision value certifies the dual above threshold at that point
  const double joint = meanvar_closed(m, st, r, s, t, 0.0, true, r2);
  return len * joint > kPruneSlack;
}

}  // namespace detail

//======================================================================
// random-multiplier evaluation
//======================================================================

// One uniform draw on [0, 0.999 mu_max); returns the dual value there.
inline double dual_random_eval(const ModelFamily& m, const StatStore& st,
                               std::size_t r, std::size_t s, std::size_t t,
                               double beta, Rng& rng) {
  const DualDomain dom = dual_domain_1c(m, st, r, s, t);
  const double mu = 0.999 * dom.mu_max * rng.u01();
  if (mu <= 0.0) {
    // boundary statistic (mu_max = 0) or a zero draw: dual at mu = 0
    const auto mst = st.mean_stat(s, t);
    const double dl = dstar_limit(m, mst);
    if (std::isinf(dl)) {
      throw DegenerateSegment("dual_random_eval: degenerate segment at mu=0");
    }
    return -static_cast<double>(t - s) * dl + st.q(s) + beta;
  }
  return dual_1c(m, st, r, s, t, mu, beta);
}

}  // namespace dust
