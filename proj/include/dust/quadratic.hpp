#pragma once

#include <cmath>

#include "dust/common.hpp"

namespace dust {

//======================================================================
// bivariate quadratics q(t1,t2) = A t1^2 + 2B t1 t2 + C t2^2 + 2D t1 + 2E t2 + F
//======================================================================

struct QuadraticCoeffs {
  double A = 0, B = 0, C = 0, D = 0, E = 0, F = 0;

  double eval(double t1, double t2) const {
    return A * t1 * t1 + 2 * B * t1 * t2 + C * t2 * t2 + 2 * D * t1 +
           2 * E * t2 + F;
  }
  // determinant of the quadratic part; > 0 together with A > 0 means strictly
  // convex
  double disc() const { return A * C - B * B; }
  bool strictly_convex(double eps = kDomainEps) const {
    return A > eps && disc() > eps;
  }
};

// Minimum value of a strictly convex quadratic.
inline double quadratic_min_value(const QuadraticCoeffs& q) {
  const double d = q.disc();
  if (!(q.A > 0) || !(d > 0)) {
    throw DegenerateSegment("quadratic_min_value: quadratic is not strictly convex");
  }
  return q.F - (q.C * q.D * q.D - 2 * q.B * q.D * q.E + q.A * q.E * q.E) / d;
}

// Coefficients of (1+mu) q_st - mu q_rt, the combination whose minimum is the
// one-constraint dual of the pruning problem at multiplier mu.
inline QuadraticCoeffs quadratic_combo(const QuadraticCoeffs& st,
                                       const QuadraticCoeffs& rt, double mu) {
  QuadraticCoeffs c;
  c.A = st.A + mu * (st.A - rt.A);
  c.B = st.B + mu * (st.B - rt.B);
  c.C = st.C + mu * (st.C - rt.C);
  c.D = st.D + mu * (st.D - rt.D);
  c.E = st.E + mu * (st.E - rt.E);
  c.F = st.F + mu * (st.F - rt.F);
  return c;
}

// Dual value at multiplier mu; DomainError if the combination has lost strict
// convexity (mu at or past mu_max).
inline double quadratic_dual_value(const QuadraticCoeffs& st,
                                   const QuadraticCoeffs& rt, double mu) {
  if (mu < 0) throw DomainError("quadratic_dual_value: mu < 0");
  const QuadraticCoeffs c = quadratic_combo(st, rt, mu);
  if (!c.strictly_convex()) {
    throw DomainError("quadratic_dual_value: combination not strictly convex");
  }
  return quadratic_min_value(c);
}

// Largest multiplier keeping (1+mu) q_st - mu q_rt strictly convex, from the
// discriminant of its quadratic part:
//   w1^2 = A_st C_st - B_st^2,  w2^2 = A_rt C_rt - B_rt^2,
//   2 Delta = A_st C_rt + A_rt C_st - 2 B_st B_rt.
// Returns +inf when every mu >= 0 stays convex. The untreated boundary
// configurations raise TieBreakUnsupported.
inline double quadratic_mu_max(const QuadraticCoeffs& st,
                               const QuadraticCoeffs& rt) {
  if (!st.strictly_convex()) {
    throw DegenerateSegment("quadratic_mu_max: q_st not strictly convex");
  }
  const double w1 = st.disc();
  const double w2 = rt.disc();
  const double delta = 0.5 * (st.A * rt.C + rt.A * st.C - 2 * st.B * rt.B);
  // disc(mu) = a mu^2 + b mu + c with c = w1 > 0; mu_max is its smallest
  // positive root (convexity is lost there), +inf when none exists.
  const double a = w1 - 2 * delta + w2;
  const double b = 2 * (w1 - delta);
  if (a == 0 && b == 0) {
    // identical quadratic parts: disc(mu) = w1 > 0 for every mu, so convexity
    // never degrades; only a fully identical pair is a genuine tie
    if (st.D == rt.D && st.E == rt.E && st.F == rt.F) {
      throw TieBreakUnsupported("quadratic_mu_max: identical quadratics");
    }
    return kInf;
  }
  if (a == 0) return b < 0 ? -w1 / b : kInf;
  const double rad = delta * delta - w1 * w2;  // = (b^2 - 4 a c) / 4
  if (a < 0) {
    // opens downward with disc(0) > 0: exactly one positive root
    return (delta - w1 - std::sqrt(rad)) / a;
  }
  // opens upward: positive roots require delta > w1 and a real discriminant
  if (!(delta > w1) || rad < 0) return kInf;
  return (delta - w1 - std::sqrt(rad)) / a;
}

// Per-segment coefficients of the simple-regression SSE
// sum (t1 x_i + t2 - y_i)^2 over the segment, from prefix sums.
inline QuadraticCoeffs regression_coeffs(double sxx, double sx, double sxy,
                                         double sy, double syy, double len) {
  QuadraticCoeffs q;
  q.A = sxx;
  q.B = sx;
  q.C = len;
  q.D = -sxy;
  q.E = -sy;
  q.F = syy;
  return q;
}

}  // namespace dust
