#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dust/common.hpp"
#include "dust/model.hpp"
#include "dust/stat_store.hpp"

namespace dust {

//======================================================================
// explicit samplers (fully deterministic given the Rng state)
//======================================================================

namespace sample {

inline double normal(Rng& rng) {
  const double u1 = rng.u01(), u2 = rng.u01();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline double exponential_rate(Rng& rng, double rate) {
  if (!(rate > 0)) throw ConfigError("exponential rate must be > 0");
  return -std::log1p(-rng.u01()) / rate;
}

inline long poisson(Rng& rng, double lambda) {
  if (!(lambda >= 0)) throw ConfigError("poisson rate must be >= 0");
  const double u = rng.u01();
  double p = std::exp(-lambda), cdf = p;
  long k = 0;
  while (u > cdf && k < 100000) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

inline long geometric(Rng& rng, double p) {
  if (!(p > 0 && p < 1)) throw ConfigError("geometric p must be in (0,1)");
  // trials until first success, support {1, 2, ...}
  const double u = rng.u01();
  const double k = std::ceil(std::log1p(-u) / std::log1p(-p));
  return std::max(1L, static_cast<long>(k));
}

inline long binomial(Rng& rng, long count, double p) {
  if (!(p >= 0 && p <= 1)) throw ConfigError("binomial p must be in [0,1]");
  long k = 0;
  for (long i = 0; i < count; ++i) {
    if (rng.u01() < p) ++k;
  }
  return k;
}

// failures before the size-th success
inline long negbin(Rng& rng, double size, double p) {
  if (!(p > 0 && p < 1)) throw ConfigError("negbin p must be in (0,1)");
  const double u = rng.u01();
  double pmf = std::pow(p, size), cdf = pmf;
  long k = 0;
  while (u > cdf && k < 1000000) {
    pmf *= (size + static_cast<double>(k)) / static_cast<double>(k + 1) *
           (1.0 - p);
    ++k;
    cdf += pmf;
  }
  return k;
}

}  // namespace sample

//======================================================================
// piecewise-constant simulation
//======================================================================

struct SimSpec {
  Family family = Family::gauss;
  std::size_t n = 100;
  std::size_t segments = 1;   // blocks of equal length, params alternate
  double p1 = 0.0, p2 = 1.0;  // primary parameter per block parity
  double s1 = 1.0, s2 = 1.0;  // meanvar: standard deviations
  std::uint64_t seed = 1;
  std::size_t components = 1;
  double count_norm = 10.0;   // binomial count / negbin size
};

struct SimResult {
  Series data;
  // right endpoints of the true segments (1-based, last entry is n)
  std::vector<std::size_t> changepoints;
};

inline SimResult simulate(const SimSpec& spec) {
  if (spec.n == 0) throw ConfigError("simulate: n must be positive");
  if (spec.segments == 0 || spec.segments > spec.n) {
    throw ConfigError("simulate: need 1 <= segments <= n");
  }
  if (spec.components == 0) throw ConfigError("simulate: components >= 1");
  if (spec.family == Family::quadratic_regression) {
    throw ConfigError("simulate: quadratic-regression has no sampler");
  }
  const std::size_t n = spec.n, k = spec.segments;
  std::vector<std::size_t> bounds(k + 1, 0);
  for (std::size_t i = 0; i <= k; ++i) {
    bounds[i] = (i * n) / k;
  }
  Rng rng(spec.seed);
  Series out;
  out.n = n;
  out.cols = spec.components;
  out.values.assign(n * spec.components, 0.0);
  const long count = std::max(1L, std::lround(spec.count_norm));
  for (std::size_t b = 0; b < k; ++b) {
    const bool odd = (b % 2) != 0;
    const double p = odd ? spec.p2 : spec.p1;
    const double sd = odd ? spec.s2 : spec.s1;
    for (std::size_t i = bounds[b]; i < bounds[b + 1]; ++i) {
      for (std::size_t c = 0; c < spec.components; ++c) {
        double y = 0.0;
        switch (spec.family) {
          case Family::gauss:
            y = p + sample::normal(rng);
            break;
          case Family::poisson:
            y = static_cast<double>(sample::poisson(rng, p));
            break;
          case Family::exponential:
            y = sample::exponential_rate(rng, p);
            break;
          case Family::geometric:
            y = static_cast<double>(sample::geometric(rng, p));
            break;
          case Family::bernoulli:
            y = rng.u01() < p ? 1.0 : 0.0;
            break;
          case Family::binomial:
            y = static_cast<double>(sample::binomial(rng, count, p));
            break;
          case Family::negbin:
            y = static_cast<double>(
                sample::negbin(rng, spec.count_norm, p));
            break;
          case Family::variance:
            if (!(p > 0)) throw ConfigError("variance: sd must be > 0");
            y = p * sample::normal(rng);
            break;
          case Family::meanvar:
            if (!(sd > 0)) throw ConfigError("meanvar: sd must be > 0");
            y = p + sd * sample::normal(rng);
            break;
          case Family::quadratic_regression:
            break;  // rejected above
        }
        out.values[i * spec.components + c] = y;
      }
    }
  }
  SimResult res;
  res.data = std::move(out);
  for (std::size_t i = 1; i < k; ++i) {
    if (bounds[i] > 0 && bounds[i] < n) res.changepoints.push_back(bounds[i]);
  }
  res.changepoints.push_back(n);
  return res;
}

//======================================================================
// worst-case instances (no candidate is ever prunable)
//======================================================================

// Gaussian equalised means: s_t = Y - sqrt(2 beta (n-t) / (n t)) with
// Y = sqrt(2 beta (n-1) / n); the data are the increments of t * s_t. The
// factor 2 places the ties at exactly Q_t + beta under the halved quadratic
// cost A(theta) = theta^2 / 2 used by the gauss model.
inline std::vector<double> worstcase_gauss_means(std::size_t n, double beta) {
  if (n < 2) throw ConfigError("worstcase_gauss: n must be >= 2");
  if (!(beta > 0) || !std::isfinite(beta)) {
    throw ConfigError("worstcase_gauss: penalty must be positive");
  }
  const double nd = static_cast<double>(n);
  const double Y = std::sqrt(2.0 * beta * (nd - 1.0) / nd);
  std::vector<double> s(n);
  for (std::size_t t = 1; t <= n; ++t) {
    const double td = static_cast<double>(t);
    s[t - 1] = Y - std::sqrt(2.0 * beta * (nd - td) / (nd * td));
  }
  return s;
}

inline Series worstcase_gauss(std::size_t n, double beta) {
  const std::vector<double> s = worstcase_gauss_means(n, beta);
  Series out;
  out.n = n;
  out.cols = 1;
  out.values.resize(n);
  double prev = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    const double cur = static_cast<double>(t) * s[t - 1];
    out.values[t - 1] = cur - prev;
    prev = cur;
  }
  return out;
}

namespace detail {

// g_t(x) = (t/n) D*(x) + ((n-t)/n) D*((nY - tx)/(n-t)), strictly decreasing
// left of Y; the equalised mean solves g_t(x) = beta/n + D*(Y).
struct WorstcaseEq {
  Family f;
  double n, t, Y;
  double operator()(double x) const {
    const double partner = (n * Y - t * x) / (n - t);
    return (t / n) * dstar1(f, x) + ((n - t) / n) * dstar1(f, partner);
  }
};

}  // namespace detail

// Equalised statistic means for any one-parameter family: every prefix (0,t]
// ties the no-change cost against the best single-change alternative, so no
// pruning test can ever fire. Throws InfeasiblePenalty when beta exceeds
// what the statistic domain admits at some t.
inline std::vector<double> worstcase_expfam_means(Family f, std::size_t n,
                                                  double Y, double beta) {
  if (f == Family::meanvar || f == Family::quadratic_regression) {
    throw ConfigError("worstcase_expfam: one-parameter families only");
  }
  if (n < 2) throw ConfigError("worstcase_expfam: n must be >= 2");
  if (!(beta > 0) || !std::isfinite(beta)) {
    throw ConfigError("worstcase_expfam: penalty must be positive");
  }
  const Interval om = mean_domain1(f);
  if (!om.contains_strict(Y)) {
    throw ConfigError("worstcase_expfam: Y outside the statistic domain");
  }
  const double nd = static_cast<double>(n);
  const double target = beta / nd + dstar1(f, Y);
  std::vector<double> s(n, Y);
  for (std::size_t t = 1; t < n; ++t) {
    const double td = static_cast<double>(t);
    const detail::WorstcaseEq g{f, nd, td, Y};
    // partner stays below om.hi only for x above this cut
    double lo_eff = om.lo;
    if (std::isfinite(om.hi)) {
      lo_eff = std::max(lo_eff, (nd * Y - (nd - td) * om.hi) / td);
    }
    // probe toward lo_eff until the equation becomes reachable
    double xlo = 0.0;
    bool found = false;
    if (std::isfinite(lo_eff)) {
      for (int k = 1; k <= 60 && !found; ++k) {
        const double x = lo_eff + (Y - lo_eff) * std::ldexp(1.0, -k);
        try {
          if (g(x) >= target) {
            xlo = x;
            found = true;
          }
        } catch (const DomainError&) {
        }
      }
    } else {
      for (int k = 0; k <= 400 && !found; ++k) {
        const double x = Y - std::ldexp(1.0, k);
        try {
          if (g(x) >= target) {
            xlo = x;
            found = true;
          }
        } catch (const DomainError&) {
        }
      }
    }
    if (!found) {
      throw InfeasiblePenalty(
          "worstcase_expfam: penalty too large for the statistic domain at "
          "t = " +
          std::to_string(t));
    }
    double a = xlo, b = Y;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      double gv;
      try {
        gv = g(mid);
      } catch (const DomainError&) {
        a = mid;  // outside on the low side
        continue;
      }
      if (gv >= target) {
        a = mid;
      } else {
        b = mid;
      }
    }
    s[t - 1] = 0.5 * (a + b);
  }
  return s;
}

struct WorstcaseOptions {
  bool round_values = false;   // round integer-valued families
  double count_norm = 10.0;    // binomial count / negbin size
};

// Raw worst-case series recovered from the equalised statistic means.
inline Series worstcase_expfam(Family f, std::size_t n, double Y, double beta,
                               const WorstcaseOptions& opt = {}) {
  const std::vector<double> s = worstcase_expfam_means(f, n, Y, beta);
  Series out;
  out.n = n;
  out.cols = 1;
  out.values.resize(n);
  double prev = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    const double cur = static_cast<double>(t) * s[t - 1];
    double inc = cur - prev;
    prev = cur;
    double y = inc;
    switch (f) {
      case Family::gauss:
        break;
      case Family::poisson:
      case Family::exponential:
        y = std::max(0.0, inc);
        break;
      case Family::geometric:
        y = std::max(1.0, inc);
        break;
      case Family::bernoulli:
        y = std::clamp(inc, 0.0, 1.0);
        break;
      case Family::binomial:
        y = std::clamp(inc, 0.0, 1.0) * opt.count_norm;
        break;
      case Family::negbin:
        y = std::max(0.0, inc) * opt.count_norm;
        break;
      case Family::variance:
        y = std::sqrt(std::max(0.0, inc));
        break;
      case Family::meanvar:
      case Family::quadratic_regression:
        break;  // rejected in the solver
    }
    if (opt.round_values) {
      switch (f) {
        case Family::poisson:
        case Family::geometric:
        case Family::binomial:
        case Family::negbin:
          y = std::round(y);
          break;
        case Family::bernoulli:
          y = y < 0.5 ? 0.0 : 1.0;
          break;
        default:
          break;
      }
    }
    out.values[t - 1] = y;
  }
  return out;
}

}  // namespace dust
