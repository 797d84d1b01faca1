#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "dust/common.hpp"

namespace dust {

//======================================================================
// model families
//======================================================================

// One-parameter exponential families keyed by their sufficient statistic,
// plus the two-parameter Gaussian mean-variance model and least-squares
// simple regression (which uses the dedicated quadratic machinery).
enum class Family {
  gauss,
  poisson,
  exponential,
  geometric,
  bernoulli,
  binomial,
  negbin,
  variance,
  meanvar,
  quadratic_regression,
};

inline const char* family_name(Family f) {
  switch (f) {
    case Family::gauss: return "gauss";
    case Family::poisson: return "poisson";
    case Family::exponential: return "exponential";
    case Family::geometric: return "geometric";
    case Family::bernoulli: return "bernoulli";
    case Family::binomial: return "binomial";
    case Family::negbin: return "negbin";
    case Family::variance: return "variance";
    case Family::meanvar: return "meanvar";
    case Family::quadratic_regression: return "quadratic-regression";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (Family f : {Family::gauss, Family::poisson, Family::exponential,
                   Family::geometric, Family::bernoulli, Family::binomial,
                   Family::negbin, Family::variance, Family::meanvar,
                   Family::quadratic_regression}) {
    if (s == family_name(f)) return f;
  }
  throw ConfigError("unknown model '" + std::string(s) + "'");
}

struct ModelFamily {
  Family family = Family::gauss;
  // independent data columns; each contributes per_component_dim() statistic
  // coordinates with identical change locations
  int components = 1;
  // binomial trial count / negbin success count; data are divided by it so
  // the statistic mean lands in the canonical domain
  double count_norm = 10.0;
  // gauss only: divide the series by one global sample sd at ingestion
  bool standardize = false;

  int per_component_dim() const { return family == Family::meanvar ? 2 : 1; }
  int stat_dim() const { return components * per_component_dim(); }

  // Multiplicative factor applied to a*log(n) penalties so one value of `a`
  // is comparable across families.
  double penalty_scale() const {
    switch (family) {
      case Family::gauss: return 1.0;
      case Family::poisson: return 2.0 / 3.0;
      case Family::exponential: return 0.75;
      case Family::geometric: return 2.0 / 3.0;
      case Family::bernoulli: return 2.0 / 3.0;
      case Family::binomial: return 1.0 / 6.0;
      case Family::negbin: return 0.1;
      case Family::variance: return 1.0;
      case Family::meanvar: return 1.0;
      case Family::quadratic_regression: return 1.0;
    }
    return 1.0;
  }
};

namespace detail {

inline void require_stat_family(const ModelFamily& m, const char* op) {
  if (m.family == Family::quadratic_regression) {
    throw ConfigError(std::string(op) +
                      ": quadratic-regression costs use the quadratic ops");
  }
}

}  // namespace detail

//======================================================================
// scalar maps for the one-parameter families
//======================================================================

// Natural-parameter domain of A.
inline Interval natural_domain1(Family f) {
  switch (f) {
    case Family::gauss:
    case Family::poisson:
    case Family::bernoulli:
    case Family::binomial:
      return {-kInf, kInf};
    case Family::exponential:
    case Family::geometric:
    case Family::negbin:
    case Family::variance:
      return {-kInf, 0.0};
    default:
      throw ConfigError("natural_domain1: not a one-parameter family");
  }
}

// Domain of the statistic mean (image of the mean map).
inline Interval mean_domain1(Family f) {
  switch (f) {
    case Family::gauss: return {-kInf, kInf};
    case Family::poisson: return {0.0, kInf};
    case Family::exponential: return {0.0, kInf};
    case Family::geometric: return {1.0, kInf};
    case Family::bernoulli: return {0.0, 1.0};
    case Family::binomial: return {0.0, 1.0};
    case Family::negbin: return {0.0, kInf};
    case Family::variance: return {0.0, kInf};
    default:
      throw ConfigError("mean_domain1: not a one-parameter family");
  }
}

// log-partition A(theta)
inline double log_partition1(Family f, double th) {
  switch (f) {
    case Family::gauss: return 0.5 * th * th;
    case Family::poisson: return std::exp(th);
    case Family::exponential:
      if (th >= 0) throw DomainError("exponential: theta must be < 0");
      return -std::log(-th);
    case Family::geometric:
      if (th >= 0) throw DomainError("geometric: theta must be < 0");
      return -std::log(std::exp(-th) - 1.0);
    case Family::bernoulli:
    case Family::binomial:
      // stable log(1+e^th)
      return th > 0 ? th + std::log1p(std::exp(-th)) : std::log1p(std::exp(th));
    case Family::negbin:
      if (th >= 0) throw DomainError("negbin: theta must be < 0");
      return -std::log1p(-std::exp(th));
    case Family::variance:
      if (th >= 0) throw DomainError("variance: theta must be < 0");
      return -0.5 * std::log(-2.0 * th);
    default:
      throw ConfigError("log_partition1: not a one-parameter family");
  }
}

// mean map A'(theta)
inline double mean_map1(Family f, double th) {
  switch (f) {
    case Family::gauss: return th;
    case Family::poisson: return std::exp(th);
    case Family::exponential:
      if (th >= 0) throw DomainError("exponential: theta must be < 0");
      return -1.0 / th;
    case Family::geometric:
      if (th >= 0) throw DomainError("geometric: theta must be < 0");
      return 1.0 / (1.0 - std::exp(th));
    case Family::bernoulli:
    case Family::binomial:
      return 1.0 / (1.0 + std::exp(-th));
    case Family::negbin:
      if (th >= 0) throw DomainError("negbin: theta must be < 0");
      return 1.0 / (std::exp(-th) - 1.0);
    case Family::variance:
      if (th >= 0) throw DomainError("variance: theta must be < 0");
      return -0.5 / th;
    default:
      throw ConfigError("mean_map1: not a one-parameter family");
  }
}

// inverse mean map (A')^{-1}(x), x strictly inside mean_domain1
inline double mean_map_inv1(Family f, double x) {
  const Interval om = mean_domain1(f);
  if (!om.contains_strict(x)) {
    throw DomainError(std::string("mean_map_inv1(") + family_name(f) +
                      "): x=" + std::to_string(x) + " outside (" +
                      std::to_string(om.lo) + ", " + std::to_string(om.hi) + ")");
  }
  switch (f) {
    case Family::gauss: return x;
    case Family::poisson: return std::log(x);
    case Family::exponential: return -1.0 / x;
    case Family::geometric: return std::log((x - 1.0) / x);
    case Family::bernoulli:
    case Family::binomial: return std::log(x / (1.0 - x));
    case Family::negbin: return std::log(x / (1.0 + x));
    case Family::variance: return -0.5 / x;
    default:
      throw ConfigError("mean_map_inv1: not a one-parameter family");
  }
}

// Fenchel conjugate D*(x) = x (A')^{-1}(x) - A((A')^{-1}(x)), strict interior.
inline double dstar1(Family f, double x) {
  const Interval om = mean_domain1(f);
  if (!om.contains_strict(x)) {
    throw DomainError(std::string("dstar1(") + family_name(f) +
                      "): x=" + std::to_string(x) + " outside (" +
                      std::to_string(om.lo) + ", " + std::to_string(om.hi) + ")");
  }
  switch (f) {
    case Family::gauss: return 0.5 * x * x;
    case Family::poisson: return x * (std::log(x) - 1.0);
    case Family::exponential: return -std::log(x) - 1.0;
    case Family::geometric:
      return (x - 1.0) * std::log(x - 1.0) - x * std::log(x);
    case Family::bernoulli:
    case Family::binomial:
      return x * std::log(x) + (1.0 - x) * std::log(1.0 - x);
    case Family::negbin: return x * std::log(x) - (1.0 + x) * std::log1p(x);
    case Family::variance: return -0.5 * (std::log(x) + 1.0);
    default:
      throw ConfigError("dstar1: not a one-parameter family");
  }
}

// D* on the closure of the mean domain: finite boundary limits where they
// exist, +inf where the limit diverges (the segment cost is then degenerate).
inline double dstar1_limit(Family f, double x) {
  const Interval om = mean_domain1(f);
  if (om.contains_strict(x)) return dstar1(f, x);
  if (!om.contains_closure(x)) {
    throw DomainError(std::string("dstar1_limit(") + family_name(f) +
                      "): x=" + std::to_string(x) + " outside closure");
  }
  // on (or within eps of) a finite boundary
  switch (f) {
    case Family::gauss: return 0.5 * x * x;  // unreachable: domain is open R
    case Family::poisson: return 0.0;        // x->0+: x log x - x -> 0
    case Family::exponential: return kInf;   // x->0+: -log x - 1 -> +inf
    case Family::geometric: return 0.0;      // x->1+: both terms -> 0
    case Family::bernoulli:
    case Family::binomial: return 0.0;       // x->0+ and x->1-: -> 0
    case Family::negbin: return 0.0;         // x->0+: -> 0
    case Family::variance: return kInf;      // x->0+: -> +inf
    default:
      throw ConfigError("dstar1_limit: not a one-parameter family");
  }
}

//======================================================================
// mean-variance pair (statistic (y, y^2), natural (th1, th2), th2 < 0)
//======================================================================

inline double log_partition_mv(double th1, double th2) {
  if (th2 >= 0) throw DomainError("meanvar: theta2 must be < 0");
  return -th1 * th1 / (4.0 * th2) - 0.5 * std::log(-2.0 * th2);
}

// mean map: (E y, E y^2) = (m, m^2 + s2) with m = -th1/(2 th2), s2 = -1/(2 th2)
inline void mean_map_mv(double th1, double th2, double* out) {
  if (th2 >= 0) throw DomainError("meanvar: theta2 must be < 0");
  const double s2 = -0.5 / th2;
  const double m = th1 * s2;
  out[0] = m;
  out[1] = m * m + s2;
}

inline void mean_map_inv_mv(double u, double v, double* out) {
  const double vr = v - u * u;
  if (!(vr > kDomainEps)) {
    throw DomainError("meanvar: v - u^2 = " + std::to_string(vr) +
                      " must be > 0");
  }
  out[0] = u / vr;
  out[1] = -0.5 / vr;
}

inline double dstar_mv(double u, double v) {
  const double vr = v - u * u;
  if (!(vr > kDomainEps)) {
    throw DomainError("meanvar: v - u^2 = " + std::to_string(vr) +
                      " must be > 0");
  }
  return -0.5 * (1.0 + std::log(vr));
}

inline double dstar_mv_limit(double u, double v) {
  const double vr = v - u * u;
  if (vr > kDomainEps) return dstar_mv(u, v);
  if (vr < -kDomainEps) throw DomainError("meanvar: v - u^2 < 0");
  return kInf;  // constant segment: diverging limit
}

//======================================================================
// vector wrappers over stat_dim() coordinates
//======================================================================

inline double dstar(const ModelFamily& m, std::span<const double> x) {
  detail::require_stat_family(m, "dstar");
  double acc = 0.0;
  if (m.family == Family::meanvar) {
    for (std::size_t c = 0; c * 2 + 1 < x.size(); ++c)
      acc += dstar_mv(x[2 * c], x[2 * c + 1]);
  } else {
    for (double xi : x) acc += dstar1(m.family, xi);
  }
  return acc;
}

inline double dstar_limit(const ModelFamily& m, std::span<const double> x) {
  detail::require_stat_family(m, "dstar_limit");
  double acc = 0.0;
  if (m.family == Family::meanvar) {
    for (std::size_t c = 0; c * 2 + 1 < x.size(); ++c) {
      const double d = dstar_mv_limit(x[2 * c], x[2 * c + 1]);
      if (std::isinf(d)) return kInf;
      acc += d;
    }
  } else {
    for (double xi : x) {
      const double d = dstar1_limit(m.family, xi);
      if (std::isinf(d)) return kInf;
      acc += d;
    }
  }
  return acc;
}

inline double log_partition(const ModelFamily& m, std::span<const double> th) {
  detail::require_stat_family(m, "log_partition");
  double acc = 0.0;
  if (m.family == Family::meanvar) {
    for (std::size_t c = 0; c * 2 + 1 < th.size(); ++c)
      acc += log_partition_mv(th[2 * c], th[2 * c + 1]);
  } else {
    for (double t : th) acc += log_partition1(m.family, t);
  }
  return acc;
}

inline void mean_map(const ModelFamily& m, std::span<const double> th,
                     std::span<double> out) {
  detail::require_stat_family(m, "mean_map");
  if (m.family == Family::meanvar) {
    for (std::size_t c = 0; c * 2 + 1 < th.size(); ++c)
      mean_map_mv(th[2 * c], th[2 * c + 1], &out[2 * c]);
  } else {
    for (std::size_t i = 0; i < th.size(); ++i)
      out[i] = mean_map1(m.family, th[i]);
  }
}

inline void grad_a_inv(const ModelFamily& m, std::span<const double> x,
                       std::span<double> out) {
  detail::require_stat_family(m, "grad_a_inv");
  if (m.family == Family::meanvar) {
    for (std::size_t c = 0; c * 2 + 1 < x.size(); ++c)
      mean_map_inv_mv(x[2 * c], x[2 * c + 1], &out[2 * c]);
  } else {
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = mean_map_inv1(m.family, x[i]);
  }
}

inline bool mean_domain_contains(const ModelFamily& m,
                                 std::span<const double> x,
                                 double eps = kDomainEps) {
  detail::require_stat_family(m, "mean_domain_contains");
  if (m.family == Family::meanvar) {
    for (std::size_t c = 0; c * 2 + 1 < x.size(); ++c)
      if (!(x[2 * c + 1] - x[2 * c] * x[2 * c] > eps)) return false;
    return true;
  }
  const Interval om = mean_domain1(m.family);
  for (double xi : x)
    if (!om.contains_strict(xi, eps)) return false;
  return true;
}

inline bool natural_domain_contains(const ModelFamily& m,
                                    std::span<const double> th,
                                    double eps = kDomainEps) {
  detail::require_stat_family(m, "natural_domain_contains");
  if (m.family == Family::meanvar) {
    for (std::size_t c = 0; c * 2 + 1 < th.size(); ++c)
      if (!(th[2 * c + 1] < -eps)) return false;
    return true;
  }
  const Interval dom = natural_domain1(m.family);
  for (double t : th)
    if (!dom.contains_strict(t, eps)) return false;
  return true;
}

// min over theta of the segment cost len*A(theta) - theta . S, i.e.
// -len * D*(mean). Throws DegenerateSegment when the boundary limit diverges
// (the true infimum is then -inf; callers treat the segment as unusable).
inline double segment_cost_min(const ModelFamily& m,
                               std::span<const double> mean_stat, double len) {
  detail::require_stat_family(m, "segment_cost_min");
  const double d = dstar_limit(m, mean_stat);
  if (std::isinf(d)) {
    throw DegenerateSegment(std::string("segment_cost_min(") +
                            family_name(m.family) +
                            "): cost unbounded below on this segment");
  }
  return -len * d;
}

// Same, but returns +inf instead of throwing; used in the DP minimisation.
inline double segment_cost_min_or_inf(const ModelFamily& m,
                                      std::span<const double> mean_stat,
                                      double len) {
  detail::require_stat_family(m, "segment_cost_min");
  double d;
  try {
    d = dstar_limit(m, mean_stat);
  } catch (const DomainError&) {
    return kInf;
  }
  if (std::isinf(d)) return kInf;
  return -len * d;
}

//======================================================================
// raw data validation / statistic transform
//======================================================================

inline void validate_raw(const ModelFamily& m, double y) {
  switch (m.family) {
    case Family::poisson:
    case Family::exponential:
    case Family::negbin:
      if (y < 0) throw DomainError("value " + std::to_string(y) + " < 0");
      return;
    case Family::geometric:
      if (y < 1) throw DomainError("value " + std::to_string(y) + " < 1");
      return;
    case Family::bernoulli:
      if (y < 0 || y > 1)
        throw DomainError("value " + std::to_string(y) + " outside [0,1]");
      return;
    case Family::binomial:
      if (y < 0 || y > m.count_norm)
        throw DomainError("value " + std::to_string(y) + " outside [0, trials]");
      return;
    default:
      return;
  }
}

// Writes per_component_dim() statistic coordinates for one raw value.
inline void stat_of_raw(const ModelFamily& m, double y, double* out) {
  switch (m.family) {
    case Family::binomial:
    case Family::negbin:
      out[0] = y / m.count_norm;
      return;
    case Family::variance:
      out[0] = y * y;
      return;
    case Family::meanvar:
      out[0] = y;
      out[1] = y * y;
      return;
    default:
      out[0] = y;
      return;
  }
}

}  // namespace dust
