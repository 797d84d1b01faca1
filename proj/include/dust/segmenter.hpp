#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dust/common.hpp"
#include "dust/dual.hpp"
#include "dust/model.hpp"
#include "dust/quadratic.hpp"
#include "dust/stat_store.hpp"

namespace dust {

enum class Pruning { none, pelt, dust };

inline const char* pruning_name(Pruning p) {
  switch (p) {
    case Pruning::none: return "none";
    case Pruning::pelt: return "pelt";
    case Pruning::dust: return "dust";
  }
  return "?";
}

inline Pruning parse_pruning(std::string_view s) {
  for (Pruning p : {Pruning::none, Pruning::pelt, Pruning::dust}) {
    if (s == pruning_name(p)) return p;
  }
  throw ConfigError("unknown pruning mode '" + std::string(s) + "'");
}

//======================================================================
// candidate set with lazy deletion
//======================================================================

class CandidateSet {
 public:
  void push(std::size_t v) {
    items_.push_back(v);
    alive_.push_back(1);
    ++alive_count_;
  }
  std::size_t size() const { return items_.size(); }
  std::size_t alive() const { return alive_count_; }
  std::size_t value(std::size_t pos) const { return items_[pos]; }
  bool is_alive(std::size_t pos) const { return alive_[pos] != 0; }
  void kill(std::size_t pos) {
    if (alive_[pos]) {
      alive_[pos] = 0;
      --alive_count_;
    }
  }
  // drop dead slots once they dominate the storage
  void compact() {
    if (items_.size() < 16 || 2 * alive_count_ > items_.size()) return;
    std::size_t w = 0;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (alive_[i]) {
        items_[w] = items_[i];
        alive_[w] = 1;
        ++w;
      }
    }
    items_.resize(w);
    alive_.resize(w);
  }

 private:
  std::vector<std::size_t> items_;
  std::vector<char> alive_;
  std::size_t alive_count_ = 0;
};

//======================================================================
// results
//======================================================================

struct SegmentationResult {
  // right endpoints of the fitted segments (1-based, last entry is n)
  std::vector<std::size_t> changepoints;
  double global_cost = 0.0;
  std::vector<double> q;                    // Q_0 .. Q_n
  std::vector<std::size_t> last_change;     // argmin source per time
  std::vector<std::size_t> candidate_trace; // |T_t| entering step t, t=1..n
  std::size_t remaining_candidates = 0;     // live candidates after step n
  double wall_time_s = 0.0;
  DualStats stats;
};

inline std::vector<std::size_t> backtrack(
    const std::vector<std::size_t>& last_change) {
  if (last_change.empty()) throw CorruptState("backtrack: empty trace");
  std::vector<std::size_t> cps;
  std::size_t t = last_change.size() - 1;
  while (t > 0) {
    cps.push_back(t);
    const std::size_t p = last_change[t];
    if (p >= t) {
      throw CorruptState("backtrack: last_change[" + std::to_string(t) +
                         "] = " + std::to_string(p) + " does not decrease");
    }
    t = p;
  }
  std::reverse(cps.begin(), cps.end());
  return cps;
}

// Baseline inequality: candidate s is prunable at time t when even the best
// unconstrained fit of (s, t] cannot beat Q_t. Exact comparison, no slack.
inline bool pelt_test(const ModelFamily& m, const StatStore& st, std::size_t s,
                      std::size_t t, double beta) {
  const auto mean = st.mean_stat(s, t);
  const double c = segment_cost_min(m, mean, static_cast<double>(t - s));
  return st.q(s) + c + beta > st.q(t) + beta;
}

//======================================================================
// solver
//======================================================================

namespace detail {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

inline void check_plan(const ModelFamily& m, std::size_t dim, Pruning pruning,
                       const DualEvalPlan& plan) {
  if (pruning != Pruning::dust) return;
  if (plan.constraints < 1) {
    throw ConfigError("dual plan: constraints must be >= 1");
  }
  switch (plan.strategy) {
    case Strategy::exact1d:
      if (dim != 1) {
        throw ConfigError("exact1d strategy needs a 1-d statistic");
      }
      if (plan.constraints != 1) {
        throw ConfigError("exact1d strategy is single-constraint");
      }
      break;
    case Strategy::gauss_closed:
      if (m.family != Family::gauss) {
        throw ConfigError("gauss strategy needs the gauss model");
      }
      if (plan.constraints != 1) {
        throw ConfigError("gauss strategy is single-constraint");
      }
      break;
    case Strategy::meanvar_closed:
      if (m.family != Family::meanvar || dim != 2) {
        throw ConfigError("meanvar strategy needs the univariate meanvar model");
      }
      if (plan.constraints > 2) {
        throw ConfigError("meanvar strategy supports at most 2 constraints");
      }
      break;
    case Strategy::at_zero:
    case Strategy::random_uniform:
      if (plan.constraints != 1) {
        throw ConfigError("this strategy is single-constraint");
      }
      break;
    case Strategy::quasi_newton:
      break;
  }
}

// one half-open search over the live candidates below s for the dual test
struct PrunePass {
  const ModelFamily& m;
  const StatStore& store;
  const DualEvalPlan& plan;
  Rng& rng;
  DualStats& stats;

  // survivors below the candidate under test, ascending
  std::vector<std::size_t> live_below;
  std::vector<double> mean_buf;

  // thresh = Q_t + beta + slack; every dual value carries + beta as well
  bool test(std::size_t s, std::size_t t, double beta, double thresh,
            Pruning pruning) {
    if (pruning == Pruning::pelt || live_below.empty() ||
        plan.strategy == Strategy::at_zero) {
      // mu = 0 evaluation; an unbounded segment cost is inconclusive
      std::vector<double>& mb = mean_buf;
      mb.resize(store.dim());
      store.mean_stat(s, t, mb.data());
      const double c =
          segment_cost_min_or_inf(m, mb, static_cast<double>(t - s));
      if (!std::isfinite(c)) {
        ++stats.skipped_tests;
        return false;
      }
      return store.q(s) + c + beta > thresh;
    }
    std::size_t r = live_below.back();
    if (plan.random_r && live_below.size() > 1) {
      const std::size_t k = static_cast<std::size_t>(
          rng.u01() * static_cast<double>(live_below.size()));
      r = live_below[std::min(k, live_below.size() - 1)];
    }
    try {
      switch (plan.strategy) {
        case Strategy::exact1d:
          return exact_test_1d(m, store, r, s, t, beta);
        case Strategy::random_uniform:
          return dual_random_eval(m, store, r, s, t, beta, rng) > thresh;
        case Strategy::gauss_closed:
          return gauss_closed_max(m, store, r, s, t, beta, &stats) > thresh;
        case Strategy::meanvar_closed: {
          const bool two =
              plan.constraints >= 2 && live_below.size() >= 2;
          const std::size_t rlo = two ? live_below[live_below.size() - 2] : 0;
          return detail::meanvar_test(m, store, two ? rlo : r, s, t, two,
                                      two ? r : 0);
        }
        case Strategy::quasi_newton: {
          ConstraintSelection sel{s, t, {}};
          const std::size_t k = std::min<std::size_t>(
              static_cast<std::size_t>(plan.constraints), live_below.size());
          sel.r.assign(live_below.end() - static_cast<std::ptrdiff_t>(k),
                       live_below.end());
          return quasi_newton_max(m, store, sel, plan, beta) > thresh;
        }
        case Strategy::at_zero:
          break;  // unreachable, handled above
      }
    } catch (const DegenerateSegment&) {
      ++stats.skipped_tests;
    } catch (const DomainError&) {
      ++stats.skipped_tests;
    }
    return false;
  }
};

}  // namespace detail

inline SegmentationResult run(const ModelFamily& model, const Series& data,
                              double beta, Pruning pruning = Pruning::dust,
                              const DualEvalPlan& plan = {},
                              std::optional<double> q0 = std::nullopt);

namespace detail {

// Dedicated path for piecewise quadratic regression: statistics are the
// regression prefix sums and the dual is handled on quadratic coefficients.
inline SegmentationResult run_quadratic(const ModelFamily& model,
                                        const Series& data, double beta,
                                        Pruning pruning,
                                        const DualEvalPlan& plan, double q0) {
  if (data.cols != 2) {
    throw ConfigError("quadratic-regression expects two columns (x, y)");
  }
  if (pruning == Pruning::dust) {
    switch (plan.strategy) {
      case Strategy::at_zero:
      case Strategy::random_uniform:
      case Strategy::quasi_newton:
        break;
      default:
        throw ConfigError(
            "quadratic-regression supports the zero, random and qn "
            "strategies");
    }
    if (plan.constraints != 1) {
      throw ConfigError("quadratic-regression duals are single-constraint");
    }
  }
  (void)model;
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = data.n;
  if (n == 0) throw ConfigError("empty series");
  std::vector<double> sxx(n + 1, 0), sx(n + 1, 0), sxy(n + 1, 0),
      sy(n + 1, 0), syy(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = data.at(i, 0), y = data.at(i, 1);
    sxx[i + 1] = sxx[i] + x * x;
    sx[i + 1] = sx[i] + x;
    sxy[i + 1] = sxy[i] + x * y;
    sy[i + 1] = sy[i] + y;
    syy[i + 1] = syy[i] + y * y;
  }
  auto seg = [&](std::size_t a, std::size_t b) {
    return regression_coeffs(sxx[b] - sxx[a], sx[b] - sx[a], sxy[b] - sxy[a],
                             sy[b] - sy[a], syy[b] - syy[a],
                             static_cast<double>(b - a));
  };
  auto cost_min = [&](std::size_t a, std::size_t b) {
    const QuadraticCoeffs qc = seg(a, b);
    if (!qc.strictly_convex()) return kInf;
    return quadratic_min_value(qc);
  };

  std::vector<double> q(n + 1, 0.0);
  q[0] = q0;
  std::vector<std::size_t> last(n + 1, 0);
  CandidateSet cands;
  cands.push(0);
  std::vector<std::size_t> trace;
  trace.reserve(n);
  Rng rng(plan.rng_seed);
  DualStats stats;
  std::vector<std::size_t> live_below;

  // concave dual over mu for a (r, s) pair at time t; -inf when infeasible
  auto dual_at = [&](const QuadraticCoeffs& stq, const QuadraticCoeffs& rtq,
                     double mu) {
    try {
      return quadratic_dual_value(stq, rtq, mu);
    } catch (const DomainError&) {
      return -kInf;
    } catch (const DegenerateSegment&) {
      return -kInf;
    }
  };

  for (std::size_t t = 1; t <= n; ++t) {
    trace.push_back(cands.alive());
    double best = kInf;
    std::size_t best_s = 0;
    for (std::size_t pos = 0; pos < cands.size(); ++pos) {
      if (!cands.is_alive(pos)) continue;
      const std::size_t s = cands.value(pos);
      if (!std::isfinite(q[s])) continue;
      const double v = q[s] + cost_min(s, t) + beta;
      if (v < best) {
        best = v;
        best_s = s;
      }
    }
    q[t] = best;
    last[t] = best_s;

    if (pruning != Pruning::none && std::isfinite(best)) {
      const double thresh = best + beta + kPruneSlack;
      live_below.clear();
      for (std::size_t pos = 0; pos < cands.size(); ++pos) {
        if (!cands.is_alive(pos)) continue;
        const std::size_t s = cands.value(pos);
        if (!std::isfinite(q[s])) {
          cands.kill(pos);
          continue;
        }
        bool prune = false;
        if (pruning == Pruning::pelt || live_below.empty() ||
            plan.strategy == Strategy::at_zero) {
          const double c = cost_min(s, t);
          if (std::isfinite(c)) {
            prune = q[s] + c + beta > thresh;
          } else {
            ++stats.skipped_tests;
          }
        } else {
          std::size_t r = live_below.back();
          if (plan.random_r && live_below.size() > 1) {
            const std::size_t k = static_cast<std::size_t>(
                rng.u01() * static_cast<double>(live_below.size()));
            r = live_below[std::min(k, live_below.size() - 1)];
          }
          QuadraticCoeffs stq = seg(s, t);
          stq.F += q[s] + beta;
          QuadraticCoeffs rtq = seg(r, t);
          rtq.F += q[r] + beta;
          try {
            double mumax = quadratic_mu_max(stq, rtq);
            if (plan.strategy == Strategy::random_uniform) {
              const double cap =
                  std::isinf(mumax) ? 1e3 : mumax;  // practical draw range
              const double mu = 0.999 * cap * rng.u01();
              prune = dual_at(stq, rtq, mu) > thresh;
            } else {
              // golden-section on the concave dual over [0, hi]
              double hi = std::isinf(mumax) ? 1.0 : 0.999999 * mumax;
              if (std::isinf(mumax)) {
                double v0 = dual_at(stq, rtq, 0.0);
                while (hi < 1e12) {
                  const double vh = dual_at(stq, rtq, hi * 2.0);
                  if (!(vh > v0) || !std::isfinite(vh)) break;
                  v0 = vh;
                  hi *= 2.0;
                }
                hi *= 2.0;
              }
              const double gr = 0.6180339887498949;
              double a = 0.0, b2 = hi;
              double x1 = b2 - gr * (b2 - a), x2 = a + gr * (b2 - a);
              double f1 = dual_at(stq, rtq, x1), f2 = dual_at(stq, rtq, x2);
              for (int i = 0; i < plan.qn_max_iters * 4; ++i) {
                if (f1 < f2) {
                  a = x1;
                  x1 = x2;
                  f1 = f2;
                  x2 = a + gr * (b2 - a);
                  f2 = dual_at(stq, rtq, x2);
                } else {
                  b2 = x2;
                  x2 = x1;
                  f2 = f1;
                  x1 = b2 - gr * (b2 - a);
                  f1 = dual_at(stq, rtq, x1);
                }
              }
              prune = std::max(f1, f2) > thresh;
            }
          } catch (const TieBreakUnsupported&) {
            ++stats.skipped_tests;
          } catch (const DegenerateSegment&) {
            ++stats.skipped_tests;
          }
        }
        if (prune) {
          cands.kill(pos);
        } else {
          live_below.push_back(s);
        }
      }
      cands.compact();
    }
    if (t < n) cands.push(t);
  }

  if (!std::isfinite(q[n])) {
    throw SolveError("no admissible segmentation: Q_n is not finite");
  }
  SegmentationResult res;
  res.q = q;
  res.last_change = last;
  res.changepoints = backtrack(last);
  res.global_cost = q[n];
  res.candidate_trace = std::move(trace);
  res.remaining_candidates = cands.alive();
  res.stats = stats;
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

}  // namespace detail

// Optimal-partitioning solve: Q_t = min_{s in T_t} Q_s + c(y_(s,t]) + beta,
// with the candidate set managed per the pruning mode. Exact for every mode;
// pruning changes only the work done, never the optimum.
inline SegmentationResult run(const ModelFamily& model, const Series& data,
                              double beta, Pruning pruning,
                              const DualEvalPlan& plan,
                              std::optional<double> q0) {
  if (!std::isfinite(beta) || !(beta > 0)) {
    throw ConfigError("penalty must be finite and positive");
  }
  if (model.family == Family::quadratic_regression) {
    return detail::run_quadratic(model, data, beta, pruning, plan,
                                 q0.value_or(0.0));
  }
  const auto t0 = std::chrono::steady_clock::now();
  StatStore store = StatStore::build(model, data, q0.value_or(0.0));
  const ModelFamily& m = store.model();
  const std::size_t n = store.n();
  const std::size_t d = store.dim();
  detail::check_plan(m, d, pruning, plan);

  CandidateSet cands;
  cands.push(0);
  std::vector<std::size_t> last(n + 1, 0);
  std::vector<std::size_t> trace;
  trace.reserve(n);
  Rng rng(plan.rng_seed);
  DualStats stats;
  detail::PrunePass pass{m, store, plan, rng, stats, {}, {}};
  std::vector<double> mbuf(d);

  for (std::size_t t = 1; t <= n; ++t) {
    trace.push_back(cands.alive());
    double best = kInf;
    std::size_t best_s = 0;
    for (std::size_t pos = 0; pos < cands.size(); ++pos) {
      if (!cands.is_alive(pos)) continue;
      const std::size_t s = cands.value(pos);
      const double qs = store.q(s);
      if (!std::isfinite(qs)) continue;
      store.mean_stat(s, t, mbuf.data());
      const double c =
          segment_cost_min_or_inf(m, mbuf, static_cast<double>(t - s));
      const double v = qs + c + beta;
      if (v < best) {
        best = v;
        best_s = s;
      }
    }
    store.set_q(t, best);
    last[t] = best_s;

    if (pruning != Pruning::none && std::isfinite(best)) {
      const double thresh = best + beta + kPruneSlack;
      pass.live_below.clear();
      for (std::size_t pos = 0; pos < cands.size(); ++pos) {
        if (!cands.is_alive(pos)) continue;
        const std::size_t s = cands.value(pos);
        if (!std::isfinite(store.q(s))) {
          cands.kill(pos);
          continue;
        }
        if (pass.test(s, t, beta, thresh, pruning)) {
          cands.kill(pos);
        } else {
          pass.live_below.push_back(s);
        }
      }
      cands.compact();
    }
    if (t < n) cands.push(t);
  }

  if (!std::isfinite(store.q(n))) {
    throw SolveError("no admissible segmentation: Q_n is not finite");
  }
  SegmentationResult res;
  res.q = store.q_values();
  res.last_change = last;
  res.changepoints = backtrack(last);
  res.global_cost = store.q(n);
  res.candidate_trace = std::move(trace);
  res.remaining_candidates = cands.alive();
  res.stats = stats;
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

}  // namespace dust
