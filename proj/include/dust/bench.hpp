#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dust/common.hpp"
#include "dust/model.hpp"
#include "dust/segmenter.hpp"
#include "dust/simgen.hpp"

namespace dust {

//======================================================================
// penalty specification
//======================================================================

// "abs:<v>" uses v verbatim; "log:<a>" resolves to a * log(n), optionally
// rescaled by the per-model penalty table.
struct PenaltySpec {
  bool scaled = false;
  double value = 0.0;
};

inline PenaltySpec parse_penalty(std::string_view s) {
  bool scaled = false;
  std::string_view rest;
  if (s.substr(0, 4) == "abs:") {
    rest = s.substr(4);
  } else if (s.substr(0, 4) == "log:") {
    scaled = true;
    rest = s.substr(4);
  } else {
    throw ConfigError("penalty must look like 'abs:3.5' or 'log:2', got '" +
                      std::string(s) + "'");
  }
  const std::string str(rest);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (end != str.c_str() + str.size() || str.empty() || !std::isfinite(v)) {
    throw ConfigError("malformed penalty value '" + std::string(s) + "'");
  }
  return {scaled, v};
}

inline double resolve_penalty(const PenaltySpec& p, const ModelFamily& m,
                              double n, bool use_scale_table = true) {
  if (!p.scaled) return p.value;
  if (!(n > 1.0)) {
    throw DomainError("log penalty needs a series length above 1");
  }
  const double scale = use_scale_table ? m.penalty_scale() : 1.0;
  return p.value * scale * std::log(n);
}

//======================================================================
// benchmark records
//======================================================================

struct BenchRecord {
  std::string model;
  std::string pruning;
  std::string strategy;
  std::size_t n = 0;
  double beta = 0.0;
  double a = 0.0;  // log-penalty coefficient, 0 for absolute penalties
  std::uint64_t seed = 0;
  std::size_t n_changepoints = 0;
  std::size_t remaining = 0;
  double wall_s = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BenchRecord, model, pruning, strategy, n,
                                   beta, a, seed, n_changepoints, remaining,
                                   wall_s)

//======================================================================
// summaries
//======================================================================

// nearest-rank order statistic: the ceil(p N)-th smallest value
inline double quantile_nearest(std::vector<double> v, double p) {
  if (v.empty()) throw ConfigError("quantile of an empty sample");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("quantile level in (0, 1]");
  std::sort(v.begin(), v.end());
  const double rank = std::ceil(p * static_cast<double>(v.size()));
  const std::size_t idx = static_cast<std::size_t>(
      std::clamp(rank, 1.0, static_cast<double>(v.size())));
  return v[idx - 1];
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// ordinary least squares of log y on log x
inline LineFit loglog_fit(const std::vector<double>& x,
                          const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("loglog_fit: need two or more paired points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) {
      throw ConfigError("loglog_fit: inputs must be positive");
    }
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double var = sxx - sx * sx / n;
  if (!(var > 0)) throw ConfigError("loglog_fit: degenerate abscissae");
  LineFit f;
  f.slope = (sxy - sx * sy / n) / var;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

// k geometrically spaced lengths between lo and hi inclusive, deduplicated
inline std::vector<std::size_t> log_spaced(std::size_t lo, std::size_t hi,
                                           std::size_t k) {
  if (lo == 0 || hi < lo || k == 0) {
    throw ConfigError("log_spaced: need 0 < lo <= hi and k >= 1");
  }
  std::vector<std::size_t> out;
  if (k == 1) {
    out.push_back(lo);
    return out;
  }
  const double llo = std::log(static_cast<double>(lo));
  const double lhi = std::log(static_cast<double>(hi));
  for (std::size_t i = 0; i < k; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(k - 1);
    const auto v = static_cast<std::size_t>(
        std::llround(std::exp(llo + f * (lhi - llo))));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

//======================================================================
// sweeps
//======================================================================

struct SweepConfig {
  ModelFamily model;
  Pruning pruning = Pruning::dust;
  DualEvalPlan plan;
  PenaltySpec penalty{true, 2.0};
  bool scale_table = false;
  std::vector<std::size_t> lengths;  // series lengths to visit
  std::vector<double> coeffs;        // penalty values; empty = just penalty
  std::size_t reps = 1;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  SimSpec sim;  // n and seed are overridden per task
};

// Runs lengths x coefficients x reps solves; records are ordered by task
// index and fully reproducible from (seed, task index) regardless of jobs.
inline std::vector<BenchRecord> run_sweep(const SweepConfig& cfg) {
  if (cfg.lengths.empty()) throw ConfigError("run_sweep: no lengths");
  if (cfg.reps == 0) throw ConfigError("run_sweep: reps must be >= 1");
  std::vector<double> coeffs = cfg.coeffs;
  if (coeffs.empty()) coeffs.push_back(cfg.penalty.value);
  const std::size_t total = cfg.lengths.size() * coeffs.size() * cfg.reps;
  std::vector<BenchRecord> records(total);

  auto run_task = [&](std::size_t idx) {
    const std::size_t ci = (idx / cfg.reps) % coeffs.size();
    const std::size_t li = idx / (cfg.reps * coeffs.size());
    const std::size_t n = cfg.lengths[li];
    const std::uint64_t task_seed = mix_seed(cfg.seed, idx);

    SimSpec sim = cfg.sim;
    sim.family = cfg.model.family;
    sim.n = n;
    sim.seed = task_seed;
    sim.count_norm = cfg.model.count_norm;
    const SimResult data = simulate(sim);

    const PenaltySpec ps{cfg.penalty.scaled, coeffs[ci]};
    const double beta = resolve_penalty(ps, cfg.model,
                                        static_cast<double>(n),
                                        cfg.scale_table);
    DualEvalPlan plan = cfg.plan;
    plan.rng_seed = mix_seed(task_seed, 1);
    const SegmentationResult res =
        run(cfg.model, data.data, beta, cfg.pruning, plan, std::nullopt);

    BenchRecord rec;
    rec.model = family_name(cfg.model.family);
    rec.pruning = pruning_name(cfg.pruning);
    rec.strategy = cfg.pruning == Pruning::dust
                       ? strategy_name(cfg.plan.strategy)
                       : pruning_name(cfg.pruning);
    rec.n = n;
    rec.beta = beta;
    rec.a = ps.scaled ? ps.value : 0.0;
    rec.seed = task_seed;
    rec.n_changepoints =
        res.changepoints.empty() ? 0 : res.changepoints.size() - 1;
    rec.remaining = res.remaining_candidates;
    rec.wall_s = res.wall_time_s;
    records[idx] = std::move(rec);
  };

  const unsigned jobs = std::max(1u, cfg.jobs);
  if (jobs == 1 || total == 1) {
    for (std::size_t i = 0; i < total; ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    const unsigned nthreads =
        std::min<unsigned>(jobs, static_cast<unsigned>(total));
    pool.reserve(nthreads);
    for (unsigned w = 0; w < nthreads; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= total) break;
          try {
            run_task(i);
          } catch (...) {
            std::lock_guard<std::mutex> lk(error_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return records;
}

}  // namespace dust
