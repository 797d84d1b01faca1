#pragma once

// Self-contained reference implementations used to cross-check the library:
// derivative-free maximizers, direct-summation segment costs, and a brute
// O(n^2) partitioning solver. Nothing here calls into dust/ cost code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct MaxResult {
  double x = 0.0;
  double value = -kInf;
};

using Fn1 = std::function<double(double)>;

// golden-section search for the max of a unimodal f on [lo, hi]
inline MaxResult golden_max(const Fn1& f, double lo, double hi,
                            int iters = 200) {
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters && b - a > 1e-15 * (1.0 + std::fabs(a)); ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    }
  }
  const double xm = 0.5 * (a + b);
  const double fm = f(xm);
  MaxResult r{xm, fm};
  if (f1 > r.value) r = {x1, f1};
  if (f2 > r.value) r = {x2, f2};
  return r;
}

// expands [lo, lo+step] until f starts decreasing, then golden-sections;
// for concave f on [lo, inf) this brackets the max
inline MaxResult golden_max_unbounded(const Fn1& f, double lo,
                                      double step = 1.0, int iters = 200) {
  double a = lo, b = lo + step;
  double fb = f(b);
  double best = std::max(f(lo), fb);
  for (int k = 0; k < 200; ++k) {
    const double c = b + 2.0 * (b - a);
    const double fc = f(c);
    if (fc < fb || !std::isfinite(fc)) {
      MaxResult r = golden_max(f, a, std::isfinite(fc) ? c : b, iters);
      if (best > r.value) r = {lo, best};
      return r;
    }
    a = b;
    b = c;
    fb = fc;
    best = std::max(best, fc);
  }
  return golden_max(f, a, b, iters);
}

// coarse grid scan followed by golden refinement around the best cell
inline MaxResult grid_refine_max(const Fn1& f, double lo, double hi,
                                 int cells = 2000) {
  MaxResult best;
  double xbest = lo;
  for (int i = 0; i <= cells; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / cells;
    const double v = f(x);
    if (v > best.value) {
      best = {x, v};
      xbest = x;
    }
  }
  const double h = (hi - lo) / cells;
  MaxResult ref = golden_max(f, std::max(lo, xbest - h),
                             std::min(hi, xbest + h));
  return ref.value > best.value ? ref : best;
}

struct Max2Result {
  double x1 = 0.0;
  double x2 = 0.0;
  double value = -kInf;
};

using Fn2 = std::function<double(double, double)>;

// two-stage rectangular grid scan; enough for 1e-3 scale comparisons
inline Max2Result grid_refine_max2(const Fn2& f, double lo1, double hi1,
                                   double lo2, double hi2, int cells = 220,
                                   int stages = 3) {
  Max2Result best;
  for (int stage = 0; stage < stages; ++stage) {
    Max2Result cur;
    for (int i = 0; i <= cells; ++i) {
      const double x = lo1 + (hi1 - lo1) * static_cast<double>(i) / cells;
      for (int j = 0; j <= cells; ++j) {
        const double y = lo2 + (hi2 - lo2) * static_cast<double>(j) / cells;
        const double v = f(x, y);
        if (v > cur.value) cur = {x, y, v};
      }
    }
    if (cur.value > best.value) best = cur;
    const double h1 = 2.0 * (hi1 - lo1) / cells;
    const double h2 = 2.0 * (hi2 - lo2) / cells;
    lo1 = cur.x1 - h1;
    hi1 = cur.x1 + h1;
    lo2 = cur.x2 - h2;
    hi2 = cur.x2 + h2;
  }
  return best;
}

// central difference gradient
inline std::vector<double> num_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// ---- direct-summation segment costs ------------------------------------
// cost(s, t] = min_theta sum_{i=s+1..t} (A(theta) - stat(y_i) . theta),
// written out per family from the closed-form minimizer. +inf marks a
// segment whose cost diverges (empty-variance, all-zero exponential).

enum class Cost {
  gauss,
  poisson,
  exponential,
  geometric,
  bernoulli,
  binomial,
  negbin,
  variance,
  meanvar,
};

inline double seg_cost_1(Cost c, double mean, double len, double m2,
                         double count_norm) {
  switch (c) {
    case Cost::gauss:
      return -len * 0.5 * mean * mean;
    case Cost::poisson:
      return mean <= 0 ? 0.0 : -len * (mean * std::log(mean) - mean);
    case Cost::exponential:
      return mean <= 0 ? kInf : len * (std::log(mean) + 1.0);
    case Cost::geometric:
      return mean <= 1 ? 0.0
                       : -len * ((mean - 1.0) * std::log(mean - 1.0) -
                                 mean * std::log(mean));
    case Cost::bernoulli:
      return (mean <= 0 || mean >= 1)
                 ? 0.0
                 : -len * (mean * std::log(mean) +
                           (1.0 - mean) * std::log(1.0 - mean));
    case Cost::binomial: {
      const double u = mean / count_norm;
      return (u <= 0 || u >= 1)
                 ? 0.0
                 : -len * (u * std::log(u) + (1.0 - u) * std::log(1.0 - u));
    }
    case Cost::negbin: {
      const double u = mean / count_norm;
      return u <= 0 ? 0.0
                    : -len * (u * std::log(u) - (1.0 + u) * std::log1p(u));
    }
    case Cost::variance:
      return m2 <= 0 ? kInf : len * 0.5 * (std::log(m2) + 1.0);
    case Cost::meanvar: {
      const double v = m2 - mean * mean;
      return v <= 0 ? kInf : len * 0.5 * (std::log(v) + 1.0);
    }
  }
  return kInf;
}

// cost over (s, t], summing columns; data is row-major n x cols of raw values
inline double seg_cost(Cost c, const std::vector<double>& data,
                       std::size_t cols, std::size_t s, std::size_t t,
                       double count_norm = 10.0) {
  if (t <= s) throw std::invalid_argument("seg_cost: empty segment");
  const double len = static_cast<double>(t - s);
  double total = 0.0;
  for (std::size_t col = 0; col < cols; ++col) {
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = s; i < t; ++i) {
      const double y = data[i * cols + col];
      sum += y;
      sum2 += y * y;
    }
    const double v = seg_cost_1(c, sum / len, len, sum2 / len, count_norm);
    if (std::isinf(v)) return kInf;
    total += v;
  }
  return total;
}

// ---- brute optimal partitioning -----------------------------------------

struct BruteResult {
  std::vector<double> q;               // q[t], t = 0..n
  std::vector<std::size_t> last;       // argmin s for each t
  std::vector<std::size_t> changepoints;  // 1-based segment ends, last = n
};

inline BruteResult brute_op(Cost c, const std::vector<double>& data,
                            std::size_t cols, double beta, double q0 = 0.0,
                            double count_norm = 10.0) {
  const std::size_t n = data.size() / cols;
  BruteResult r;
  r.q.assign(n + 1, kInf);
  r.last.assign(n + 1, 0);
  r.q[0] = q0;
  for (std::size_t t = 1; t <= n; ++t) {
    for (std::size_t s = 0; s < t; ++s) {
      if (std::isinf(r.q[s])) continue;
      const double cost = seg_cost(c, data, cols, s, t, count_norm);
      if (std::isinf(cost)) continue;
      const double v = r.q[s] + cost + beta;
      if (v < r.q[t]) {
        r.q[t] = v;
        r.last[t] = s;
      }
    }
  }
  if (std::isinf(r.q[n])) {
    throw std::runtime_error("brute_op: no finite partition");
  }
  for (std::size_t t = n; t > 0; t = r.last[t]) {
    r.changepoints.push_back(t);
  }
  std::vector<std::size_t> rev(r.changepoints.rbegin(),
                               r.changepoints.rend());
  r.changepoints = rev;
  return r;
}

}  // namespace oracle
