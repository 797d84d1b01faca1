#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dust/common.hpp"
#include "dust/model.hpp"

namespace dust {

//======================================================================
// raw series
//======================================================================

struct Series {
  std::size_t n = 0;
  std::size_t cols = 1;
  std::vector<double> values;  // row-major: values[t * cols + j]

  double at(std::size_t t, std::size_t j) const { return values[t * cols + j]; }
};

//======================================================================
// prefix-sum store
//======================================================================

// Holds cumulative sums of the model statistic (S_0 = 0, S_t = sum of the
// first t statistic vectors) and the DP value array Q_0..Q_n behind a fill
// watermark. All segment queries are O(stat_dim).
class StatStore {
 public:
  StatStore() = default;

  static StatStore build(const ModelFamily& model, const Series& data,
                         double q0 = 0.0) {
    if (data.n == 0) throw ConfigError("StatStore: empty series");
    if (data.cols == 0) throw ConfigError("StatStore: zero columns");
    ModelFamily m = model;
    m.components = static_cast<int>(data.cols);
    if (m.family == Family::quadratic_regression) {
      throw ConfigError("StatStore: quadratic-regression uses its own store");
    }

    StatStore s;
    s.model_ = m;
    s.n_ = data.n;
    s.dim_ = static_cast<std::size_t>(m.stat_dim());

    double sd_scale = 1.0;
    if (m.family == Family::gauss && m.standardize) {
      sd_scale = global_sd(data);
      if (!(sd_scale > 0)) sd_scale = 1.0;
    }

    const std::size_t pcd = static_cast<std::size_t>(m.per_component_dim());
    s.cum_.assign((data.n + 1) * s.dim_, 0.0);
#ifdef DUST_COMPENSATED_SUMS
    // Neumaier running sums: carry folded into every stored prefix entry.
    std::vector<double> run(s.dim_, 0.0), carry(s.dim_, 0.0);
#endif
    std::array<double, 2> st{};
    for (std::size_t t = 0; t < data.n; ++t) {
      double* row = &s.cum_[(t + 1) * s.dim_];
      const double* prev = &s.cum_[t * s.dim_];
      for (std::size_t j = 0; j < data.cols; ++j) {
        double y = data.at(t, j);
        validate_raw(m, y);
        if (sd_scale != 1.0) y /= sd_scale;
        stat_of_raw(m, y, st.data());
        for (std::size_t k = 0; k < pcd; ++k) {
          const std::size_t c = j * pcd + k;
#ifdef DUST_COMPENSATED_SUMS
          const double sum = run[c] + st[k];
          if (std::abs(run[c]) >= std::abs(st[k])) {
            carry[c] += (run[c] - sum) + st[k];
          } else {
            carry[c] += (st[k] - sum) + run[c];
          }
          run[c] = sum;
          row[c] = run[c] + carry[c];
#else
          row[c] = prev[c] + st[k];
#endif
        }
      }
#ifdef DUST_COMPENSATED_SUMS
      (void)prev;
#endif
    }

    s.q_.assign(data.n + 1, 0.0);
    s.q_[0] = q0;
    s.q_filled_ = 0;
    return s;
  }

  std::size_t n() const { return n_; }
  std::size_t dim() const { return dim_; }
  const ModelFamily& model() const { return model_; }

  // S_b - S_a, component j (signed; callers handle orientation)
  double sum_stat(std::size_t a, std::size_t b, std::size_t j) const {
    check_index(a);
    check_index(b);
    return cum_[b * dim_ + j] - cum_[a * dim_ + j];
  }

  // Order-symmetric segment mean (S_b - S_a) / (b - a).
  void mean_stat(std::size_t a, std::size_t b, double* out) const {
    check_index(a);
    check_index(b);
    if (a == b) throw EmptySegment("mean_stat: a == b");
    const double inv = 1.0 / (static_cast<double>(b) - static_cast<double>(a));
    const double* ca = &cum_[a * dim_];
    const double* cb = &cum_[b * dim_];
    for (std::size_t c = 0; c < dim_; ++c) out[c] = (cb[c] - ca[c]) * inv;
  }

  std::vector<double> mean_stat(std::size_t a, std::size_t b) const {
    std::vector<double> out(dim_);
    mean_stat(a, b, out.data());
    return out;
  }

  // psi_rs (Sbar_st - Sbar_rs) with psi_rs = +1 when r < s, -1 when r > s.
  void delta_mean(std::size_t r, std::size_t s, std::size_t t,
                  double* out) const {
    const double psi = r < s ? 1.0 : -1.0;
    std::array<double, 8> buf;
    double* mrs = dim_ <= 4 ? buf.data() : scratch();
    double* mst = mrs + dim_;
    mean_stat(r, s, mrs);
    mean_stat(s, t, mst);
    for (std::size_t c = 0; c < dim_; ++c) out[c] = psi * (mst[c] - mrs[c]);
  }

  std::vector<double> delta_mean(std::size_t r, std::size_t s,
                                 std::size_t t) const {
    std::vector<double> out(dim_);
    delta_mean(r, s, t, out.data());
    return out;
  }

  // (Q_b - Q_a) / (b - a), order-symmetric
  double qbar(std::size_t a, std::size_t b) const {
    if (a == b) throw EmptySegment("qbar: a == b");
    return (q(b) - q(a)) /
           (static_cast<double>(b) - static_cast<double>(a));
  }

  // psi_rs (Qbar_st - Qbar_rs)
  double delta_q(std::size_t r, std::size_t s, std::size_t t) const {
    const double psi = r < s ? 1.0 : -1.0;
    return psi * (qbar(s, t) - qbar(r, s));
  }

  // Q array with fill watermark. Q_0 is set at build time.
  double q(std::size_t t) const {
    check_index(t);
    if (t > q_filled_) {
      throw StateError("q(" + std::to_string(t) + ") read beyond watermark " +
                       std::to_string(q_filled_));
    }
    return q_[t];
  }

  void set_q(std::size_t t, double v) {
    check_index(t);
    if (t != q_filled_ + 1) {
      throw StateError("set_q(" + std::to_string(t) +
                       "): writes must be sequential, watermark " +
                       std::to_string(q_filled_));
    }
    q_[t] = v;
    q_filled_ = t;
  }

  std::size_t q_filled() const { return q_filled_; }

  // Filled prefix of the Q array (0..q_filled()).
  std::vector<double> q_values() const {
    return std::vector<double>(q_.begin(), q_.begin() + q_filled_ + 1);
  }

 private:
  static double global_sd(const Series& data) {
    double s = 0, s2 = 0;
    const std::size_t m = data.values.size();
    for (double v : data.values) {
      s += v;
      s2 += v * v;
    }
    const double mean = s / static_cast<double>(m);
    const double var = s2 / static_cast<double>(m) - mean * mean;
    return var > 0 ? std::sqrt(var) : 0.0;
  }

  void check_index(std::size_t t) const {
    if (t > n_) {
      throw IndexError("index " + std::to_string(t) + " > n = " +
                       std::to_string(n_));
    }
  }

  double* scratch() const {
    scratch_.resize(2 * dim_);
    return scratch_.data();
  }

  ModelFamily model_;
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> cum_;
  std::vector<double> q_;
  std::size_t q_filled_ = 0;
  mutable std::vector<double> scratch_;
};

//======================================================================
// variance decomposition identities
//======================================================================

// For a univariate series y_1..y_len and 0 < i < t <= len, the quantity
// t V(y_0t) - (t - i) V(y_it) - i V(y_0i) has four equivalent closed forms in
// the segment means. Returns lhs - rhs for each; all four vanish exactly.
inline std::array<double, 4> variance_identity_residuals(
    std::span<const double> y, std::size_t i, std::size_t t) {
  if (!(i > 0 && i < t && t <= y.size())) {
    throw IndexError("variance_identity_residuals: need 0 < i < t <= len");
  }
  auto mean_of = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t k = a; k < b; ++k) s += y[k];
    return s / static_cast<double>(b - a);
  };
  auto var_of = [&](std::size_t a, std::size_t b) {
    const double m = mean_of(a, b);
    double s = 0;
    for (std::size_t k = a; k < b; ++k) s += (y[k] - m) * (y[k] - m);
    return s / static_cast<double>(b - a);
  };
  const double ti = static_cast<double>(t - i);
  const double td = static_cast<double>(t);
  const double id = static_cast<double>(i);
  const double m0t = mean_of(0, t), mit = mean_of(i, t), m0i = mean_of(0, i);
  const double lhs =
      td * var_of(0, t) - ti * var_of(i, t) - id * var_of(0, i);
  const std::array<double, 4> rhs = {
      ti * id / td * (mit - m0i) * (mit - m0i),
      td * id / ti * (m0t - m0i) * (m0t - m0i),
      td * ti / id * (m0t - mit) * (m0t - mit),
      id * (m0t - m0i) * (m0t - m0i) + ti * (m0t - mit) * (m0t - mit),
  };
  return {lhs - rhs[0], lhs - rhs[1], lhs - rhs[2], lhs - rhs[3]};
}

}  // namespace dust
