#pragma once

#include <cmath>
#include <vector>

#include "spde2d/errors.hpp"
#include "spde2d/model.hpp"

namespace spde2d {

// T_{i,j,k} X: time increment of the double spatial difference over one cell
// (eight signed terms). Grouped as four time differences so that a field
// constant in time cancels exactly, and so the large common level of the
// field drops out before the spatial differencing.
inline double triple_increment(const ThinnedView& v, int i, int j, int k) {
  const auto dt = [&](int jj, int kk) { return v.value(i, jj, kk) - v.value(i - 1, jj, kk); };
  return dt(j, k) - dt(j - 1, k) - dt(j, k - 1) + dt(j - 1, k - 1);
}

// Dense increment array, dimensions (n, m1, m2), index (i-1, j-1, k-1).
inline std::vector<double> triple_increments(const ThinnedView& v) {
  if (v.n() < 1 || v.m1() < 1 || v.m2() < 1)
    throw Error(ErrorCode::DegenerateView, "view has no increments");
  std::vector<double> t(static_cast<std::size_t>(v.n()) * v.m1() * v.m2());
  std::size_t idx = 0;
  for (int i = 1; i <= v.n(); ++i)
    for (int j = 1; j <= v.m1(); ++j)
      for (int k = 1; k <= v.m2(); ++k) t[idx++] = triple_increment(v, i, j, k);
  return t;
}

// Mean of squared triple increments, (1/(m1 m2 n)) sum T^2, streamed so the
// array is never materialized.
inline double triple_increment_mean_square(const ThinnedView& v) {
  if (v.n() < 1 || v.m1() < 1 || v.m2() < 1)
    throw Error(ErrorCode::DegenerateView, "view has no increments");
  double total = 0.0;
  for (int j = 1; j <= v.m1(); ++j) {
    for (int k = 1; k <= v.m2(); ++k) {
      double cell = 0.0;
      for (int i = 1; i <= v.n(); ++i) {
        const double t = triple_increment(v, i, j, k);
        cell += t * t;
      }
      total += cell;
    }
  }
  return total / (static_cast<double>(v.m1()) * v.m2() * v.n());
}

struct AlphaEstimate {
  double alpha_hat = 0.0;
  bool in_range = true;       // alpha_hat inside (0,2)
  double mean_square_fine = 0.0;
  double mean_square_coarse = 0.0;
};

inline double alpha_from_mean_squares(double ms_fine, double ms_coarse, int p) {
  return std::log(ms_coarse / ms_fine) / std::log(static_cast<double>(p) * p);
}

// Damping estimator: ratio of coarse to fine mean squared triple increments
// on two views sharing margin b with delta' = p delta, Delta' = p^2 Delta,
//   alpha_hat = log(ms'/ms) / log(p^2).
// Reported raw; callers clamp to their own admissible interval.
inline AlphaEstimate estimate_alpha(const FieldRecord& parent, double b, int m1, int p = 2) {
  if (p < 2) throw Error(ErrorCode::IndivisibleCoarsening, "p must be >= 2");
  if (m1 % p != 0)
    throw Error(ErrorCode::IndivisibleCoarsening, "p does not divide m1");
  const int n = parent.grid.n_time;
  if (n % (p * p) != 0)
    throw Error(ErrorCode::IndivisibleCoarsening, "p^2 does not divide the time count");
  const ThinnedView fine = thin(parent, ThinSpec{b, m1, m1, n});
  const ThinnedView coarse = thin(parent, ThinSpec{b, m1 / p, m1 / p, n / (p * p)});
  AlphaEstimate est;
  est.mean_square_fine = triple_increment_mean_square(fine);
  est.mean_square_coarse = triple_increment_mean_square(coarse);
  if (!(est.mean_square_fine > 0.0) || !(est.mean_square_coarse > 0.0))
    throw Error(ErrorCode::DegenerateView, "zero quadratic variation");
  est.alpha_hat = alpha_from_mean_squares(est.mean_square_fine, est.mean_square_coarse, p);
  est.in_range = est.alpha_hat > 0.0 && est.alpha_hat < 2.0;
  return est;
}

// Rescaled cell sums feeding the contrast:
//   V_{j,k}  = (1/(N Delta^alpha))   sum_{i=1}^{N}   (T_{i,j,k} X)^2
//   Vt_{j,k} = (1/(N (2Delta)^alpha)) sum_{i=1}^{N-1} (T_{i,j,k}X + T_{i+1,j,k}X)^2
struct IncrementStats {
  int m1 = 0, m2 = 0, n = 0;
  double delta = 0.0, delta_t = 0.0;
  double r = 0.0;          // delta / sqrt(delta_t)
  double alpha = 0.0;      // rescaling exponent used
  double sum_sq_T = 0.0;
  double sum_sq_Ttilde = 0.0;
  std::vector<double> V;   // m1*m2, index (j-1)*m2 + (k-1)
  std::vector<double> Vt;
  std::vector<double> y_mid, z_mid;
};

inline IncrementStats rescaled_cell_sums(const ThinnedView& v, double alpha) {
  if (v.n() < 1 || v.m1() < 1 || v.m2() < 1)
    throw Error(ErrorCode::DegenerateView, "view has no increments");
  if (!(alpha > 0.0 && alpha < 2.0))
    throw Error(ErrorCode::BadConfig, "alpha must lie in (0,2)");
  IncrementStats s;
  s.m1 = v.m1();
  s.m2 = v.m2();
  s.n = v.n();
  s.delta = v.delta;
  s.delta_t = v.delta_t;
  s.r = v.aspect_r();
  s.alpha = alpha;
  s.y_mid = v.y_mid;
  s.z_mid = v.z_mid;
  s.V.assign(static_cast<std::size_t>(s.m1) * s.m2, 0.0);
  s.Vt.assign(static_cast<std::size_t>(s.m1) * s.m2, 0.0);
  const double norm = 1.0 / (s.n * std::pow(s.delta_t, alpha));
  const double norm_t = 1.0 / (s.n * std::pow(2.0 * s.delta_t, alpha));
  for (int j = 1; j <= s.m1; ++j) {
    for (int k = 1; k <= s.m2; ++k) {
      double ss = 0.0, sst = 0.0;
      double prev = 0.0;
      for (int i = 1; i <= s.n; ++i) {
        const double t = triple_increment(v, i, j, k);
        ss += t * t;
        if (i > 1) {
          const double tt = prev + t;
          sst += tt * tt;
        }
        prev = t;
      }
      s.V[(j - 1) * static_cast<std::size_t>(s.m2) + (k - 1)] = ss * norm;
      s.Vt[(j - 1) * static_cast<std::size_t>(s.m2) + (k - 1)] = sst * norm_t;
      s.sum_sq_T += ss;
      s.sum_sq_Ttilde += sst;
    }
  }
  return s;
}

}  // namespace spde2d
