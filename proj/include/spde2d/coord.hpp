#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "spde2d/errors.hpp"
#include "spde2d/model.hpp"

namespace spde2d {

// Antiderivative of sqrt2 sin(pi l x) e^{a x / 2}:
//   g_l(x:a) = sqrt2 e^{a x/2} / ((a/2)^2 + (pi l)^2) * ((a/2) sin(pi l x) - pi l cos(pi l x)).
inline double g_fun(int l, double x, double a) {
  const double half_a = 0.5 * a;
  const double pl = kPi * l;
  return kSqrt2 * std::exp(half_a * x) / (half_a * half_a + pl * pl) *
         (half_a * std::sin(pl * x) - pl * std::cos(pl * x));
}

// Per-axis weights delta_j g_l(a) = g_l(x_j : a) - g_l(x_{j-1} : a) on the
// uniform grid, j = 1..M.
inline std::vector<double> g_weights(int l, double a, int M) {
  std::vector<double> w(M);
  double prev = g_fun(l, 0.0, a);
  for (int j = 1; j <= M; ++j) {
    const double cur = g_fun(l, static_cast<double>(j) / M, a);
    w[j - 1] = cur - prev;
    prev = cur;
  }
  return w;
}

// Riemann-sum projection of the field onto mode (l1, l2) under the tilt
// implied by (kappa_hat, eta_hat):
//   xhat(t) = sum_{j,k} X_t(y_{j-1}, z_{k-1}) delta_j g_{l1}(kappa) delta_k g_{l2}(eta),
// evaluated at the record's time indices in `t_idx`.
inline std::vector<double> approx_coordinate(const FieldRecord& field, int l1, int l2,
                                             double kappa_hat, double eta_hat,
                                             const std::vector<int>& t_idx) {
  if (!field.grid.y.is_uniform() || !field.grid.z.is_uniform())
    throw Error(ErrorCode::NonUniformGrid, "coordinate projection needs the full uniform grid");
  const int M1 = field.grid.y.uniform_m;
  const int M2 = field.grid.z.uniform_m;
  const auto wy = g_weights(l1, kappa_hat, M1);
  const auto wz = g_weights(l2, eta_hat, M2);
  std::vector<double> path(t_idx.size());
  std::vector<double> row(M2);
  for (std::size_t p = 0; p < t_idx.size(); ++p) {
    const int i = t_idx[p];
    double acc = 0.0;
    for (int j = 1; j <= M1; ++j) {
      double inner = 0.0;
      for (int k = 1; k <= M2; ++k) inner += field.at(i, j - 1, k - 1) * wz[k - 1];
      acc += wy[j - 1] * inner;
    }
    path[p] = acc;
  }
  return path;
}

// Realized quadratic variation of a path.
inline double coord_qv(const std::vector<double>& path) {
  double qv = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double d = path[i] - path[i - 1];
    qv += d * d;
  }
  return qv;
}

// h^{a ~^ b} with the log factor at equality, stated for L = base > 1.
inline double rate_power(double base, double a, double b) {
  if (a < b) return std::pow(base, a);
  if (a > b) return std::pow(base, b);
  return std::pow(base, b) / std::log(base);
}

struct CoordEstimates {
  std::map<std::pair<int, int>, double> qv;      // realized QV per mode
  std::map<std::pair<int, int>, double> level;   // lambda~ (Q1) or mu-implied (Q2)
  double theta0 = 0.0;   // Q1 only
  double mu0 = 0.0;      // Q2 only
  double theta1 = 0.0;
  double eta1 = 0.0;
  double theta2 = 0.0;
  double sigma2 = 0.0;
  double rate_diagnostic = 0.0;  // n / (M1 ^ M2)^{2 (alpha ~^ 1)}
  bool fragile_alpha = false;    // exponent 1/alpha extreme
};

// Q1 plug-ins from the realized QVs of modes (1,1) and (1,2):
//   lambda~ = (sigma2_hat / qv)^{1/alpha},
//   theta0~ = -lambda~_{11} + ((kappa^2+eta^2)/4 + 2 pi^2) theta2_hat,
//   theta2~ = (lambda~_{12} - lambda~_{11}) / (3 pi^2),
//   theta1~ = kappa theta2~, eta1~ = eta theta2~,
//   sigma2~ = (sigma2_hat / theta2_hat) theta2~.
inline CoordEstimates q1_plug_in(double qv11, double qv12, const Vartheta& hat, double alpha_hat) {
  if (!(qv11 > 0.0) || !(qv12 > 0.0))
    throw Error(ErrorCode::NonPositiveQV, "realized QV must be positive");
  CoordEstimates out;
  out.fragile_alpha = alpha_hat < 0.05;
  out.qv[{1, 1}] = qv11;
  out.qv[{1, 2}] = qv12;
  const double inv_a = 1.0 / alpha_hat;
  const double l11 = std::pow(hat.sigma2 / qv11, inv_a);
  const double l12 = std::pow(hat.sigma2 / qv12, inv_a);
  out.level[{1, 1}] = l11;
  out.level[{1, 2}] = l12;
  out.theta0 =
      -l11 + (0.25 * (hat.kappa * hat.kappa + hat.eta * hat.eta) + 2.0 * kPiSq) * hat.theta2;
  out.theta2 = (l12 - l11) / (3.0 * kPiSq);
  out.theta1 = hat.kappa * out.theta2;
  out.eta1 = hat.eta * out.theta2;
  out.sigma2 = hat.sigma2 / hat.theta2 * out.theta2;
  return out;
}

// Q2 plug-ins:
//   sigma2- = {3 pi^2 (qv12^{-1/alpha} - qv11^{-1/alpha})^{-1}}^{alpha},
//   mu0-    = (sigma2_check / qv11)^{1/alpha} - 2 pi^2,
//   theta2- = (theta2_check / sigma2_check) sigma2-,  theta1- = kappa theta2-, ...
inline CoordEstimates q2_plug_in(double qv11, double qv12, const Vartheta& check,
                                 double alpha_hat) {
  if (!(qv11 > 0.0) || !(qv12 > 0.0))
    throw Error(ErrorCode::NonPositiveQV, "realized QV must be positive");
  CoordEstimates out;
  out.fragile_alpha = alpha_hat < 0.05;
  out.qv[{1, 1}] = qv11;
  out.qv[{1, 2}] = qv12;
  const double inv_a = 1.0 / alpha_hat;
  const double a11 = std::pow(qv11, -inv_a);  // qv11^{-1/alpha}
  const double a12 = std::pow(qv12, -inv_a);
  if (!(a12 > a11))
    throw Error(ErrorCode::InvertedModeOrder,
                "mode (1,2) must carry less noise than (1,1); QV too noisy");
  out.sigma2 = std::pow(3.0 * kPiSq / (a12 - a11), alpha_hat);
  out.mu0 = std::pow(check.sigma2 / qv11, inv_a) - 2.0 * kPiSq;
  out.level[{1, 1}] = out.mu0 + 2.0 * kPiSq;
  out.level[{1, 2}] = std::pow(check.sigma2 / qv12, inv_a);
  out.theta2 = check.theta2 / check.sigma2 * out.sigma2;
  out.theta1 = check.kappa * out.theta2;
  out.eta1 = check.eta * out.theta2;
  return out;
}

// Asymptotic covariance of sqrt(n) (theta0~, theta1~, eta1~, theta2~, sigma2~)
// at the truth (Q1), or of the mu0 analog (Q2). Assembled as
//   2/(9 pi^4) * (c1^2 v1 v1^T + c2^2 v2 v2^T),
// the delta-method form of the plug-in chain, which is symmetric positive
// semidefinite of rank <= 2 by construction. The coordinate-level CLT test
// pins the (theta2, theta2) entry against Monte Carlo.
inline Eigen::Matrix<double, 5, 5> asymptotic_cov(NoiseFamily family, const ModelParams& truth) {
  truth.validate();
  const DerivedSpectrum spec = derive_spectrum(truth);
  const double a = truth.alpha;
  const double s2 = truth.sigma * truth.sigma;
  Eigen::Matrix<double, 5, 1> v1, v2;
  double c1, c2;
  if (family == NoiseFamily::Q1) {
    v1 << 3.0 * kPiSq, spec.kappa, spec.eta, 1.0, s2 / truth.theta2;
    v2 << 0.0, spec.kappa, spec.eta, 1.0, s2 / truth.theta2;
    c1 = spec.lambda(1, 1) / a;
    c2 = spec.lambda(1, 2) / a;
  } else {
    v1 << 3.0 * kPiSq / a, truth.theta1, truth.eta1, truth.theta2, s2;
    v2 << 0.0, truth.theta1, truth.eta1, truth.theta2, s2;
    c1 = spec.mu(1, 1);
    c2 = spec.mu(1, 2);
  }
  const double pref = 2.0 / (9.0 * kPiSq * kPiSq);
  return pref * (c1 * c1 * v1 * v1.transpose() + c2 * c2 * v2 * v2.transpose());
}

}  // namespace spde2d
