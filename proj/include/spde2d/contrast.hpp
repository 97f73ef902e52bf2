#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "spde2d/errors.hpp"
#include "spde2d/increments.hpp"
#include "spde2d/parallel.hpp"
#include "spde2d/psi.hpp"

namespace spde2d {

// Compact box for (kappa, eta, theta2, sigma2). The theta2 lower bound
// r^2 / (8 log(1+sqrt2)) keeps theta2 identifiable for every alpha in (0,2).
struct ParamSpaceXi {
  double kappa_lo = -5.0, kappa_hi = 5.0;
  double eta_lo = -5.0, eta_hi = 5.0;
  double theta2_lo = 1e-3, theta2_hi = 5.0;
  double sigma2_lo = 1e-4, sigma2_hi = 25.0;

  static double theta2_identifiability_bound(double r) {
    return r * r / (8.0 * std::log(1.0 + kSqrt2));
  }

  static ParamSpaceXi defaults(double r) {
    ParamSpaceXi xi;
    xi.theta2_lo = std::max(theta2_identifiability_bound(r), 1e-3);
    return xi;
  }

  void validate() const {
    if (!(theta2_lo > 0.0 && sigma2_lo > 0.0) || kappa_lo > kappa_hi || eta_lo > eta_hi ||
        theta2_lo > theta2_hi || sigma2_lo > sigma2_hi)
      throw Error(ErrorCode::BadConfig, "parameter box is empty or touches zero");
  }

  bool contains(const Vartheta& v) const {
    return v.kappa >= kappa_lo && v.kappa <= kappa_hi && v.eta >= eta_lo && v.eta <= eta_hi &&
           v.theta2 >= theta2_lo && v.theta2 <= theta2_hi && v.sigma2 >= sigma2_lo &&
           v.sigma2 <= sigma2_hi;
  }
};

namespace detail {

// h_{j,k} and h~_{j,k} for a candidate (kappa, eta, theta2): the model means
// of V and Vt up to the sigma^2 factor. Separable in j and k.
struct ContrastWork {
  std::vector<double> ey, ez;  // exp(-kappa ybar_j), exp(-eta zbar_k)

  void fill(const IncrementStats& s, double kappa, double eta) {
    ey.resize(s.m1);
    ez.resize(s.m2);
    for (int j = 0; j < s.m1; ++j) ey[j] = std::exp(-kappa * s.y_mid[j]);
    for (int k = 0; k < s.m2; ++k) ez[k] = std::exp(-eta * s.z_mid[k]);
  }
};

struct ProfiledValue {
  double sigma2 = 0.0;     // exact minimizer of the quadratic, clipped to the box
  double objective = 0.0;  // contrast at (kappa, eta, theta2, sigma2)
};

inline ProfiledValue profiled_contrast(const IncrementStats& s, double kappa, double eta,
                                       double psi1, double psi2, double sigma2_lo,
                                       double sigma2_hi, ContrastWork& work) {
  work.fill(s, kappa, eta);
  double num = 0.0, den = 0.0;
  for (int j = 0; j < s.m1; ++j) {
    for (int k = 0; k < s.m2; ++k) {
      const double e = work.ey[j] * work.ez[k];
      const double h = e * psi1;
      const double ht = e * psi2;
      const std::size_t idx = static_cast<std::size_t>(j) * s.m2 + k;
      num += s.V[idx] * h + s.Vt[idx] * ht;
      den += h * h + ht * ht;
    }
  }
  if (!(den > 0.0))
    throw Error(ErrorCode::DegenerateDesign, "zero design mass in sigma^2 profile");
  ProfiledValue out;
  out.sigma2 = std::clamp(num / den, sigma2_lo, sigma2_hi);
  double acc = 0.0;
  for (int j = 0; j < s.m1; ++j) {
    for (int k = 0; k < s.m2; ++k) {
      const double e = work.ey[j] * work.ez[k];
      const std::size_t idx = static_cast<std::size_t>(j) * s.m2 + k;
      const double d1 = s.V[idx] - out.sigma2 * e * psi1;
      const double d2 = s.Vt[idx] - out.sigma2 * e * psi2;
      acc += d1 * d1 + d2 * d2;
    }
  }
  out.objective = acc / (static_cast<double>(s.m1) * s.m2);
  return out;
}

}  // namespace detail

// K_{m,N}(vartheta; alpha): mean squared mismatch of the rescaled cell sums
// against f at aspect ratios r and r/sqrt2. Q2 uses psi~ in place of psi.
inline double contrast_value(const IncrementStats& s, const Vartheta& vt, double r, double alpha,
                             NoiseFamily family, PsiCache* cache = nullptr, double tol = 1e-10) {
  if (std::fabs(r - s.r) > 1e-9 || std::fabs(alpha - s.alpha) > 1e-12)
    throw Error(ErrorCode::BadConfig, "stats were computed at different (r, alpha)");
  auto base = [&](double rr) {
    const double p = cache ? cache->value(rr, alpha, vt.theta2) : psi_value(rr, alpha, vt.theta2, tol);
    return family == NoiseFamily::Q1 ? p : std::pow(vt.theta2, alpha) * p;
  };
  const double psi1 = base(r);
  const double psi2 = base(r / kSqrt2);
  double acc = 0.0;
  for (int j = 0; j < s.m1; ++j) {
    const double ey = std::exp(-vt.kappa * s.y_mid[j]);
    for (int k = 0; k < s.m2; ++k) {
      const double e = vt.sigma2 * ey * std::exp(-vt.eta * s.z_mid[k]);
      const std::size_t idx = static_cast<std::size_t>(j) * s.m2 + k;
      const double d1 = s.V[idx] - e * psi1;
      const double d2 = s.Vt[idx] - e * psi2;
      acc += d1 * d1 + d2 * d2;
    }
  }
  return acc / (static_cast<double>(s.m1) * s.m2);
}

// Exact partial minimizer over sigma^2 (the contrast is quadratic in it),
// clipped to the box.
inline double profile_sigma2(const IncrementStats& s, double kappa, double eta, double theta2,
                             double r, double alpha, NoiseFamily family, double sigma2_lo,
                             double sigma2_hi, PsiCache* cache = nullptr, double tol = 1e-10) {
  auto base = [&](double rr) {
    const double p = cache ? cache->value(rr, alpha, theta2) : psi_value(rr, alpha, theta2, tol);
    return family == NoiseFamily::Q1 ? p : std::pow(theta2, alpha) * p;
  };
  detail::ContrastWork work;
  return detail::profiled_contrast(s, kappa, eta, base(r), base(r / kSqrt2), sigma2_lo, sigma2_hi,
                                   work)
      .sigma2;
}

struct ContrastResult {
  Vartheta vartheta;
  double objective = std::numeric_limits<double>::infinity();
  bool converged = false;
  int restarts = 0;
  long iterations = 0;
  double theta1 = 0.0;  // kappa_hat * theta2_hat
  double eta1 = 0.0;    // eta_hat * theta2_hat
  double alpha_used = 0.0;
  bool alpha_clamped = false;
  // objective value reached from each restart, for tie diagnostics
  std::vector<std::pair<Vartheta, double>> restart_optima;
};

namespace detail {

struct NmOutcome {
  std::array<double, 3> x;
  double fx = std::numeric_limits<double>::infinity();
  double sigma2 = 0.0;
  bool converged = false;
  long iterations = 0;
};

// Nelder-Mead over (kappa, eta, theta2) with box projection; sigma^2 is
// profiled out exactly inside the objective.
template <class Objective, class Project>
inline NmOutcome nelder_mead_3d(const Objective& obj, const Project& project,
                                std::array<double, 3> start, std::array<double, 3> step,
                                int max_iter, double rel_tol) {
  constexpr int kDim = 3;
  std::array<std::array<double, 3>, 4> xs;
  std::array<double, 4> fs;
  std::array<double, 4> s2s;
  xs[0] = project(start);
  for (int v = 1; v <= kDim; ++v) {
    auto p = start;
    p[v - 1] += step[v - 1];
    xs[v] = project(p);
  }
  for (int v = 0; v <= kDim; ++v) fs[v] = obj(xs[v], s2s[v]);

  NmOutcome out;
  long it = 0;
  auto order = [&] {
    for (int a = 0; a <= kDim; ++a)
      for (int b = a + 1; b <= kDim; ++b)
        if (fs[b] < fs[a]) {
          std::swap(fs[a], fs[b]);
          std::swap(xs[a], xs[b]);
          std::swap(s2s[a], s2s[b]);
        }
  };
  for (; it < max_iter; ++it) {
    order();
    double diam = 0.0;
    for (int v = 1; v <= kDim; ++v)
      for (int d = 0; d < kDim; ++d)
        diam = std::max(diam, std::fabs(xs[v][d] - xs[0][d]) / (1.0 + std::fabs(xs[0][d])));
    if (diam < rel_tol) {
      out.converged = true;
      break;
    }
    std::array<double, 3> centroid{0, 0, 0};
    for (int v = 0; v < kDim; ++v)
      for (int d = 0; d < kDim; ++d) centroid[d] += xs[v][d] / kDim;
    auto blend = [&](double coef) {
      std::array<double, 3> p;
      for (int d = 0; d < kDim; ++d) p[d] = centroid[d] + coef * (centroid[d] - xs[kDim][d]);
      return project(p);
    };
    auto xr = blend(1.0);
    double s2r;
    const double fr = obj(xr, s2r);
    if (fr < fs[0]) {
      auto xe = blend(2.0);
      double s2e;
      const double fe = obj(xe, s2e);
      if (fe < fr) {
        xs[kDim] = xe; fs[kDim] = fe; s2s[kDim] = s2e;
      } else {
        xs[kDim] = xr; fs[kDim] = fr; s2s[kDim] = s2r;
      }
    } else if (fr < fs[kDim - 1]) {
      xs[kDim] = xr; fs[kDim] = fr; s2s[kDim] = s2r;
    } else {
      auto xc = blend(fr < fs[kDim] ? 0.5 : -0.5);
      double s2c;
      const double fc = obj(xc, s2c);
      if (fc < std::min(fr, fs[kDim])) {
        xs[kDim] = xc; fs[kDim] = fc; s2s[kDim] = s2c;
      } else {
        for (int v = 1; v <= kDim; ++v) {
          for (int d = 0; d < kDim; ++d) xs[v][d] = xs[0][d] + 0.5 * (xs[v][d] - xs[0][d]);
          xs[v] = project(xs[v]);
          fs[v] = obj(xs[v], s2s[v]);
        }
      }
    }
  }
  order();
  out.x = xs[0];
  out.fx = fs[0];
  out.sigma2 = s2s[0];
  out.iterations = it;
  return out;
}

}  // namespace detail

// argmin over Xi of the contrast at alpha_hat: multi-start Nelder-Mead on
// (kappa, eta, theta2) with sigma^2 profiled exactly. Restarts sit on a fixed
// 3x3x3 quartile lattice of the box and run independently; the best outcome
// wins, ties broken by restart index.
inline ContrastResult minimize_contrast(const IncrementStats& stats, const ParamSpaceXi& xi,
                                        double r, double alpha_hat, NoiseFamily family,
                                        double psi_tol = 1e-10, int threads = 0) {
  xi.validate();
  if (!std::isfinite(alpha_hat)) throw Error(ErrorCode::BadConfig, "alpha_hat must be finite");
  ContrastResult res;
  res.alpha_used = alpha_hat;
  if (!(alpha_hat > 0.0 && alpha_hat < 2.0)) {
    res.alpha_used = std::clamp(alpha_hat, 0.05, 1.95);
    res.alpha_clamped = true;
  }
  if (std::fabs(res.alpha_used - stats.alpha) > 1e-12)
    throw Error(ErrorCode::BadConfig, "stats must be rescaled at the alpha being fitted");
  const double alpha = res.alpha_used;

  PsiCache cache(psi_tol);
  const double rt = r / kSqrt2;
  auto psi_pair = [&](double theta2, double& p1, double& p2) {
    p1 = cache.value(r, alpha, theta2);
    p2 = cache.value(rt, alpha, theta2);
    if (family == NoiseFamily::Q2) {
      const double sc = std::pow(theta2, alpha);
      p1 *= sc;
      p2 *= sc;
    }
  };

  auto project = [&](std::array<double, 3> p) {
    p[0] = std::clamp(p[0], xi.kappa_lo, xi.kappa_hi);
    p[1] = std::clamp(p[1], xi.eta_lo, xi.eta_hi);
    p[2] = std::clamp(p[2], xi.theta2_lo, xi.theta2_hi);
    return p;
  };
  auto objective = [&](const std::array<double, 3>& p, double& sigma2_out) {
    double p1, p2;
    psi_pair(p[2], p1, p2);
    detail::ContrastWork work;
    const auto pv = detail::profiled_contrast(stats, p[0], p[1], p1, p2, xi.sigma2_lo,
                                              xi.sigma2_hi, work);
    sigma2_out = pv.sigma2;
    return pv.objective;
  };

  // 3x3x3 lattice at the quartiles of each box edge.
  std::vector<std::array<double, 3>> starts;
  const auto quart = [](double lo, double hi, int i) { return lo + (hi - lo) * (0.25 * (i + 1)); };
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        starts.push_back({quart(xi.kappa_lo, xi.kappa_hi, a), quart(xi.eta_lo, xi.eta_hi, b),
                          quart(xi.theta2_lo, xi.theta2_hi, c)});
  const std::array<double, 3> step{0.125 * (xi.kappa_hi - xi.kappa_lo),
                                   0.125 * (xi.eta_hi - xi.eta_lo),
                                   0.125 * (xi.theta2_hi - xi.theta2_lo)};

  std::vector<detail::NmOutcome> outcomes(starts.size());
  parallel_for_chunks(static_cast<int>(starts.size()), threads, [&](int i) {
    outcomes[i] = detail::nelder_mead_3d(objective, project, starts[i], step, 400, 1e-8);
  });

  res.restarts = static_cast<int>(starts.size());
  int best = -1;
  for (int i = 0; i < static_cast<int>(outcomes.size()); ++i) {
    const auto& oc = outcomes[i];
    res.iterations += oc.iterations;
    res.restart_optima.push_back(
        {Vartheta{oc.x[0], oc.x[1], oc.x[2], oc.sigma2}, oc.fx});
    if (best < 0 || oc.fx < outcomes[best].fx) best = i;
  }
  const auto& win = outcomes[best];
  res.vartheta = Vartheta{win.x[0], win.x[1], win.x[2], win.sigma2};
  res.objective = win.fx;
  res.converged = win.converged;
  res.theta1 = res.vartheta.kappa * res.vartheta.theta2;
  res.eta1 = res.vartheta.eta * res.vartheta.theta2;
  return res;
}

}  // namespace spde2d
