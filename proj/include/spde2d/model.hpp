#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spde2d/errors.hpp"

namespace spde2d {

inline constexpr double kPi = 3.14159265358979323846264338328;
inline constexpr double kPiSq = 9.86960440108935861883449099988;
inline constexpr double kSqrt2 = 1.41421356237309504880168872421;

enum class NoiseFamily { Q1, Q2 };

inline const char* noise_family_name(NoiseFamily f) { return f == NoiseFamily::Q1 ? "q1" : "q2"; }

// Parameterization of
//   dX = { theta2 (d_yy + d_zz) + theta1 d_y + eta1 d_z + theta0 } X dt + sigma dW^Q
// on (0,1)^2 with zero Dirichlet boundary, driven by a Q1- or Q2-Wiener
// process with damping exponent alpha.
struct ModelParams {
  double theta0 = 0.0;
  double theta1 = 0.0;
  double eta1 = 0.0;
  double theta2 = 1.0;
  double sigma = 1.0;
  double alpha = 0.5;
  NoiseFamily noise = NoiseFamily::Q1;
  double mu0 = 0.0;  // Q2 only

  void validate() const {
    if (!(theta2 > 0.0)) throw Error(ErrorCode::NonPositiveOperator, "theta2 must be positive");
    if (!(sigma > 0.0)) throw Error(ErrorCode::BadNoiseParam, "sigma must be positive");
    if (!(alpha > 0.0 && alpha < 2.0))
      throw Error(ErrorCode::BadNoiseParam, "alpha must lie in (0,2)");
    const double kappa = theta1 / theta2;
    const double eta = eta1 / theta2;
    const double gamma_cap = -theta0 / theta2 + 0.25 * (kappa * kappa + eta * eta);
    if (!(theta2 * (2.0 * kPiSq + gamma_cap) > 0.0))
      throw Error(ErrorCode::NonPositiveOperator, "lambda_{1,1} <= 0");
    if (noise == NoiseFamily::Q2 && !(mu0 > -2.0 * kPiSq))
      throw Error(ErrorCode::BadNoiseParam, "mu0 must exceed -2 pi^2");
  }
};

// Eigenstructure of the operator: lambda/mu evaluators and the tilted sine
// eigenfunctions. Values are computed on demand; callers that need whole rows
// cache them.
struct DerivedSpectrum {
  double kappa = 0.0;
  double eta = 0.0;
  double gamma_cap = 0.0;
  double theta2 = 1.0;
  double mu0 = 0.0;
  NoiseFamily noise = NoiseFamily::Q1;

  double lambda(int l1, int l2) const {
    return theta2 * (kPiSq * (static_cast<double>(l1) * l1 + static_cast<double>(l2) * l2) +
                     gamma_cap);
  }
  double mu(int l1, int l2) const {
    return kPiSq * (static_cast<double>(l1) * l1 + static_cast<double>(l2) * l2) + mu0;
  }
  // lambda^{-alpha/2} (Q1) or mu^{-alpha/2} (Q2)
  double noise_weight(int l1, int l2, double alpha) const {
    const double base = noise == NoiseFamily::Q1 ? lambda(l1, l2) : mu(l1, l2);
    return std::pow(base, -0.5 * alpha);
  }
  double eigfun_y(int l1, double y) const {
    return kSqrt2 * std::sin(kPi * l1 * y) * std::exp(-0.5 * kappa * y);
  }
  double eigfun_z(int l2, double z) const {
    return kSqrt2 * std::sin(kPi * l2 * z) * std::exp(-0.5 * eta * z);
  }
  double eigfun(int l1, int l2, double y, double z) const {
    return eigfun_y(l1, y) * eigfun_z(l2, z);
  }
};

inline DerivedSpectrum derive_spectrum(const ModelParams& p) {
  p.validate();
  DerivedSpectrum s;
  s.kappa = p.theta1 / p.theta2;
  s.eta = p.eta1 / p.theta2;
  s.gamma_cap = -p.theta0 / p.theta2 + 0.25 * (s.kappa * s.kappa + s.eta * s.eta);
  s.theta2 = p.theta2;
  s.mu0 = p.mu0;
  s.noise = p.noise;
  return s;
}

struct Vartheta {
  double kappa = 0.0;
  double eta = 0.0;
  double theta2 = 1.0;
  double sigma2 = 1.0;
};

// One spatial axis of an observation grid: either the uniform lattice j/M or
// an explicit node list (used when the simulator is pointed directly at
// shifted nodes).
struct Axis {
  int uniform_m = 0;           // > 0: nodes j/uniform_m, j = 0..uniform_m
  std::vector<double> nodes;   // used when uniform_m == 0

  static Axis uniform(int m) {
    Axis a;
    a.uniform_m = m;
    return a;
  }
  static Axis shifted(double c, int m) {
    Axis a;
    a.nodes.resize(m + 1);
    const double delta = (1.0 - 2.0 * c) / m;
    for (int j = 0; j <= m; ++j) a.nodes[j] = c + j * delta;
    return a;
  }
  static Axis explicit_nodes(std::vector<double> v) {
    Axis a;
    a.nodes = std::move(v);
    return a;
  }

  bool is_uniform() const { return uniform_m > 0; }
  int count() const { return is_uniform() ? uniform_m + 1 : static_cast<int>(nodes.size()); }
  double node(int j) const {
    return is_uniform() ? static_cast<double>(j) / uniform_m : nodes[j];
  }

  // Index of the node equal to x, or -1. For uniform axes the alignment test
  // is |x*M - round(x*M)| <= 1e-9; for explicit axes |node - x| <= 1e-9.
  int find(double x) const {
    if (is_uniform()) {
      const double p = x * uniform_m;
      const double r = std::round(p);
      if (std::fabs(p - r) > 1e-9) return -1;
      const int j = static_cast<int>(r);
      return (j >= 0 && j <= uniform_m) ? j : -1;
    }
    for (int j = 0; j < static_cast<int>(nodes.size()); ++j) {
      if (std::fabs(nodes[j] - x) <= 1e-9) return j;
    }
    return -1;
  }
};

struct SamplingGrid {
  int n_time = 0;               // observation times i * time_step, i = 0..n_time
  double time_step = 0.0;       // spacing of stored times (1/N for the full grid)
  Axis y;
  Axis z;

  double time(int i) const { return i * time_step; }

  static SamplingGrid full(int n, int m1, int m2) {
    SamplingGrid g;
    g.n_time = n;
    g.time_step = 1.0 / n;
    g.y = Axis::uniform(m1);
    g.z = Axis::uniform(m2);
    return g;
  }
};

struct TruncationSpec {
  int L1 = 1;
  int L2 = 1;
};

// Sample field on a grid plus the provenance needed to reproduce it.
struct FieldRecord {
  SamplingGrid grid;
  std::vector<double> values;  // (n_time+1) x ny x nz, time-major, then y, then z
  ModelParams params;
  TruncationSpec trunc;
  std::uint64_t seed = 0;
  std::string scheme = "exact";
  bool em_unstable = false;

  int ny() const { return grid.y.count(); }
  int nz() const { return grid.z.count(); }
  int nt() const { return grid.n_time + 1; }
  double at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(i) * ny() + j) * nz() + k];
  }
  double& at(int i, int j, int k) {
    return values[(static_cast<std::size_t>(i) * ny() + j) * nz() + k];
  }
};

struct ThinSpec {
  double c = 0.0;  // spatial margin in [0, 1/2)
  int m1 = 1;
  int m2 = 1;
  int n = 1;       // number of retained time steps
};

// Index view realizing the thinned data over a parent record: times are the
// parent times at stride floor(N/n); spatial nodes c + j*delta must coincide
// with parent nodes (no interpolation, misalignment is an error).
struct ThinnedView {
  const FieldRecord* field = nullptr;
  std::vector<int> t_idx;   // n+1 entries
  std::vector<int> y_idx;   // m1+1 entries
  std::vector<int> z_idx;   // m2+1 entries
  double margin_c = 0.0;
  double delta = 0.0;       // spatial cell width
  double delta_t = 0.0;     // time increment
  std::vector<double> y_mid, z_mid;

  int n() const { return static_cast<int>(t_idx.size()) - 1; }
  int m1() const { return static_cast<int>(y_idx.size()) - 1; }
  int m2() const { return static_cast<int>(z_idx.size()) - 1; }
  double value(int i, int j, int k) const { return field->at(t_idx[i], y_idx[j], z_idx[k]); }
  double aspect_r() const { return delta / std::sqrt(delta_t); }
};

inline ThinnedView thin(const FieldRecord& f, const ThinSpec& s) {
  if (s.m1 < 1 || s.m2 < 1 || s.n < 1)
    throw Error(ErrorCode::DegenerateView, "thinning counts must be >= 1");
  if (!(s.c >= 0.0 && s.c < 0.5))
    throw Error(ErrorCode::MisalignedThinning, "margin c must lie in [0, 1/2)");
  const int n_parent = f.grid.n_time;
  if (s.n > n_parent)
    throw Error(ErrorCode::MisalignedThinning, "requested more time steps than the parent has");
  ThinnedView v;
  v.field = &f;
  v.margin_c = s.c;
  const int stride = n_parent / s.n;
  v.t_idx.resize(s.n + 1);
  for (int i = 0; i <= s.n; ++i) v.t_idx[i] = i * stride;
  v.delta_t = f.grid.time_step * stride;

  const double delta1 = (1.0 - 2.0 * s.c) / s.m1;
  const double delta2 = (1.0 - 2.0 * s.c) / s.m2;
  if (std::fabs(delta1 - delta2) > 1e-12)
    throw Error(ErrorCode::MisalignedThinning, "m1 and m2 must give equal cell widths");
  v.delta = delta1;

  auto match_axis = [&](const Axis& ax, int m, double delta, const char* name) {
    std::vector<int> idx(m + 1);
    for (int j = 0; j <= m; ++j) {
      const double target = s.c + j * delta;
      const int hit = ax.find(target);
      if (hit < 0)
        throw Error(ErrorCode::MisalignedThinning,
                    std::string(name) + " node " + std::to_string(target) +
                        " (j=" + std::to_string(j) + ") is not a parent grid node");
      idx[j] = hit;
    }
    return idx;
  };
  v.y_idx = match_axis(f.grid.y, s.m1, delta1, "y");
  v.z_idx = match_axis(f.grid.z, s.m2, delta2, "z");

  v.y_mid.resize(s.m1);
  for (int j = 1; j <= s.m1; ++j) v.y_mid[j - 1] = s.c + (j - 0.5) * delta1;
  v.z_mid.resize(s.m2);
  for (int k = 1; k <= s.m2; ++k) v.z_mid[k - 1] = s.c + (k - 0.5) * delta2;
  return v;
}

}  // namespace spde2d
