#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "spde2d/config.hpp"
#include "spde2d/contrast.hpp"
#include "spde2d/coord.hpp"
#include "spde2d/errors.hpp"
#include "spde2d/increments.hpp"
#include "spde2d/psi.hpp"
#include "spde2d/simulate.hpp"

namespace spde2d {

inline double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

// One replication's estimates. NaN marks estimators that the noise family
// does not produce (theta0 under Q2, mu0 under Q1) or that failed.
struct EstimateSet {
  int rep = 0;
  double alpha_hat = quiet_nan();
  double theta0 = quiet_nan();
  double theta1 = quiet_nan();
  double eta1 = quiet_nan();
  double theta2 = quiet_nan();
  double sigma2 = quiet_nan();
  double mu0 = quiet_nan();
  double rate_diagnostic = quiet_nan();
  std::string flags;  // semicolon-separated tokens; empty = clean row

  bool flagged() const { return !flags.empty(); }
  void add_flag(const std::string& f) {
    if (!flags.empty()) flags += ';';
    flags += f;
  }
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<EstimateSet> rows;
};

struct SummaryTable {
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> sd;
  int n_used = 0;
  int n_flagged = 0;
};

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Runs one replication on a fresh per-rep seed. The three stages share one
// coordinate stream: the damping stage sees the shifted grid at every step,
// the contrast and coordinate stages see their grids at thinned steps only.
inline EstimateSet run_replication(const ExperimentConfig& cfg, int rep, int threads) {
  EstimateSet row;
  row.rep = rep;
  const std::uint64_t seed = rep_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  const auto& al = cfg.alpha_stage;
  const auto& ct = cfg.contrast_stage;
  const auto& co = cfg.coord_stage;

  std::vector<SynthesisRequest> requests(3);
  requests[0].y = al.b == 0.0 ? Axis::uniform(al.m1) : Axis::shifted(al.b, al.m1);
  requests[0].z = al.b == 0.0 ? Axis::uniform(al.m1) : Axis::shifted(al.b, al.m1);
  requests[0].time_stride = 1;
  requests[1].y = ct.b == 0.0 ? Axis::uniform(ct.m1) : Axis::shifted(ct.b, ct.m1);
  requests[1].z = ct.b == 0.0 ? Axis::uniform(ct.m2) : Axis::shifted(ct.b, ct.m2);
  requests[1].time_stride = cfg.n_time / ct.n;
  requests[1].n_steps = ct.n;
  requests[2].y = Axis::uniform(cfg.M1);
  requests[2].z = Axis::uniform(cfg.M2);
  requests[2].time_stride = cfg.n_time / co.n;
  requests[2].n_steps = co.n;

  auto fields = simulate_fields(cfg.truth, cfg.trunc, cfg.n_time, cfg.scheme, seed, requests,
                                cfg.em_substeps, threads);
  if (fields[0].em_unstable) row.add_flag("em_unstable");

  // Stage 1: damping exponent.
  const auto alpha_est = estimate_alpha(fields[0], al.b, al.m1, al.p);
  row.alpha_hat = alpha_est.alpha_hat;
  if (!alpha_est.in_range) row.add_flag("alpha_oob");
  double alpha_used = alpha_est.alpha_hat;
  if (!(alpha_used > 0.0 && alpha_used < 2.0)) {
    alpha_used = std::clamp(alpha_used, 0.05, 1.95);
    row.add_flag("alpha_clamped");
  }

  // Stage 2: minimum contrast for (kappa, eta, theta2, sigma2).
  const ThinnedView cview = thin(fields[1], ThinSpec{ct.b, ct.m1, ct.m2, ct.n});
  const IncrementStats stats = rescaled_cell_sums(cview, alpha_used);
  const ParamSpaceXi xi = cfg.xi_for(stats.r);
  const ContrastResult fit = minimize_contrast(stats, xi, stats.r, alpha_used, cfg.truth.noise,
                                               cfg.psi_tol, threads);
  if (!fit.converged) row.add_flag("no_converge");
  row.theta1 = fit.theta1;
  row.eta1 = fit.eta1;
  row.theta2 = fit.vartheta.theta2;
  row.sigma2 = fit.vartheta.sigma2;

  // Stage 3: coordinate plug-ins from modes (1,1) and (1,2).
  std::vector<int> t_idx(co.n + 1);
  for (int i = 0; i <= co.n; ++i) t_idx[i] = i;
  double qv11 = 0.0, qv12 = 0.0;
  bool have11 = false, have12 = false;
  for (const auto& mode : co.modes) {
    const auto path = approx_coordinate(fields[2], mode.first, mode.second, fit.vartheta.kappa,
                                        fit.vartheta.eta, t_idx);
    const double qv = coord_qv(path);
    if (mode == std::make_pair(1, 1)) {
      qv11 = qv;
      have11 = true;
    } else if (mode == std::make_pair(1, 2)) {
      qv12 = qv;
      have12 = true;
    }
  }
  if (!have11 || !have12)
    throw Error(ErrorCode::BadConfig, "coordinate stage needs modes (1,1) and (1,2)");
  if (!(qv11 > 0.0) || !(qv12 > 0.0)) {
    row.add_flag("zero_qv");
    return row;
  }
  const int Mmin = std::min(cfg.M1, cfg.M2);
  row.rate_diagnostic = co.n / rate_power(static_cast<double>(Mmin), 2.0 * alpha_used, 2.0);
  try {
    if (cfg.truth.noise == NoiseFamily::Q1) {
      const auto est = q1_plug_in(qv11, qv12, fit.vartheta, alpha_used);
      row.theta0 = est.theta0;
      if (est.fragile_alpha) row.add_flag("fragile_alpha");
    } else {
      const auto est = q2_plug_in(qv11, qv12, fit.vartheta, alpha_used);
      row.mu0 = est.mu0;
      if (est.fragile_alpha) row.add_flag("fragile_alpha");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvertedModeOrder) {
      row.add_flag("inverted_modes");
    } else {
      throw;
    }
  }
  return row;
}

inline RunRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunRecord rec;
  rec.config = cfg;
  rec.rows.reserve(cfg.reps);
  for (int rep = 0; rep < cfg.reps; ++rep) {
    try {
      rec.rows.push_back(run_replication(cfg, rep, cfg.threads));
    } catch (const Error& e) {
      EstimateSet row;
      row.rep = rep;
      row.add_flag(std::string("error:") + error_code_name(e.code()));
      rec.rows.push_back(row);
    }
  }
  return rec;
}

inline const std::vector<std::string>& estimate_columns() {
  static const std::vector<std::string> cols{"alpha_hat", "theta0", "theta1", "eta1",
                                             "theta2",    "sigma2", "mu0"};
  return cols;
}

inline double estimate_column(const EstimateSet& r, std::size_t col) {
  switch (col) {
    case 0: return r.alpha_hat;
    case 1: return r.theta0;
    case 2: return r.theta1;
    case 3: return r.eta1;
    case 4: return r.theta2;
    case 5: return r.sigma2;
    case 6: return r.mu0;
  }
  return quiet_nan();
}

// Column means and standard deviations (denominator n-1) over unflagged rows.
inline SummaryTable summarize(const RunRecord& rec) {
  SummaryTable t;
  t.columns = estimate_columns();
  std::vector<const EstimateSet*> rows;
  for (const auto& r : rec.rows) {
    if (r.flagged())
      ++t.n_flagged;
    else
      rows.push_back(&r);
  }
  t.n_used = static_cast<int>(rows.size());
  if (t.n_used < 2) throw Error(ErrorCode::TooFewRows, "need at least 2 unflagged rows");
  t.mean.resize(t.columns.size(), quiet_nan());
  t.sd.resize(t.columns.size(), quiet_nan());
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    int n = 0;
    double acc = 0.0;
    for (auto* r : rows) {
      const double v = estimate_column(*r, c);
      if (!std::isnan(v)) {
        acc += v;
        ++n;
      }
    }
    if (n < 2) continue;
    const double mean = acc / n;
    double ss = 0.0;
    for (auto* r : rows) {
      const double v = estimate_column(*r, c);
      if (!std::isnan(v)) ss += (v - mean) * (v - mean);
    }
    t.mean[c] = mean;
    t.sd[c] = std::sqrt(ss / (n - 1));
  }
  return t;
}

inline std::string rows_to_csv(const RunRecord& rec) {
  std::ostringstream os;
  os << "rep,alpha_hat,theta0,theta1,eta1,theta2,sigma2,mu0,flags\n";
  for (const auto& r : rec.rows) {
    os << r.rep;
    for (std::size_t c = 0; c < estimate_columns().size(); ++c)
      os << ',' << detail::format_double(estimate_column(r, c));
    os << ',' << r.flags << '\n';
  }
  return os.str();
}

inline std::string summary_to_csv(const SummaryTable& t) {
  std::ostringstream os;
  os << "column,mean,sd,n_used,n_flagged\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    os << t.columns[c] << ',' << detail::format_double(t.mean[c]) << ','
       << detail::format_double(t.sd[c]) << ',' << t.n_used << ',' << t.n_flagged << '\n';
  }
  return os.str();
}

inline std::string summary_to_table(const SummaryTable& t) {
  std::ostringstream os;
  os << "column      mean          s.d.          n\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (std::isnan(t.mean[c])) continue;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-10s  %-12.6g  %-12.6g  %d\n", t.columns[c].c_str(),
                  t.mean[c], t.sd[c], t.n_used);
    os << buf;
  }
  if (t.n_flagged > 0) os << "flagged rows: " << t.n_flagged << "\n";
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw Error(ErrorCode::BadConfig, "cannot write '" + path + "'");
  os << text;
}

}  // namespace spde2d
