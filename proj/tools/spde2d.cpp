#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>

#include "spde2d/config.hpp"
#include "spde2d/contrast.hpp"
#include "spde2d/coord.hpp"
#include "spde2d/experiment.hpp"
#include "spde2d/field_io.hpp"
#include "spde2d/increments.hpp"
#include "spde2d/simulate.hpp"

namespace {

using namespace spde2d;

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig{};
  return ExperimentConfig::from_doc(KeyValueDoc::parse_file(path));
}

SynthesisRequest stage_request(const ExperimentConfig& cfg, const std::string& stage) {
  SynthesisRequest rq;
  if (stage == "alpha") {
    const auto& al = cfg.alpha_stage;
    rq.y = al.b == 0.0 ? Axis::uniform(al.m1) : Axis::shifted(al.b, al.m1);
    rq.z = rq.y;
    rq.time_stride = 1;
  } else if (stage == "contrast") {
    const auto& ct = cfg.contrast_stage;
    rq.y = ct.b == 0.0 ? Axis::uniform(ct.m1) : Axis::shifted(ct.b, ct.m1);
    rq.z = ct.b == 0.0 ? Axis::uniform(ct.m2) : Axis::shifted(ct.b, ct.m2);
    rq.time_stride = cfg.n_time / ct.n;
    rq.n_steps = ct.n;
  } else if (stage == "coord") {
    rq.y = Axis::uniform(cfg.M1);
    rq.z = Axis::uniform(cfg.M2);
    rq.time_stride = cfg.n_time / cfg.coord_stage.n;
    rq.n_steps = cfg.coord_stage.n;
  } else {
    throw Error(ErrorCode::BadConfig, "stage must be alpha, contrast or coord");
  }
  return rq;
}

int cmd_simulate(const std::string& config_path, const std::string& stage, std::uint64_t seed,
                 bool seed_set, int threads, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (threads >= 0) cfg.threads = threads;
  const std::string path = out.empty() ? (cfg.out.empty() ? "field.spde" : cfg.out) : out;
  auto rq = stage_request(cfg, stage);
  auto fields = simulate_fields(cfg.truth, cfg.trunc, cfg.n_time, cfg.scheme, cfg.seed, {rq},
                                cfg.em_substeps, cfg.threads);
  write_field(fields[0], path);
  std::printf("wrote %s (%d+1 x %d x %d)\n", path.c_str(), fields[0].grid.n_time,
              fields[0].ny(), fields[0].nz());
  return 0;
}

int cmd_alpha(const std::string& field_path, double b, int m1, int p) {
  const FieldRecord f = read_field(field_path);
  const auto est = estimate_alpha(f, b, m1, p);
  std::printf("alpha_hat = %.17g%s\n", est.alpha_hat, est.in_range ? "" : "  [out of (0,2)]");
  std::printf("mean_square_fine = %.17g\nmean_square_coarse = %.17g\n", est.mean_square_fine,
              est.mean_square_coarse);
  return 0;
}

int cmd_contrast(const std::string& field_path, double alpha_hat, double b, int m1, int m2, int n,
                 const std::string& family, double psi_tol, int threads) {
  const FieldRecord f = read_field(field_path);
  const NoiseFamily fam = family == "q2" ? NoiseFamily::Q2 : NoiseFamily::Q1;
  double alpha_used = alpha_hat;
  if (!(alpha_used > 0.0 && alpha_used < 2.0)) alpha_used = std::clamp(alpha_used, 0.05, 1.95);
  const int n_use = n > 0 ? n : f.grid.n_time;
  const ThinnedView view = thin(f, ThinSpec{b, m1, m2, n_use});
  const IncrementStats stats = rescaled_cell_sums(view, alpha_used);
  const ParamSpaceXi xi = ParamSpaceXi::defaults(stats.r);
  const ContrastResult fit =
      minimize_contrast(stats, xi, stats.r, alpha_used, fam, psi_tol, threads);
  std::printf("kappa = %.17g\neta = %.17g\ntheta2 = %.17g\nsigma2 = %.17g\n", fit.vartheta.kappa,
              fit.vartheta.eta, fit.vartheta.theta2, fit.vartheta.sigma2);
  std::printf("theta1 = %.17g\neta1 = %.17g\n", fit.theta1, fit.eta1);
  std::printf("objective = %.17g\nconverged = %d\n", fit.objective, fit.converged ? 1 : 0);
  return 0;
}

int cmd_coord(const std::string& field_path, double kappa, double eta, double theta2,
              double sigma2, double alpha_hat, int n, const std::string& family) {
  const FieldRecord f = read_field(field_path);
  const int n_use = n > 0 ? n : f.grid.n_time;
  if (n_use > f.grid.n_time) throw Error(ErrorCode::BadConfig, "n exceeds record length");
  const int stride = f.grid.n_time / n_use;
  std::vector<int> t_idx(n_use + 1);
  for (int i = 0; i <= n_use; ++i) t_idx[i] = i * stride;
  const Vartheta vt{kappa, eta, theta2, sigma2};
  const double qv11 = coord_qv(approx_coordinate(f, 1, 1, kappa, eta, t_idx));
  const double qv12 = coord_qv(approx_coordinate(f, 1, 2, kappa, eta, t_idx));
  std::printf("qv11 = %.17g\nqv12 = %.17g\n", qv11, qv12);
  if (family == "q2") {
    const auto est = q2_plug_in(qv11, qv12, vt, alpha_hat);
    std::printf("mu0 = %.17g\ntheta1 = %.17g\neta1 = %.17g\ntheta2 = %.17g\nsigma2 = %.17g\n",
                est.mu0, est.theta1, est.eta1, est.theta2, est.sigma2);
  } else {
    const auto est = q1_plug_in(qv11, qv12, vt, alpha_hat);
    std::printf("theta0 = %.17g\ntheta1 = %.17g\neta1 = %.17g\ntheta2 = %.17g\nsigma2 = %.17g\n",
                est.theta0, est.theta1, est.eta1, est.theta2, est.sigma2);
  }
  return 0;
}

int cmd_mc(const std::string& config_path, int reps, std::uint64_t seed, bool seed_set,
           int threads, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path);
  if (reps > 0) cfg.reps = reps;
  if (seed_set) cfg.seed = seed;
  if (threads >= 0) cfg.threads = threads;
  if (!out.empty()) cfg.out = out;
  const RunRecord rec = run_experiment(cfg);
  const std::string base = cfg.out.empty() ? "mc_run" : cfg.out;
  write_text(base + ".csv", rows_to_csv(rec));
  const SummaryTable t = summarize(rec);
  write_text(base + "_summary.csv", summary_to_csv(t));
  std::fputs(summary_to_table(t).c_str(), stdout);
  std::printf("rows: %s.csv, summary: %s_summary.csv\n", base.c_str(), base.c_str());
  return 0;
}

int cmd_summarize(const std::string& csv_path) {
  std::ifstream is(csv_path);
  if (!is) throw Error(ErrorCode::BadConfig, "cannot open '" + csv_path + "'");
  std::string header;
  std::getline(is, header);
  RunRecord rec;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    EstimateSet row;
    std::istringstream ls(line);
    std::string tok;
    int col = 0;
    while (std::getline(ls, tok, ',')) {
      const double v = (tok.empty() || tok == "nan") ? quiet_nan() : std::stod(tok);
      switch (col) {
        case 0: row.rep = static_cast<int>(v); break;
        case 1: row.alpha_hat = v; break;
        case 2: row.theta0 = v; break;
        case 3: row.theta1 = v; break;
        case 4: row.eta1 = v; break;
        case 5: row.theta2 = v; break;
        case 6: row.sigma2 = v; break;
        case 7: row.mu0 = v; break;
        case 8: row.flags = tok; break;
      }
      ++col;
    }
    rec.rows.push_back(row);
  }
  const SummaryTable t = summarize(rec);
  std::fputs(summary_to_table(t).c_str(), stdout);
  std::fputs(summary_to_csv(t).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and calibration toolkit for 2D parabolic SPDEs"};
  app.require_subcommand(1);

  std::string config_path, out, field_path, stage = "alpha", family = "q1", csv_path;
  std::uint64_t seed = 0;
  int threads = -1, reps = 0, m1 = 200, m2 = 30, p = 2, n = 0;
  double b_alpha = 0.005, b_contrast = 0.0, alpha_hat = 0.5, psi_tol = 1e-10;
  double kappa = 0, eta = 0, theta2 = 1, sigma2 = 1;

  auto* sim = app.add_subcommand("simulate", "simulate a sample field and write it to disk");
  sim->add_option("--config", config_path, "experiment config file");
  sim->add_option("--stage", stage, "grid to synthesize: alpha, contrast or coord");
  auto* sim_seed = sim->add_option("--seed", seed, "master seed override");
  sim->add_option("--threads", threads, "worker threads (0 = hardware)");
  sim->add_option("--out", out, "output path");

  auto* alf = app.add_subcommand("alpha", "estimate the damping exponent from a field file");
  alf->add_option("--field", field_path, "field file")->required();
  alf->add_option("--b", b_alpha, "spatial margin");
  alf->add_option("--m1", m1, "fine spatial cells per axis");
  alf->add_option("--p", p, "coarsening factor");

  auto* con = app.add_subcommand("contrast", "minimum-contrast fit of (kappa,eta,theta2,sigma2)");
  con->add_option("--field", field_path, "field file")->required();
  con->add_option("--alpha", alpha_hat, "damping estimate to plug in")->required();
  con->add_option("--b", b_contrast, "spatial margin");
  con->add_option("--m1", m1, "cells in y");
  con->add_option("--m2", m2, "cells in z");
  con->add_option("--n", n, "time steps to use (0 = all)");
  con->add_option("--family", family, "q1 or q2");
  con->add_option("--psi-tol", psi_tol, "psi quadrature tolerance");
  con->add_option("--threads", threads, "worker threads");

  auto* crd = app.add_subcommand("coord", "coordinate plug-in estimators");
  crd->add_option("--field", field_path, "field file (full uniform grid)")->required();
  crd->add_option("--kappa", kappa, "kappa estimate")->required();
  crd->add_option("--eta", eta, "eta estimate")->required();
  crd->add_option("--theta2", theta2, "theta2 estimate")->required();
  crd->add_option("--sigma2", sigma2, "sigma2 estimate")->required();
  crd->add_option("--alpha", alpha_hat, "damping estimate")->required();
  crd->add_option("--n", n, "thinned time steps (0 = all)");
  crd->add_option("--family", family, "q1 or q2");

  auto* mc = app.add_subcommand("mc", "Monte Carlo experiment: simulate + all estimators");
  mc->add_option("--config", config_path, "experiment config file")->required();
  mc->add_option("--reps", reps, "replication count override");
  auto* mc_seed = mc->add_option("--seed", seed, "master seed override");
  mc->add_option("--threads", threads, "worker threads override");
  mc->add_option("--out", out, "output basename");

  auto* summ = app.add_subcommand("summarize", "summary table from a per-rep CSV");
  summ->add_option("--csv", csv_path, "per-rep CSV file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(config_path, stage, seed, sim_seed->count() > 0, threads, out);
    if (alf->parsed()) return cmd_alpha(field_path, b_alpha, m1, p);
    if (con->parsed())
      return cmd_contrast(field_path, alpha_hat, b_contrast, m1, m2, n, family, psi_tol, threads);
    if (crd->parsed())
      return cmd_coord(field_path, kappa, eta, theta2, sigma2, alpha_hat, n, family);
    if (mc->parsed())
      return cmd_mc(config_path, reps, seed, mc_seed->count() > 0, threads, out);
    if (summ->parsed()) return cmd_summarize(csv_path);
  } catch (const spde2d::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
