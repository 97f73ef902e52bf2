#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spde2d/contrast.hpp"
#include "spde2d/errors.hpp"
#include "spde2d/model.hpp"
#include "spde2d/simulate.hpp"

namespace spde2d {

// Key-value text document: one `key = value` per line, '#' starts a comment.
class KeyValueDoc {
 public:
  static KeyValueDoc parse_text(const std::string& text) {
    KeyValueDoc doc;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string& s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t\r");
        s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
      };
      trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorCode::BadConfig, "line " + std::to_string(lineno) + ": expected key = value");
      std::string key = line.substr(0, eq), val = line.substr(eq + 1);
      trim(key);
      trim(val);
      doc.map_[key] = val;
    }
    return doc;
  }

  static KeyValueDoc parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::BadConfig, "cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_text(buf.str());
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
  }
  double get_double(const std::string& key, double fallback) const {
    auto it = map_.find(key);
    return it == map_.end() ? fallback : std::stod(it->second);
  }
  long long get_int(const std::string& key, long long fallback) const {
    auto it = map_.find(key);
    return it == map_.end() ? fallback : std::stoll(it->second);
  }
  const std::map<std::string, std::string>& entries() const { return map_; }

 private:
  std::map<std::string, std::string> map_;
};

struct StageAlphaSpec {
  double b = 0.005;
  int m1 = 200;
  int p = 2;
};

struct StageContrastSpec {
  double b = 0.0;
  int m1 = 30;
  int m2 = 30;
  int n = 100;
};

struct StageCoordSpec {
  int n = 100;
  std::vector<std::pair<int, int>> modes{{1, 1}, {1, 2}};
};

struct ExperimentConfig {
  ModelParams truth;
  TruncationSpec trunc{2000, 2000};
  int n_time = 1000;
  int M1 = 200, M2 = 200;  // full uniform grid used by the coordinate stage
  Scheme scheme = Scheme::Exact;
  int em_substeps = 1;
  StageAlphaSpec alpha_stage;
  StageContrastSpec contrast_stage;
  StageCoordSpec coord_stage;
  // Xi box; theta2_lo <= 0 means "derive from r at run time".
  double xi_kappa_lo = -5.0, xi_kappa_hi = 5.0;
  double xi_eta_lo = -5.0, xi_eta_hi = 5.0;
  double xi_theta2_lo = 0.0, xi_theta2_hi = 5.0;
  double xi_sigma2_lo = 1e-4, xi_sigma2_hi = 25.0;
  double psi_tol = 1e-10;
  int reps = 20;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;

  ParamSpaceXi xi_for(double r) const {
    ParamSpaceXi xi;
    xi.kappa_lo = xi_kappa_lo;
    xi.kappa_hi = xi_kappa_hi;
    xi.eta_lo = xi_eta_lo;
    xi.eta_hi = xi_eta_hi;
    xi.theta2_lo = xi_theta2_lo > 0.0
                       ? xi_theta2_lo
                       : std::max(ParamSpaceXi::theta2_identifiability_bound(r), 1e-3);
    xi.theta2_hi = xi_theta2_hi;
    xi.sigma2_lo = xi_sigma2_lo;
    xi.sigma2_hi = xi_sigma2_hi;
    return xi;
  }

  // Structural checks only. Model-parameter invariants are enforced when a
  // replication constructs the spectrum, so a pathological truth produces
  // flagged rows instead of aborting the run.
  void validate() const {
    if (trunc.L1 < 1 || trunc.L2 < 1) throw Error(ErrorCode::BadConfig, "L1, L2 must be >= 1");
    if (n_time < 1 || M1 < 2 || M2 < 2)
      throw Error(ErrorCode::BadConfig, "need n_time >= 1 and M1, M2 >= 2");
    if (!(alpha_stage.b >= 0.0 && alpha_stage.b < 0.5) || alpha_stage.m1 < 2 || alpha_stage.p < 2)
      throw Error(ErrorCode::BadConfig, "bad alpha stage");
    if (alpha_stage.m1 % alpha_stage.p != 0 || n_time % (alpha_stage.p * alpha_stage.p) != 0)
      throw Error(ErrorCode::IndivisibleCoarsening, "alpha stage coarsening does not divide");
    if (!(contrast_stage.b >= 0.0 && contrast_stage.b < 0.5) || contrast_stage.m1 < 1 ||
        contrast_stage.m2 < 1 || contrast_stage.n < 1 || contrast_stage.n > n_time)
      throw Error(ErrorCode::BadConfig, "bad contrast stage");
    if (coord_stage.n < 1 || coord_stage.n > n_time || coord_stage.modes.empty())
      throw Error(ErrorCode::BadConfig, "bad coordinate stage");
    if (!(psi_tol >= 1e-12 && psi_tol <= 1e-6))
      throw Error(ErrorCode::BadConfig, "psi_tol out of range");
    if (reps < 1) throw Error(ErrorCode::BadConfig, "reps must be >= 1");
  }

  static ExperimentConfig from_doc(const KeyValueDoc& d) {
    ExperimentConfig c;
    c.truth.theta0 = d.get_double("theta0", c.truth.theta0);
    c.truth.theta1 = d.get_double("theta1", c.truth.theta1);
    c.truth.eta1 = d.get_double("eta1", c.truth.eta1);
    c.truth.theta2 = d.get_double("theta2", c.truth.theta2);
    c.truth.sigma = d.get_double("sigma", c.truth.sigma);
    c.truth.alpha = d.get_double("alpha", c.truth.alpha);
    const std::string fam = d.get("noise", "q1");
    if (fam != "q1" && fam != "q2") throw Error(ErrorCode::BadConfig, "noise must be q1 or q2");
    c.truth.noise = fam == "q2" ? NoiseFamily::Q2 : NoiseFamily::Q1;
    c.truth.mu0 = d.get_double("mu0", c.truth.mu0);
    c.trunc.L1 = static_cast<int>(d.get_int("L1", c.trunc.L1));
    c.trunc.L2 = static_cast<int>(d.get_int("L2", c.trunc.L2));
    c.n_time = static_cast<int>(d.get_int("N", c.n_time));
    c.M1 = static_cast<int>(d.get_int("M1", c.M1));
    c.M2 = static_cast<int>(d.get_int("M2", c.M2));
    const std::string sch = d.get("scheme", "exact");
    if (sch != "exact" && sch != "em") throw Error(ErrorCode::BadConfig, "scheme must be exact or em");
    c.scheme = sch == "em" ? Scheme::EulerMaruyama : Scheme::Exact;
    c.em_substeps = static_cast<int>(d.get_int("em_substeps", c.em_substeps));
    c.alpha_stage.b = d.get_double("alpha_b", c.alpha_stage.b);
    c.alpha_stage.m1 = static_cast<int>(d.get_int("alpha_m1", c.alpha_stage.m1));
    c.alpha_stage.p = static_cast<int>(d.get_int("alpha_p", c.alpha_stage.p));
    c.contrast_stage.b = d.get_double("contrast_b", c.contrast_stage.b);
    c.contrast_stage.m1 = static_cast<int>(d.get_int("contrast_m1", c.contrast_stage.m1));
    c.contrast_stage.m2 = static_cast<int>(d.get_int("contrast_m2", c.contrast_stage.m2));
    c.contrast_stage.n = static_cast<int>(d.get_int("contrast_n", c.contrast_stage.n));
    c.coord_stage.n = static_cast<int>(d.get_int("coord_n", c.coord_stage.n));
    if (d.has("coord_modes")) {
      c.coord_stage.modes.clear();
      std::istringstream is(d.get("coord_modes", ""));
      std::string tok;
      while (std::getline(is, tok, ';')) {
        const auto comma = tok.find(',');
        if (comma == std::string::npos)
          throw Error(ErrorCode::BadConfig, "coord_modes entries look like 'l1,l2'");
        c.coord_stage.modes.push_back(
            {std::stoi(tok.substr(0, comma)), std::stoi(tok.substr(comma + 1))});
      }
    }
    c.xi_kappa_lo = d.get_double("xi_kappa_lo", c.xi_kappa_lo);
    c.xi_kappa_hi = d.get_double("xi_kappa_hi", c.xi_kappa_hi);
    c.xi_eta_lo = d.get_double("xi_eta_lo", c.xi_eta_lo);
    c.xi_eta_hi = d.get_double("xi_eta_hi", c.xi_eta_hi);
    c.xi_theta2_lo = d.get_double("xi_theta2_lo", c.xi_theta2_lo);
    c.xi_theta2_hi = d.get_double("xi_theta2_hi", c.xi_theta2_hi);
    c.xi_sigma2_lo = d.get_double("xi_sigma2_lo", c.xi_sigma2_lo);
    c.xi_sigma2_hi = d.get_double("xi_sigma2_hi", c.xi_sigma2_hi);
    c.psi_tol = d.get_double("psi_tol", c.psi_tol);
    c.reps = static_cast<int>(d.get_int("reps", c.reps));
    c.seed = static_cast<std::uint64_t>(d.get_int("seed", static_cast<long long>(c.seed)));
    c.threads = static_cast<int>(d.get_int("threads", c.threads));
    c.out = d.get("out", c.out);
    c.validate();
    return c;
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "theta0 = " << truth.theta0 << "\n"
       << "theta1 = " << truth.theta1 << "\n"
       << "eta1 = " << truth.eta1 << "\n"
       << "theta2 = " << truth.theta2 << "\n"
       << "sigma = " << truth.sigma << "\n"
       << "alpha = " << truth.alpha << "\n"
       << "noise = " << noise_family_name(truth.noise) << "\n"
       << "mu0 = " << truth.mu0 << "\n"
       << "L1 = " << trunc.L1 << "\n"
       << "L2 = " << trunc.L2 << "\n"
       << "N = " << n_time << "\n"
       << "M1 = " << M1 << "\n"
       << "M2 = " << M2 << "\n"
       << "scheme = " << scheme_name(scheme) << "\n"
       << "em_substeps = " << em_substeps << "\n"
       << "alpha_b = " << alpha_stage.b << "\n"
       << "alpha_m1 = " << alpha_stage.m1 << "\n"
       << "alpha_p = " << alpha_stage.p << "\n"
       << "contrast_b = " << contrast_stage.b << "\n"
       << "contrast_m1 = " << contrast_stage.m1 << "\n"
       << "contrast_m2 = " << contrast_stage.m2 << "\n"
       << "contrast_n = " << contrast_stage.n << "\n"
       << "coord_n = " << coord_stage.n << "\n";
    os << "coord_modes = ";
    for (std::size_t i = 0; i < coord_stage.modes.size(); ++i) {
      if (i) os << ';';
      os << coord_stage.modes[i].first << ',' << coord_stage.modes[i].second;
    }
    os << "\n";
    os << "xi_kappa_lo = " << xi_kappa_lo << "\n"
       << "xi_kappa_hi = " << xi_kappa_hi << "\n"
       << "xi_eta_lo = " << xi_eta_lo << "\n"
       << "xi_eta_hi = " << xi_eta_hi << "\n"
       << "xi_theta2_lo = " << xi_theta2_lo << "\n"
       << "xi_theta2_hi = " << xi_theta2_hi << "\n"
       << "xi_sigma2_lo = " << xi_sigma2_lo << "\n"
       << "xi_sigma2_hi = " << xi_sigma2_hi << "\n"
       << "psi_tol = " << psi_tol << "\n"
       << "reps = " << reps << "\n"
       << "seed = " << seed << "\n"
       << "threads = " << threads << "\n"
       << "out = " << out << "\n";
    return os.str();
  }
};

}  // namespace spde2d
