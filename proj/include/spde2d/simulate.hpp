#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "spde2d/errors.hpp"
#include "spde2d/model.hpp"
#include "spde2d/parallel.hpp"
#include "spde2d/rng.hpp"

namespace spde2d {

// Coordinate blocks are row-major: one l1 row is contiguous, which the
// per-row OU updates and the chunked synthesis products both want.
using CoordMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Scheme { Exact, EulerMaruyama };

inline const char* scheme_name(Scheme s) { return s == Scheme::Exact ? "exact" : "em"; }

// Exact transition of dx = -lambda x dt + noise_sd dw over a step dt.
inline double ou_step_exact(double x, double lambda, double noise_sd, double dt, double gauss) {
  const double decay = std::exp(-lambda * dt);
  const double var_scale = -std::expm1(-2.0 * lambda * dt) / (2.0 * lambda);
  return decay * x + noise_sd * std::sqrt(var_scale) * gauss;
}

// One Euler-Maruyama step of the same dynamics.
inline double ou_step_em(double x, double lambda, double noise_sd, double dt, double gauss) {
  return (1.0 - lambda * dt) * x + noise_sd * std::sqrt(dt) * gauss;
}

// Streams the coordinate matrix x_{l1,l2}(t_i) one observation step at a
// time. Noise is addressed by (seed, l1, l2-pair, step), so the block at any
// step is a pure function of (seed, config) regardless of threading, and the
// full history is never materialized.
class CoordinateSimulator {
 public:
  CoordinateSimulator(const ModelParams& params, TruncationSpec trunc, int n_time, Scheme scheme,
                      std::uint64_t seed, int em_substeps = 1, int threads = 0,
                      const CoordMatrix* x0 = nullptr)
      : spec_(derive_spectrum(params)),
        trunc_(trunc),
        n_time_(n_time),
        scheme_(scheme),
        seed_(seed),
        substeps_(scheme == Scheme::EulerMaruyama ? std::max(1, em_substeps) : 1),
        threads_(threads) {
    if (trunc.L1 < 1 || trunc.L2 < 1) throw Error(ErrorCode::BadConfig, "truncation must be >= 1");
    if (n_time < 1) throw Error(ErrorCode::BadConfig, "n_time must be >= 1");
    const int L1 = trunc_.L1, L2 = trunc_.L2;
    x_ = x0 ? *x0 : CoordMatrix::Zero(L1, L2);
    if (x_.rows() != L1 || x_.cols() != L2)
      throw Error(ErrorCode::BadConfig, "initial coefficient block has wrong shape");
    decay_.resize(L1, L2);
    shock_.resize(L1, L2);
    const double dt = 1.0 / (static_cast<double>(n_time_) * substeps_);
    for (int i = 0; i < L1; ++i) {
      for (int j = 0; j < L2; ++j) {
        const double lambda = spec_.lambda(i + 1, j + 1);
        const double noise_sd = params.sigma * spec_.noise_weight(i + 1, j + 1, params.alpha);
        if (scheme_ == Scheme::Exact) {
          decay_(i, j) = std::exp(-lambda * dt);
          shock_(i, j) = noise_sd * std::sqrt(-std::expm1(-2.0 * lambda * dt) / (2.0 * lambda));
        } else {
          decay_(i, j) = 1.0 - lambda * dt;
          shock_(i, j) = noise_sd * std::sqrt(dt);
          if (lambda * dt >= 2.0) em_unstable_ = true;
        }
      }
    }
  }

  const CoordMatrix& block() const { return x_; }
  int time_index() const { return step_; }
  bool done() const { return step_ >= n_time_; }
  bool em_unstable() const { return em_unstable_; }
  const DerivedSpectrum& spectrum() const { return spec_; }

  // Advance to the next observation time.
  void advance() {
    const int L1 = trunc_.L1, L2 = trunc_.L2;
    const int n_pairs = (L2 + 1) / 2;
    for (int s = 0; s < substeps_; ++s) {
      const std::uint32_t global_sub = static_cast<std::uint32_t>(step_ * substeps_ + s);
      const int chunk = 32;
      const int n_chunks = (L1 + chunk - 1) / chunk;
      parallel_for_chunks(n_chunks, threads_, [&](int ci) {
        const int lo = ci * chunk, hi = std::min(L1, lo + chunk);
        for (int i = lo; i < hi; ++i) {
          for (int q = 0; q < n_pairs; ++q) {
            double z0, z1;
            normal_pair(seed_, static_cast<std::uint32_t>(i + 1), static_cast<std::uint32_t>(q),
                        global_sub, 0u, z0, z1);
            const int j0 = 2 * q, j1 = 2 * q + 1;
            x_(i, j0) = decay_(i, j0) * x_(i, j0) + shock_(i, j0) * z0;
            if (j1 < L2) x_(i, j1) = decay_(i, j1) * x_(i, j1) + shock_(i, j1) * z1;
          }
        }
      });
    }
    ++step_;
  }

 private:
  DerivedSpectrum spec_;
  TruncationSpec trunc_;
  int n_time_;
  Scheme scheme_;
  std::uint64_t seed_;
  int substeps_;
  int threads_;
  int step_ = 0;
  bool em_unstable_ = false;
  CoordMatrix x_, decay_, shock_;
};

enum class SynthMode { Naive, Folded, Auto };

namespace detail {

// Per-axis synthesis data. Naive keeps the dense L x (#nodes) eigenfunction
// matrix. Folded works on uniform grids only: sin(pi l j / M) depends on
// l mod 2M with sin(pi (2M - s) j / M) = -sin(pi s j / M), so coefficients
// fold into a (M-1)-vector followed by one dense sine transform.
struct AxisPlan {
  bool folded = false;
  int m = 0;                    // uniform M when folded
  Eigen::MatrixXd naive;        // L x nodes, sqrt2 sin * tilt
  Eigen::MatrixXd dst;          // (M-1) x (M-1), sin(pi s j / M)
  std::vector<double> tilt;     // sqrt2 * exp(-kappa y_j / 2) per node
  std::vector<int> fold_index;  // per l: target row, or -1
  std::vector<double> fold_sign;
  // per target row: the (l, sign) pairs folding onto it, ascending in l
  std::vector<std::vector<std::pair<int, double>>> fold_lists;
};

inline AxisPlan make_axis_plan(const Axis& ax, int L, double tilt_rate, bool folded) {
  AxisPlan plan;
  plan.folded = folded;
  const int n_nodes = ax.count();
  if (!folded) {
    plan.naive.resize(L, n_nodes);
    for (int j = 0; j < n_nodes; ++j) {
      const double y = ax.node(j);
      if (y == 0.0 || y == 1.0) {
        // Dirichlet boundary: exactly zero, not sin(pi l) roundoff
        plan.naive.col(j).setZero();
        continue;
      }
      const double tilt = kSqrt2 * std::exp(-0.5 * tilt_rate * y);
      for (int l = 1; l <= L; ++l) plan.naive(l - 1, j) = tilt * std::sin(kPi * l * y);
    }
    return plan;
  }
  const int M = ax.uniform_m;
  plan.m = M;
  plan.dst.resize(M - 1, M - 1);
  for (int j = 1; j < M; ++j)
    for (int s = 1; s < M; ++s)
      plan.dst(j - 1, s - 1) = std::sin(kPi * s * j / static_cast<double>(M));
  plan.tilt.resize(n_nodes);
  for (int j = 0; j < n_nodes; ++j)
    plan.tilt[j] = kSqrt2 * std::exp(-0.5 * tilt_rate * ax.node(j));
  plan.fold_index.resize(L);
  plan.fold_sign.resize(L);
  plan.fold_lists.assign(M - 1, {});
  for (int l = 1; l <= L; ++l) {
    const int s = l % (2 * M);
    if (s == 0 || s == M) {
      plan.fold_index[l - 1] = -1;
      plan.fold_sign[l - 1] = 0.0;
      continue;
    }
    const int row = s < M ? s - 1 : 2 * M - s - 1;
    const double sign = s < M ? 1.0 : -1.0;
    plan.fold_index[l - 1] = row;
    plan.fold_sign[l - 1] = sign;
    plan.fold_lists[row].push_back({l - 1, sign});
  }
  return plan;
}

}  // namespace detail

// Plan for turning coordinate blocks into field slabs on one grid.
class FieldSynthesizer {
 public:
  FieldSynthesizer(const DerivedSpectrum& spec, TruncationSpec trunc, const SamplingGrid& grid,
                   SynthMode mode, int threads = 0)
      : trunc_(trunc), grid_(grid), threads_(threads) {
    const bool uniform = grid.y.is_uniform() && grid.z.is_uniform();
    bool folded;
    switch (mode) {
      case SynthMode::Naive: folded = false; break;
      case SynthMode::Folded:
        if (!uniform)
          throw Error(ErrorCode::FoldedRequiresUniformGrid,
                      "folded synthesis needs uniform grids on both axes");
        folded = true;
        break;
      case SynthMode::Auto:
      default:
        folded = uniform && trunc.L1 > 2 * grid.y.uniform_m && trunc.L2 > 2 * grid.z.uniform_m;
        break;
    }
    folded_ = folded;
    y_plan_ = detail::make_axis_plan(grid.y, trunc.L1, spec.kappa, folded);
    z_plan_ = detail::make_axis_plan(grid.z, trunc.L2, spec.eta, folded);
  }

  bool folded() const { return folded_; }

  // Writes the field slab for one coordinate block into out (ny x nz,
  // row = y index).
  void slab(const CoordMatrix& coeff, Eigen::MatrixXd& out) const {
    const int ny = grid_.y.count(), nz = grid_.z.count();
    out.resize(ny, nz);
    if (!folded_) {
      // X = E1^T C E2, with the C*E2 product split into fixed row chunks.
      tmp_.resize(trunc_.L1, nz);
      const int chunk = 128;
      const int n_chunks = (trunc_.L1 + chunk - 1) / chunk;
      parallel_for_chunks(n_chunks, threads_, [&](int ci) {
        const int lo = ci * chunk, hi = std::min(trunc_.L1, lo + chunk);
        tmp_.middleRows(lo, hi - lo).noalias() =
            coeff.middleRows(lo, hi - lo) * z_plan_.naive;
      });
      out.noalias() = y_plan_.naive.transpose() * tmp_;
      return;
    }
    const int M1 = y_plan_.m, M2 = z_plan_.m;
    // Stage 1: fold the l1 rows onto M1-1 target rows (contiguous row adds).
    inter_.resize(M1 - 1, trunc_.L2);
    {
      const int chunk = 16;
      const int n_chunks = (M1 - 1 + chunk - 1) / chunk;
      parallel_for_chunks(n_chunks, threads_, [&](int ci) {
        const int lo = ci * chunk, hi = std::min(M1 - 1, lo + chunk);
        for (int r = lo; r < hi; ++r) {
          inter_.row(r).setZero();
          for (const auto& [l, sign] : y_plan_.fold_lists[r])
            inter_.row(r) += sign * coeff.row(l);
        }
      });
    }
    // Stage 2: fold the l2 columns within each target row.
    folded_coeff_.resize(M1 - 1, M2 - 1);
    {
      const int chunk = 16;
      const int n_chunks = (M1 - 1 + chunk - 1) / chunk;
      parallel_for_chunks(n_chunks, threads_, [&](int ci) {
        const int lo = ci * chunk, hi = std::min(M1 - 1, lo + chunk);
        for (int r = lo; r < hi; ++r) {
          folded_coeff_.row(r).setZero();
          const double* in = &inter_(r, 0);
          double* out_row = &folded_coeff_(r, 0);
          for (int l2 = 0; l2 < trunc_.L2; ++l2) {
            const int c = z_plan_.fold_index[l2];
            if (c >= 0) out_row[c] += z_plan_.fold_sign[l2] * in[l2];
          }
        }
      });
    }
    interior_.noalias() = y_plan_.dst * (folded_coeff_ * z_plan_.dst.transpose()).eval();
    out.setZero();
    for (int j = 1; j < M1; ++j)
      for (int k = 1; k < M2; ++k)
        out(j, k) = y_plan_.tilt[j] * z_plan_.tilt[k] * interior_(j - 1, k - 1);
  }

 private:
  TruncationSpec trunc_;
  SamplingGrid grid_;
  int threads_;
  bool folded_ = false;
  detail::AxisPlan y_plan_, z_plan_;
  mutable Eigen::MatrixXd tmp_, interior_;
  mutable CoordMatrix inter_, folded_coeff_;
};

// Truncated-sum synthesis of a full record from a finished stream of blocks.
template <class BlockAt>
inline FieldRecord synthesize_field(const BlockAt& block_at, const DerivedSpectrum& spec,
                                    TruncationSpec trunc, const SamplingGrid& grid, SynthMode mode,
                                    int threads = 0) {
  FieldSynthesizer synth(spec, trunc, grid, mode, threads);
  FieldRecord rec;
  rec.grid = grid;
  rec.trunc = trunc;
  rec.values.assign(static_cast<std::size_t>(grid.n_time + 1) * grid.y.count() * grid.z.count(),
                    0.0);
  Eigen::MatrixXd slab;
  for (int i = 0; i <= grid.n_time; ++i) {
    synth.slab(block_at(i), slab);
    for (int j = 0; j < grid.y.count(); ++j)
      for (int k = 0; k < grid.z.count(); ++k) rec.at(i, j, k) = slab(j, k);
  }
  return rec;
}

// A grid to synthesize during one simulation pass. `time_stride` subsamples
// the observation times; the record keeps steps 0, stride, ..., n_steps*stride
// (n_steps <= 0 means every available strided step).
struct SynthesisRequest {
  Axis y;
  Axis z;
  int time_stride = 1;
  int n_steps = 0;
  SynthMode mode = SynthMode::Auto;
};

// Simulates the coordinate stream once and synthesizes every requested grid
// from it. Records are bit-identical to single-grid runs with the same seed.
inline std::vector<FieldRecord> simulate_fields(const ModelParams& params, TruncationSpec trunc,
                                                int n_time, Scheme scheme, std::uint64_t seed,
                                                const std::vector<SynthesisRequest>& requests,
                                                int em_substeps = 1, int threads = 0) {
  CoordinateSimulator sim(params, trunc, n_time, scheme, seed, em_substeps, threads);
  std::vector<FieldRecord> records(requests.size());
  std::vector<FieldSynthesizer> synths;
  synths.reserve(requests.size());
  for (std::size_t g = 0; g < requests.size(); ++g) {
    const auto& rq = requests[g];
    if (rq.time_stride < 1)
      throw Error(ErrorCode::BadConfig, "time_stride must be positive");
    const int n_steps = rq.n_steps > 0 ? rq.n_steps : n_time / rq.time_stride;
    if (n_steps * rq.time_stride > n_time)
      throw Error(ErrorCode::BadConfig, "requested strided steps run past the horizon");
    SamplingGrid grid;
    grid.n_time = n_steps;
    grid.time_step = static_cast<double>(rq.time_stride) / n_time;
    grid.y = rq.y;
    grid.z = rq.z;
    records[g].grid = grid;
    records[g].params = params;
    records[g].trunc = trunc;
    records[g].seed = seed;
    records[g].scheme = scheme_name(scheme);
    records[g].values.assign(
        static_cast<std::size_t>(grid.n_time + 1) * grid.y.count() * grid.z.count(), 0.0);
    synths.emplace_back(sim.spectrum(), trunc, grid, rq.mode, threads);
  }
  Eigen::MatrixXd slab;
  for (int i = 0; i <= n_time; ++i) {
    if (i > 0) sim.advance();
    for (std::size_t g = 0; g < requests.size(); ++g) {
      const int stride = requests[g].time_stride;
      if (i % stride != 0) continue;
      const int row = i / stride;
      if (row > records[g].grid.n_time) continue;
      synths[g].slab(sim.block(), slab);
      auto& rec = records[g];
      for (int j = 0; j < rec.ny(); ++j)
        for (int k = 0; k < rec.nz(); ++k) rec.at(row, j, k) = slab(j, k);
    }
  }
  for (auto& rec : records) rec.em_unstable = sim.em_unstable();
  return records;
}

inline FieldRecord simulate_field(const ModelParams& params, TruncationSpec trunc,
                                  const Axis& y_axis, const Axis& z_axis, int n_time,
                                  Scheme scheme, std::uint64_t seed,
                                  SynthMode mode = SynthMode::Auto, int em_substeps = 1,
                                  int threads = 0) {
  SynthesisRequest rq;
  rq.y = y_axis;
  rq.z = z_axis;
  rq.mode = mode;
  return std::move(
      simulate_fields(params, trunc, n_time, scheme, seed, {rq}, em_substeps, threads)[0]);
}

}  // namespace spde2d
