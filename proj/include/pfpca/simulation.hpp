#pragma once

// Monte-Carlo comparison of MPDC and SPDR on the two-factor model
//   X_ij = u_i1 v1(t_j) + u_i2 v2(t_j) + e_ij,
// u_i1 ~ N(0, sigma1^2), u_i2 ~ N(0, sigma2^2), e_ij ~ N(0, sigma^2), with
// v1 ∝ t + sin(pi t) and v2 ∝ cos(3 pi t) normalized on the grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pfpca/error.hpp"
#include "pfpca/fpca.hpp"
#include "pfpca/grid_penalty.hpp"
#include "pfpca/parallel.hpp"
#include "pfpca/selection.hpp"

namespace pfpca {

struct SimConfig {
  Index n = 101;
  Index m = 101;
  double sigma1 = 20.0;
  double sigma2 = 10.0;
  double sigma = 4.0;
  double t_min = -1.0;
  double t_max = 1.0;
  int replicates = 100;
  std::uint64_t base_seed = 20080601;
  /// Added to every row when set; the data are then column-centered before fitting.
  std::optional<VectorXd> mean_curve;
  /// Candidate alphas for both methods.
  AlphaGrid alpha_grid = default_alpha_grid();
  /// Build the roughness penalty on unit-spaced knots 0..m-1 rather than on
  /// [t_min, t_max], so that alpha is measured per grid step.
  bool penalty_on_index_grid = true;
  /// Column-deletion criterion used by MPDC.
  Criterion criterion = Criterion::CV;
};

inline void validate(const SimConfig& cfg) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (cfg.n < 3 || cfg.m < 3) bad("n and m must be >= 3");
  if (cfg.replicates < 1) bad("replicates must be >= 1");
  if (!(cfg.t_min < cfg.t_max)) bad("t_min must be < t_max");
  for (double s : {cfg.sigma1, cfg.sigma2, cfg.sigma}) {
    if (!(s >= 0.0) || !std::isfinite(s)) bad("standard deviations must be finite and >= 0");
  }
  if (cfg.mean_curve && cfg.mean_curve->size() != cfg.m) bad("mean_curve length must equal m");
  if (cfg.criterion == Criterion::RowCV) bad("MPDC criterion must be cv or gcv");
}

inline TimeGrid simulation_grid(const SimConfig& cfg) { return uniform_grid(cfg.m, cfg.t_min, cfg.t_max); }

/// 5 sin(2 pi t) on the grid; the default mean curve for the mean-function variant.
inline VectorXd default_mean_curve(const TimeGrid& grid) {
  return (5.0 * (2.0 * std::numbers::pi * grid.times().array()).sin()).matrix();
}

inline std::pair<VectorXd, VectorXd> true_components(const TimeGrid& grid) {
  const auto t = grid.times().array();
  VectorXd v1 = (t + (std::numbers::pi * t).sin()).matrix();
  VectorXd v2 = (3.0 * std::numbers::pi * t).cos().matrix();
  v1 /= v1.norm();
  v2 /= v2.norm();
  return {v1, v2};
}

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for replicate i: mix64(base_seed ^ mix64(i)).
inline std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t index) {
  return mix64(base_seed ^ mix64(index));
}

/// One data set. Draw order: all u_i1, then all u_i2, then the noise row by row,
/// from a std::mt19937_64 seeded with replicate_seed(base_seed, index).
inline MatrixXd generate(const SimConfig& cfg, std::uint64_t replicate_index) {
  validate(cfg);
  const TimeGrid grid = simulation_grid(cfg);
  const auto [v1, v2] = true_components(grid);
  std::mt19937_64 rng(replicate_seed(cfg.base_seed, replicate_index));
  std::normal_distribution<double> normal(0.0, 1.0);

  VectorXd u1(cfg.n), u2(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) u1(i) = cfg.sigma1 * normal(rng);
  for (Index i = 0; i < cfg.n; ++i) u2(i) = cfg.sigma2 * normal(rng);
  MatrixXd x = u1 * v1.transpose() + u2 * v2.transpose();
  for (Index i = 0; i < cfg.n; ++i) {
    for (Index j = 0; j < cfg.m; ++j) x(i, j) += cfg.sigma * normal(rng);
  }
  if (cfg.mean_curve) x.rowwise() += cfg.mean_curve->transpose();
  return x;
}

/// Mean squared error over grid points after aligning the estimate's sign with the truth.
inline double component_mse(const VectorXd& estimated, const VectorXd& truth) {
  if (estimated.size() != truth.size()) throw Error(ErrorCode::DimensionMismatch, "vector lengths differ");
  const double sign = estimated.dot(truth) < 0.0 ? -1.0 : 1.0;
  return (sign * estimated - truth).squaredNorm() / double(truth.size());
}

/// Two-sided exact sign test of zero median; zero differences are dropped.
inline double sign_test(const std::vector<double>& diffs) {
  long pos = 0, neg = 0;
  for (double d : diffs) {
    if (d > 0.0) ++pos;
    else if (d < 0.0) ++neg;
  }
  const long total = pos + neg;
  if (total == 0) throw Error(ErrorCode::AllZeroDiffs, "every difference is zero");
  const long hi = std::max(pos, neg);
  // P(Bin(total, 1/2) >= hi)
  const double log_half = -double(total) * std::log(2.0);
  double tail = 0.0;
  for (long k = hi; k <= total; ++k) {
    tail += std::exp(std::lgamma(double(total) + 1.0) - std::lgamma(double(k) + 1.0) -
                     std::lgamma(double(total - k) + 1.0) + log_half);
  }
  return std::min(1.0, 2.0 * tail);
}

struct RatioSummary {
  double q1 = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double q3 = 0.0;
};

/// Linear-interpolation quantile (R's default, type 7) of unsorted data.
inline double quantile(std::vector<double> xs, double prob) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double h = (double(xs.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - double(lo)) * (xs[hi] - xs[lo]);
}

inline RatioSummary summarize(const std::vector<double>& xs) {
  RatioSummary s;
  s.q1 = quantile(xs, 0.25);
  s.median = quantile(xs, 0.5);
  s.q3 = quantile(xs, 0.75);
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = xs.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / double(xs.size());
  return s;
}

struct ReplicateRecord {
  int index = 0;
  bool failed = false;
  std::string error;
  std::array<double, 2> mse_mpdc{};
  std::array<double, 2> mse_spdr{};
  std::array<double, 2> alpha_mpdc{};
  double alpha_spdr = 0.0;
};

struct SimulationReport {
  std::vector<ReplicateRecord> per_replicate;
  std::array<RatioSummary, 2> ratio_summary{};
  /// NaN when every difference for that component is zero.
  std::array<double, 2> sign_test_p{};
  int failures = 0;
};

/// Fills the ratio summaries and sign tests from the successful records.
inline void summarize_report(SimulationReport& report) {
  report.failures = 0;
  for (int c = 0; c < 2; ++c) {
    std::vector<double> ratios, diffs;
    for (const auto& r : report.per_replicate) {
      if (r.failed) continue;
      ratios.push_back(r.mse_spdr[c] / r.mse_mpdc[c]);
      diffs.push_back(r.mse_spdr[c] - r.mse_mpdc[c]);
    }
    report.ratio_summary[c] = summarize(ratios);
    try {
      report.sign_test_p[c] = sign_test(diffs);
    } catch (const Error&) {
      report.sign_test_p[c] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  for (const auto& r : report.per_replicate) report.failures += r.failed ? 1 : 0;
}

/// Fits both methods (K = 2) to one replicate and records the component MSEs.
inline ReplicateRecord run_replicate(const SimConfig& cfg, const PenaltyOperator& p, const TimeGrid& grid,
                                     const std::pair<VectorXd, VectorXd>& truth, int index) {
  ReplicateRecord rec;
  rec.index = index;
  try {
    const MatrixXd x = generate(cfg, std::uint64_t(index));
    const CenteredDataset data = cfg.mean_curve ? center_columns(x, grid) : uncentered(x, grid);
    const FPCAResult mpdc = fit_mpdc(data, p, 2, cfg.alpha_grid, cfg.criterion);
    const FPCAResult spdr = fit_spdr(data, p, 2, cfg.alpha_grid);
    if (mpdc.components.size() < 2) throw Error(ErrorCode::ZeroMatrix, "MPDC stopped before two components");
    const VectorXd* truths[2] = {&truth.first, &truth.second};
    for (int c = 0; c < 2; ++c) {
      rec.mse_mpdc[c] = component_mse(mpdc.components[c].fit.loading, *truths[c]);
      rec.mse_spdr[c] = component_mse(spdr.components[c].fit.loading, *truths[c]);
      rec.alpha_mpdc[c] = mpdc.components[c].fit.alpha;
    }
    rec.alpha_spdr = spdr.components[0].fit.alpha;
  } catch (const Error& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

inline SimulationReport run_study(const SimConfig& cfg) {
  validate(cfg);
  const TimeGrid grid = simulation_grid(cfg);
  const PenaltyOperator p =
      build_penalty(cfg.penalty_on_index_grid ? uniform_grid(cfg.m, 0.0, double(cfg.m - 1)) : grid);
  const auto truth = true_components(grid);

  SimulationReport report;
  report.per_replicate.resize(std::size_t(cfg.replicates));
  parallel_for(std::size_t(cfg.replicates), [&](std::size_t i) {
    report.per_replicate[i] = run_replicate(cfg, p, grid, truth, int(i));
  });
  summarize_report(report);
  if (report.failures * 20 > cfg.replicates) {
    throw Error(ErrorCode::StudyFailed, std::to_string(report.failures) + " of " + std::to_string(cfg.replicates) +
                                            " replicates failed (limit 5%)");
  }
  return report;
}

}  // namespace pfpca
