#pragma once

// Sequential multi-component extraction.
//
// MPDC: one smoothing parameter per component, each chosen by column-deletion
// CV/GCV on the current residual, followed by rank-one deflation.
// SPDR: a single smoothing parameter chosen by row-deletion CV, with all
// components taken from the singular vectors of the half-smoothed matrix.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pfpca/error.hpp"
#include "pfpca/grid_penalty.hpp"
#include "pfpca/rank_one.hpp"
#include "pfpca/selection.hpp"

namespace pfpca {

struct CenteredDataset {
  MatrixXd matrix;
  VectorXd column_means;
  TimeGrid grid;
};

inline CenteredDataset center_columns(const MatrixXd& x, const TimeGrid& grid) {
  if (x.rows() < 2) throw Error(ErrorCode::TooFewRows, "centering needs at least 2 rows");
  if (x.cols() != grid.size()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix columns do not match the grid length");
  }
  CenteredDataset d;
  d.column_means = x.colwise().mean().transpose();
  d.matrix = x.rowwise() - d.column_means.transpose();
  d.grid = grid;
  return d;
}

/// Wraps a matrix that is used as-is (no centering); means are recorded as zero.
inline CenteredDataset uncentered(const MatrixXd& x, const TimeGrid& grid) {
  if (x.cols() != grid.size()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix columns do not match the grid length");
  }
  return {x, VectorXd::Zero(x.cols()), grid};
}

enum class Method { MPDC, SPDR };

constexpr std::string_view to_string(Method m) noexcept { return m == Method::MPDC ? "mpdc" : "spdr"; }

struct ExtractedComponent {
  ComponentFit fit;
  SelectionTrace selection;
};

struct FPCAResult {
  Method method = Method::MPDC;
  VectorXd times;
  VectorXd column_means;
  std::vector<ExtractedComponent> components;
  /// MPDC: ||X - sum_k u_k v_k^T||_F. SPDR: the same quantity for the
  /// half-smoothed matrix and its rank-K truncation.
  double residual_fro_norm = 0.0;
  double total_sum_squares = 0.0;  ///< ||centered X||_F^2
  /// Fewer than the requested components were extracted (residual vanished).
  bool stopped_early = false;
};

namespace detail {

inline void check_components(const CenteredDataset& data, const PenaltyOperator& p, Index k, Index max_k) {
  if (data.matrix.cols() != p.size()) {
    throw Error(ErrorCode::DimensionMismatch, "data columns do not match the penalty size");
  }
  if (k < 1 || k > max_k) {
    throw Error(ErrorCode::DimensionError,
                "requested " + std::to_string(k) + " components, allowed range is [1, " + std::to_string(max_k) + "]");
  }
}

}  // namespace detail

inline FPCAResult fit_mpdc(const CenteredDataset& data, const PenaltyOperator& p, Index k, const AlphaGrid& grid,
                           Criterion criterion, const FitConfig& cfg = {}) {
  detail::check_components(data, p, k, std::min(data.matrix.rows(), data.matrix.cols()));
  if (criterion == Criterion::RowCV) {
    throw Error(ErrorCode::InvalidConfig, "MPDC selects with column-deletion CV or GCV");
  }
  const MatrixXd& x = data.matrix;
  const double total = x.squaredNorm();
  if (total == 0.0) throw Error(ErrorCode::ZeroMatrix, "centered data matrix is identically zero");

  FPCAResult result;
  result.method = Method::MPDC;
  result.times = data.grid.times();
  result.column_means = data.column_means;
  result.total_sum_squares = total;

  MatrixXd residual = x;
  for (Index c = 0; c < k; ++c) {
    if (residual.squaredNorm() <= 1e-24 * total) {
      result.stopped_early = true;
      break;
    }
    const VectorXd start = detail::leading_right_singular_vector(residual);
    const VectorXd u0 = residual * start;
    ExtractedComponent comp;
    comp.selection = select_alpha(residual, u0, p, grid, criterion);
    FitConfig component_cfg = cfg;
    if (cfg.engine == FitEngine::Power && !cfg.initial_loading) component_cfg.initial_loading = start;
    comp.fit = fit_component(residual, p, comp.selection.chosen_alpha(), component_cfg);
    const VectorXd& v = comp.fit.loading;
    residual -= (residual * v) * v.transpose();
    result.components.push_back(std::move(comp));
  }
  result.residual_fro_norm = residual.norm();
  return result;
}

/// SPDR with a given trace: extracts K components at the trace's chosen alpha.
inline FPCAResult spdr_at(const CenteredDataset& data, const PenaltyOperator& p, Index k, SelectionTrace trace) {
  const MatrixXd& x = data.matrix;
  const double alpha = trace.chosen_alpha();
  const HalfSmoothedLoadings h = half_smoothed_loadings(x, p, alpha, k);

  FPCAResult result;
  result.method = Method::SPDR;
  result.times = data.grid.times();
  result.column_means = data.column_means;
  result.total_sum_squares = x.squaredNorm();
  result.residual_fro_norm = h.residual_fro_norm;
  for (Index c = 0; c < k; ++c) {
    ExtractedComponent comp;
    comp.fit.alpha = alpha;
    comp.fit.loading = h.loadings.col(c);
    comp.fit.scores = x * comp.fit.loading;
    comp.fit.objective = profile_objective(x, comp.fit.loading, alpha, p);
    comp.fit.converged = true;
    comp.selection = trace;
    result.components.push_back(std::move(comp));
  }
  return result;
}

inline FPCAResult fit_spdr(const CenteredDataset& data, const PenaltyOperator& p, Index k, const AlphaGrid& grid,
                           const FitConfig& /*cfg*/ = {}) {
  detail::check_components(data, p, k, std::min(data.matrix.rows() - 1, data.matrix.cols()));
  if (data.matrix.squaredNorm() == 0.0) throw Error(ErrorCode::ZeroMatrix, "centered data matrix is identically zero");
  return spdr_at(data, p, k, select_alpha_row_cv(data.matrix, p, grid, k));
}

/// ||u_k||^2 / ||centered X||_F^2 per component.
inline std::vector<double> variance_explained(const FPCAResult& result) {
  std::vector<double> out;
  out.reserve(result.components.size());
  for (const auto& c : result.components) {
    out.push_back(result.total_sum_squares > 0.0 ? c.fit.scores.squaredNorm() / result.total_sum_squares : 0.0);
  }
  return out;
}

}  // namespace pfpca
