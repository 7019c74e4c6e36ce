#pragma once

// One penalized rank-one component: minimizes
//   ||X - u v^T||_F^2 + alpha (u^T u)(v^T Omega v)
// either by the alternating power algorithm or through the leading singular
// pair of the half-smoothed matrix X S^{1/2}(alpha).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "pfpca/error.hpp"
#include "pfpca/grid_penalty.hpp"

namespace pfpca {

enum class FitEngine { SvdRoute, Power };

struct FitConfig {
  double tol = 1e-9;   ///< threshold on ||v_new - v_old||_2
  int max_iter = 500;
  /// Starting loading for the power algorithm; the first right singular
  /// vector of X when empty.
  std::optional<VectorXd> initial_loading;
  FitEngine engine = FitEngine::SvdRoute;
  /// Keep the per-iteration objective values of the power algorithm.
  bool record_objective = false;
};

struct ComponentFit {
  VectorXd scores;   ///< u = X v
  VectorXd loading;  ///< unit norm, largest-|entry| positive
  double alpha = 0.0;
  /// Criterion value with u set to its optimum for the final v.
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

namespace detail {

inline void check_matrix(const MatrixXd& x, const PenaltyOperator& p) {
  if (x.cols() != p.size() || x.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch,
                "data has " + std::to_string(x.cols()) + " columns but the penalty has size " +
                    std::to_string(p.size()));
  }
  if (x.squaredNorm() == 0.0) throw Error(ErrorCode::ZeroMatrix, "data matrix is identically zero");
}

inline void check_config(const FitConfig& cfg) {
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1) {
    throw Error(ErrorCode::InvalidConfig, "tol must be > 0 and max_iter >= 1");
  }
}

inline VectorXd leading_right_singular_vector(const MatrixXd& x) {
  Eigen::BDCSVD<MatrixXd> svd(x, Eigen::ComputeThinV);
  return svd.matrixV().col(0);
}

inline VectorXd half_shrink(const PenaltyOperator& p, double alpha) {
  return (1.0 + alpha * p.eigvals.array()).rsqrt().matrix();
}

}  // namespace detail

/// ||X - u v^T||_F^2 + alpha (u^T u)(v^T Omega v).
inline double penalized_objective(const MatrixXd& x, const VectorXd& u, const VectorXd& v, double alpha,
                                  const PenaltyOperator& p) {
  detail::check_alpha(alpha);
  if (u.size() != x.rows() || v.size() != x.cols() || v.size() != p.size()) {
    throw Error(ErrorCode::DimensionMismatch, "u, v, X and the penalty disagree in size");
  }
  const double fit = (x - u * v.transpose()).squaredNorm();
  return fit + alpha * u.squaredNorm() * v.dot(p.omega * v);
}

/// For fixed v the minimizing scores are X v / v^T (I + alpha Omega) v.
inline VectorXd optimal_scores(const MatrixXd& x, const VectorXd& v, double alpha, const PenaltyOperator& p) {
  const double denom = v.squaredNorm() + alpha * v.dot(p.omega * v);
  return x * v / denom;
}

inline double profile_objective(const MatrixXd& x, const VectorXd& v, double alpha, const PenaltyOperator& p) {
  return penalized_objective(x, optimal_scores(x, v, alpha, p), v, alpha, p);
}

/// Alternating power algorithm: u <- X v; v <- S(alpha) X^T u; v <- v / ||v||.
/// Stops when ||v_new - v_old|| < tol. Returns converged = false when the
/// iteration cap is hit or the change fails to shrink for 50 iterations in a row.
inline ComponentFit fit_power(const MatrixXd& x, const PenaltyOperator& p, double alpha, const FitConfig& cfg = {}) {
  detail::check_alpha(alpha);
  detail::check_config(cfg);
  detail::check_matrix(x, p);

  VectorXd v;
  if (cfg.initial_loading) {
    detail::check_length(p, cfg.initial_loading->size());
    v = cfg.initial_loading->normalized();
  } else {
    v = detail::leading_right_singular_vector(x);
  }

  const VectorXd shrink = (1.0 + alpha * p.eigvals.array()).inverse().matrix();
  ComponentFit fit;
  fit.alpha = alpha;
  if (cfg.record_objective) fit.objective_trace.push_back(profile_objective(x, v, alpha, p));

  double prev_change = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const VectorXd u = x * v;
    VectorXd next = p.eigvecs * (shrink.asDiagonal() * (p.eigvecs.transpose() * (x.transpose() * u)));
    const double norm = next.norm();
    if (norm == 0.0) throw Error(ErrorCode::ZeroScores, "loading update vanished; start is orthogonal to the data");
    next /= norm;
    const double change = (next - v).norm();
    v = std::move(next);
    fit.iterations = it;
    if (cfg.record_objective) fit.objective_trace.push_back(profile_objective(x, v, alpha, p));
    if (change < cfg.tol) {
      fit.converged = true;
      break;
    }
    stalled = change >= prev_change ? stalled + 1 : 0;
    prev_change = change;
    if (stalled >= 50) break;
  }

  detail::orient(v);
  fit.loading = v;
  fit.scores = x * v;
  fit.objective = profile_objective(x, v, alpha, p);
  return fit;
}

/// Leading K loadings of the half-smoothed matrix X Gamma (I + alpha Lambda)^{-1/2},
/// mapped back by Gamma (I + alpha Lambda)^{-1/2}.
struct HalfSmoothedLoadings {
  MatrixXd loadings;         ///< unit-norm columns, oriented
  MatrixXd raw;              ///< back-mapped columns before renormalization
  VectorXd singular_values;  ///< of the half-smoothed matrix, length K
  double residual_fro_norm = 0.0;  ///< ||X~ - rank-K truncation||_F
};

inline HalfSmoothedLoadings half_smoothed_loadings(const MatrixXd& x, const PenaltyOperator& p, double alpha,
                                                   Index k) {
  detail::check_alpha(alpha);
  detail::check_matrix(x, p);
  if (k < 1 || k > std::min(x.rows(), x.cols())) {
    throw Error(ErrorCode::DimensionError, "number of components must be in [1, min(n, m)]");
  }
  const VectorXd d = detail::half_shrink(p, alpha);
  const MatrixXd xt = (x * p.eigvecs) * d.asDiagonal();
  Eigen::BDCSVD<MatrixXd> svd(xt, Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "SVD of half-smoothed data failed");

  HalfSmoothedLoadings out;
  out.singular_values = svd.singularValues().head(k);
  out.raw = p.eigvecs * (d.asDiagonal() * svd.matrixV().leftCols(k));
  out.loadings = out.raw;
  for (Index c = 0; c < k; ++c) {
    VectorXd col = out.loadings.col(c).normalized();
    detail::orient(col);
    out.loadings.col(c) = col;
  }
  const VectorXd& sv = svd.singularValues();
  out.residual_fro_norm = sv.tail(sv.size() - k).norm();
  return out;
}

/// Leading singular pair of the half-smoothed matrix, renormalized to a unit loading.
inline ComponentFit fit_svd_route(const MatrixXd& x, const PenaltyOperator& p, double alpha) {
  const HalfSmoothedLoadings h = half_smoothed_loadings(x, p, alpha, 1);
  ComponentFit fit;
  fit.alpha = alpha;
  fit.loading = h.loadings.col(0);
  fit.scores = x * fit.loading;
  fit.objective = profile_objective(x, fit.loading, alpha, p);
  fit.iterations = 0;
  fit.converged = true;
  return fit;
}

/// Dispatches on cfg.engine.
inline ComponentFit fit_component(const MatrixXd& x, const PenaltyOperator& p, double alpha,
                                  const FitConfig& cfg = {}) {
  if (cfg.engine == FitEngine::Power) return fit_power(x, p, alpha, cfg);
  return fit_svd_route(x, p, alpha);
}

}  // namespace pfpca
