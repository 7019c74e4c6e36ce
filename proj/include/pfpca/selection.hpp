#pragma once

// Smoothing-parameter selection.
//
// Column-deletion CV and GCV are evaluated in the eigenbasis of Omega: with
// w = Gamma^T X^T u, component k of (I - S(alpha)) X^T u in that basis is
// w_k * alpha lambda_k / (1 + alpha lambda_k). The same shrink factors give
// the leverages 1 - S_jj without forming S(alpha).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pfpca/error.hpp"
#include "pfpca/grid_penalty.hpp"
#include "pfpca/parallel.hpp"
#include "pfpca/rank_one.hpp"

namespace pfpca {

enum class Criterion { CV, GCV, RowCV };

constexpr std::string_view to_string(Criterion c) noexcept {
  switch (c) {
    case Criterion::CV: return "cv";
    case Criterion::GCV: return "gcv";
    case Criterion::RowCV: return "row_cv";
  }
  return "unknown";
}

/// Candidate smoothing parameters: nonnegative, strictly ascending.
class AlphaGrid {
 public:
  AlphaGrid() = default;
  explicit AlphaGrid(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(ErrorCode::InvalidAlphaGrid, "alpha grid is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
        throw Error(ErrorCode::InvalidAlphaGrid, "alpha values must be finite and >= 0");
      }
      if (i > 0 && !(values_[i] > values_[i - 1])) {
        throw Error(ErrorCode::InvalidAlphaGrid, "alpha values must be strictly ascending");
      }
    }
  }

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

/// {0} (optional) followed by base^i for i = i_min..i_max.
inline AlphaGrid exponential_alpha_grid(int i_min, int i_max, bool include_zero = true, double base = 1.5) {
  std::vector<double> v;
  if (include_zero) v.push_back(0.0);
  for (int i = i_min; i <= i_max; ++i) v.push_back(std::pow(base, i));
  return AlphaGrid(std::move(v));
}

/// {0} and 1.5^i for i = -5..25 (32 points).
inline AlphaGrid default_alpha_grid() { return exponential_alpha_grid(-5, 25); }

struct SelectionTrace {
  std::vector<double> alphas;
  std::vector<double> scores;  ///< +inf where evaluation failed
  std::vector<bool> failed;
  std::size_t chosen_index = 0;
  Criterion criterion = Criterion::CV;

  double chosen_alpha() const { return alphas.at(chosen_index); }
};

namespace detail {

inline void check_scores(const MatrixXd& x, const VectorXd& u, const PenaltyOperator& p) {
  if (x.cols() != p.size() || u.size() != x.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "X, u and the penalty disagree in size");
  }
  if (u.squaredNorm() == 0.0) throw Error(ErrorCode::ZeroScores, "score vector u is zero");
}

/// Gamma^T X^T u, shared by every grid point for a given u.
inline VectorXd project_response(const MatrixXd& x, const VectorXd& u, const PenaltyOperator& p) {
  return p.eigvecs.transpose() * (x.transpose() * u);
}

inline double cv_from_projection(const PenaltyOperator& p, const VectorXd& w, double alpha) {
  check_alpha(alpha);
  const Index m = p.size();
  const MatrixXd sq = p.eigvecs.array().square().matrix();
  VectorXd weights;
  if (alpha == 0.0) {
    // alpha -> 0 limit: residual ~ alpha Omega X^T u, leverage ~ alpha Omega_jj
    weights = p.eigvals;
  } else {
    weights = (alpha * p.eigvals.array() / (1.0 + alpha * p.eigvals.array())).matrix();
  }
  const VectorXd resid = p.eigvecs * weights.cwiseProduct(w);
  const VectorXd lev = sq * weights;
  double sum = 0.0;
  for (Index j = 0; j < m; ++j) {
    if (alpha > 0.0 && lev(j) <= 1e-12) {
      throw Error(ErrorCode::DegenerateLeverage,
                  "1 - S_jj <= 1e-12 at column " + std::to_string(j) + "; smoother is saturated");
    }
    const double r = resid(j) / lev(j);
    sum += r * r;
  }
  return sum / double(m);
}

inline double gcv_from_projection(const PenaltyOperator& p, const VectorXd& w, double alpha) {
  check_alpha(alpha);
  const double m = double(p.size());
  VectorXd weights;
  if (alpha == 0.0) {
    weights = p.eigvals;
  } else {
    weights = (alpha * p.eigvals.array() / (1.0 + alpha * p.eigvals.array())).matrix();
  }
  const double num = weights.cwiseProduct(w).squaredNorm() / m;
  // 1 - tr S / m, summed as a mean of shrink factors
  const double den = weights.sum() / m;
  return num / (den * den);
}

}  // namespace detail

/// Closed-form delete-one-column CV score
///   (1/m) sum_j [((I - S) X^T u)_j / (1 - S_jj)]^2.
/// At alpha = 0 returns the analytic limit (1/m) sum_j [(Omega X^T u)_j / Omega_jj]^2.
inline double cv_score(const MatrixXd& x, const VectorXd& u, const PenaltyOperator& p, double alpha) {
  detail::check_alpha(alpha);
  detail::check_scores(x, u, p);
  return detail::cv_from_projection(p, detail::project_response(x, u, p), alpha);
}

/// GCV score (1/m) ||(I - S) X^T u||^2 / (1 - tr S / m)^2; alpha = 0 is the
/// analytic limit (1/m) ||Omega X^T u||^2 / (tr Omega / m)^2.
inline double gcv_score(const MatrixXd& x, const VectorXd& u, const PenaltyOperator& p, double alpha) {
  detail::check_alpha(alpha);
  detail::check_scores(x, u, p);
  return detail::gcv_from_projection(p, detail::project_response(x, u, p), alpha);
}

/// Brute-force leave-one-column-out prediction error. For each column j the
/// ridge problem for v is refit without column j and the excess of
/// ||u v_j^(-j) - x_j||^2 over x_j^T x_j - (x_j^T u)^2 / ||u||^2 is averaged.
/// Uses dense Cholesky solves with Omega itself, not its eigendecomposition.
inline double cv_oracle(const MatrixXd& x, const VectorXd& u, const PenaltyOperator& p, double alpha) {
  detail::check_alpha(alpha);
  detail::check_scores(x, u, p);
  if (alpha == 0.0) {
    throw Error(ErrorCode::SingularReducedSystem, "column-deleted ridge system is singular at alpha = 0");
  }
  const Index m = p.size();
  const double uu = u.squaredNorm();
  const VectorXd xtu = x.transpose() * u;
  double total = 0.0;
  for (Index j = 0; j < m; ++j) {
    MatrixXd a = alpha * p.omega;
    VectorXd b = xtu / uu;
    for (Index k = 0; k < m; ++k) {
      if (k != j) a(k, k) += 1.0;
    }
    b(j) = 0.0;
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularReducedSystem, "reduced system for column " + std::to_string(j) +
                                                        " is not positive definite");
    }
    const VectorXd v = llt.solve(b);
    const VectorXd xj = x.col(j);
    const double pred_err = (u * v(j) - xj).squaredNorm();
    const double xu = xj.dot(u);
    total += pred_err - (xj.squaredNorm() - xu * xu / uu);
  }
  return total / double(m);
}

/// Evaluates the CV or GCV criterion over the grid with a fixed u and picks the
/// minimizer; ties go to the smaller alpha. Failed points are recorded as +inf.
inline SelectionTrace select_alpha(const MatrixXd& x, const VectorXd& u, const PenaltyOperator& p,
                                   const AlphaGrid& grid, Criterion criterion) {
  if (criterion == Criterion::RowCV) {
    throw Error(ErrorCode::InvalidConfig, "row-deletion CV needs select_alpha_row_cv");
  }
  if (grid.size() == 0) throw Error(ErrorCode::InvalidAlphaGrid, "alpha grid is empty");
  detail::check_scores(x, u, p);
  const VectorXd w = detail::project_response(x, u, p);

  SelectionTrace trace;
  trace.criterion = criterion;
  trace.alphas = grid.values();
  trace.scores.assign(grid.size(), std::numeric_limits<double>::infinity());
  trace.failed.assign(grid.size(), false);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      const double s = criterion == Criterion::CV ? detail::cv_from_projection(p, w, grid[i])
                                                  : detail::gcv_from_projection(p, w, grid[i]);
      if (std::isfinite(s)) {
        trace.scores[i] = s;
      } else {
        trace.failed[i] = true;
      }
    } catch (const Error&) {
      trace.failed[i] = true;
    }
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (trace.scores[i] < trace.scores[trace.chosen_index]) trace.chosen_index = i;
  }
  return trace;
}

namespace detail {

/// X Gamma and its Gram matrix, reused across alphas and deleted rows.
struct RowCvWorkspace {
  MatrixXd rotated;  ///< X Gamma
  MatrixXd gram;     ///< Gamma^T X^T X Gamma
};

inline RowCvWorkspace make_row_cv_workspace(const MatrixXd& x, const PenaltyOperator& p) {
  RowCvWorkspace ws;
  ws.rotated = x * p.eigvecs;
  ws.gram = ws.rotated.transpose() * ws.rotated;
  return ws;
}

/// Leading K back-mapped loadings (unit norm, oriented) of the half-smoothed
/// matrix whose rotated Gram matrix is `gram`.
inline MatrixXd loadings_from_gram(const MatrixXd& gram, const PenaltyOperator& p, double alpha, Index k) {
  const VectorXd d = half_shrink(p, alpha);
  const MatrixXd scaled = d.asDiagonal() * gram * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(scaled);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "eigensolver failed in row CV");
  const Index m = gram.rows();
  MatrixXd out(m, k);
  for (Index c = 0; c < k; ++c) {
    VectorXd v = p.eigvecs * d.cwiseProduct(es.eigenvectors().col(m - 1 - c));
    v.normalize();
    orient(v);
    out.col(c) = v;
  }
  return out;
}

inline double row_cv_with_workspace(const MatrixXd& x, const RowCvWorkspace& ws, const PenaltyOperator& p,
                                    double alpha, Index k) {
  const Index n = x.rows();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const VectorXd yi = ws.rotated.row(i).transpose();
    const MatrixXd gram = ws.gram - yi * yi.transpose();
    const MatrixXd v = loadings_from_gram(gram, p, alpha, k);
    Eigen::HouseholderQR<MatrixXd> qr(v);
    const MatrixXd basis = qr.householderQ() * MatrixXd::Identity(v.rows(), k);
    const VectorXd xi = x.row(i).transpose();
    total += (xi - basis * (basis.transpose() * xi)).squaredNorm();
  }
  return total / double(n);
}

inline void check_row_cv(const MatrixXd& x, const PenaltyOperator& p, Index k) {
  if (x.cols() != p.size()) throw Error(ErrorCode::DimensionMismatch, "X and the penalty disagree in size");
  if (x.rows() < 2) throw Error(ErrorCode::DimensionError, "row-deletion CV needs at least 2 rows");
  if (k < 1 || k > std::min(x.rows() - 1, x.cols())) {
    throw Error(ErrorCode::DimensionError, "K must lie in [1, min(n - 1, m)]");
  }
}

}  // namespace detail

/// Delete-one-row CV: each row is held out, K loadings are refit from the
/// remaining rows at a single alpha (half-smoothed SVD extraction), and the
/// held-out row is scored by its squared distance to the span of those loadings.
/// Every deletion is a full refit.
inline double row_cv_score(const MatrixXd& x, const PenaltyOperator& p, double alpha, Index k) {
  detail::check_alpha(alpha);
  detail::check_row_cv(x, p, k);
  return detail::row_cv_with_workspace(x, detail::make_row_cv_workspace(x, p), p, alpha, k);
}

/// Row-deletion CV over the grid (single alpha shared by all K components).
inline SelectionTrace select_alpha_row_cv(const MatrixXd& x, const PenaltyOperator& p, const AlphaGrid& grid,
                                          Index k) {
  if (grid.size() == 0) throw Error(ErrorCode::InvalidAlphaGrid, "alpha grid is empty");
  detail::check_row_cv(x, p, k);
  const detail::RowCvWorkspace ws = detail::make_row_cv_workspace(x, p);

  SelectionTrace trace;
  trace.criterion = Criterion::RowCV;
  trace.alphas = grid.values();
  trace.scores.assign(grid.size(), std::numeric_limits<double>::infinity());
  std::vector<char> failed(grid.size(), 0);
  parallel_for(grid.size(), [&](std::size_t i) {
    try {
      const double s = detail::row_cv_with_workspace(x, ws, p, grid[i], k);
      if (std::isfinite(s)) {
        trace.scores[i] = s;
      } else {
        failed[i] = 1;
      }
    } catch (const Error&) {
      failed[i] = 1;
    }
  });
  trace.failed.assign(failed.begin(), failed.end());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (trace.scores[i] < trace.scores[trace.chosen_index]) trace.chosen_index = i;
  }
  return trace;
}

}  // namespace pfpca
