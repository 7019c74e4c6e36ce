#pragma once

// Time grid, the banded factors Q and R of the natural cubic spline
// roughness penalty, the penalty matrix Omega = Q R^{-1} Q^T with its
// eigendecomposition, and the smoothing operators built from it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pfpca/error.hpp"

namespace pfpca {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Sorted observation points t_1 < ... < t_m, m >= 3.
class TimeGrid {
 public:
  TimeGrid() = default;

  const VectorXd& times() const noexcept { return times_; }
  /// h_j = t_{j+1} - t_j, length m - 1.
  const VectorXd& gaps() const noexcept { return gaps_; }
  Index size() const noexcept { return times_.size(); }
  double front() const { return times_(0); }
  double back() const { return times_(times_.size() - 1); }

  friend TimeGrid build_grid(const VectorXd& times);

 private:
  VectorXd times_;
  VectorXd gaps_;
};

inline TimeGrid build_grid(const VectorXd& times) {
  if (times.size() < 3) {
    throw Error(ErrorCode::GridTooSmall,
                "a grid needs at least 3 points, got " + std::to_string(times.size()));
  }
  TimeGrid grid;
  grid.times_ = times;
  grid.gaps_ = times.tail(times.size() - 1) - times.head(times.size() - 1);
  for (Index j = 0; j < grid.gaps_.size(); ++j) {
    if (!(grid.gaps_(j) > 0.0)) {
      throw Error(ErrorCode::NonIncreasingGrid,
                  "times must be strictly increasing (violated between index " +
                      std::to_string(j) + " and " + std::to_string(j + 1) + ")");
    }
  }
  return grid;
}

inline TimeGrid build_grid(const std::vector<double>& times) {
  return build_grid(VectorXd(Eigen::Map<const VectorXd>(times.data(), Index(times.size()))));
}

/// Equally spaced grid of m points on [lo, hi].
inline TimeGrid uniform_grid(Index m, double lo, double hi) {
  return build_grid(VectorXd(VectorXd::LinSpaced(m, lo, hi)));
}

/// Symmetric tridiagonal matrix with an LDL^T factor-and-solve (no pivoting).
/// Only suitable for diagonally dominant systems such as the spline R.
class SymmetricTridiagonal {
 public:
  SymmetricTridiagonal() = default;
  SymmetricTridiagonal(VectorXd diag, VectorXd off) : diag_(std::move(diag)), off_(std::move(off)) {}

  Index size() const noexcept { return diag_.size(); }
  const VectorXd& diag() const noexcept { return diag_; }
  const VectorXd& off() const noexcept { return off_; }

  MatrixXd dense() const {
    const Index k = size();
    MatrixXd out = MatrixXd::Zero(k, k);
    out.diagonal() = diag_;
    for (Index i = 0; i + 1 < k; ++i) {
      out(i, i + 1) = off_(i);
      out(i + 1, i) = off_(i);
    }
    return out;
  }

  /// Solves this * X = rhs column by column.
  MatrixXd solve(const MatrixXd& rhs) const {
    const Index k = size();
    // d holds the pivots of D, l the subdiagonal of the unit lower factor.
    VectorXd d(k), l(k > 0 ? k - 1 : 0);
    d(0) = diag_(0);
    for (Index i = 1; i < k; ++i) {
      l(i - 1) = off_(i - 1) / d(i - 1);
      d(i) = diag_(i) - l(i - 1) * off_(i - 1);
    }
    MatrixXd x = rhs;
    for (Index c = 0; c < x.cols(); ++c) {
      for (Index i = 1; i < k; ++i) x(i, c) -= l(i - 1) * x(i - 1, c);
      for (Index i = 0; i < k; ++i) x(i, c) /= d(i);
      for (Index i = k - 2; i >= 0; --i) x(i, c) -= l(i) * x(i + 1, c);
    }
    return x;
  }

  VectorXd solve(const VectorXd& rhs) const { return solve(MatrixXd(rhs)).col(0); }

 private:
  VectorXd diag_;
  VectorXd off_;
};

/// Q (m x (m-2), three nonzeros per column) and tridiagonal R ((m-2) x (m-2)).
/// Column c of Q corresponds to interior knot c+1 (0-based).
struct BandFactors {
  MatrixXd q;
  SymmetricTridiagonal r;
};

inline BandFactors build_band_factors(const TimeGrid& grid) {
  const Index m = grid.size();
  const VectorXd& h = grid.gaps();
  BandFactors bf;
  bf.q = MatrixXd::Zero(m, m - 2);
  VectorXd diag(m - 2), off(m - 3 > 0 ? m - 3 : 0);
  for (Index c = 0; c < m - 2; ++c) {
    // interior knot k = c + 1 sits between gaps h(c) and h(c+1)
    const double left = 1.0 / h(c);
    const double right = 1.0 / h(c + 1);
    bf.q(c, c) = left;
    bf.q(c + 1, c) = -left - right;
    bf.q(c + 2, c) = right;
    diag(c) = (h(c) + h(c + 1)) / 3.0;
    if (c + 1 < m - 2) off(c) = h(c + 1) / 6.0;
  }
  bf.r = SymmetricTridiagonal(std::move(diag), std::move(off));
  return bf;
}

/// Omega with its eigendecomposition Omega = Gamma diag(Lambda) Gamma^T.
/// Eigenvalues are sorted descending; the two smallest are exactly zero.
struct PenaltyOperator {
  VectorXd times;
  MatrixXd omega;
  MatrixXd eigvecs;
  VectorXd eigvals;

  Index size() const noexcept { return omega.rows(); }
};

namespace detail {

/// Flips v so that its largest-magnitude entry (first one on ties) is positive.
inline double orientation_sign(const VectorXd& v) {
  Index best = 0;
  double mag = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > mag) {
      mag = std::abs(v(i));
      best = i;
    }
  }
  return v(best) < 0.0 ? -1.0 : 1.0;
}

inline void orient(VectorXd& v) { v *= orientation_sign(v); }

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0)) throw Error(ErrorCode::NegativeAlpha, "alpha must be >= 0");
}

inline void check_length(const PenaltyOperator& p, Index len) {
  if (len != p.size()) {
    throw Error(ErrorCode::DimensionMismatch, "vector length " + std::to_string(len) +
                                                  " does not match penalty size " +
                                                  std::to_string(p.size()));
  }
}

}  // namespace detail

inline PenaltyOperator build_penalty(const TimeGrid& grid) {
  const BandFactors bf = build_band_factors(grid);
  const Index m = grid.size();

  PenaltyOperator p;
  p.times = grid.times();
  // R^{-1} Q^T by tridiagonal solves against each column of Q^T
  const MatrixXd rinv_qt = bf.r.solve(MatrixXd(bf.q.transpose()));
  p.omega = bf.q * rinv_qt;
  p.omega = 0.5 * (p.omega + p.omega.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(p.omega);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenFailure, "symmetric eigendecomposition of the penalty did not converge");
  }
  // Eigen returns ascending order.
  p.eigvals = es.eigenvalues().reverse();
  p.eigvecs = es.eigenvectors().rowwise().reverse();

  const double top = p.eigvals(0);
  for (Index k = 0; k < m; ++k) {
    if (p.eigvals(k) < 1e-10 * top) p.eigvals(k) = 0.0;
  }
  p.eigvals(m - 1) = 0.0;
  p.eigvals(m - 2) = 0.0;
  for (Index k = 0; k < m; ++k) {
    VectorXd col = p.eigvecs.col(k);
    detail::orient(col);
    p.eigvecs.col(k) = col;
  }
  return p;
}

/// Gamma (I + alpha Lambda)^{-1} Gamma^T w.
inline VectorXd apply_smoother(const PenaltyOperator& p, double alpha, const VectorXd& w) {
  detail::check_alpha(alpha);
  detail::check_length(p, w.size());
  const VectorXd shrink = (1.0 + alpha * p.eigvals.array()).inverse().matrix();
  return p.eigvecs * (shrink.asDiagonal() * (p.eigvecs.transpose() * w));
}

/// Gamma (I + alpha Lambda)^{-1/2} Gamma^T w, the symmetric square root of the smoother.
inline VectorXd apply_half_smoother(const PenaltyOperator& p, double alpha, const VectorXd& w) {
  detail::check_alpha(alpha);
  detail::check_length(p, w.size());
  const VectorXd shrink = (1.0 + alpha * p.eigvals.array()).rsqrt().matrix();
  return p.eigvecs * (shrink.asDiagonal() * (p.eigvecs.transpose() * w));
}

/// Diagonal of S(alpha) = sum_k Gamma_jk^2 / (1 + alpha lambda_k).
inline VectorXd smoother_diag(const PenaltyOperator& p, double alpha) {
  detail::check_alpha(alpha);
  const VectorXd shrink = (1.0 + alpha * p.eigvals.array()).inverse().matrix();
  return p.eigvecs.array().square().matrix() * shrink;
}

inline double trace_smoother(const PenaltyOperator& p, double alpha) {
  detail::check_alpha(alpha);
  return (1.0 + alpha * p.eigvals.array()).inverse().sum();
}

}  // namespace pfpca
