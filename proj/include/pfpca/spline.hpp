#pragma once

// Natural cubic spline through (t_j, v_j). On [t_j, t_{j+1}] with
// a = (t - t_j)/h_j and b = (t_{j+1} - t)/h_j:
//   gamma(t) = a v_{j+1} + b v_j - (h_j^2 / 6) a b {(1 + a) s_{j+1} + (1 + b) s_j}
// where s are the second derivatives (s_1 = s_m = 0). Outside [t_1, t_m] the
// spline continues linearly with the boundary slope.

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfpca/error.hpp"
#include "pfpca/grid_penalty.hpp"

namespace pfpca {

struct SplineFunction {
  TimeGrid grid;
  VectorXd values;
  VectorXd second_derivs;
};

inline SplineFunction interpolate(const TimeGrid& grid, const VectorXd& v) {
  if (v.size() != grid.size()) {
    throw Error(ErrorCode::DimensionMismatch, "spline values do not match the grid length");
  }
  const BandFactors bf = build_band_factors(grid);
  const Index m = grid.size();
  SplineFunction s{grid, v, VectorXd::Zero(m)};
  s.second_derivs.segment(1, m - 2) = bf.r.solve(VectorXd(bf.q.transpose() * v));
  return s;
}

namespace detail {

/// Interval index j with t_j <= t < t_{j+1}, clamped to [0, m-2].
inline Index locate(const VectorXd& knots, double t) {
  const double* begin = knots.data();
  const double* end = begin + knots.size();
  const Index pos = Index(std::upper_bound(begin, end, t) - begin) - 1;
  return std::clamp<Index>(pos, 0, knots.size() - 2);
}

inline double cubic_piece(const SplineFunction& s, Index j, double t) {
  const VectorXd& x = s.grid.times();
  const double h = s.grid.gaps()(j);
  const double a = (t - x(j)) / h;
  const double b = (x(j + 1) - t) / h;
  const double sl = s.second_derivs(j);
  const double sr = s.second_derivs(j + 1);
  return a * s.values(j + 1) + b * s.values(j) - (h * h / 6.0) * a * b * ((1.0 + a) * sr + (1.0 + b) * sl);
}

}  // namespace detail

/// One-sided first derivative at the left boundary knot.
inline double left_slope(const SplineFunction& s) {
  const double h = s.grid.gaps()(0);
  return (s.values(1) - s.values(0)) / h - h * (2.0 * s.second_derivs(0) + s.second_derivs(1)) / 6.0;
}

/// One-sided first derivative at the right boundary knot.
inline double right_slope(const SplineFunction& s) {
  const Index m = s.grid.size();
  const double h = s.grid.gaps()(m - 2);
  return (s.values(m - 1) - s.values(m - 2)) / h + h * (s.second_derivs(m - 2) + 2.0 * s.second_derivs(m - 1)) / 6.0;
}

inline double evaluate(const SplineFunction& s, double t) {
  const Index m = s.grid.size();
  if (t < s.grid.front()) return s.values(0) + (t - s.grid.front()) * left_slope(s);
  if (t > s.grid.back()) return s.values(m - 1) + (t - s.grid.back()) * right_slope(s);
  return detail::cubic_piece(s, detail::locate(s.grid.times(), t), t);
}

inline VectorXd evaluate(const SplineFunction& s, const VectorXd& ts) {
  VectorXd out(ts.size());
  for (Index i = 0; i < ts.size(); ++i) out(i) = evaluate(s, ts(i));
  return out;
}

/// Exact integral of (gamma'')^2; gamma'' is linear on each interval.
inline double curvature_integral(const SplineFunction& s) {
  const VectorXd& h = s.grid.gaps();
  const VectorXd& sd = s.second_derivs;
  double total = 0.0;
  for (Index j = 0; j < h.size(); ++j) {
    total += h(j) * (sd(j) * sd(j) + sd(j) * sd(j + 1) + sd(j + 1) * sd(j + 1)) / 3.0;
  }
  return total;
}

/// v^T Omega v for the spline's knot values.
inline double roughness(const SplineFunction& s, const PenaltyOperator& p) {
  if (p.times.size() != s.grid.size() || p.times != s.grid.times()) {
    throw Error(ErrorCode::GridMismatch, "penalty was built on a different grid");
  }
  return s.values.dot(p.omega * s.values);
}

}  // namespace pfpca
