#include <gtest/gtest.h>

#include <random>

#include "pfpca/spline.hpp"
#include "test_support.hpp"

using namespace pfpca;
using pfpca::testing::code_of;
using pfpca::testing::random_grid;
using pfpca::testing::random_vector;
using pfpca::testing::relative_error;

namespace {

/// Cubic coefficients c0 + c1 x + c2 x^2 + c3 x^3 in x = (t - t_j)/h_j, recovered
/// from four evaluations inside piece j.
Eigen::Vector4d piece_coefficients(const SplineFunction& s, Index j) {
  const double t0 = s.grid.times()(j);
  const double h = s.grid.gaps()(j);
  Eigen::Matrix4d vander;
  Eigen::Vector4d vals;
  const double xs[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) vander(r, c) = std::pow(xs[r], c);
    vals(r) = evaluate(s, t0 + xs[r] * h);
  }
  return vander.fullPivLu().solve(vals);
}

/// Simpson's rule per piece on (gamma'')^2, exact because gamma'' is linear there.
double simpson_curvature(const SplineFunction& s) {
  double total = 0.0;
  for (Index j = 0; j < s.grid.gaps().size(); ++j) {
    const double h = s.grid.gaps()(j);
    const Eigen::Vector4d c = piece_coefficients(s, j);
    auto g2 = [&](double x) { return (2.0 * c(2) + 6.0 * c(3) * x) / (h * h); };
    total += h / 6.0 * (std::pow(g2(0.0), 2) + 4.0 * std::pow(g2(0.5), 2) + std::pow(g2(1.0), 2));
  }
  return total;
}

}  // namespace

TEST(Spline, ThreePointHandValues) {
  const TimeGrid g = build_grid(std::vector<double>{0.0, 1.0, 2.0});
  const SplineFunction s = interpolate(g, Eigen::Vector3d(0.0, 1.0, 0.0));
  EXPECT_NEAR(s.second_derivs(1), -3.0, 1e-12);
  EXPECT_EQ(s.second_derivs(0), 0.0);
  EXPECT_EQ(s.second_derivs(2), 0.0);
  EXPECT_NEAR(evaluate(s, 0.5), 0.6875, 1e-12);
  EXPECT_NEAR(evaluate(s, 1.5), 0.6875, 1e-12);
  EXPECT_NEAR(roughness(s, build_penalty(g)), 6.0, 1e-12);
  EXPECT_NEAR(curvature_integral(s), 6.0, 1e-12);
}

TEST(Spline, RoughnessEqualsCurvatureIntegral) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 50; ++rep) {
    const Index m = 3 + rep % 20;
    const TimeGrid g = random_grid(m, rng, rep % 2 == 1);
    const SplineFunction s = interpolate(g, random_vector(m, rng));
    const double quad = roughness(s, build_penalty(g));
    EXPECT_LT(relative_error(quad, simpson_curvature(s)), 1e-10) << rep;
    EXPECT_LT(relative_error(quad, curvature_integral(s)), 1e-10) << rep;
  }
}

TEST(Spline, InterpolatesKnotsExactly) {
  std::mt19937_64 rng(5);
  const TimeGrid g = random_grid(10, rng);
  const VectorXd v = random_vector(10, rng);
  const SplineFunction s = interpolate(g, v);
  for (Index j = 0; j < 10; ++j) EXPECT_EQ(evaluate(s, g.times()(j)), v(j));
}

TEST(Spline, ContinuousFirstAndSecondDerivatives) {
  std::mt19937_64 rng(6);
  const TimeGrid g = random_grid(9, rng);
  const SplineFunction s = interpolate(g, random_vector(9, rng));
  for (Index j = 1; j + 1 < 9; ++j) {
    const Eigen::Vector4d left = piece_coefficients(s, j - 1);
    const Eigen::Vector4d right = piece_coefficients(s, j);
    const double hl = g.gaps()(j - 1), hr = g.gaps()(j);
    const double d1_left = (left(1) + 2.0 * left(2) + 3.0 * left(3)) / hl;
    const double d1_right = right(1) / hr;
    const double d2_left = (2.0 * left(2) + 6.0 * left(3)) / (hl * hl);
    const double d2_right = 2.0 * right(2) / (hr * hr);
    EXPECT_NEAR(d1_left, d1_right, 1e-8 * (1.0 + std::abs(d1_right)));
    EXPECT_NEAR(d2_left, d2_right, 1e-7 * (1.0 + std::abs(d2_right)));
    EXPECT_NEAR(d2_right, s.second_derivs(j), 1e-7 * (1.0 + std::abs(d2_right)));
  }
}

TEST(Spline, LinearExtrapolationWithBoundarySlopes) {
  std::mt19937_64 rng(7);
  const TimeGrid g = random_grid(8, rng);
  const SplineFunction s = interpolate(g, random_vector(8, rng));
  const Eigen::Vector4d first = piece_coefficients(s, 0);
  const Eigen::Vector4d last = piece_coefficients(s, 6);
  const double slope_left = first(1) / g.gaps()(0);
  const double slope_right = (last(1) + 2.0 * last(2) + 3.0 * last(3)) / g.gaps()(6);
  EXPECT_NEAR(left_slope(s), slope_left, 1e-9 * (1.0 + std::abs(slope_left)));
  EXPECT_NEAR(right_slope(s), slope_right, 1e-9 * (1.0 + std::abs(slope_right)));
  for (double d : {0.1, 1.0, 5.0}) {
    EXPECT_NEAR(evaluate(s, g.front() - d), s.values(0) - d * left_slope(s), 1e-12 * (1.0 + d));
    EXPECT_NEAR(evaluate(s, g.back() + d), s.values(7) + d * right_slope(s), 1e-12 * (1.0 + d));
  }
}

TEST(Spline, ReproducesLinearFunctions) {
  std::mt19937_64 rng(8);
  const TimeGrid g = random_grid(7, rng);
  const VectorXd v = (2.0 - 0.5 * g.times().array()).matrix();
  const SplineFunction s = interpolate(g, v);
  EXPECT_LT(s.second_derivs.cwiseAbs().maxCoeff(), 1e-12);
  for (double t : {g.front() - 3.0, 0.5 * (g.front() + g.back()), g.back() + 2.0}) {
    EXPECT_NEAR(evaluate(s, t), 2.0 - 0.5 * t, 1e-11);
  }
}

TEST(Spline, MinimalRoughnessAmongInterpolants) {
  // A natural spline on the refined grid that still passes through the
  // original knots is another interpolant; it can only be rougher.
  std::mt19937_64 rng(9);
  const TimeGrid g = random_grid(8, rng);
  const SplineFunction s = interpolate(g, random_vector(8, rng));
  VectorXd fine_t(15);
  for (Index j = 0; j < 7; ++j) {
    fine_t(2 * j) = g.times()(j);
    fine_t(2 * j + 1) = 0.5 * (g.times()(j) + g.times()(j + 1));
  }
  fine_t(14) = g.back();
  const TimeGrid fine = build_grid(fine_t);
  const VectorXd on_fine = evaluate(s, fine_t);
  EXPECT_NEAR(curvature_integral(interpolate(fine, on_fine)), curvature_integral(s),
              1e-9 * curvature_integral(s));
  for (int rep = 0; rep < 20; ++rep) {
    VectorXd bumped = on_fine;
    for (Index j = 1; j < 15; j += 2) bumped(j) += 0.05 * random_vector(1, rng)(0);
    EXPECT_GE(curvature_integral(interpolate(fine, bumped)), curvature_integral(s));
  }
}

TEST(Spline, Errors) {
  const TimeGrid g = uniform_grid(5, 0.0, 1.0);
  EXPECT_EQ(code_of([&] { interpolate(g, VectorXd::Ones(4)); }), ErrorCode::DimensionMismatch);
  const SplineFunction s = interpolate(g, VectorXd::Ones(5));
  EXPECT_EQ(code_of([&] { roughness(s, build_penalty(uniform_grid(5, 0.0, 2.0))); }), ErrorCode::GridMismatch);
  EXPECT_EQ(code_of([&] { roughness(s, build_penalty(uniform_grid(6, 0.0, 1.0))); }), ErrorCode::GridMismatch);
}
