#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "heatsc/geometry.hpp"
#include "heatsc/quadrature.hpp"
#include "oracles.hpp"

using namespace heatsc;

namespace {

constexpr double kPi = std::numbers::pi;

TEST(Quadrature, GaussRulesIntegratePolynomialsExactly) {
  for (std::size_t level = 0; level < kGaussLadder.size(); ++level) {
    const auto& g = gauss_rule_at(level);
    const int deg = 2 * kGaussLadder[level] - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) acc += g.weights[i] * std::pow(g.nodes[i], deg);
    EXPECT_NEAR(acc, 1.0 / (deg + 1), 1e-14);
  }
}

TEST(Quadrature, LadderEscalatesAndFails) {
  const auto r = integrate_unit([](double u) { return std::exp(3.0 * u); }, 1e-13);
  EXPECT_NEAR(r.value, (std::exp(3.0) - 1.0) / 3.0, 1e-12);
  EXPECT_THROW(integrate_unit([](double u) { return 1.0 / std::sqrt(std::abs(u - 0.37)); }, 1e-13), QuadratureFailure);
}

TEST(Quadrature, AdaptiveKronrod) {
  EXPECT_NEAR(integrate_adaptive([](double x) { return std::sin(x); }, 0.0, kPi, 1e-13), 2.0, 1e-12);
  EXPECT_NEAR(integrate_adaptive([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-12), 2.0 / 3.0, 1e-10);
}

TEST(Manifold, ConstructionValidates) {
  EXPECT_THROW(ModelManifold::circle(-1.0), ValidationError);
  EXPECT_THROW(ModelManifold::flat_torus({1.0, 0.0}), ValidationError);
  EXPECT_THROW(ModelManifold::round_sphere(1.0, 3), ValidationError);
  const auto s = ModelManifold::round_sphere(2.0);
  EXPECT_DOUBLE_EQ(s.curvature(), 0.25);
  EXPECT_DOUBLE_EQ(s.injectivity_radius(), 2.0 * kPi);
  EXPECT_DOUBLE_EQ(total_volume(s), 16.0 * kPi);
  EXPECT_DOUBLE_EQ(total_volume(ModelManifold::flat_torus({2.0, 3.0})), 6.0);
  EXPECT_DOUBLE_EQ(ModelManifold::flat_torus({2.0, 3.0}).injectivity_radius(), 1.0);
  EXPECT_THROW(s.point({0.0, 0.0}), DimensionMismatch);
}

TEST(Manifold, ExpLogRoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& m : {ModelManifold::circle(1.3), ModelManifold::flat_torus({2.0, 5.0}), ModelManifold::round_sphere(0.8)}) {
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd c(m.coordinate_size());
      for (auto& v : c) v = 4.0 * u(rng);
      const Point y = m.point(c);
      Eigen::VectorXd v(m.dim());
      for (auto& a : v) a = u(rng);
      v *= 0.95 * m.injectivity_radius() / std::max(1.0, v.norm()) * std::abs(u(rng));
      const Point x = m.exp_map(y, v);
      EXPECT_NEAR(distance(m, x, y), v.norm(), 1e-12);
      EXPECT_LT((m.log_map(y, x) - v).norm(), 1e-10);
    }
  }
}

TEST(Manifold, CutLocusRejected) {
  const auto s = ModelManifold::round_sphere(1.0);
  EXPECT_THROW(s.log_map(s.point({0, 0, 1}), s.point({0, 0, -1})), CutLocusError);
  const auto c = ModelManifold::circle(1.0);
  EXPECT_THROW(c.log_map(c.point({0.0}), c.point({kPi})), CutLocusError);
  EXPECT_THROW(geodesic_point(s, s.point({0, 0, 1}), s.point({0, 0, -1}), 0.5), CutLocusError);
}

TEST(Manifold, GeodesicPointInterpolates) {
  const auto s = ModelManifold::round_sphere(1.0);
  const Point y = s.point({0, 0, 1});
  const Point x = s.point({1, 0, 0});
  const Point mid = geodesic_point(s, y, x, 0.5);
  EXPECT_NEAR(distance(s, mid, y), kPi / 4.0, 1e-12);
  EXPECT_NEAR(distance(s, mid, x), kPi / 4.0, 1e-12);
}

TEST(GFunction, FlatIsZero) {
  EXPECT_EQ(g_function(ModelManifold::circle(1.0), 1.0), 0.0);
  EXPECT_EQ(g_function(ModelManifold::flat_torus({4.0, 4.0}), 1.5), 0.0);
}

TEST(GFunction, UnitSphereValues) {
  const auto s = ModelManifold::round_sphere(1.0);
  EXPECT_EQ(g_function(s, 0.0), 0.0);
  EXPECT_NEAR(g_function(s, 0.1), 0.5 * (1.0 - 0.1 / std::tan(0.1)), 1e-15);
  EXPECT_NEAR(g_function(s, 0.1), 0.00166778, 1e-8);
  EXPECT_THROW(g_function(s, kPi), DomainError);
  EXPECT_THROW(g_function(s, -0.1), DomainError);
  // series branch joins the closed form
  const long double r = 0.999e-3L;
  EXPECT_NEAR(g_function(s, static_cast<double>(r)), static_cast<double>(0.5L * (1.0L - r / std::tan(r))), 1e-18);
  EXPECT_NEAR(g_over_r(s, 1e-5), g_function(s, 1e-5) / 1e-5, 1e-15);
}

TEST(GFunction, MatchesDifferencesOfSquaredDistance) {
  for (double radius : {1.0, 2.5}) {
    const auto s = ModelManifold::round_sphere(radius);
    const Point y = s.point({0.2, -0.3, 0.9});
    for (double r : {0.3, 0.9, 1.7, 2.5}) {
      if (r >= 0.9 * kPi * radius) continue;
      Eigen::VectorXd dir(2);
      dir << 0.6, 0.8;
      const Point x = s.exp_map(y, r * dir);
      const double fd = oracle::g_by_differences(s, y, x, 1e-4);
      EXPECT_NEAR(g_function(s, r), fd, 2e-6 * std::max(1.0, std::abs(fd))) << "R=" << radius << " r=" << r;
    }
  }
}

TEST(BallVolume, ClosedForms) {
  for (double r : {0.1, 0.7, 2.0}) {
    EXPECT_NEAR(ball_volume_model(1.0, 2, r), 2.0 * kPi * (1.0 - std::cos(r)), 1e-13);
    EXPECT_NEAR(ball_volume_model(0.0, 2, r), kPi * r * r, 1e-13);
    EXPECT_NEAR(ball_volume_model(0.0, 1, r), 2.0 * r, 1e-15);
    EXPECT_NEAR(ball_volume_model(1.0, 3, r), kPi * (2.0 * r - std::sin(2.0 * r)), 1e-12);
    EXPECT_NEAR(ball_volume_model(0.0, 3, r), 4.0 / 3.0 * kPi * r * r * r, 1e-12);
    EXPECT_NEAR(ball_volume_model(-1.0, 2, r), 2.0 * kPi * (std::cosh(r) - 1.0), 1e-12);
  }
  EXPECT_THROW(ball_volume_model(1.0, 2, 4.0), DomainError);
  EXPECT_THROW(ball_volume_model(0.0, 2, 0.0), DomainError);
}

TEST(BallVolume, CurvatureComparisonOrdering) {
  for (int n : {2, 3, 4})
    for (double r : {0.2, 1.0, 2.5}) {
      EXPECT_LT(ball_volume_model(1.0, n, r), ball_volume_model(0.0, n, r));
      EXPECT_GT(ball_volume_model(-1.0, n, r), ball_volume_model(0.0, n, r));
    }
}

}  // namespace
