#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "heatsc/partition.hpp"
#include "oracles.hpp"

using namespace heatsc;

namespace {

constexpr double kPi = std::numbers::pi;

TEST(ClassicalPartition, ClosedForms) {
  const auto z = EndomorphismField::zero(1);
  for (double t : {0.5, 1.0}) {
    for (double h : {0.1, 0.3}) {
      EXPECT_NEAR(z_classical(ModelManifold::circle(1.0), z, t, h), std::sqrt(kPi / t) / h, 1e-12 / h);
      EXPECT_NEAR(z_classical(ModelManifold::round_sphere(1.0), z, t, h), 1.0 / (t * h * h), 1e-10 / (t * h * h));
    }
  }
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
  v(1, 1) = 1.7;
  const double t = 0.8, h = 0.2;
  const double expect = 4 * kPi * kPi * (1.0 + std::exp(-t * 1.7)) / (4 * kPi * t * h * h);
  EXPECT_NEAR(z_classical(ModelManifold::flat_torus({2 * kPi, 2 * kPi}), EndomorphismField::constant(SymMatrix(v)), t, h),
              expect, 1e-12 * expect);
  EXPECT_THROW(z_classical(ModelManifold::circle(1.0), z, 0.0, 1.0), DomainError);
}

// (2 pi hbar)^{-n} int int tr exp(-t(|p|^2 + V(x))) dp dx with Gauss-Hermite in p
// and the full matrix exponential at every phase-space node.
double phase_space_integral(const ModelManifold& m, const EndomorphismField& V, double t, double hbar) {
  const auto gh = oracle::gauss_hermite(40);
  const int pts = 96;
  const int n = m.dim();
  const double vol = total_volume(m);
  double acc = 0.0;
  std::vector<int> ix(n, 0);
  while (true) {
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) c[i] = 2 * kPi * ix[i] / pts;
    const Eigen::MatrixXd vx = V(m, Point{c});
    std::vector<int> ip(n, 0);
    while (true) {
      double p2 = 0.0, w = 1.0;
      for (int i = 0; i < n; ++i) {
        const double s = gh.nodes[ip[i]];
        p2 += s * s / t;
        w *= gh.weights[ip[i]] * std::exp(s * s) / std::sqrt(t);
      }
      const Eigen::MatrixXd a = -t * (p2 * Eigen::MatrixXd::Identity(vx.rows(), vx.cols()) + vx);
      acc += w * oracle::expm(a).trace();
      int d = 0;
      while (d < n && ++ip[d] == static_cast<int>(gh.nodes.size())) ip[d++] = 0;
      if (d == n) break;
    }
    int d = 0;
    while (d < n && ++ix[d] == pts) ix[d++] = 0;
    if (d == n) break;
  }
  return acc * vol / std::pow(pts, n) / std::pow(2 * kPi * hbar, n);
}

TEST(ClassicalPartition, EqualsLiteralPhaseSpaceIntegral) {
  const auto c = ModelManifold::circle(1.0);
  const auto v = EndomorphismField::fourier(2, 1, {{0, 0, {0}, 1.0, 0.0}, {0, 0, {1}, 0.8, 0.0}, {0, 1, {1}, 0.0, 0.4}, {1, 1, {0}, 0.5, 0.0}});
  for (double t : {0.3, 1.0}) {
    const double lit = phase_space_integral(c, v, t, 0.07);
    EXPECT_NEAR(z_classical(c, v, t, 0.07), lit, 1e-8 * lit);
  }
  const auto torus = ModelManifold::flat_torus({2 * kPi, 2 * kPi});
  const auto vt = EndomorphismField::fourier(1, 2, {{0, 0, {0, 0}, 1.0, 0.0}, {0, 0, {1, 1}, 0.5, 0.0}});
  const double lit = phase_space_integral(torus, vt, 0.6, 0.1);
  EXPECT_NEAR(z_classical(torus, vt, 0.6, 0.1), lit, 1e-8 * lit);
}

TEST(ClassicalPartition, ZonalIntegral) {
  const auto s = ModelManifold::round_sphere(1.5);
  const auto v = EndomorphismField::zonal(1, Eigen::Vector3d(0, 1, 0), {{0, 0, {0.0, 1.0}}});
  // int_{S^2_R} e^{-t c} = 2 pi R^2 (e^t - e^{-t}) / t
  const double t = 0.7;
  EXPECT_NEAR(field_trace_integral(s, v, t), 2 * kPi * 2.25 * 2.0 * std::sinh(t) / t, 1e-12);
}

TEST(HeatFit, CircleFreeTrace) {
  std::vector<std::pair<double, double>> samples;
  const double t = 1.0;
  for (double h : {0.1, 0.08, 0.06, 0.045, 0.03}) samples.emplace_back(h, oracle::theta_sum(t * h * h));
  const auto f = fit_heat_coefficients(samples, t, 1, 1);
  EXPECT_NEAR(f.a[0], 2 * kPi, 1e-6);
  EXPECT_NEAR(f.a[1], 0.0, 1e-6);
}

TEST(HeatFit, SphereFirstCorrection) {
  std::vector<std::pair<double, double>> samples;
  const double t = 1.0;
  for (int i = 0; i < 8; ++i) {
    const double tau = 1e-3 * std::pow(10.0, i / 7.0);
    samples.emplace_back(std::sqrt(tau / t), oracle::sphere_trace(tau));
  }
  const auto f = fit_heat_coefficients(samples, t, 2, 2);
  EXPECT_NEAR(f.a[0], 4 * kPi, 1e-6 * 4 * kPi);
  EXPECT_NEAR(f.a[1] / f.a[0], 1.0 / 3.0, 1e-5);
  EXPECT_NEAR(f.a[2] / f.a[0], 1.0 / 15.0, 1e-2);
}

TEST(HeatFit, Preconditions) {
  std::vector<std::pair<double, double>> few{{0.1, 1.0}, {0.05, 2.0}};
  EXPECT_THROW(fit_heat_coefficients(few, 1.0, 1, 1), ValidationError);
  std::vector<std::pair<double, double>> narrow{{0.1, 1.0}, {0.09, 2.0}, {0.08, 3.0}, {0.07, 4.0}};
  EXPECT_THROW(fit_heat_coefficients(narrow, 1.0, 1, 1), ValidationError);
  std::vector<std::pair<double, double>> wide;
  for (int i = 0; i < 12; ++i) wide.emplace_back(std::pow(10.0, -i / 4.0), 1.0);
  EXPECT_THROW(fit_heat_coefficients(wide, 1.0, 1, 8), IllConditioned);
}

TEST(BoundConstants, DerivedValues) {
  const auto bc = BoundConstants::make(2, 2.0, 1.0, 0.5, -0.25, 1.0);
  EXPECT_DOUBLE_EQ(bc.c1, std::pow(2.0, 4.0) * std::exp(3.0));
  EXPECT_DOUBLE_EQ(bc.c_tilde, 2.0 * 2.0 / 1.0 * 0.5 * 1.0);
  EXPECT_DOUBLE_EQ(bc.c2, bc.c_tilde + 0.25);
  EXPECT_NEAR(bc.c3, bc.c1 * 4.0 * kPi / kPi, 1e-9);
  EXPECT_GT(bc.c1, 1.0);
  const auto again = BoundConstants::make(2, 2.0, 1.0, 0.5, -0.25, 1.0);
  EXPECT_EQ(bc.c3, again.c3);
  EXPECT_THROW(BoundConstants::make(2, 1.0, 1.0, 0.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(BoundConstants::make(2, 2.0, 0.0, 0.0, 0.0, 0.0), DomainError);
}

TEST(UpperBound, FlatTorusLimitAndWindow) {
  const auto torus = ModelManifold::flat_torus({2 * kPi, 2 * kPi});
  const auto bc = BoundConstants::make(2, 2.0, 1.0, 0.0, 0.0, 0.0);
  const double t = 1.0, h = 0.01;
  const double a0 = 4 * kPi * kPi;
  const double bound = gt_upper_bound(torus, a0, bc, t, h);
  EXPECT_NEAR(bound, bc.c1 * a0 / (kPi * t * h * h), 1e-9 * bound);
  const double zq = std::pow(oracle::theta_sum(t * h * h), 2);
  EXPECT_NEAR(bound / zq, bc.c3, 1e-6 * bc.c3);
  EXPECT_THROW(gt_upper_bound(torus, a0, bc, 1.0, 4.0), DomainError);
  // shifting w0 by -c multiplies the bound by e^{c tau}
  const auto shifted = BoundConstants::make(2, 2.0, 1.0, 0.0, -0.5, 0.0);
  EXPECT_NEAR(gt_upper_bound(torus, a0, shifted, t, 0.5) / gt_upper_bound(torus, a0, bc, t, 0.5), std::exp(0.5 * 0.25), 1e-14);
}

TEST(UpperBound, SphereDominatesTrace) {
  const auto s = ModelManifold::round_sphere(1.0);
  const auto bc = BoundConstants::make(2, 2.0, 1.0, 0.0, 0.0, 1.0);
  for (double tau : {0.001, 0.01, 0.1, 0.3, 0.5}) {
    const double b = gt_upper_bound(s, 4 * kPi, bc, 1.0, std::sqrt(tau));
    EXPECT_TRUE(std::isfinite(b));
    EXPECT_GE(b, oracle::sphere_trace(tau));
  }
}

TEST(Corollary, SphereRowsAndRhs) {
  const auto s = ModelManifold::round_sphere(1.0);
  const auto bc = BoundConstants::make(2, 2.0, 1.0, 0.0, 0.0, 1.0);
  const auto rows = check_corollary_47(s, EndomorphismField::zero(1), bc, 1.0, {0.1, 0.05, 4.0},
                                       [](double h) { return oracle::sphere_trace(h * h); });
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[0].ratio, 0.01 * oracle::sphere_trace(0.01), 1e-12);
  EXPECT_NEAR(rows[0].ratio, 1.00333, 2e-5);
  EXPECT_TRUE(rows[0].holds);
  EXPECT_GT(rows[0].rhs, 100.0);
  EXPECT_FALSE(rows[2].error.empty());
  const auto flat = BoundConstants::make(1, 2.0, 1.0, 0.0, 0.0, 0.0);
  EXPECT_NEAR(corollary_rhs(flat, 0.3), flat.c3, 1e-12 * flat.c3);
  EXPECT_GE(empirical_constant(rows, bc), 1.0);
}

}  // namespace
