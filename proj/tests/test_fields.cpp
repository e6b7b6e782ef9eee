#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "heatsc/fields.hpp"
#include "oracles.hpp"

using namespace heatsc;

namespace {

TEST(SymMatrix, RejectsAsymmetry) {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.5, 0.4, 2.0;
  EXPECT_THROW(SymMatrix{a}, ValidationError);
  a(1, 0) = 0.5 + 1e-14;
  const SymMatrix s(a);
  EXPECT_EQ(s.matrix(), s.matrix().transpose());
}

TEST(SymExp, MatchesTaylorOracle) {
  std::mt19937_64 rng(11);
  for (int m : {1, 2, 3, 5}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXd a = oracle::random_symmetric(m, 1.5, rng);
      const Eigen::MatrixXd ref = oracle::expm(-0.7 * a);
      EXPECT_LT((exp_symmetric(a, -0.7) - ref).norm(), 1e-12 * std::max(1.0, ref.norm()));
    }
  }
  const auto z = sym_exp(SymMatrix::zero(3), 2.0);
  EXPECT_TRUE(z.matrix().isIdentity(0.0));
}

TEST(TraceLemmas, GoldenThompsonHoldsOnRandomPairs) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const int m = 2 + trial % 4;
    const SymMatrix b(oracle::random_symmetric(m, 1.0, rng));
    const SymMatrix c(oracle::random_symmetric(m, 1.0, rng));
    const auto chk = golden_thompson_check(b, c);
    EXPECT_LE(chk.lhs, chk.rhs * (1.0 + 1e-12));
    EXPECT_TRUE(chk.holds);
  }
}

TEST(TraceLemmas, CommutingPairIsEquality) {
  Eigen::VectorXd d1(3), d2(3);
  d1 << 0.1, -0.3, 1.0;
  d2 << 2.0, 0.5, -1.0;
  const auto chk = golden_thompson_check(SymMatrix::diagonal(d1), SymMatrix::diagonal(d2));
  EXPECT_NEAR(chk.lhs, chk.rhs, 1e-14 * chk.rhs);
}

TEST(TraceLemmas, TraceProductBound) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + trial % 3;
    Eigen::MatrixXd a1(m, m);
    for (auto& v : a1.reshaped()) v = nd(rng);
    const Eigen::MatrixXd g = oracle::random_symmetric(m, 1.0, rng);
    const SymMatrix a2(g * g.transpose());
    const auto chk = trace_product_bound_check(a1, a2);
    EXPECT_TRUE(chk.holds);
    EXPECT_LE(chk.lhs, chk.rhs * (1.0 + 1e-12) + 1e-300);
  }
  Eigen::VectorXd d(2);
  d << 1.0, -1.0;
  EXPECT_THROW(trace_product_bound_check(Eigen::MatrixXd::Identity(2, 2), SymMatrix::diagonal(d)), NotPsdError);
}

TEST(Fields, FourierEvaluationIsSymmetric) {
  const auto torus = ModelManifold::flat_torus({2.0 * std::numbers::pi, 3.0});
  const auto f = EndomorphismField::fourier(2, 2, {{0, 0, {0, 0}, 1.0, 0.0}, {1, 0, {1, -1}, 0.4, 0.3}, {1, 1, {0, 2}, -0.2, 0.0}});
  const Point p = torus.point({0.7, 2.1});
  const Eigen::MatrixXd v = f(torus, p);
  EXPECT_EQ(v(0, 1), v(1, 0));
  EXPECT_NEAR(v(0, 1), 0.4 * std::cos(0.7 - 2.1) + 0.3 * std::sin(0.7 - 2.1), 1e-15);
  EXPECT_NEAR(v(1, 1), -0.2 * std::cos(4.2), 1e-15);
  EXPECT_EQ(f.max_frequency(), 2);
  EXPECT_THROW(f.check_compatible(ModelManifold::round_sphere(1.0)), ValidationError);
  EXPECT_THROW(f.check_compatible(ModelManifold::circle(1.0)), DimensionMismatch);
  EXPECT_THROW(EndomorphismField::fourier(1, 1, {{0, 1, {1}, 1.0, 0.0}}), ValidationError);
}

TEST(Fields, ZonalEvaluation) {
  const auto s = ModelManifold::round_sphere(1.0);
  const auto f = EndomorphismField::zonal(1, Eigen::Vector3d(0, 0, 2), {{0, 0, {1.0, 0.5, 0.25}}});
  EXPECT_NEAR(f(s, s.point({0, 0, 1}))(0, 0), 1.75, 1e-15);
  EXPECT_NEAR(f(s, s.point({1, 0, 0}))(0, 0), 1.0, 1e-15);
  EXPECT_THROW(f.check_compatible(ModelManifold::circle(1.0)), ValidationError);
}

TEST(Fields, LowerBoundValidation) {
  const auto c = ModelManifold::circle(1.0);
  auto f = EndomorphismField::fourier(1, 1, {{0, 0, {1}, 2.0, 0.0}});
  EXPECT_NEAR(field_min_eigen(f, c, 64), -2.0, 1e-12);
  f.set_lower_bound(-2.0);
  EXPECT_NO_THROW(validate_lower_bound(f, c));
  f.set_lower_bound(-1.0);
  EXPECT_THROW(validate_lower_bound(f, c), ValidationError);
}

TEST(Fields, ValidationGridSizes) {
  EXPECT_EQ(validation_grid(ModelManifold::flat_torus({1.0, 1.0}), 8).size(), 64u);
  EXPECT_EQ(validation_grid(ModelManifold::round_sphere(1.0), 8).size(), 6u * 16u + 2u);
}

}  // namespace
