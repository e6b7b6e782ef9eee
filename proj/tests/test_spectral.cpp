#include <cmath>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>

#include "heatsc/io.hpp"
#include "heatsc/spectral_oracle.hpp"
#include "oracles.hpp"

using namespace heatsc;

namespace {

constexpr double kPi = std::numbers::pi;

TEST(ExactSpectrum, ModelLaplacians) {
  const auto ev = eigenvalues(exact_spectrum(ModelManifold::circle(1.0), 7));
  const std::vector<double> first{0, 1, 1, 4, 4, 9, 9};
  for (int i = 0; i < 7; ++i) EXPECT_EQ(ev[i], first[i]);

  const auto sph = eigenvalues(exact_spectrum(ModelManifold::round_sphere(1.0), 9));
  EXPECT_EQ(std::count(sph.begin(), sph.end(), 6.0), 5);
  EXPECT_EQ(sph[0], 0.0);
  EXPECT_EQ(sph[1], 2.0);

  const auto tor = eigenvalues(exact_spectrum(ModelManifold::flat_torus({2 * kPi, 2 * kPi}), 9));
  const std::vector<double> lat{0, 1, 1, 1, 1, 2, 2, 2, 2};
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(tor[i], lat[i], 1e-14);

  const auto big = eigenvalues(exact_spectrum(ModelManifold::circle(2.0), 5));
  EXPECT_NEAR(big[1], 0.25, 1e-15);
}

TEST(ExactSpectrum, TracesMatchDirectSums) {
  const auto c = ModelManifold::circle(1.0);
  const auto z = EndomorphismField::zero(1);
  EXPECT_NEAR(oracle_trace(build_oracle(c, z, std::nullopt, 1.0, 1.0), 1.0), 1.7726372, 1e-7);
  // Poisson summation: sqrt(pi) (1 + 2 e^{-pi^2} + ...)
  EXPECT_NEAR(oracle_trace(build_oracle(c, z, std::nullopt, 1.0, 1.0), 1.0),
              std::sqrt(kPi) * (1.0 + 2.0 * std::exp(-kPi * kPi) + 2.0 * std::exp(-4.0 * kPi * kPi)), 1e-14);
  const auto s = ModelManifold::round_sphere(1.0);
  const double h = std::sqrt(0.001);
  const double zs = oracle_trace(build_oracle(s, z, std::nullopt, h, 1.0), 1.0);
  EXPECT_NEAR(zs, 1000.333, 1e-3);
  EXPECT_NEAR(zs, oracle::sphere_trace(0.001), 1e-12 * zs);
}

TEST(ExactSpectrum, ConstantShiftFactorizes) {
  const auto torus = ModelManifold::flat_torus({2.0, 3.0});
  Eigen::MatrixXd v(2, 2);
  v << 0.5, 0.2, 0.2, 1.5;
  const auto shifted = build_oracle(torus, EndomorphismField::constant(SymMatrix(v)), std::nullopt, 0.3, 0.7);
  const auto free = build_oracle(torus, EndomorphismField::zero(1), std::nullopt, 0.3, 0.7);
  EXPECT_NEAR(oracle_trace(shifted, 0.7), oracle_trace(free, 0.7) * oracle::expm(-0.7 * v).trace(), 1e-12);
  const Point x = torus.point({0.3, 1.0}), y = torus.point({0.2, 1.4});
  const Eigen::MatrixXd k = oracle_heat_kernel(shifted, x, y, 0.7);
  EXPECT_LT((k - oracle_heat_kernel(free, x, y, 0.7)(0, 0) * oracle::expm(-0.7 * v)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ExactKernel, CircleMatchesImageSum) {
  const auto c = ModelManifold::circle(1.5);
  const auto z = EndomorphismField::zero(1);
  for (double tau : {0.002, 0.05, 1.0, 7.0}) {
    const double h = std::sqrt(tau);
    const auto sd = build_oracle(c, z, std::nullopt, h, 1.0);
    for (double dth : {0.0, 0.3, 2.5}) {
      const double k = oracle_heat_kernel(sd, c.point({1.0 + dth}), c.point({1.0}), 1.0)(0, 0);
      EXPECT_NEAR(k, oracle::circle_kernel_images(1.5, dth, tau), 1e-12 * std::max(1.0, k));
    }
  }
  const auto late = build_oracle(ModelManifold::circle(1.0), z, std::nullopt, 1.0, 60.0);
  EXPECT_NEAR(oracle_heat_kernel(late, c.point({0.0}), c.point({1.0}), 60.0)(0, 0), 1.0 / (2.0 * kPi), 1e-14);
}

TEST(ExactKernel, SphereDiagonalIsTraceOverArea) {
  const auto s = ModelManifold::round_sphere(1.3);
  const auto sd = build_oracle(s, EndomorphismField::zero(1), std::nullopt, 0.2, 1.0);
  const Point y = s.point({0.1, 0.2, 0.3});
  EXPECT_NEAR(oracle_heat_kernel(sd, y, y, 1.0)(0, 0), oracle_trace(sd, 1.0) / total_volume(s), 1e-12);
}

TEST(Oracle, SmallTimeRaisesInsteadOfTruncating) {
  const auto c = ModelManifold::circle(1.0);
  const auto sd = exact_decomposition(c, 1.0, SymMatrix::zero(1), 100.0);
  EXPECT_NO_THROW(oracle_trace(sd, 1.0));
  EXPECT_THROW(oracle_trace(sd, 1e-3), NotConverged);
  EXPECT_THROW(oracle_heat_kernel(sd, c.point({0.0}), c.point({0.0}), 1e-3), NotConverged);
  const auto v = EndomorphismField::fourier(1, 1, {{0, 0, {1}, 1.0, 0.0}});
  const auto g = galerkin_spectrum(c, v, std::nullopt, 0.1, 20);
  EXPECT_THROW(oracle_trace(g, 1.0), NotConverged);
}

TEST(Galerkin, FreeSpectrumMatchesExact) {
  for (const auto& m : {ModelManifold::circle(1.0), ModelManifold::flat_torus({2.0, 3.0})}) {
    const double h = 0.7;
    const auto g = galerkin_spectrum(m, EndomorphismField::zero(1), std::nullopt, h, 12, false);
    const auto ge = eigenvalues(g);
    const auto ex = eigenvalues(exact_decomposition(m, h, SymMatrix::zero(1), ge.back() / (h * h) * 0.999));
    for (std::size_t i = 0; i < ex.size(); ++i) EXPECT_NEAR(ge[i], ex[i], 1e-12);
  }
}

TEST(Galerkin, ConstantShift) {
  const auto c = ModelManifold::circle(1.0);
  const auto v = EndomorphismField::fourier(1, 1, {{0, 0, {0}, 2.5, 0.0}});
  const auto ev = eigenvalues(galerkin_spectrum(c, v, std::nullopt, 0.5, 10));
  EXPECT_NEAR(ev[0], 2.5, 1e-14);
  EXPECT_NEAR(ev[1], 2.5 + 0.25, 1e-14);
}

TEST(Galerkin, RankTwoSplitsIntoScalarProblems) {
  // [[a, b cos x], [b cos x, a]] ~ (a + b cos x) + (a - b cos x)
  const auto c = ModelManifold::circle(1.0);
  const double a = 1.0, b = 0.6, h = 0.4;
  const auto v2 = EndomorphismField::fourier(2, 1, {{0, 0, {0}, a, 0.0}, {1, 1, {0}, a, 0.0}, {0, 1, {1}, b, 0.0}});
  const auto plus = EndomorphismField::fourier(1, 1, {{0, 0, {0}, a, 0.0}, {0, 0, {1}, b, 0.0}});
  const auto minus = EndomorphismField::fourier(1, 1, {{0, 0, {0}, a, 0.0}, {0, 0, {1}, -b, 0.0}});
  auto ev2 = eigenvalues(galerkin_spectrum(c, v2, std::nullopt, h, 40, false));
  auto e1 = eigenvalues(galerkin_spectrum(c, plus, std::nullopt, h, 40, false));
  const auto em = eigenvalues(galerkin_spectrum(c, minus, std::nullopt, h, 40, false));
  e1.insert(e1.end(), em.begin(), em.end());
  std::sort(e1.begin(), e1.end());
  ASSERT_EQ(ev2.size(), e1.size());
  for (std::size_t i = 0; i < ev2.size(); ++i) EXPECT_NEAR(ev2[i], e1[i], 1e-12 * std::max(1.0, e1[i]));
}

TEST(Galerkin, MathieuSelfConvergence) {
  const auto c = ModelManifold::circle(1.0);
  const auto v = EndomorphismField::fourier(1, 1, {{0, 0, {1}, 2.0, 0.0}});
  const auto coarse = eigenvalues(galerkin_spectrum(c, v, std::nullopt, 1.0, 24, false));
  const auto fine = eigenvalues(galerkin_spectrum(c, v, std::nullopt, 1.0, 48, false));
  EXPECT_NEAR(coarse[0], fine[0], 1e-10);
  for (std::size_t i = 0; i < coarse.size() / 4; ++i) EXPECT_NEAR(coarse[i], fine[i], 1e-9 * std::max(1.0, std::abs(fine[i])));
}

TEST(Galerkin, CutoffGuard) {
  const auto c = ModelManifold::circle(1.0);
  const auto v = EndomorphismField::fourier(1, 1, {{0, 0, {3}, 1.0, 0.0}});
  EXPECT_THROW(galerkin_spectrum(c, v, std::nullopt, 1.0, 11), CutoffTooSmall);
  EXPECT_NO_THROW(galerkin_spectrum(c, v, std::nullopt, 1.0, 12, false));
  EXPECT_THROW(galerkin_spectrum(ModelManifold::round_sphere(1.0), EndomorphismField::zero(1), std::nullopt, 1.0, 8),
               ValidationError);
  EXPECT_THROW(build_oracle(ModelManifold::round_sphere(1.0),
                            EndomorphismField::zonal(1, Eigen::Vector3d::UnitZ(), {{0, 0, {0.0, 1.0}}}), std::nullopt,
                            0.5, 1.0),
               ValidationError);
}

TEST(Galerkin, BlocksFollowCouplingGraph) {
  const auto torus = ModelManifold::flat_torus({2 * kPi, 2 * kPi});
  const auto v = EndomorphismField::fourier(1, 2, {{0, 0, {1, 1}, 0.5, 0.0}});
  const auto g = galerkin_spectrum(torus, v, std::nullopt, 0.5, 8, false);
  // modes couple only along k1 - k2 = const
  for (const auto& b : g.blocks) {
    const int diff = b.modes[0][0] - b.modes[0][1];
    for (const auto& k : b.modes) EXPECT_EQ(k[0] - k[1], diff);
  }
  EXPECT_GT(g.blocks.size(), 10u);
}

TEST(Galerkin, KernelPropertiesAndTrace) {
  const auto c = ModelManifold::circle(1.0);
  const auto v = EndomorphismField::fourier(1, 1, {{0, 0, {0}, 1.0, 0.0}, {0, 0, {1}, 1.0, 0.3}});
  const auto sd = build_oracle(c, v, std::nullopt, 0.3, 0.5);
  // trace equals the integral of the diagonal
  const double integral =
      2 * kPi * periodic_mean([&](double th) { return oracle_heat_kernel(sd, c.point({th}), c.point({th}), 1.0)(0, 0); }, 64);
  EXPECT_NEAR(integral, oracle_trace(sd, 1.0), 1e-11 * integral);
  for (double th : {0.0, 1.0, 4.0}) EXPECT_GT(oracle_heat_kernel(sd, c.point({th}), c.point({th}), 1.0)(0, 0), 0.0);
  // symmetry k(x, y) = k(y, x)^T
  const Point x = c.point({0.2}), y = c.point({1.1});
  EXPECT_NEAR(oracle_heat_kernel(sd, x, y, 1.0)(0, 0), oracle_heat_kernel(sd, y, x, 1.0)(0, 0), 1e-14);
  // strictly decreasing in t
  double prev = oracle_trace(sd, 0.5);
  for (double t : {0.75, 1.0, 2.0, 4.0}) {
    const double z = oracle_trace(sd, t);
    EXPECT_LT(z, prev);
    prev = z;
  }
}

TEST(Cache, RoundTripPreservesDecomposition) {
  const auto torus = ModelManifold::flat_torus({2 * kPi, 3.0});
  const auto v = EndomorphismField::fourier(2, 2, {{0, 0, {1, 0}, 0.5, 0.2}, {0, 1, {0, 1}, 0.3, 0.0}, {1, 1, {0, 0}, 1.0, 0.0}});
  const auto sd = galerkin_spectrum(torus, v, std::nullopt, 0.6, 8, true);
  const auto path = std::filesystem::temp_directory_path() / "heatsc_cache_roundtrip.bin";
  save_decomposition(path, sd);
  const auto back = load_decomposition(path);
  std::filesystem::remove(path);
  EXPECT_EQ(eigenvalues(back), eigenvalues(sd));
  const Point x = torus.point({0.1, 0.2}), y = torus.point({0.4, 0.1});
  EXPECT_EQ(oracle_heat_kernel(back, x, y, 1.0), oracle_heat_kernel(sd, x, y, 1.0));
}

}  // namespace
