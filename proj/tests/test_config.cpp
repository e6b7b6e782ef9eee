#include <gtest/gtest.h>

#include "heatsc/commands.hpp"

using namespace heatsc;

namespace {

TEST(Config, DefaultsAndGrid) {
  const auto cfg = parse_config(json::object());
  EXPECT_EQ(cfg.manifold.kind(), ManifoldKind::circle);
  ASSERT_EQ(cfg.hbar_grid.size(), 16u);
  EXPECT_DOUBLE_EQ(cfg.hbar_grid.front(), 0.5);
  EXPECT_DOUBLE_EQ(cfg.hbar_grid.back(), 0.01);
  EXPECT_NEAR(cfg.hbar_grid[1] / cfg.hbar_grid[0], cfg.hbar_grid[2] / cfg.hbar_grid[1], 1e-12);
  EXPECT_EQ(cfg.parametrix.N, 1);
  EXPECT_EQ(cfg.diagonal_points, 8);
  EXPECT_EQ(cfg.pairs, 24);
}

TEST(Config, OverridesByDottedPath) {
  json doc = {{"manifold", {{"kind", "torus"}, {"scale", {2.0, 3.0}}}}, {"hbar_grid", {0.2, 0.1}}};
  apply_override(doc, "parametrix.N=2");
  apply_override(doc, "hbar_grid.1=0.05");
  apply_override(doc, "manifold.kind=sphere");
  apply_override(doc, "manifold.scale=[1.5]");
  apply_override(doc, "V={\"rank\":1,\"kind\":\"constant\",\"data\":0.5}");
  const auto cfg = parse_config(doc);
  EXPECT_EQ(cfg.parametrix.N, 2);
  EXPECT_DOUBLE_EQ(cfg.hbar_grid[1], 0.05);
  EXPECT_EQ(cfg.manifold.kind(), ManifoldKind::round_sphere);
  EXPECT_DOUBLE_EQ(cfg.manifold.scale()[0], 1.5);
  EXPECT_DOUBLE_EQ(cfg.V.constant_value()(0, 0), 0.5);
  EXPECT_THROW(apply_override(doc, "novalue"), ValidationError);
  EXPECT_THROW(apply_override(doc, "hbar_grid.7=1"), ValidationError);
  EXPECT_THROW(apply_override(doc, "hbar_grid.0.x=1"), ValidationError);
}

TEST(Config, FieldDescriptors) {
  json doc = {{"manifold", {{"kind", "torus"}, {"dim", 2}, {"scale", {6.0, 6.0}}}},
              {"V", {{"rank", 2}, {"kind", "fourier"}, {"data", {{{"row", 0}, {"col", 1}, {"k", {1, 0}}, {"cos", 0.5}}}}}},
              {"W", {{"rank", 2}, {"kind", "constant"}, {"data", {{1.0, 0.0}, {0.0, 2.0}}}}}};
  const auto cfg = parse_config(doc);
  EXPECT_EQ(cfg.V.kind(), FieldKind::fourier);
  ASSERT_TRUE(cfg.W.has_value());
  EXPECT_DOUBLE_EQ(cfg.W->constant_value()(1, 1), 2.0);

  json bad = doc;
  bad["V"]["data"][0]["k"] = {1};
  EXPECT_THROW(parse_config(bad), DimensionMismatch);
  bad = doc;
  bad["W"]["rank"] = 3;
  EXPECT_THROW(parse_config(bad), ValidationError);
  bad = doc;
  bad["manifold"]["kind"] = "klein_bottle";
  EXPECT_THROW(parse_config(bad), ValidationError);
  bad = doc;
  bad["V"]["lower_bound"] = 0.0;
  EXPECT_THROW(parse_config(bad), ValidationError);
  bad = doc;
  bad["hbar_grid"] = {{"max", 0.1}, {"min", 0.2}, {"count", 3}};
  EXPECT_THROW(parse_config(bad), ValidationError);
  json zonal = {{"manifold", {{"kind", "sphere"}}},
                {"V", {{"rank", 1}, {"kind", "zonal"}, {"data", {{"pole", {0, 0, 1}}, {"terms", {{{"row", 0}, {"col", 0}, {"coeffs", {1.0, 0.5}}}}}}}}}};
  EXPECT_EQ(parse_config(zonal).V.kind(), FieldKind::zonal);
}

TEST(Samples, DeterministicAndWithinHalfEta) {
  const auto s = ModelManifold::round_sphere(1.0);
  const auto a = expand_samples(s, 2.0, 42, 8, 24);
  const auto b = expand_samples(s, 2.0, 42, 8, 24);
  ASSERT_EQ(a.size(), 32u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x.coords, b[i].x.coords);
    EXPECT_LT(a[i].distance, 1.0);
    EXPECT_EQ(a[i].diagonal, i < 8);
  }
  EXPECT_NE(expand_samples(s, 2.0, 43, 8, 24)[0].y.coords, a[0].y.coords);
}

TEST(Parallel, OrderIndependentResultsAndErrors) {
  std::vector<int> out(100);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw NotConverged("x");
               }),
               NotConverged);
}

}  // namespace
