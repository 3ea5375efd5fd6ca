#include <gtest/gtest.h>

#include <random>

#include "bicamo/injection.hpp"
#include "oracles.hpp"

using bicamo::EdgePrior;
using bicamo::FeatureMap;
using bicamo::Grid;
using bicamo::InjectionConfig;

namespace {

FeatureMap random_features(std::mt19937_64& rng, int c, int h, int w) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMap f(c, h, w);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = n(rng);
  return f;
}

EdgePrior prior_of(Grid g) { return EdgePrior{std::move(g), bicamo::EdgeOperator::sobel()}; }

}  // namespace

TEST(SharpenPrior, ConstantPriorVanishesWithPrefilter) {
  const Grid phi = bicamo::sharpen_prior(Grid(16, 16, 0.6), 8, 8, true);
  for (double v : phi.values()) EXPECT_EQ(v, 0.0);
}

TEST(SharpenPrior, PassThroughWithoutPrefilter) {
  std::mt19937_64 rng(1);
  const Grid e = oracle::random_grid(rng, 16, 12);
  EXPECT_EQ(bicamo::sharpen_prior(e, 8, 6, false), bicamo::resize_nearest(e, 8, 6));
}

TEST(SharpenPrior, SinglePixelGivesAbsoluteLaplacianStencil) {
  Grid e(5, 5);
  e(2, 2) = 1.0;
  const Grid phi = bicamo::sharpen_prior(e, 5, 5, true);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const int d = std::abs(i - 2) + std::abs(j - 2);
      const double expected = d == 0 ? 4.0 : (d == 1 ? 1.0 : 0.0);
      EXPECT_EQ(phi(i, j), expected) << i << "," << j;
    }
  }
  EXPECT_THROW(bicamo::sharpen_prior(e, 0, 5, true), std::invalid_argument);
}

TEST(BroadcastPrior, ReplicatesAcrossChannels) {
  std::mt19937_64 rng(2);
  const Grid phi = oracle::random_grid(rng, 4, 6);
  const FeatureMap one = bicamo::broadcast_prior(phi, 1);
  ASSERT_EQ(one.channels(), 1);
  for (std::size_t k = 0; k < phi.size(); ++k) EXPECT_EQ(one.channel(0)[k], phi[k]);

  const FeatureMap three = bicamo::broadcast_prior(phi, 3);
  double total = 0.0;
  for (int c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < phi.size(); ++k) {
      EXPECT_EQ(three.channel(c)[k], phi[k]);
      total += three.channel(c)[k];
    }
  EXPECT_NEAR(total, 3.0 * phi.sum(), 1e-12);
  EXPECT_THROW(bicamo::broadcast_prior(phi, 0), std::invalid_argument);
}

TEST(Inject, ZeroScaleAndConstantPriorAreIdentity) {
  std::mt19937_64 rng(3);
  const FeatureMap f = random_features(rng, 4, 8, 8);
  const EdgePrior e = prior_of(oracle::random_grid(rng, 16, 16));
  EXPECT_EQ(bicamo::inject(f, e, {true, 0.0, true}), f);
  EXPECT_EQ(bicamo::inject(f, prior_of(Grid(16, 16, 0.5)), {true, 0.075, true}), f);
  EXPECT_EQ(bicamo::inject(f, prior_of(Grid(16, 16, 0.0)), {true, 0.075, false}), f);
  EXPECT_EQ(bicamo::inject(f, e, InjectionConfig::off()), f);
}

TEST(Inject, DefaultScaleAndShapePreserved) {
  const InjectionConfig cfg;
  EXPECT_EQ(cfg.lambda_inj, 0.075);
  EXPECT_TRUE(cfg.laplacian_prefilter);
  std::mt19937_64 rng(4);
  const FeatureMap f = random_features(rng, 5, 7, 9);
  const FeatureMap out = bicamo::inject(f, prior_of(oracle::random_grid(rng, 14, 18)), cfg);
  EXPECT_TRUE(out.same_shape(f));
}

TEST(Inject, LinearInScale) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMap f = random_features(rng, 3, 8, 8);
    const EdgePrior e = prior_of(oracle::random_grid(rng, 16, 16));
    const double lam = 0.05 + 0.1 * trial;
    const FeatureMap a = bicamo::inject(f, e, {true, lam, true});
    const FeatureMap b = bicamo::inject(f, e, {true, 2 * lam, true});
    for (std::size_t k = 0; k < f.size(); ++k) EXPECT_NEAR(b[k] - f[k], 2.0 * (a[k] - f[k]), 1e-12);
  }
}

TEST(Inject, RejectsEmptyFeatureMapAndNegativeScale) {
  EXPECT_THROW(bicamo::inject(FeatureMap(), prior_of(Grid(2, 2)), {}), std::invalid_argument);
  FeatureMap f(1, 2, 2);
  EXPECT_THROW(bicamo::inject(f, prior_of(Grid(2, 2)), {true, -1.0, true}), std::invalid_argument);
}
