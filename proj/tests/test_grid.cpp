#include <gtest/gtest.h>

#include <random>

#include "bicamo/grid.hpp"
#include "oracles.hpp"

using bicamo::Grid;
namespace k = bicamo::kernels;

namespace {

Grid vertical_step(int h, int w) {
  Grid g(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = w / 2; j < w; ++j) g(i, j) = 1.0;
  return g;
}

}  // namespace

TEST(Conv2dSame, LaplacianAnnihilatesConstants) {
  const Grid out = bicamo::conv2d_same(Grid(5, 7, 0.37), k::laplacian);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2dSame, ImpulseResponseOfSobelX) {
  Grid g(3, 3);
  g(1, 1) = 1.0;
  const Grid out = bicamo::conv2d_same(g, k::sobel_x);
  // Hand-evaluated sliding window: out(i,j) = Kx(2-i, 2-j).
  const double expected[3][3] = {{1, 0, -1}, {2, 0, -2}, {1, 0, -1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(out(i, j), expected[i][j]) << i << "," << j;
}

TEST(Conv2dSame, VerticalStepGivesFourAdjacentToStep) {
  const Grid out = bicamo::conv2d_same(vertical_step(6, 8), k::sobel_x);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 8; ++j) {
      const double expected = (j == 3 || j == 4) ? 4.0 : 0.0;
      EXPECT_EQ(out(i, j), expected) << i << "," << j;
    }
  }
}

TEST(Conv2dSame, MatchesDirectWindowSum) {
  std::mt19937_64 rng(3);
  const double kl[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  for (int trial = 0; trial < 20; ++trial) {
    const Grid g = oracle::random_grid(rng, 1 + trial % 7, 1 + (trial * 3) % 9, -2, 2);
    EXPECT_LE(oracle::max_abs_diff(bicamo::conv2d_same(g, k::laplacian), oracle::correlate3x3(g, kl)),
              1e-15);
  }
}

TEST(Conv2dSame, IsLinear) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Grid g1 = oracle::random_grid(rng, 9, 11, -1, 1);
    const Grid g2 = oracle::random_grid(rng, 9, 11, -1, 1);
    const double a = 1.7, b = -0.3;
    const Grid lhs = bicamo::conv2d_same(
        bicamo::zip(g1, g2, [&](double x, double y) { return a * x + b * y; }), k::sobel_y);
    const Grid c1 = bicamo::conv2d_same(g1, k::sobel_y);
    const Grid c2 = bicamo::conv2d_same(g2, k::sobel_y);
    const Grid rhs = bicamo::zip(c1, c2, [&](double x, double y) { return a * x + b * y; });
    EXPECT_LE(oracle::max_abs_diff(lhs, rhs), 1e-12);
  }
}

TEST(AvgPoolSame, ConstantsAndSingleCell) {
  const Grid c = bicamo::avg_pool_same(Grid(6, 5, 0.8), 3);
  for (double v : c.values()) EXPECT_NEAR(v, 0.8, 1e-15);
  EXPECT_EQ(bicamo::avg_pool_same(Grid(1, 1, 0.25), 31)(0, 0), 0.25);
}

TEST(AvgPoolSame, CheckerboardInteriorCells) {
  Grid g(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = (i + j) % 2;
  const Grid out = bicamo::avg_pool_same(g, 3);
  EXPECT_NEAR(out(1, 1), 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(out(2, 2), 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(out(1, 2), 5.0 / 9.0, 1e-15);
  EXPECT_NEAR(out(2, 1), 5.0 / 9.0, 1e-15);
}

TEST(AvgPoolSame, RejectsEvenWindow) {
  EXPECT_THROW(bicamo::avg_pool_same(Grid(3, 3), 4), std::invalid_argument);
  EXPECT_THROW(bicamo::avg_pool_same(Grid(3, 3), 0), std::invalid_argument);
}

TEST(AvgPoolSame, FullCoverWindowPreservesGlobalMean) {
  std::mt19937_64 rng(5);
  const Grid g = oracle::random_grid(rng, 7, 10);
  const Grid out = bicamo::avg_pool_same(g, 2 * 10 - 1);
  for (double v : out.values()) EXPECT_NEAR(v, g.mean(), 1e-12);
  EXPECT_NEAR(out.mean(), g.mean(), 1e-12);
}

TEST(ResizeNearest, IdentityAndReplication) {
  std::mt19937_64 rng(1);
  const Grid g = oracle::random_grid(rng, 5, 6);
  EXPECT_EQ(bicamo::resize_nearest(g, 5, 6), g);

  const Grid small(2, 2, std::vector<double>{1, 2, 3, 4});
  const Grid up = bicamo::resize_nearest(small, 4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(up(i, j), small(i / 2, j / 2));
}

TEST(ResizeNearest, DownscalePicksEvenCells) {
  Grid g(4, 4);
  for (std::size_t n = 0; n < g.size(); ++n) g[n] = static_cast<double>(n);
  const Grid out = bicamo::resize_nearest(g, 2, 2);
  EXPECT_EQ(out(0, 0), g(0, 0));
  EXPECT_EQ(out(0, 1), g(0, 2));
  EXPECT_EQ(out(1, 0), g(2, 0));
  EXPECT_EQ(out(1, 1), g(2, 2));
  EXPECT_THROW(bicamo::resize_nearest(g, 0, 2), std::invalid_argument);
}

TEST(ResizeBilinear, IdentityConstantAndMonotoneUpsample) {
  std::mt19937_64 rng(2);
  const Grid g = oracle::random_grid(rng, 5, 3);
  EXPECT_EQ(bicamo::resize_bilinear(g, 5, 3), g);

  const Grid c = bicamo::resize_bilinear(Grid(3, 5, 0.6), 7, 2);
  for (double v : c.values()) EXPECT_NEAR(v, 0.6, 1e-15);

  const Grid col(2, 1, std::vector<double>{0.0, 1.0});
  const Grid up = bicamo::resize_bilinear(col, 4, 1);
  // Half-pixel source coordinates -0.25 (clamped), 0.25, 0.75, 1.25 (clamped).
  const double expected[] = {0.0, 0.25, 0.75, 1.0};
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(up(i, 0), expected[i]);
  EXPECT_THROW(bicamo::resize_bilinear(col, 3, -1), std::invalid_argument);
}

TEST(ResizeBilinear, ConstantRoundTripIsIdentity) {
  const Grid c(8, 8, 0.3);
  const Grid back = bicamo::resize_bilinear(bicamo::resize_bilinear(c, 3, 5), 8, 8);
  for (double v : back.values()) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(ResizeBilinear, AdjointIdentity) {
  // <R x, y> == <x, R^T y>
  std::mt19937_64 rng(9);
  for (auto [ih, iw, oh, ow] : {std::array{8, 8, 4, 4}, std::array{5, 7, 9, 3}, std::array{3, 3, 6, 6}}) {
    const Grid x = oracle::random_grid(rng, ih, iw, -1, 1);
    const Grid y = oracle::random_grid(rng, oh, ow, -1, 1);
    const Grid rx = bicamo::resize_bilinear(x, oh, ow);
    const Grid rty = bicamo::resize_bilinear_adjoint(y, ih, iw);
    double lhs = 0, rhs = 0;
    for (std::size_t n = 0; n < rx.size(); ++n) lhs += rx[n] * y[n];
    for (std::size_t n = 0; n < x.size(); ++n) rhs += x[n] * rty[n];
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Sigmoid, ValuesAndTails) {
  EXPECT_EQ(bicamo::sigmoid(0.0), 0.5);
  const double tail = bicamo::sigmoid(-1000.0);
  EXPECT_GE(tail, 0.0);
  EXPECT_LT(tail, 1e-300);
  EXPECT_EQ(bicamo::sigmoid(1000.0), 1.0);
}

TEST(GridType, RejectsBadConstruction) {
  EXPECT_THROW(Grid(0, 3), std::invalid_argument);
  EXPECT_THROW(Grid(2, 2, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(Grid(1, 1, std::vector<double>{std::nan("")}), std::invalid_argument);
}
