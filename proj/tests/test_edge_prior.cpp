#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bicamo/edge_prior.hpp"
#include "oracles.hpp"

using bicamo::EdgeOperator;
using bicamo::Grid;
using bicamo::ImageRGB;

namespace {

Grid step(int h, int w, double height) {
  Grid g(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = w / 2; j < w; ++j) g(i, j) = height;
  return g;
}

Grid rotate90(const Grid& g) {
  // out(i, j) = g(j, W-1-i): counter-clockwise
  Grid out(g.width(), g.height());
  for (int i = 0; i < out.height(); ++i)
    for (int j = 0; j < out.width(); ++j) out(i, j) = g(j, g.width() - 1 - i);
  return out;
}

const EdgeOperator kAllOperators[] = {EdgeOperator::sobel(), EdgeOperator::prewitt(),
                                      EdgeOperator::laplacian(), EdgeOperator::log(),
                                      EdgeOperator::canny()};

}  // namespace

TEST(Grayscale, LuminanceCoefficients) {
  auto px = [](double r, double g, double b) {
    return bicamo::to_grayscale(ImageRGB(Grid(1, 1, r), Grid(1, 1, g), Grid(1, 1, b)))(0, 0);
  };
  EXPECT_DOUBLE_EQ(px(1, 0, 0), 0.299);
  EXPECT_DOUBLE_EQ(px(0, 1, 0), 0.587);
  EXPECT_DOUBLE_EQ(px(0, 0, 1), 0.114);
  EXPECT_NEAR(px(1, 1, 1), 1.0, 1e-15);
}

TEST(ImageRGBType, RejectsChannelMismatchAndRange) {
  EXPECT_THROW(ImageRGB(Grid(2, 2), Grid(2, 3), Grid(2, 2)), std::invalid_argument);
  EXPECT_THROW(ImageRGB(Grid(2, 2, 1.5), Grid(2, 2), Grid(2, 2)), std::invalid_argument);
}

TEST(SobelMagnitude, ConstantGridSitsOnEpsilonFloor) {
  const Grid out = bicamo::sobel_magnitude(Grid(6, 6, 0.7));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, std::sqrt(1e-6));
}

TEST(SobelMagnitude, UnitStepSaturates) {
  const Grid out = bicamo::sobel_magnitude(step(6, 8, 1.0));
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (j == 3 || j == 4) {
        EXPECT_EQ(out(i, j), 1.0);
      } else {
        EXPECT_DOUBLE_EQ(out(i, j), std::sqrt(1e-6));
      }
    }
  }
}

TEST(SobelMagnitude, SmallStepIsUnclipped) {
  const Grid out = bicamo::sobel_magnitude(step(6, 8, 0.1));
  // dx = 4 * 0.1 at both columns adjacent to the step
  EXPECT_NEAR(out(2, 3), 0.4, 2e-6);
  EXPECT_NEAR(out(2, 4), 0.4, 2e-6);
  EXPECT_DOUBLE_EQ(out(2, 4), std::sqrt(0.4 * 0.4 + 1e-6));
}

TEST(EdgeOperators, ImpulseResponsesMatchHandConvolution) {
  Grid g(5, 5);
  g(2, 2) = 0.25;
  // Sobel: hand-evaluated gx, gy at each cell of the 3x3 neighbourhood.
  const Grid sobel = bicamo::apply_edge_operator(g, EdgeOperator::sobel());
  const double gx[3][3] = {{0.25, 0, -0.25}, {0.5, 0, -0.5}, {0.25, 0, -0.25}};
  const double gy[3][3] = {{0.25, 0.5, 0.25}, {0, 0, 0}, {-0.25, -0.5, -0.25}};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      EXPECT_EQ(sobel(1 + a, 1 + b), std::sqrt(gx[a][b] * gx[a][b] + gy[a][b] * gy[a][b] + 1e-6));
  EXPECT_EQ(sobel(0, 0), std::sqrt(1e-6));

  const Grid prewitt = bicamo::apply_edge_operator(g, EdgeOperator::prewitt());
  EXPECT_EQ(prewitt(2, 1), std::sqrt(0.25 * 0.25 + 1e-6));
  EXPECT_EQ(prewitt(1, 1), std::sqrt(0.25 * 0.25 + 0.25 * 0.25 + 1e-6));

  const Grid lap = bicamo::apply_edge_operator(g, EdgeOperator::laplacian());
  EXPECT_EQ(lap(2, 2), 1.0);
  EXPECT_EQ(lap(1, 2), 0.25);
  EXPECT_EQ(lap(2, 3), 0.25);
  EXPECT_EQ(lap(1, 1), 0.0);
}

TEST(EdgeOperators, StepResponsesMatchHandConvolution) {
  const Grid g = step(6, 8, 0.125);
  const Grid prewitt = bicamo::apply_edge_operator(g, EdgeOperator::prewitt());
  const Grid lap = bicamo::apply_edge_operator(g, EdgeOperator::laplacian());
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 8; ++j) {
      const bool at_step = j == 3 || j == 4;
      EXPECT_EQ(prewitt(i, j), std::sqrt((at_step ? 0.375 * 0.375 : 0.0) + 1e-6));
      EXPECT_EQ(lap(i, j), at_step ? 0.125 : 0.0);
    }
  }
}

TEST(EdgeOperators, ConstantImageGivesNearZeroPrior) {
  const ImageRGB img = ImageRGB::from_gray(Grid(12, 12, 0.42));
  for (const auto& op : kAllOperators) {
    const auto prior = bicamo::extract_edge_prior(img, op);
    EXPECT_LE(prior.map.max(), 1e-3 + 1e-12) << op.name();
  }
}

TEST(EdgeOperators, HalfBlackHalfWhiteSobelBand) {
  const auto prior = bicamo::extract_edge_prior(ImageRGB::from_gray(step(10, 10, 1.0)),
                                                EdgeOperator::sobel());
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (j == 4 || j == 5) {
        EXPECT_EQ(prior.map(i, j), 1.0);
      } else {
        EXPECT_LT(prior.map(i, j), 1.1e-3);
      }
    }
  }
}

TEST(EdgeOperators, CannyOnIdealStepIsOnePixelLine) {
  const auto prior = bicamo::extract_edge_prior(ImageRGB::from_gray(step(16, 16, 1.0)),
                                                EdgeOperator::canny());
  int line_col = -1;
  for (int i = 0; i < 16; ++i) {
    int count = 0;
    for (int j = 0; j < 16; ++j) {
      const double v = prior.map(i, j);
      ASSERT_TRUE(v == 0.0 || v == 1.0);
      if (v == 1.0) {
        ++count;
        if (line_col < 0) line_col = j;
        EXPECT_EQ(j, line_col);
      }
    }
    EXPECT_EQ(count, 1) << "row " << i;
  }
  EXPECT_TRUE(line_col == 7 || line_col == 8);
}

TEST(EdgeOperators, OutputsStayInUnitInterval) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const ImageRGB img(oracle::random_grid(rng, 16, 16), oracle::random_grid(rng, 16, 16),
                       oracle::random_grid(rng, 16, 16));
    for (const auto& op : kAllOperators) {
      const auto prior = bicamo::extract_edge_prior(img, op);
      EXPECT_GE(prior.map.min(), 0.0);
      EXPECT_LE(prior.map.max(), 1.0);
      EXPECT_EQ(prior.op, op);
    }
  }
}

TEST(EdgeOperators, SobelAndPrewittAreRotationCovariant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Grid g = oracle::random_grid(rng, 16, 16, 0, 0.2);
    for (const auto& op : {EdgeOperator::sobel(), EdgeOperator::prewitt()}) {
      const Grid a = rotate90(bicamo::apply_edge_operator(g, op));
      const Grid b = bicamo::apply_edge_operator(rotate90(g), op);
      EXPECT_LE(oracle::max_abs_diff(a, b), 1e-12) << op.name();
    }
  }
}

TEST(EdgeOperators, InvariantToAdditiveConstant) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const Grid g = oracle::random_grid(rng, 16, 16, 0, 0.5);
    const Grid shifted = bicamo::map(g, [](double v) { return v + 0.375; });
    for (const auto& op : kAllOperators) {
      const Grid a = bicamo::apply_edge_operator(g, op);
      const Grid b = bicamo::apply_edge_operator(shifted, op);
      EXPECT_LE(oracle::max_abs_diff(a, b), 1e-9) << op.name();
    }
  }
}

TEST(EdgeOperators, ParseAndValidate) {
  EXPECT_EQ(EdgeOperator::parse("log").kind, bicamo::EdgeKind::LoG);
  EXPECT_EQ(EdgeOperator::parse("canny").cache_key(), "canny_s1_l0.1_h0.2");
  EXPECT_THROW(EdgeOperator::parse("roberts"), std::invalid_argument);
  EXPECT_THROW(EdgeOperator::canny(1.0, 0.3, 0.2).validate(), std::invalid_argument);
  EXPECT_THROW(EdgeOperator::log(0.0).validate(), std::invalid_argument);
}

TEST(SanitizeEdges, ThresholdExamples) {
  const Grid at_threshold = bicamo::sanitize_edges(Grid(5, 5, 0.25), 0.25);
  const Grid saturated = bicamo::sanitize_edges(Grid(5, 5, 1.0), 0.25);
  const Grid rectified = bicamo::sanitize_edges(Grid(5, 5, 0.1), 0.25);
  for (double v : at_threshold.values()) EXPECT_EQ(v, 0.0);
  for (double v : saturated.values()) EXPECT_NEAR(v, 1.0, 1e-15);
  for (double v : rectified.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(bicamo::sanitize_edges(Grid(2, 2), 1.0), std::invalid_argument);
}

TEST(SanitizeEdges, IsMonotone) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Grid lo = oracle::random_grid(rng, 9, 9);
    const Grid bump = oracle::random_grid(rng, 9, 9, 0, 0.3);
    const Grid hi = bicamo::zip(lo, bump, [](double a, double b) { return std::min(1.0, a + b); });
    const Grid slo = bicamo::sanitize_edges(lo, 0.25);
    const Grid shi = bicamo::sanitize_edges(hi, 0.25);
    for (std::size_t k = 0; k < slo.size(); ++k) EXPECT_LE(slo[k], shi[k] + 1e-15);
  }
}
