#pragma once

// RGB edge prior construction: luminance projection, five interchangeable
// gradient operators, and the sanitised edge target used by the RGB-edge loss.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bicamo/grid.hpp"
#include "bicamo/tape.hpp"

namespace bicamo {

struct ImageRGB {
  Grid r, g, b;

  ImageRGB() = default;
  ImageRGB(Grid red, Grid green, Grid blue)
      : r(std::move(red)), g(std::move(green)), b(std::move(blue)) {
    if (!r.same_shape(g) || !r.same_shape(b)) {
      throw std::invalid_argument("ImageRGB: channel dimensions differ (" + shape_string(r) +
                                  ", " + shape_string(g) + ", " + shape_string(b) + ")");
    }
    for (const Grid* c : {&r, &g, &b}) {
      if (c->min() < 0.0 || c->max() > 1.0) {
        throw std::invalid_argument("ImageRGB: channel values must lie in [0,1]");
      }
    }
  }
  static ImageRGB from_gray(const Grid& gray) { return ImageRGB(gray, gray, gray); }

  int height() const { return r.height(); }
  int width() const { return r.width(); }
};

inline constexpr double kEdgeEpsilon = 1e-6;

inline Grid to_grayscale(const ImageRGB& img) {
  if (!img.r.same_shape(img.g) || !img.r.same_shape(img.b)) {
    throw std::invalid_argument("to_grayscale: channel dimensions differ");
  }
  Grid out(img.height(), img.width());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::clamp(0.299 * img.r[k] + 0.587 * img.g[k] + 0.114 * img.b[k], 0.0, 1.0);
  }
  return out;
}

// sqrt(gx^2 + gy^2 + eps) clipped to [0,1].
inline Grid gradient_magnitude(const Grid& g, const Kernel3x3& kx, const Kernel3x3& ky) {
  const Grid gx = conv2d_same(g, kx);
  const Grid gy = conv2d_same(g, ky);
  Grid out(g.height(), g.width());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::min(1.0, std::sqrt(gx[k] * gx[k] + gy[k] * gy[k] + kEdgeEpsilon));
  }
  return out;
}

inline Grid sobel_magnitude(const Grid& g) {
  return gradient_magnitude(g, kernels::sobel_x, kernels::sobel_y);
}

// Differentiable Sobel magnitude, used by the boundary losses on sigma(z).
inline Var sobel_magnitude(const Var& g) {
  const Var gx = ops::conv2d_same(g, kernels::sobel_x);
  const Var gy = ops::conv2d_same(g, kernels::sobel_y);
  return ops::clamp(ops::sqrt(ops::pow(gx, 2.0) + ops::pow(gy, 2.0) + kEdgeEpsilon), 0.0, 1.0);
}

// Separable normalised Gaussian, radius ceil(3 sigma), replicated borders.
inline Grid gaussian_blur(const Grid& g, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double norm = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    taps[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
    norm += taps[t + radius];
  }
  for (double& t : taps) t /= norm;

  const int h = g.height(), w = g.width();
  Grid tmp(h, w), out(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) acc += taps[t + radius] * g(i, detail::clamp_index(j + t, w));
      tmp(i, j) = acc;
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) acc += taps[t + radius] * tmp(detail::clamp_index(i + t, h), j);
      out(i, j) = acc;
    }
  }
  return out;
}

enum class EdgeKind { Sobel, Prewitt, Laplacian, LoG, Canny };

struct EdgeOperator {
  EdgeKind kind = EdgeKind::Sobel;
  double log_sigma = 1.4;
  double canny_sigma = 1.0;
  double canny_low = 0.1;
  double canny_high = 0.2;

  static EdgeOperator sobel() { return {EdgeKind::Sobel}; }
  static EdgeOperator prewitt() { return {EdgeKind::Prewitt}; }
  static EdgeOperator laplacian() { return {EdgeKind::Laplacian}; }
  static EdgeOperator log(double sigma = 1.4) {
    EdgeOperator op{EdgeKind::LoG};
    op.log_sigma = sigma;
    return op;
  }
  static EdgeOperator canny(double sigma = 1.0, double low = 0.1, double high = 0.2) {
    EdgeOperator op{EdgeKind::Canny};
    op.canny_sigma = sigma;
    op.canny_low = low;
    op.canny_high = high;
    return op;
  }

  void validate() const {
    if (kind == EdgeKind::LoG && !(log_sigma > 0.0)) {
      throw std::invalid_argument("EdgeOperator: LoG sigma must be positive");
    }
    if (kind == EdgeKind::Canny) {
      if (!(canny_sigma > 0.0) || !(canny_low > 0.0) || !(canny_high > 0.0)) {
        throw std::invalid_argument("EdgeOperator: Canny parameters must be positive");
      }
      if (!(canny_low < canny_high)) {
        throw std::invalid_argument("EdgeOperator: Canny low threshold must be below high");
      }
    }
  }

  std::string name() const {
    switch (kind) {
      case EdgeKind::Sobel: return "sobel";
      case EdgeKind::Prewitt: return "prewitt";
      case EdgeKind::Laplacian: return "laplacian";
      case EdgeKind::LoG: return "log";
      case EdgeKind::Canny: return "canny";
    }
    return "unknown";
  }

  // Name plus every parameter that affects the output.
  std::string cache_key() const {
    char buf[96];
    switch (kind) {
      case EdgeKind::LoG:
        std::snprintf(buf, sizeof buf, "log_s%.6g", log_sigma);
        return buf;
      case EdgeKind::Canny:
        std::snprintf(buf, sizeof buf, "canny_s%.6g_l%.6g_h%.6g", canny_sigma, canny_low,
                      canny_high);
        return buf;
      default:
        return name();
    }
  }

  static EdgeOperator parse(const std::string& name) {
    if (name == "sobel") return sobel();
    if (name == "prewitt") return prewitt();
    if (name == "laplacian") return laplacian();
    if (name == "log") return log();
    if (name == "canny") return canny();
    throw std::invalid_argument("unknown edge operator '" + name +
                                "' (expected sobel, prewitt, laplacian, log or canny)");
  }

  bool operator==(const EdgeOperator&) const = default;
};

struct EdgePrior {
  Grid map;
  EdgeOperator op;

  int height() const { return map.height(); }
  int width() const { return map.width(); }
};

// Binary edge map: Gaussian smoothing, Sobel gradient, non-maximum suppression
// along the quantised gradient direction, and double-threshold hysteresis with
// 8-connectivity. Thresholds are relative to the strongest response.
inline Grid canny(const Grid& gray, double sigma, double low, double high) {
  const int h = gray.height(), w = gray.width();
  const Grid smooth = gaussian_blur(gray, sigma);
  const Grid gx = conv2d_same(smooth, kernels::sobel_x);
  const Grid gy = conv2d_same(smooth, kernels::sobel_y);
  Grid mag(h, w);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(gx[k], gy[k]);

  Grid out(h, w, 0.0);
  const double peak = mag.max();
  if (peak <= 1e-12) return out;
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] /= peak;

  auto at = [&](int i, int j) { return (i < 0 || i >= h || j < 0 || j >= w) ? 0.0 : mag(i, j); };

  Grid thin(h, w, 0.0);
  constexpr double kPi = 3.14159265358979323846;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double m = mag(i, j);
      if (m == 0.0) continue;
      double angle = std::atan2(gy(i, j), gx(i, j)) * 180.0 / kPi;
      if (angle < 0.0) angle += 180.0;
      int di = 0, dj = 1;  // forward step along the gradient sector (row, col)
      if (angle >= 22.5 && angle < 67.5) {
        di = 1, dj = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        di = 1, dj = 0;
      } else if (angle >= 112.5 && angle < 157.5) {
        di = 1, dj = -1;
      }
      // Strict against the forward neighbour, non-strict against the backward
      // one, so a plateau of two equal responses keeps exactly one.
      if (m > at(i + di, j + dj) && m >= at(i - di, j - dj)) thin(i, j) = m;
    }
  }

  std::deque<std::pair<int, int>> frontier;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (thin(i, j) >= high) {
        out(i, j) = 1.0;
        frontier.emplace_back(i, j);
      }
    }
  }
  while (!frontier.empty()) {
    const auto [i, j] = frontier.front();
    frontier.pop_front();
    for (int a = -1; a <= 1; ++a) {
      for (int b = -1; b <= 1; ++b) {
        const int ni = i + a, nj = j + b;
        if (ni < 0 || ni >= h || nj < 0 || nj >= w) continue;
        if (out(ni, nj) == 0.0 && thin(ni, nj) >= low) {
          out(ni, nj) = 1.0;
          frontier.emplace_back(ni, nj);
        }
      }
    }
  }
  return out;
}

// Applies an operator to a luminance grid; output clipped to [0,1].
inline Grid apply_edge_operator(const Grid& gray, const EdgeOperator& op) {
  op.validate();
  switch (op.kind) {
    case EdgeKind::Sobel:
      return gradient_magnitude(gray, kernels::sobel_x, kernels::sobel_y);
    case EdgeKind::Prewitt:
      return gradient_magnitude(gray, kernels::prewitt_x, kernels::prewitt_y);
    case EdgeKind::Laplacian:
      return map(conv2d_same(gray, kernels::laplacian),
                 [](double v) { return std::min(1.0, std::abs(v)); });
    case EdgeKind::LoG:
      return map(conv2d_same(gaussian_blur(gray, op.log_sigma), kernels::laplacian),
                 [](double v) { return std::min(1.0, std::abs(v)); });
    case EdgeKind::Canny:
      return canny(gray, op.canny_sigma, op.canny_low, op.canny_high);
  }
  throw std::logic_error("apply_edge_operator: unhandled operator");
}

inline EdgePrior extract_edge_prior(const ImageRGB& img, const EdgeOperator& op) {
  return EdgePrior{apply_edge_operator(to_grayscale(img), op), op};
}

// max(0, (AvgPool3(E) - tau) / (1 - tau)).
inline Grid sanitize_edges(const Grid& e, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) {
    throw std::invalid_argument("sanitize_edges: tau must lie in [0,1), got " +
                                std::to_string(tau));
  }
  return map(avg_pool_same(e, 3), [tau](double v) { return std::max(0.0, (v - tau) / (1.0 - tau)); });
}

inline Grid sanitize_edges(const EdgePrior& e, double tau) { return sanitize_edges(e.map, tau); }

}  // namespace bicamo
