#pragma once

// Dense single- and multi-channel fields plus the fixed-kernel operators the
// rest of the library is built from. All fields are row-major 64-bit reals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bicamo {

class Grid {
 public:
  Grid() = default;

  Grid(int height, int width, double fill = 0.0) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
      throw std::invalid_argument("Grid: dimensions must be positive, got " +
                                  std::to_string(height) + "x" + std::to_string(width));
    }
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  Grid(int height, int width, std::vector<double> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (height < 1 || width < 1) {
      throw std::invalid_argument("Grid: dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(height) * width) {
      throw std::invalid_argument("Grid: data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(height) + "x" +
                                  std::to_string(width));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw std::invalid_argument("Grid: non-finite value");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * width_ + j]; }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * width_ + j];
  }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const Grid& o) const { return height_ == o.height_ && width_ == o.width_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }
  double mean() const { return sum() / static_cast<double>(data_.size()); }
  double min() const { return *std::min_element(data_.begin(), data_.end()); }
  double max() const { return *std::max_element(data_.begin(), data_.end()); }

  bool operator==(const Grid& o) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

inline std::string shape_string(const Grid& g) {
  return std::to_string(g.height()) + "x" + std::to_string(g.width());
}

inline void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a) +
                                " vs " + shape_string(b));
  }
}

template <typename F>
Grid map(const Grid& g, F&& f) {
  Grid out(g.height(), g.width());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = f(g[k]);
  return out;
}

template <typename F>
Grid zip(const Grid& a, const Grid& b, F&& f) {
  require_same_shape(a, b, "zip");
  Grid out(a.height(), a.width());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k], b[k]);
  return out;
}

inline Grid clip(const Grid& g, double lo, double hi) {
  return map(g, [=](double v) { return std::clamp(v, lo, hi); });
}

// C x H x W feature tensor.
inline bool is_binary(const Grid& y) {
  for (double v : y.values()) {
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width) {
    if (channels < 1 || height < 1 || width < 1) {
      throw std::invalid_argument("FeatureMap: dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int c, int i, int j) {
    return data_[c * plane() + static_cast<std::size_t>(i) * width_ + j];
  }
  double operator()(int c, int i, int j) const {
    return data_[c * plane() + static_cast<std::size_t>(i) * width_ + j];
  }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> channel(int c) { return {data_.data() + c * plane(), plane()}; }
  std::span<const double> channel(int c) const { return {data_.data() + c * plane(), plane()}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const FeatureMap& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  bool operator==(const FeatureMap& o) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Fixed 3x3 stencil, row-major, applied in cross-correlation form.
class Kernel3x3 {
 public:
  constexpr explicit Kernel3x3(std::array<double, 9> w) : w_(w) {}
  constexpr double operator()(int r, int c) const { return w_[r * 3 + c]; }
  constexpr const std::array<double, 9>& weights() const { return w_; }

 private:
  std::array<double, 9> w_;
};

namespace kernels {
inline constexpr Kernel3x3 sobel_x{{-1, 0, 1, -2, 0, 2, -1, 0, 1}};
inline constexpr Kernel3x3 sobel_y{{-1, -2, -1, 0, 0, 0, 1, 2, 1}};
inline constexpr Kernel3x3 prewitt_x{{-1, 0, 1, -1, 0, 1, -1, 0, 1}};
inline constexpr Kernel3x3 prewitt_y{{-1, -1, -1, 0, 0, 0, 1, 1, 1}};
inline constexpr Kernel3x3 laplacian{{0, 1, 0, 1, -4, 1, 0, 1, 0}};
}  // namespace kernels

namespace detail {
inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }
}  // namespace detail

// Same-size 3x3 correlation. Out-of-range taps read the nearest border cell,
// so constant fields map to k.sum() * c everywhere.
inline Grid conv2d_same(const Grid& g, const Kernel3x3& k) {
  const int h = g.height(), w = g.width();
  Grid out(h, w);
  for (int i = 0; i < h; ++i) {
    const int rows[3] = {detail::clamp_index(i - 1, h), i, detail::clamp_index(i + 1, h)};
    for (int j = 0; j < w; ++j) {
      const int cols[3] = {detail::clamp_index(j - 1, w), j, detail::clamp_index(j + 1, w)};
      double acc = 0.0;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) acc += k(a, b) * g(rows[a], cols[b]);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

// Adjoint of conv2d_same: scatters each output gradient back through the taps.
inline Grid conv2d_same_adjoint(const Grid& grad_out, const Kernel3x3& k) {
  const int h = grad_out.height(), w = grad_out.width();
  Grid grad_in(h, w);
  for (int i = 0; i < h; ++i) {
    const int rows[3] = {detail::clamp_index(i - 1, h), i, detail::clamp_index(i + 1, h)};
    for (int j = 0; j < w; ++j) {
      const int cols[3] = {detail::clamp_index(j - 1, w), j, detail::clamp_index(j + 1, w)};
      const double gv = grad_out(i, j);
      if (gv == 0.0) continue;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) grad_in(rows[a], cols[b]) += k(a, b) * gv;
      }
    }
  }
  return grad_in;
}

namespace detail {

// Sum over the k x k window centred at each cell, clipped to the grid.
inline Grid box_sum(const Grid& g, int k) {
  const int h = g.height(), w = g.width(), r = k / 2;
  std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  auto at = [&](int i, int j) -> double& {
    return integral[static_cast<std::size_t>(i) * (w + 1) + j];
  };
  for (int i = 0; i < h; ++i) {
    double row = 0.0;
    for (int j = 0; j < w; ++j) {
      row += g(i, j);
      at(i + 1, j + 1) = at(i, j + 1) + row;
    }
  }
  Grid out(h, w);
  for (int i = 0; i < h; ++i) {
    const int i0 = std::max(0, i - r), i1 = std::min(h, i + r + 1);
    for (int j = 0; j < w; ++j) {
      const int j0 = std::max(0, j - r), j1 = std::min(w, j + r + 1);
      out(i, j) = at(i1, j1) - at(i0, j1) - at(i1, j0) + at(i0, j0);
    }
  }
  return out;
}

inline Grid box_count(int h, int w, int k) {
  const int r = k / 2;
  Grid out(h, w);
  for (int i = 0; i < h; ++i) {
    const int ni = std::min(h, i + r + 1) - std::max(0, i - r);
    for (int j = 0; j < w; ++j) {
      const int nj = std::min(w, j + r + 1) - std::max(0, j - r);
      out(i, j) = static_cast<double>(ni * nj);
    }
  }
  return out;
}

inline void require_odd_window(int k) {
  if (k < 1 || k % 2 == 0) {
    throw std::invalid_argument("avg_pool_same: window must be odd and positive, got " +
                                std::to_string(k));
  }
}

}  // namespace detail

// Mean over the k x k window; the divisor counts only in-bounds cells.
inline Grid avg_pool_same(const Grid& g, int k) {
  detail::require_odd_window(k);
  Grid sums = detail::box_sum(g, k);
  const Grid counts = detail::box_count(g.height(), g.width(), k);
  for (std::size_t n = 0; n < sums.size(); ++n) sums[n] /= counts[n];
  return sums;
}

inline Grid avg_pool_same_adjoint(const Grid& grad_out, int k) {
  detail::require_odd_window(k);
  const Grid counts = detail::box_count(grad_out.height(), grad_out.width(), k);
  Grid scaled = grad_out;
  for (std::size_t n = 0; n < scaled.size(); ++n) scaled[n] /= counts[n];
  // The clipped window relation is symmetric, so the adjoint is another box sum.
  return detail::box_sum(scaled, k);
}

inline void require_positive_target(int h, int w, const char* what) {
  if (h < 1 || w < 1) {
    throw std::invalid_argument(std::string(what) + ": target size must be positive, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
}

inline Grid resize_nearest(const Grid& g, int out_h, int out_w) {
  require_positive_target(out_h, out_w, "resize_nearest");
  Grid out(out_h, out_w);
  for (int i = 0; i < out_h; ++i) {
    const int si = static_cast<int>(static_cast<long long>(i) * g.height() / out_h);
    for (int j = 0; j < out_w; ++j) {
      const int sj = static_cast<int>(static_cast<long long>(j) * g.width() / out_w);
      out(i, j) = g(si, sj);
    }
  }
  return out;
}

// Per-axis interpolation taps for half-pixel-centre (align_corners=false) bilinear
// resampling: out[i] = (1 - frac[i]) * in[lo[i]] + frac[i] * in[hi[i]].
struct BilinearTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;

  BilinearTaps(int in_size, int out_size) : lo(out_size), hi(out_size), frac(out_size) {
    const double scale = static_cast<double>(in_size) / out_size;
    for (int i = 0; i < out_size; ++i) {
      double src = (i + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      int i0 = static_cast<int>(std::floor(src));
      if (i0 > in_size - 1) i0 = in_size - 1;
      lo[i] = i0;
      hi[i] = std::min(i0 + 1, in_size - 1);
      frac[i] = src - i0;
      if (hi[i] == lo[i]) frac[i] = 0.0;
    }
  }
};

inline void bilinear_resize_plane(std::span<const double> in, int in_h, int in_w,
                                  std::span<double> out, int out_h, int out_w) {
  const BilinearTaps ty(in_h, out_h), tx(in_w, out_w);
  for (int i = 0; i < out_h; ++i) {
    const double fy = ty.frac[i];
    const double* r0 = in.data() + static_cast<std::size_t>(ty.lo[i]) * in_w;
    const double* r1 = in.data() + static_cast<std::size_t>(ty.hi[i]) * in_w;
    for (int j = 0; j < out_w; ++j) {
      const double fx = tx.frac[j];
      const int j0 = tx.lo[j], j1 = tx.hi[j];
      const double top = (1.0 - fx) * r0[j0] + fx * r0[j1];
      const double bot = (1.0 - fx) * r1[j0] + fx * r1[j1];
      out[static_cast<std::size_t>(i) * out_w + j] = (1.0 - fy) * top + fy * bot;
    }
  }
}

inline void bilinear_resize_plane_adjoint(std::span<const double> grad_out, int out_h,
                                          int out_w, std::span<double> grad_in, int in_h,
                                          int in_w) {
  const BilinearTaps ty(in_h, out_h), tx(in_w, out_w);
  for (int i = 0; i < out_h; ++i) {
    const double fy = ty.frac[i];
    double* r0 = grad_in.data() + static_cast<std::size_t>(ty.lo[i]) * in_w;
    double* r1 = grad_in.data() + static_cast<std::size_t>(ty.hi[i]) * in_w;
    for (int j = 0; j < out_w; ++j) {
      const double g = grad_out[static_cast<std::size_t>(i) * out_w + j];
      const double fx = tx.frac[j];
      const int j0 = tx.lo[j], j1 = tx.hi[j];
      r0[j0] += (1.0 - fy) * (1.0 - fx) * g;
      r0[j1] += (1.0 - fy) * fx * g;
      r1[j0] += fy * (1.0 - fx) * g;
      r1[j1] += fy * fx * g;
    }
  }
}

inline Grid resize_bilinear(const Grid& g, int out_h, int out_w) {
  require_positive_target(out_h, out_w, "resize_bilinear");
  Grid out(out_h, out_w);
  bilinear_resize_plane(g.values(), g.height(), g.width(), out.values(), out_h, out_w);
  return out;
}

inline Grid resize_bilinear_adjoint(const Grid& grad_out, int in_h, int in_w) {
  Grid grad_in(in_h, in_w);
  bilinear_resize_plane_adjoint(grad_out.values(), grad_out.height(), grad_out.width(),
                                grad_in.values(), in_h, in_w);
  return grad_in;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace bicamo
