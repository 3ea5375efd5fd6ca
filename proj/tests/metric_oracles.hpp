#pragma once

// Naive double-loop references for the evaluation metrics. They share only
// the definitions with the library, never its code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bicamo/grid.hpp"

namespace oracle {

using bicamo::Grid;

inline constexpr double kEps = 2.220446049250313e-16;

inline double mae(const Grid& p, const Grid& g) {
  double s = 0.0;
  for (int i = 0; i < p.height(); ++i)
    for (int j = 0; j < p.width(); ++j) s += std::abs(p(i, j) - g(i, j));
  return s / (p.height() * p.width());
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

inline double ssim_block(const std::vector<double>& p, const std::vector<double>& g) {
  const double n = p.size();
  const double mp = mean_of(p), mg = mean_of(g);
  double vp = 0, vg = 0, c = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    vp += (p[k] - mp) * (p[k] - mp);
    vg += (g[k] - mg) * (g[k] - mg);
    c += (p[k] - mp) * (g[k] - mg);
  }
  vp /= (n - 1 + kEps);
  vg /= (n - 1 + kEps);
  c /= (n - 1 + kEps);
  const double a = 4 * mp * mg * c, b = (mp * mp + mg * mg) * (vp + vg);
  if (a != 0) return a / (b + kEps);
  return b == 0 ? 1.0 : 0.0;
}

inline double s_measure(const Grid& p, const Grid& g) {
  const int h = g.height(), w = g.width();
  std::vector<double> fgv, bgv;
  double gsum = 0, psum = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      gsum += g(i, j);
      psum += p(i, j);
      if (g(i, j) == 1.0) {
        fgv.push_back(p(i, j));
      } else {
        bgv.push_back(1.0 - p(i, j));
      }
    }
  const double u = gsum / (h * w);
  if (fgv.empty()) return 1.0 - psum / (h * w);
  if (bgv.empty()) return psum / (h * w);
  auto obj = [](const std::vector<double>& v) {
    const double m = mean_of(v);
    return 2 * m / (m * m + 1 + sample_std(v) + kEps);
  };
  const double object = u * obj(fgv) + (1 - u) * obj(bgv);

  // centroid, 1-based, rounded half away from zero
  double cr = 0, cc = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (g(i, j) == 1.0) {
        cr += i;
        cc += j;
      }
  const int x = static_cast<int>(std::round(cc / fgv.size())) + 1;
  const int y = static_cast<int>(std::round(cr / fgv.size())) + 1;
  double region = 0;
  const int rows[2][2] = {{0, y}, {y, h}}, cols[2][2] = {{0, x}, {x, w}};
  for (auto& r : rows)
    for (auto& c : cols) {
      std::vector<double> pb, gb;
      for (int i = r[0]; i < r[1]; ++i)
        for (int j = c[0]; j < c[1]; ++j) {
          pb.push_back(p(i, j));
          gb.push_back(g(i, j));
        }
      if (pb.empty()) continue;
      region += static_cast<double>(pb.size()) / (h * w) * ssim_block(pb, gb);
    }
  return std::max(0.0, 0.5 * object + 0.5 * region);
}

// Pixel-wise enhanced alignment, no counting shortcut.
inline double e_measure(const Grid& p, const Grid& g) {
  const int h = g.height(), w = g.width();
  const double n = h * w;
  double pm = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) pm += p(i, j) / n;
  const double th = std::min(2 * pm, 1.0);
  Grid bp(h, w);
  double bmean = 0, gmean = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      bp(i, j) = p(i, j) >= th ? 1.0 : 0.0;
      bmean += bp(i, j) / n;
      gmean += g(i, j) / n;
    }
  double s = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double e;
      if (gmean == 0) {
        e = 1.0 - bp(i, j);
      } else if (gmean == 1) {
        e = bp(i, j);
      } else {
        const double a = bp(i, j) - bmean, b = g(i, j) - gmean;
        const double phi = 2 * a * b / (a * a + b * b + kEps);
        e = (phi + 1) * (phi + 1) / 4;
      }
      s += e;
    }
  return s / n;
}

struct Nearest {
  double dist;
  int row, col;
};

// Exhaustive nearest foreground pixel; ties go to the smallest column, then row.
inline Nearest nearest_foreground(const Grid& g, int i, int j) {
  Nearest best{std::numeric_limits<double>::infinity(), -1, -1};
  long best_sq = -1;
  for (int c = 0; c < g.width(); ++c)
    for (int r = 0; r < g.height(); ++r) {
      if (g(r, c) != 1.0) continue;
      const long d = static_cast<long>(r - i) * (r - i) + static_cast<long>(c - j) * (c - j);
      if (best_sq < 0 || d < best_sq) {
        best_sq = d;
        best = {std::sqrt(static_cast<double>(d)), r, c};
      }
    }
  return best;
}

inline double weighted_fbeta(const Grid& p, const Grid& g) {
  const int h = g.height(), w = g.width();
  bool any = false;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) any = any || g(i, j) == 1.0;
  if (!any) return 0.0;

  Grid E(h, w), Et(h, w), D(h, w, 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) E(i, j) = std::abs(p(i, j) - g(i, j));
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      if (g(i, j) == 1.0) {
        Et(i, j) = E(i, j);
      } else {
        const Nearest n = nearest_foreground(g, i, j);
        Et(i, j) = E(n.row, n.col);
        D(i, j) = n.dist;
      }
    }
  // full 2-D 7x7 Gaussian, sigma 5, zero padding
  double K[7][7], ks = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b) {
      K[a][b] = std::exp(-((a - 3) * (a - 3) + (b - 3) * (b - 3)) / 50.0);
      ks += K[a][b];
    }
  Grid EA(h, w, 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0;
      for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b) {
          const int r = i + a - 3, c = j + b - 3;
          if (r >= 0 && r < h && c >= 0 && c < w) acc += K[a][b] / ks * Et(r, c);
        }
      EA(i, j) = acc;
    }
  double tp = 0, fpw = 0, fg_ew = 0, fg_n = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const bool fg = g(i, j) == 1.0;
      double m = E(i, j);
      if (fg && EA(i, j) < E(i, j)) m = EA(i, j);
      const double B = fg ? 1.0 : 2.0 - std::exp(std::log(0.5) / 5.0 * D(i, j));
      const double ew = m * B;
      if (fg) {
        fg_ew += ew;
        fg_n += 1;
      } else {
        fpw += ew;
      }
    }
  tp = fg_n - fg_ew;
  const double R = 1 - fg_ew / fg_n;
  const double P = tp / (tp + fpw + kEps);
  return 2 * R * P / (R + P + kEps);
}

}  // namespace oracle
