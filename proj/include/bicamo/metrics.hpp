#pragma once

// COD evaluation metrics: S-measure, adaptive E-measure, weighted F-measure
// and MAE. Predictions are probability maps in [0,1] used as given; ground
// truth is binary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/grid.hpp"
#include "bicamo/parallel.hpp"

namespace bicamo {

inline constexpr double kMetricEps = 2.220446049250313e-16;

namespace detail {

inline void require_metric_inputs(const Grid& pred, const Grid& gt, const char* what) {
  require_same_shape(pred, gt, what);
  if (pred.size() == 0) throw std::invalid_argument(std::string(what) + ": empty input");
  if (pred.min() < 0.0 || pred.max() > 1.0) {
    throw std::invalid_argument(std::string(what) + ": prediction values must lie in [0,1]");
  }
  if (!is_binary(gt)) throw std::invalid_argument(std::string(what) + ": ground truth must be binary");
}

}  // namespace detail

inline double mae(const Grid& pred, const Grid& gt) {
  detail::require_metric_inputs(pred, gt, "mae");
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) acc += std::abs(pred[k] - gt[k]);
  return acc / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------- S-measure

namespace detail {

// 2m / (m^2 + 1 + sd + eps) over the values selected by `keep`, where the
// values are `pred` (foreground) or `1 - pred` (background).
inline double object_similarity(const Grid& pred, const Grid& gt, bool foreground) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if ((gt[k] == 1.0) != foreground) continue;
    const double v = foreground ? pred[k] : 1.0 - pred[k];
    sum += v;
    ++n;
  }
  const double mean = sum / static_cast<double>(n);
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if ((gt[k] == 1.0) != foreground) continue;
    const double v = (foreground ? pred[k] : 1.0 - pred[k]) - mean;
    sq += v * v;
  }
  const double sd = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sd + kMetricEps);
}

// SSIM-style similarity of one rectangular block [r0,r1) x [c0,c1).
inline double block_ssim(const Grid& pred, const Grid& gt, int r0, int r1, int c0, int c1) {
  const double n = static_cast<double>(r1 - r0) * (c1 - c0);
  double sp = 0.0, sg = 0.0;
  for (int i = r0; i < r1; ++i) {
    for (int j = c0; j < c1; ++j) {
      sp += pred(i, j);
      sg += gt(i, j);
    }
  }
  const double mp = sp / n, mg = sg / n;
  double vp = 0.0, vg = 0.0, cov = 0.0;
  for (int i = r0; i < r1; ++i) {
    for (int j = c0; j < c1; ++j) {
      const double a = pred(i, j) - mp, b = gt(i, j) - mg;
      vp += a * a;
      vg += b * b;
      cov += a * b;
    }
  }
  vp /= n - 1.0 + kMetricEps;
  vg /= n - 1.0 + kMetricEps;
  cov /= n - 1.0 + kMetricEps;
  const double alpha = 4.0 * mp * mg * cov;
  const double beta = (mp * mp + mg * mg) * (vp + vg);
  if (alpha != 0.0) return alpha / (beta + kMetricEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

// 1-based split point (column, row) at the rounded foreground centroid.
inline std::array<int, 2> split_point(const Grid& gt) {
  const int h = gt.height(), w = gt.width();
  double area = 0.0, sc = 0.0, sr = 0.0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (gt(i, j) != 1.0) continue;
      area += 1.0;
      sc += j;
      sr += i;
    }
  }
  if (area == 0.0) return {static_cast<int>(std::round(w / 2.0)), static_cast<int>(std::round(h / 2.0))};
  return {static_cast<int>(std::round(sc / area)) + 1, static_cast<int>(std::round(sr / area)) + 1};
}

inline double region_similarity(const Grid& pred, const Grid& gt) {
  const int h = gt.height(), w = gt.width();
  const auto [x, y] = split_point(gt);
  const double area = static_cast<double>(h) * w;
  const std::array<std::array<int, 4>, 4> blocks = {{
      {0, y, 0, x}, {0, y, x, w}, {y, h, 0, x}, {y, h, x, w}}};
  double score = 0.0;
  for (const auto& b : blocks) {
    if (b[1] <= b[0] || b[3] <= b[2]) continue;  // empty quadrant carries zero weight
    const double weight = static_cast<double>(b[1] - b[0]) * (b[3] - b[2]) / area;
    score += weight * block_ssim(pred, gt, b[0], b[1], b[2], b[3]);
  }
  return score;
}

}  // namespace detail

inline constexpr double kStructureAlpha = 0.5;

inline double s_measure(const Grid& pred, const Grid& gt) {
  detail::require_metric_inputs(pred, gt, "s_measure");
  const double fg = gt.mean();
  if (fg == 0.0) return 1.0 - pred.mean();
  if (fg == 1.0) return pred.mean();
  const double object = fg * detail::object_similarity(pred, gt, true) +
                        (1.0 - fg) * detail::object_similarity(pred, gt, false);
  const double region = detail::region_similarity(pred, gt);
  return std::max(0.0, kStructureAlpha * object + (1.0 - kStructureAlpha) * region);
}

// ---------------------------------------------------------------- E-measure

// Adaptive threshold min(2 mean(pred), 1); the enhanced-alignment sum is
// evaluated over the four (pred, gt) value combinations and divided by N.
inline double e_measure(const Grid& pred, const Grid& gt) {
  detail::require_metric_inputs(pred, gt, "e_measure");
  const double n = static_cast<double>(pred.size());
  const double th = std::min(2.0 * pred.mean(), 1.0);
  double tp = 0.0, fp = 0.0, fn = 0.0, tn = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const bool p = pred[k] >= th, g = gt[k] == 1.0;
    (p ? (g ? tp : fp) : (g ? fn : tn)) += 1.0;
  }
  const double pred_fg = tp + fp, gt_fg = tp + fn;
  double enhanced = 0.0;
  if (gt_fg == 0.0) {
    enhanced = n - pred_fg;
  } else if (gt_fg == n) {
    enhanced = pred_fg;
  } else {
    const double mp = pred_fg / n, mg = gt_fg / n;
    auto part = [](double a, double b) {
      const double align = 2.0 * a * b / (a * a + b * b + kMetricEps);
      return (align + 1.0) * (align + 1.0) / 4.0;
    };
    enhanced = tp * part(1.0 - mp, 1.0 - mg) + fp * part(1.0 - mp, -mg) +
               fn * part(-mp, 1.0 - mg) + tn * part(-mp, -mg);
  }
  return enhanced / n;
}

// ------------------------------------------------------ distance transform

struct DistanceTransform {
  Grid distance;                  // Euclidean distance to the nearest foreground pixel
  std::vector<int> nearest_row;   // coordinates of that pixel; ties go to the smallest
  std::vector<int> nearest_col;   // column, then the smallest row
};

// Exact two-pass lower-envelope transform over integer squared distances.
inline DistanceTransform distance_to_foreground(const Grid& mask) {
  const int h = mask.height(), w = mask.width();
  const std::size_t n = mask.size();
  constexpr std::int64_t kNone = -1;

  // Column pass: nearest foreground row in the same column, upper one on ties.
  std::vector<std::int64_t> col_d(n, kNone), col_row(n, kNone);
  for (int j = 0; j < w; ++j) {
    std::int64_t last = kNone;
    for (int i = 0; i < h; ++i) {
      if (mask(i, j) == 1.0) last = i;
      if (last != kNone) {
        col_d[static_cast<std::size_t>(i) * w + j] = i - last;
        col_row[static_cast<std::size_t>(i) * w + j] = last;
      }
    }
    last = kNone;
    for (int i = h - 1; i >= 0; --i) {
      if (mask(i, j) == 1.0) last = i;
      if (last == kNone) continue;
      const std::size_t k = static_cast<std::size_t>(i) * w + j;
      if (col_d[k] == kNone || last - i < col_d[k]) {
        col_d[k] = last - i;
        col_row[k] = last;
      }
    }
  }

  DistanceTransform out{Grid(h, w, std::numeric_limits<double>::infinity()),
                        std::vector<int>(n, -1), std::vector<int>(n, -1)};
  std::vector<std::int64_t> v(w), f(w);
  std::vector<std::int64_t> znum(w + 1), zden(w + 1);  // breakpoints as fractions, den > 0
  for (int i = 0; i < h; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * w;
    // f(q) = squared column distance; columns without foreground are skipped.
    int count = 0;
    for (int q = 0; q < w; ++q) {
      if (col_d[row + q] == kNone) continue;
      const std::int64_t fq = col_d[row + q] * col_d[row + q];
      // intersection of parabolas at q and v[k]: s = (fq + q^2 - fv - v^2) / (2(q - v))
      while (count > 0) {
        const std::int64_t vk = v[count - 1];
        const std::int64_t num = fq + static_cast<std::int64_t>(q) * q - f[count - 1] - vk * vk;
        const std::int64_t den = 2 * (q - vk);
        if (count > 1 && num * zden[count - 1] <= znum[count - 1] * den) {
          --count;
          continue;
        }
        znum[count] = num;
        zden[count] = den;
        break;
      }
      v[count] = q;
      f[count] = fq;
      ++count;
    }
    if (count == 0) continue;
    int k = 0;
    for (int q = 0; q < w; ++q) {
      // advance while the next breakpoint lies strictly left of q
      while (k + 1 < count && znum[k + 1] < static_cast<std::int64_t>(q) * zden[k + 1]) ++k;
      const std::int64_t dq = q - v[k];
      const std::size_t idx = row + q;
      out.distance[idx] = std::sqrt(static_cast<double>(dq * dq + f[k]));
      out.nearest_col[idx] = static_cast<int>(v[k]);
      out.nearest_row[idx] = static_cast<int>(col_row[row + v[k]]);
    }
  }
  return out;
}

// --------------------------------------------------------- weighted F-beta

// 7x7 Gaussian with sigma 5, normalised; as a separable 1-D factor.
inline std::array<double, 7> dependency_kernel_1d() {
  std::array<double, 7> k{};
  double sum = 0.0;
  for (int t = -3; t <= 3; ++t) {
    k[t + 3] = std::exp(-(t * t) / (2.0 * 25.0));
    sum += k[t + 3];
  }
  for (double& v : k) v /= sum;
  return k;
}

inline constexpr double kWeightedBetaSq = 1.0;

inline double weighted_fbeta(const Grid& pred, const Grid& gt) {
  detail::require_metric_inputs(pred, gt, "weighted_fbeta");
  const int h = gt.height(), w = gt.width();
  if (gt.max() == 0.0) return 0.0;
  const DistanceTransform dt = distance_to_foreground(gt);

  Grid err(h, w), spread(h, w);
  for (std::size_t k = 0; k < err.size(); ++k) err[k] = std::abs(pred[k] - gt[k]);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * w + j;
      spread[k] = gt[k] == 1.0 ? err[k] : err(dt.nearest_row[k], dt.nearest_col[k]);
    }
  }

  // zero-padded separable filtering of the spread error
  const auto g = dependency_kernel_1d();
  Grid tmp(h, w, 0.0), ea(h, w, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -3; t <= 3; ++t) {
        if (j + t >= 0 && j + t < w) acc += g[t + 3] * spread(i, j + t);
      }
      tmp(i, j) = acc;
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -3; t <= 3; ++t) {
        if (i + t >= 0 && i + t < h) acc += g[t + 3] * tmp(i + t, j);
      }
      ea(i, j) = acc;
    }
  }

  const double decay = std::log(0.5) / 5.0;
  double fg_count = 0.0, fg_err = 0.0, bg_err = 0.0;
  for (std::size_t k = 0; k < err.size(); ++k) {
    if (gt[k] == 1.0) {
      fg_count += 1.0;
      fg_err += std::min(err[k], ea[k]);
    } else {
      bg_err += err[k] * (2.0 - std::exp(decay * dt.distance[k]));
    }
  }
  const double tpw = fg_count - fg_err;
  const double recall = 1.0 - fg_err / fg_count;
  const double precision = tpw / (tpw + bg_err + kMetricEps);
  return (1.0 + kWeightedBetaSq) * recall * precision /
         (recall + kWeightedBetaSq * precision + kMetricEps);
}

// ------------------------------------------------------------------ reports

struct MetricsReport {
  double s_measure = 0.0;
  double e_measure = 0.0;
  double weighted_fbeta = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

inline MetricsReport evaluate_one(const Grid& pred, const Grid& gt) {
  return {s_measure(pred, gt), e_measure(pred, gt), weighted_fbeta(pred, gt), mae(pred, gt), 1};
}

// Sums in index order, so the result does not depend on how reports were produced.
inline MetricsReport average_reports(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("evaluate: empty image set");
  MetricsReport r;
  for (const MetricsReport& one : reports) {
    r.s_measure += one.s_measure;
    r.e_measure += one.e_measure;
    r.weighted_fbeta += one.weighted_fbeta;
    r.mae += one.mae;
  }
  const double n = static_cast<double>(reports.size());
  r.s_measure /= n;
  r.e_measure /= n;
  r.weighted_fbeta /= n;
  r.mae /= n;
  r.count = reports.size();
  return r;
}

inline MetricsReport evaluate(const std::vector<Grid>& preds, const std::vector<Grid>& gts, int workers = 1) {
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(preds.size()) + " predictions but " +
                                std::to_string(gts.size()) + " ground-truth masks");
  }
  if (preds.empty()) throw std::invalid_argument("evaluate: empty image set");
  std::vector<MetricsReport> each(preds.size());
  parallel_for(preds.size(), workers, [&](std::size_t k) { each[k] = evaluate_one(preds[k], gts[k]); });
  return average_reports(each);
}

}  // namespace bicamo
