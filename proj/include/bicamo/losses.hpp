#pragma once

// Multi-scale boundary-informed training objective. Every term is a scalar Var
// differentiable with respect to the logit map z; masks, weight maps and edge
// targets enter the graph as constants.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bicamo/edge_prior.hpp"
#include "bicamo/grid.hpp"
#include "bicamo/tape.hpp"

namespace bicamo {

struct ScaleWeight {
  double scale;
  double weight;
  bool operator==(const ScaleWeight&) const = default;
};

struct LossCoefficients {
  double lambda_gt_edge = 0.01;
  double lambda_ual = 0.01;
  double lambda_rgb = 0.005;
  double gamma = 2.0;
  double alpha = 5.0;
  int pool_k = 31;
  double tau = 0.25;
  std::vector<ScaleWeight> scales = {{1.0, 1.0}, {0.5, 0.25}, {0.25, 0.125}};

  void validate() const {
    if (lambda_gt_edge < 0.0 || lambda_ual < 0.0 || lambda_rgb < 0.0) {
      throw std::invalid_argument("LossCoefficients: lambdas must be nonnegative");
    }
    if (pool_k < 1 || pool_k % 2 == 0) {
      throw std::invalid_argument("LossCoefficients: pool_k must be odd and positive");
    }
    if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("LossCoefficients: tau must lie in [0,1)");
    if (scales.empty()) throw std::invalid_argument("LossCoefficients: scales must be nonempty");
    for (const auto& s : scales) {
      if (!(s.scale > 0.0 && s.scale <= 1.0)) {
        throw std::invalid_argument("LossCoefficients: every scale must lie in (0,1]");
      }
      if (!(s.weight > 0.0)) throw std::invalid_argument("LossCoefficients: scale weights must be > 0");
    }
  }

  bool operator==(const LossCoefficients&) const = default;
};

// The six rows of the loss ablation lattice.
enum class LossPreset { SingleScaleFs, MultiScaleFs, GtEdge, Ual, GtEdgeUal, Full };

inline constexpr LossPreset kLossPresets[] = {LossPreset::SingleScaleFs, LossPreset::MultiScaleFs,
                                              LossPreset::GtEdge,        LossPreset::Ual,
                                              LossPreset::GtEdgeUal,     LossPreset::Full};

inline std::string preset_tag(LossPreset p) {
  switch (p) {
    case LossPreset::SingleScaleFs: return "fs_single_scale";
    case LossPreset::MultiScaleFs: return "fs_multi_scale";
    case LossPreset::GtEdge: return "fs+gt_edge";
    case LossPreset::Ual: return "fs+ual";
    case LossPreset::GtEdgeUal: return "fs+gt_edge+ual";
    case LossPreset::Full: return "fs+gt_edge+ual+rgb";
  }
  return "unknown";
}

// Derives a lattice row from the full coefficient set by zeroing lambdas and,
// for the single-scale row, dropping the coarse scales.
inline LossCoefficients apply_preset(LossCoefficients full, LossPreset p) {
  const bool gt = p == LossPreset::GtEdge || p == LossPreset::GtEdgeUal || p == LossPreset::Full;
  const bool ual = p == LossPreset::Ual || p == LossPreset::GtEdgeUal || p == LossPreset::Full;
  const bool rgb = p == LossPreset::Full;
  if (!gt) full.lambda_gt_edge = 0.0;
  if (!ual) full.lambda_ual = 0.0;
  if (!rgb) full.lambda_rgb = 0.0;
  if (p == LossPreset::SingleScaleFs) full.scales = {{1.0, 1.0}};
  return full;
}

// w = 1 + alpha * |AvgPool_k(y) - y|.
inline Grid boundary_weight_map(const Grid& y, double alpha, int k) {
  if (!is_binary(y)) throw std::invalid_argument("boundary_weight_map: mask must be binary");
  const Grid pooled = avg_pool_same(y, k);
  return zip(pooled, y, [alpha](double p, double v) { return 1.0 + alpha * std::abs(p - v); });
}

inline constexpr double kLossEpsilon = 1e-6;
inline constexpr double kProbClamp = 1e-7;

namespace detail {

inline void require_match(const Var& z, const Grid& y, const char* what) {
  if (!z.value().same_shape(y)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                shape_string(z.value()) + " vs " + shape_string(y));
  }
}

// Stable per-pixel BCE from logits: max(z,0) - z*y + log(1 + e^{-|z|}),
// with the last term written as -log(sigmoid(|z|)).
inline Var bce_with_logits(const Var& z, const Var& y) {
  const Var az = ops::abs(z);
  return (z + az) * 0.5 - z * y - ops::log(ops::sigmoid(az));
}

inline Var focal_bce_from(const Var& z, const Var& prob, const Grid& y, const Grid& w,
                          double gamma) {
  Tape& t = *z.tape();
  const Var yv = t.constant(y);
  const Var wv = t.constant(w);
  const Var pc = ops::clamp(prob, kProbClamp, 1.0 - kProbClamp);
  // p_t = p*y + (1-p)*(1-y) = (1-y) + p*(2y-1)
  const Var pt = t.constant(map(y, [](double v) { return 1.0 - v; })) +
                 pc * t.constant(map(y, [](double v) { return 2.0 * v - 1.0; }));
  const Var modulation = ops::pow(1.0 - pt, gamma);
  const Var num = ops::sum(wv * modulation * bce_with_logits(z, yv));
  return num * (1.0 / (w.sum() + kLossEpsilon));
}

inline Var weighted_iou_from(const Var& prob, const Grid& y, const Grid& w) {
  Tape& t = *prob.tape();
  const Var wv = t.constant(w);
  const Var wy = t.constant(zip(w, y, [](double a, double b) { return a * b; }));
  const Var inter = ops::sum(prob * wy);
  const Var union_ = ops::sum(prob * wv) + (wy.value().sum()) - inter;
  return 1.0 - (inter + 1.0) / (union_ + 1.0);
}

inline Var edge_l1_from(const Var& prob_edges, const Grid& target) {
  Tape& t = *prob_edges.tape();
  return ops::mean(ops::abs(prob_edges - t.constant(target)));
}

inline Var uncertainty_from(const Var& prob) {
  return ops::mean(1.0 - ops::pow(prob * 2.0 - 1.0, 2.0));
}

}  // namespace detail

inline Var focal_bce(const Var& z, const Grid& y, const Grid& w, double gamma) {
  detail::require_match(z, y, "focal_bce");
  require_same_shape(y, w, "focal_bce");
  return detail::focal_bce_from(z, ops::sigmoid(z), y, w, gamma);
}

inline Var weighted_iou(const Var& z, const Grid& y, const Grid& w) {
  detail::require_match(z, y, "weighted_iou");
  require_same_shape(y, w, "weighted_iou");
  return detail::weighted_iou_from(ops::sigmoid(z), y, w);
}

inline Var focal_structure(const Var& z, const Grid& y, double gamma = 2.0, double alpha = 5.0,
                           int k = 31) {
  detail::require_match(z, y, "focal_structure");
  const Grid w = boundary_weight_map(y, alpha, k);
  const Var prob = ops::sigmoid(z);
  return detail::focal_bce_from(z, prob, y, w, gamma) + detail::weighted_iou_from(prob, y, w);
}

inline Var gt_edge_loss(const Var& z, const Grid& y) {
  detail::require_match(z, y, "gt_edge_loss");
  return detail::edge_l1_from(sobel_magnitude(ops::sigmoid(z)), sobel_magnitude(y));
}

// gt_edge_loss on probabilities already in [0,1], for evaluating sampled masks.
inline double gt_edge_on_probabilities(const Grid& p, const Grid& y) {
  require_same_shape(p, y, "gt_edge_on_probabilities");
  const Grid sp = sobel_magnitude(p), sy = sobel_magnitude(y);
  double acc = 0.0;
  for (std::size_t k = 0; k < sp.size(); ++k) acc += std::abs(sp[k] - sy[k]);
  return acc / static_cast<double>(sp.size());
}

inline Var uncertainty_loss(const Var& z) { return detail::uncertainty_from(ops::sigmoid(z)); }

inline Var rgb_edge_loss(const Var& z, const Grid& e, double tau) {
  detail::require_match(z, e, "rgb_edge_loss");
  return detail::edge_l1_from(sobel_magnitude(ops::sigmoid(z)), sanitize_edges(e, tau));
}

struct ScaleTerms {
  double scale = 1.0;
  double weight = 1.0;
  int height = 0;
  int width = 0;
  double focal_bce = 0.0;
  double weighted_iou = 0.0;
  double fs = 0.0;
  double gt_edge = 0.0;
  double ual = 0.0;
  double rgb = 0.0;
  double total = 0.0;  // fs + lambda-weighted boundary terms at this scale
};

struct LossBreakdown {
  std::vector<ScaleTerms> scales;
  double total = 0.0;

  // Aggregate rebuilt from the recorded per-scale parts under `c`'s lambdas.
  double recombine(const LossCoefficients& c) const {
    double acc = 0.0, norm = 0.0;
    for (const auto& s : scales) norm += s.weight;
    for (const auto& s : scales) {
      const double at_scale =
          s.fs + c.lambda_gt_edge * s.gt_edge + c.lambda_ual * s.ual + c.lambda_rgb * s.rgb;
      acc += (s.weight / norm) * at_scale;
    }
    return acc;
  }

  // Sum-of-weights normalised mean of one per-scale field.
  template <typename Field>
  double weighted_mean(Field field) const {
    double acc = 0.0, norm = 0.0;
    for (const auto& s : scales) {
      acc += s.weight * field(s);
      norm += s.weight;
    }
    return acc / norm;
  }
};

struct LossGraph {
  Var total;
  LossBreakdown breakdown;
};

inline int scaled_extent(int n, double s) {
  return std::max(1, static_cast<int>(std::floor(s * n)));
}

// Evaluates every term at each configured scale and combines them as
//   L = sum_s w_s [fs + l_gt*gt + l_ual*ual + l_rgb*rgb]_s / sum_s w_s.
inline LossGraph multiscale_total(const Var& z, const Grid& y, const Grid& e,
                                  const LossCoefficients& c) {
  c.validate();
  detail::require_match(z, y, "multiscale_total");
  require_same_shape(y, e, "multiscale_total");
  double norm = 0.0;
  for (const auto& s : c.scales) norm += s.weight;

  LossGraph out;
  Var total;
  for (const auto& sw : c.scales) {
    const int h = scaled_extent(y.height(), sw.scale);
    const int w = scaled_extent(y.width(), sw.scale);
    const bool full = h == y.height() && w == y.width();

    const Var zs = full ? z : ops::resize_bilinear(z, h, w);
    const Grid ys = full ? y
                         : map(resize_bilinear(y, h, w),
                               [](double v) { return v >= 0.5 ? 1.0 : 0.0; });
    const Grid es = full ? e : resize_bilinear(e, h, w);

    const Grid weights = boundary_weight_map(ys, c.alpha, c.pool_k);
    const Var prob = ops::sigmoid(zs);
    const Var prob_edges = sobel_magnitude(prob);

    const Var fbce = detail::focal_bce_from(zs, prob, ys, weights, c.gamma);
    const Var wiou = detail::weighted_iou_from(prob, ys, weights);
    const Var fs = fbce + wiou;
    const Var gt = detail::edge_l1_from(prob_edges, sobel_magnitude(ys));
    const Var ual = detail::uncertainty_from(prob);
    const Var rgb = detail::edge_l1_from(prob_edges, sanitize_edges(es, c.tau));

    const Var at_scale = fs + gt * c.lambda_gt_edge + ual * c.lambda_ual + rgb * c.lambda_rgb;
    const Var weighted = at_scale * (sw.weight / norm);
    total = total.valid() ? total + weighted : weighted;

    ScaleTerms terms;
    terms.scale = sw.scale;
    terms.weight = sw.weight;
    terms.height = h;
    terms.width = w;
    terms.focal_bce = fbce.scalar();
    terms.weighted_iou = wiou.scalar();
    terms.fs = fs.scalar();
    terms.gt_edge = gt.scalar();
    terms.ual = ual.scalar();
    terms.rgb = rgb.scalar();
    terms.total = at_scale.scalar();
    out.breakdown.scales.push_back(terms);
  }
  out.total = total;
  out.breakdown.total = total.scalar();
  return out;
}

// Value-only evaluation on a private tape.
inline LossBreakdown evaluate_losses(const Grid& z, const Grid& y, const Grid& e,
                                     const LossCoefficients& c) {
  Tape t;
  return multiscale_total(t.leaf(z), y, e, c).breakdown;
}

// Loss breakdown plus dL/dz.
inline std::pair<LossBreakdown, Grid> loss_and_gradient(const Grid& z, const Grid& y,
                                                        const Grid& e,
                                                        const LossCoefficients& c) {
  Tape t;
  const Var zv = t.leaf(z);
  LossGraph g = multiscale_total(zv, y, e, c);
  Gradients grads = t.backward(g.total);
  return {std::move(g.breakdown), grads[zv]};
}

}  // namespace bicamo
