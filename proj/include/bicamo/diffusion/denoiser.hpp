#pragma once

// Desk-scale hierarchical conditional denoiser.
//
//   input   [x_t, gray(I)]                       2 x H x W
//   stage 1 conv3x3/2 + bias + temb, SiLU      -> F1 (injection site)
//   stage s conv3x3/2 + bias + temb, SiLU      -> F_s  (s = 2..S)
//   decoder upsample F_s, conv1x1, + F_{s-1}, SiLU   (s = S..2)
//   head    upsample to H x W, concat [x_t, gray], conv3x3 -> logits
//
// The timestep enters as a sinusoidal embedding projected to a per-channel
// bias for every encoder stage. Parameters live in one flat vector; the layout
// depends only on DenoiserConfig.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/edge_prior.hpp"
#include "bicamo/grid.hpp"
#include "bicamo/injection.hpp"

namespace bicamo {

struct DenoiserConfig {
  std::vector<int> widths = {16, 32, 64};
  int time_embed_dim = 64;

  void validate() const {
    if (widths.empty() || widths.size() > 4) {
      throw std::invalid_argument("DenoiserConfig: between 1 and 4 stages are supported");
    }
    for (int w : widths) {
      if (w < 1) throw std::invalid_argument("DenoiserConfig: stage widths must be positive");
    }
    if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
      throw std::invalid_argument("DenoiserConfig: time_embed_dim must be even and >= 2");
    }
  }
  bool operator==(const DenoiserConfig&) const = default;
};

namespace layers {

inline int strided_extent(int n, int stride) { return (n - 1) / stride + 1; }

// k x k convolution with zero padding k/2 and the given stride.
// weights: [cout][cin][k][k]
inline FeatureMap conv_forward(const FeatureMap& in, std::span<const double> weights,
                               std::span<const double> bias, int cout, int k, int stride) {
  const int cin = in.channels(), h = in.height(), w = in.width();
  const int oh = strided_extent(h, stride), ow = strided_extent(w, stride), pad = k / 2;
  FeatureMap out(cout, oh, ow);
  for (int co = 0; co < cout; ++co) {
    auto dst = out.channel(co);
    for (auto& v : dst) v = bias[co];
    for (int ci = 0; ci < cin; ++ci) {
      auto src = in.channel(ci);
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
          const double wt = weights[((static_cast<std::size_t>(co) * cin + ci) * k + a) * k + b];
          // valid output columns: 0 <= stride*j + b - pad < w
          int j0 = 0;
          while (j0 < ow && stride * j0 + b - pad < 0) ++j0;
          int j1 = ow;
          while (j1 > j0 && stride * (j1 - 1) + b - pad >= w) --j1;
          for (int i = 0; i < oh; ++i) {
            const int r = stride * i + a - pad;
            if (r < 0 || r >= h) continue;
            const double* srow = src.data() + static_cast<std::size_t>(r) * w;
            double* drow = dst.data() + static_cast<std::size_t>(i) * ow;
            for (int j = j0; j < j1; ++j) drow[j] += wt * srow[stride * j + b - pad];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates weight/bias gradients and returns the input gradient.
inline FeatureMap conv_backward(const FeatureMap& in, const FeatureMap& grad_out,
                                std::span<const double> weights, std::span<double> grad_w,
                                std::span<double> grad_b, int k, int stride,
                                bool need_input_grad = true) {
  const int cin = in.channels(), h = in.height(), w = in.width();
  const int cout = grad_out.channels(), oh = grad_out.height(), ow = grad_out.width();
  const int pad = k / 2;
  FeatureMap grad_in(cin, h, w);
  for (int co = 0; co < cout; ++co) {
    auto g = grad_out.channel(co);
    double gb = 0.0;
    for (double v : g) gb += v;
    grad_b[co] += gb;
    for (int ci = 0; ci < cin; ++ci) {
      auto src = in.channel(ci);
      auto gin = grad_in.channel(ci);
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
          const std::size_t widx = ((static_cast<std::size_t>(co) * cin + ci) * k + a) * k + b;
          const double wt = weights[widx];
          int j0 = 0;
          while (j0 < ow && stride * j0 + b - pad < 0) ++j0;
          int j1 = ow;
          while (j1 > j0 && stride * (j1 - 1) + b - pad >= w) --j1;
          double gw = 0.0;
          for (int i = 0; i < oh; ++i) {
            const int r = stride * i + a - pad;
            if (r < 0 || r >= h) continue;
            const double* srow = src.data() + static_cast<std::size_t>(r) * w;
            double* girow = gin.data() + static_cast<std::size_t>(r) * w;
            const double* grow = g.data() + static_cast<std::size_t>(i) * ow;
            for (int j = j0; j < j1; ++j) gw += grow[j] * srow[stride * j + b - pad];
            if (need_input_grad) {
              for (int j = j0; j < j1; ++j) girow[stride * j + b - pad] += wt * grow[j];
            }
          }
          grad_w[widx] += gw;
        }
      }
    }
  }
  return grad_in;
}

inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

inline FeatureMap silu_forward(const FeatureMap& pre) {
  FeatureMap out = pre;
  for (auto& v : out.values()) v = silu(v);
  return out;
}

inline FeatureMap silu_backward(const FeatureMap& pre, const FeatureMap& grad_out) {
  FeatureMap g = grad_out;
  for (std::size_t k = 0; k < g.size(); ++k) g[k] *= silu_grad(pre[k]);
  return g;
}

inline FeatureMap upsample(const FeatureMap& in, int h, int w) {
  FeatureMap out(in.channels(), h, w);
  for (int c = 0; c < in.channels(); ++c) {
    bilinear_resize_plane(in.channel(c), in.height(), in.width(), out.channel(c), h, w);
  }
  return out;
}

inline FeatureMap upsample_backward(const FeatureMap& grad_out, int in_h, int in_w) {
  FeatureMap g(grad_out.channels(), in_h, in_w);
  for (int c = 0; c < grad_out.channels(); ++c) {
    bilinear_resize_plane_adjoint(grad_out.channel(c), grad_out.height(), grad_out.width(),
                                  g.channel(c), in_h, in_w);
  }
  return g;
}

inline std::vector<double> timestep_embedding(int t, int dim) {
  std::vector<double> e(dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    e[k] = std::sin(t * freq);
    e[half + k] = std::cos(t * freq);
  }
  return e;
}

}  // namespace layers


struct DenoiserTrace {
  FeatureMap input;                 // [x_t, gray]
  std::vector<double> temb;
  std::vector<FeatureMap> enc_pre;  // per encoder stage, before SiLU
  std::vector<FeatureMap> enc_out;  // after SiLU; stage 1 after injection
  std::vector<FeatureMap> dec_up;   // index l: upsampled input to decoder level l
  std::vector<FeatureMap> dec_pre;
  std::vector<FeatureMap> dec_out;
  FeatureMap head_in;               // [decoder features at H x W, x_t, gray]
  Grid logits;
};

class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig cfg = {}, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build_layout();
    initialize(seed);
  }

  const DenoiserConfig& config() const { return cfg_; }
  int stage_count() const { return static_cast<int>(cfg_.widths.size()); }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  DenoiserTrace forward(const Grid& x_t, const Grid& gray, const Grid& prior, int t,
                        const InjectionConfig& inj) const {
    require_same_shape(x_t, gray, "denoiser_forward");
    require_same_shape(x_t, prior, "denoiser_forward");
    const int S = stage_count(), h = x_t.height(), w = x_t.width();
    DenoiserTrace tr;
    tr.input = FeatureMap(2, h, w);
    std::copy(x_t.values().begin(), x_t.values().end(), tr.input.channel(0).begin());
    std::copy(gray.values().begin(), gray.values().end(), tr.input.channel(1).begin());
    tr.temb = layers::timestep_embedding(t, cfg_.time_embed_dim);

    for (int s = 0; s < S; ++s) {
      const Encoder& L = enc_[s];
      const FeatureMap& in = s == 0 ? tr.input : tr.enc_out[s - 1];
      FeatureMap pre = layers::conv_forward(in, view(L.w), view(L.b), L.cout, 3, 2);
      add_time_bias(pre, L, tr.temb);
      FeatureMap out = layers::silu_forward(pre);
      if (s == 0) inject_into(out, prior, inj);
      tr.enc_pre.push_back(std::move(pre));
      tr.enc_out.push_back(std::move(out));
    }

    tr.dec_up.resize(S - 1);
    tr.dec_pre.resize(S - 1);
    tr.dec_out.resize(S - 1);
    for (int l = S - 2; l >= 0; --l) {
      const Conv& L = dec_[l];
      const FeatureMap& below = l == S - 2 ? tr.enc_out[S - 1] : tr.dec_out[l + 1];
      const FeatureMap& skip = tr.enc_out[l];
      tr.dec_up[l] = layers::upsample(below, skip.height(), skip.width());
      tr.dec_pre[l] = layers::conv_forward(tr.dec_up[l], view(L.w), view(L.b), L.cout, 1, 1);
      add_into(tr.dec_pre[l], skip);
      tr.dec_out[l] = layers::silu_forward(tr.dec_pre[l]);
    }

    const FeatureMap& top = S >= 2 ? tr.dec_out[0] : tr.enc_out[0];
    const FeatureMap up = layers::upsample(top, h, w);
    tr.head_in = FeatureMap(cfg_.widths[0] + 2, h, w);
    std::copy(up.values().begin(), up.values().end(), tr.head_in.values().begin());
    std::copy(tr.input.values().begin(), tr.input.values().end(),
              tr.head_in.values().begin() + static_cast<std::ptrdiff_t>(up.size()));
    const FeatureMap z = layers::conv_forward(tr.head_in, view(head_.w), view(head_.b), 1, 3, 1);
    tr.logits = Grid(h, w);
    std::copy(z.values().begin(), z.values().end(), tr.logits.values().begin());
    return tr;
  }

  Grid predict(const Grid& x_t, const Grid& gray, const Grid& prior, int t,
               const InjectionConfig& inj) const {
    return forward(x_t, gray, prior, t, inj).logits;
  }

  Grid predict(const Grid& x_t, const ImageRGB& img, const EdgePrior& e, int t,
               const InjectionConfig& inj) const {
    return predict(x_t, to_grayscale(img), e.map, t, inj);
  }

  // Adds dLoss/dparams to `grad`, which must have parameter_count() entries.
  void backward(const DenoiserTrace& tr, const Grid& grad_logits, std::span<double> grad) const {
    if (grad.size() != params_.size()) {
      throw std::invalid_argument("Denoiser::backward: gradient buffer has " +
                                  std::to_string(grad.size()) + " entries, expected " +
                                  std::to_string(params_.size()));
    }
    if (!grad_logits.same_shape(tr.logits)) {
      throw std::invalid_argument("Denoiser::backward: logit gradient shape mismatch");
    }
    const int S = stage_count(), h = tr.logits.height(), w = tr.logits.width();

    FeatureMap gz(1, h, w);
    std::copy(grad_logits.values().begin(), grad_logits.values().end(), gz.values().begin());
    const FeatureMap g_head = layers::conv_backward(tr.head_in, gz, view(head_.w),
                                                    slice(grad, head_.w), slice(grad, head_.b), 3, 1);
    const FeatureMap& top = S >= 2 ? tr.dec_out[0] : tr.enc_out[0];
    FeatureMap g_up(cfg_.widths[0], h, w);
    std::copy(g_head.values().begin(),
              g_head.values().begin() + static_cast<std::ptrdiff_t>(g_up.size()),
              g_up.values().begin());
    FeatureMap g_dec = layers::upsample_backward(g_up, top.height(), top.width());

    std::vector<FeatureMap> g_enc;
    for (const FeatureMap& f : tr.enc_out) g_enc.emplace_back(f.channels(), f.height(), f.width());

    if (S == 1) add_into(g_enc[0], g_dec);
    for (int l = 0; l <= S - 2; ++l) {
      const Conv& L = dec_[l];
      const FeatureMap g_pre = layers::silu_backward(tr.dec_pre[l], g_dec);
      add_into(g_enc[l], g_pre);
      const FeatureMap g_in = layers::conv_backward(tr.dec_up[l], g_pre, view(L.w),
                                                    slice(grad, L.w), slice(grad, L.b), 1, 1);
      const FeatureMap& below = l == S - 2 ? tr.enc_out[S - 1] : tr.dec_out[l + 1];
      FeatureMap g_below = layers::upsample_backward(g_in, below.height(), below.width());
      if (l == S - 2) {
        add_into(g_enc[S - 1], g_below);
      } else {
        g_dec = std::move(g_below);
      }
    }

    for (int s = S - 1; s >= 0; --s) {
      const Encoder& L = enc_[s];
      const FeatureMap g_pre = layers::silu_backward(tr.enc_pre[s], g_enc[s]);
      auto g_time = slice(grad, L.time);
      const int D = cfg_.time_embed_dim;
      for (int c = 0; c < L.cout; ++c) {
        double acc = 0.0;
        for (double v : g_pre.channel(c)) acc += v;
        for (int k = 0; k < D; ++k) g_time[static_cast<std::size_t>(c) * D + k] += acc * tr.temb[k];
      }
      const FeatureMap& in = s == 0 ? tr.input : tr.enc_out[s - 1];
      const FeatureMap g_in = layers::conv_backward(in, g_pre, view(L.w), slice(grad, L.w),
                                                    slice(grad, L.b), 3, 2, s > 0);
      if (s > 0) add_into(g_enc[s - 1], g_in);
    }
  }

 private:
  struct Slot {
    std::size_t offset = 0;
    std::size_t size = 0;
  };
  struct Encoder {
    int cin = 0, cout = 0;
    Slot w, b, time;
  };
  struct Conv {
    int cin = 0, cout = 0;
    Slot w, b;
  };

  Slot take(std::size_t n) {
    Slot s{cursor_, n};
    cursor_ += n;
    return s;
  }

  void build_layout() {
    int cin = 2;
    for (int width : cfg_.widths) {
      Encoder L;
      L.cin = cin;
      L.cout = width;
      L.w = take(static_cast<std::size_t>(width) * cin * 9);
      L.b = take(width);
      L.time = take(static_cast<std::size_t>(width) * cfg_.time_embed_dim);
      enc_.push_back(L);
      cin = width;
    }
    for (std::size_t l = 0; l + 1 < cfg_.widths.size(); ++l) {
      Conv L;
      L.cin = cfg_.widths[l + 1];
      L.cout = cfg_.widths[l];
      L.w = take(static_cast<std::size_t>(L.cin) * L.cout);
      L.b = take(L.cout);
      dec_.push_back(L);
    }
    head_.cin = cfg_.widths[0] + 2;
    head_.cout = 1;
    head_.w = take(static_cast<std::size_t>(head_.cin) * 9);
    head_.b = take(1);
    params_.assign(cursor_, 0.0);
  }

  // He-normal kernels, zero biases, small time projections.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fill = [&](Slot s, double stddev) {
      std::normal_distribution<double> n(0.0, stddev);
      for (std::size_t k = 0; k < s.size; ++k) params_[s.offset + k] = n(rng);
    };
    for (const Encoder& L : enc_) {
      fill(L.w, std::sqrt(2.0 / (L.cin * 9.0)));
      fill(L.time, 0.1 / std::sqrt(static_cast<double>(cfg_.time_embed_dim)));
    }
    for (const Conv& L : dec_) fill(L.w, std::sqrt(2.0 / L.cin));
    fill(head_.w, std::sqrt(1.0 / (head_.cin * 9.0)));
  }

  std::span<const double> view(Slot s) const { return {params_.data() + s.offset, s.size}; }
  static std::span<double> slice(std::span<double> g, Slot s) { return g.subspan(s.offset, s.size); }

  static void add_into(FeatureMap& dst, const FeatureMap& src) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }

  void add_time_bias(FeatureMap& pre, const Encoder& L, const std::vector<double>& temb) const {
    const auto wt = view(L.time);
    const int D = cfg_.time_embed_dim;
    for (int c = 0; c < L.cout; ++c) {
      double bias = 0.0;
      for (int k = 0; k < D; ++k) bias += wt[static_cast<std::size_t>(c) * D + k] * temb[k];
      for (double& v : pre.channel(c)) v += bias;
    }
  }

  DenoiserConfig cfg_;
  std::vector<Encoder> enc_;
  std::vector<Conv> dec_;
  Conv head_;
  std::size_t cursor_ = 0;
  std::vector<double> params_;
};

}  // namespace bicamo
