#pragma once

// Parameter-free boundary injection into the first-stage feature map:
//   F1' = F1 + lambda_inj * (1_C (x) phi(E)),
//   phi(E) = |K_L * nearest(E, H', W')|   (or just nearest(E) without prefilter).

#include <cmath>
#include <stdexcept>
#include <string>

#include "bicamo/edge_prior.hpp"
#include "bicamo/grid.hpp"

namespace bicamo {

struct InjectionConfig {
  bool enabled = true;
  double lambda_inj = 0.075;
  bool laplacian_prefilter = true;

  void validate() const {
    if (!(lambda_inj >= 0.0) || !std::isfinite(lambda_inj)) {
      throw std::invalid_argument("InjectionConfig: lambda_inj must be finite and >= 0");
    }
  }
  static InjectionConfig off() { return {false, 0.0, false}; }
};

inline Grid sharpen_prior(const Grid& e, int height, int width, bool laplacian_prefilter) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("sharpen_prior: target size must be positive, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  Grid rescaled = resize_nearest(e, height, width);
  if (!laplacian_prefilter) return rescaled;
  return map(conv2d_same(rescaled, kernels::laplacian), [](double v) { return std::abs(v); });
}

inline Grid sharpen_prior(const EdgePrior& e, int height, int width, bool laplacian_prefilter) {
  return sharpen_prior(e.map, height, width, laplacian_prefilter);
}

inline FeatureMap broadcast_prior(const Grid& phi, int channels) {
  if (channels < 1) {
    throw std::invalid_argument("broadcast_prior: channel count must be >= 1, got " +
                                std::to_string(channels));
  }
  FeatureMap out(channels, phi.height(), phi.width());
  for (int c = 0; c < channels; ++c) {
    auto dst = out.channel(c);
    for (std::size_t k = 0; k < phi.size(); ++k) dst[k] = phi[k];
  }
  return out;
}

// In-place form used by the denoiser forward pass.
inline void inject_into(FeatureMap& f1, const Grid& e, const InjectionConfig& cfg) {
  cfg.validate();
  if (f1.channels() < 1) throw std::invalid_argument("inject: feature map has no channels");
  if (!cfg.enabled || cfg.lambda_inj == 0.0) return;
  const Grid phi = sharpen_prior(e, f1.height(), f1.width(), cfg.laplacian_prefilter);
  for (int c = 0; c < f1.channels(); ++c) {
    auto dst = f1.channel(c);
    for (std::size_t k = 0; k < phi.size(); ++k) dst[k] += cfg.lambda_inj * phi[k];
  }
}

inline FeatureMap inject(const FeatureMap& f1, const EdgePrior& e, const InjectionConfig& cfg) {
  FeatureMap out = f1;
  inject_into(out, e.map, cfg);
  return out;
}

}  // namespace bicamo
