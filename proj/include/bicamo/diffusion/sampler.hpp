#pragma once

// Deterministic x0-parameterised sampler with clipped denoising.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/diffusion/schedule.hpp"
#include "bicamo/grid.hpp"
#include "bicamo/injection.hpp"

namespace bicamo {

inline constexpr int kDefaultSamplingSteps = 30;

// Anything that maps (x_t, gray, prior, t, injection) to full-resolution logits.
template <typename M>
concept LogitPredictor = requires(const M& m, const Grid& g, int t, const InjectionConfig& inj) {
  { m.predict(g, g, g, t, inj) } -> std::convertible_to<Grid>;
};

// Evenly spaced schedule indices from T down towards 1, T first.
inline std::vector<int> sampling_timesteps(int T, int steps) {
  if (steps < 1) throw std::invalid_argument("sample: steps must be >= 1");
  if (steps > T) {
    throw std::invalid_argument("sample: steps (" + std::to_string(steps) +
                                ") exceeds schedule length " + std::to_string(T));
  }
  std::vector<int> ts(steps);
  if (steps == 1) {
    ts[0] = T;
    return ts;
  }
  for (int k = 0; k < steps; ++k) {
    ts[k] = T - static_cast<int>(std::lround(static_cast<double>(k) * (T - 1) / (steps - 1)));
  }
  return ts;
}

inline Grid predicted_clean_signal(const Grid& logits) {
  return map(logits, [](double z) { return std::clamp(2.0 * sigmoid(z) - 1.0, -1.0, 1.0); });
}

// x_{t'} = sqrt(abar')x0 + sqrt(1 - abar') (x_t - sqrt(abar)x0) / sqrt(1 - abar).
inline Grid step_towards(const Grid& x_t, const Grid& x0, double abar, double abar_next) {
  const double a = std::sqrt(abar), an = std::sqrt(abar_next);
  const double ratio = std::sqrt(1.0 - abar_next) / std::sqrt(1.0 - abar);
  Grid out(x_t.height(), x_t.width());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = an * x0[k] + ratio * (x_t[k] - a * x0[k]);
  return out;
}

using SamplerObserver = std::function<void(const DiffusionState&)>;

template <LogitPredictor M>
Grid sample(const M& model, const Grid& gray, const Grid& prior, const NoiseSchedule& sched,
            int steps, std::uint64_t seed, const InjectionConfig& inj,
            const SamplerObserver& observe = {}) {
  require_same_shape(gray, prior, "sample");
  const std::vector<int> ts = sampling_timesteps(sched.steps(), steps);
  std::mt19937_64 rng(seed);
  DiffusionState state{standard_normal(gray.height(), gray.width(), rng), ts.front()};
  Grid logits;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (observe) observe(state);
    logits = model.predict(state.x_t, gray, prior, state.t, inj);
    if (k + 1 == ts.size()) break;
    const Grid x0 = predicted_clean_signal(logits);
    state.x_t = step_towards(state.x_t, x0, sched.at(state.t), sched.at(ts[k + 1]));
    state.t = ts[k + 1];
  }
  return map(logits, [](double z) { return sigmoid(z); });
}

}  // namespace bicamo
