#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/grid.hpp"

namespace bicamo {

// alpha_bar_t for t = 1..T, strictly decreasing inside (0, 1).
struct NoiseSchedule {
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(alpha_bar.size()); }
  double at(int t) const {
    if (t < 1 || t > steps()) {
      throw std::out_of_range("NoiseSchedule: timestep " + std::to_string(t) + " outside [1, " +
                              std::to_string(steps()) + "]");
    }
    return alpha_bar[t - 1];
  }
  bool operator==(const NoiseSchedule&) const = default;
};

inline constexpr double kCosineOffset = 0.008;
inline constexpr double kAlphaBarMargin = 1e-5;

// Cosine schedule cos^2(((t/T + s)/(1 + s)) pi/2) / cos^2((s/(1 + s)) pi/2),
// mapped affinely onto [margin, 1 - margin] so the endpoints stay inside (0,1)
// without flattening the strictly decreasing tail.
inline NoiseSchedule make_schedule(int T) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  constexpr double half_pi = 1.57079632679489661923;
  auto f = [&](double t) {
    const double c = std::cos((t / T + kCosineOffset) / (1.0 + kCosineOffset) * half_pi);
    return c * c;
  };
  const double f0 = f(0.0);
  NoiseSchedule s;
  s.alpha_bar.resize(T);
  for (int t = 1; t <= T; ++t) {
    const double raw = f(static_cast<double>(t)) / f0;
    s.alpha_bar[t - 1] = kAlphaBarMargin + (1.0 - 2.0 * kAlphaBarMargin) * raw;
  }
  return s;
}

struct DiffusionState {
  Grid x_t;
  int t = 1;
};

inline Grid to_signal_space(const Grid& mask) {
  return map(mask, [](double v) { return 2.0 * v - 1.0; });
}

inline Grid standard_normal(int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Grid g(h, w);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = n(rng);
  return g;
}

// x_t = sqrt(abar_t) (2y - 1) + sqrt(1 - abar_t) n,  n ~ N(0, I).
inline DiffusionState forward_corrupt(const Grid& y, int t, const NoiseSchedule& sched,
                                      std::mt19937_64& rng) {
  if (!is_binary(y)) throw std::invalid_argument("forward_corrupt: mask must be binary");
  const double ab = sched.at(t);
  const double signal = std::sqrt(ab), noise = std::sqrt(1.0 - ab);
  const Grid n = standard_normal(y.height(), y.width(), rng);
  DiffusionState s{Grid(y.height(), y.width()), t};
  for (std::size_t k = 0; k < y.size(); ++k) s.x_t[k] = signal * (2.0 * y[k] - 1.0) + noise * n[k];
  return s;
}

inline DiffusionState forward_corrupt(const Grid& y, int t, const NoiseSchedule& sched,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return forward_corrupt(y, t, sched, rng);
}

}  // namespace bicamo
