#pragma once

// Procedural low-contrast camouflage scenes. A multi-octave value-noise field
// forms the background; the object interior reuses the same field shifted up
// by delta, so only the intensity offset separates it from its surroundings.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/data/sample.hpp"
#include "bicamo/edge_prior.hpp"
#include "bicamo/grid.hpp"

namespace bicamo {

enum class ShapeFamily { Blob, Elongated, MultiPronged, Mixed };

inline std::string family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::Blob: return "blob";
    case ShapeFamily::Elongated: return "elongated";
    case ShapeFamily::MultiPronged: return "multi-pronged";
    case ShapeFamily::Mixed: return "mixed";
  }
  return "unknown";
}

inline ShapeFamily parse_family(const std::string& s) {
  if (s == "blob") return ShapeFamily::Blob;
  if (s == "elongated") return ShapeFamily::Elongated;
  if (s == "multi-pronged") return ShapeFamily::MultiPronged;
  if (s == "mixed") return ShapeFamily::Mixed;
  throw std::invalid_argument("unknown shape family '" + s +
                              "' (expected blob, elongated, multi-pronged or mixed)");
}

struct SyntheticConfig {
  int count = 1;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
  double delta = 0.08;
  int octaves = 4;
  ShapeFamily family = ShapeFamily::Mixed;  // Mixed cycles through the three families
  double min_area = 0.02;
  double max_area = 0.60;
  double texture_low = 0.35;  // background value-noise range
  double texture_high = 0.65;

  void validate() const {
    if (count < 1) throw std::invalid_argument("SyntheticConfig: count must be >= 1");
    if (height < 8 || width < 8) throw std::invalid_argument("SyntheticConfig: images must be at least 8x8");
    if (!(delta > 0.0 && delta <= 0.2)) throw std::invalid_argument("SyntheticConfig: delta must lie in (0, 0.2]");
    if (octaves < 1 || octaves > 8) throw std::invalid_argument("SyntheticConfig: octaves must lie in [1, 8]");
    if (!(min_area > 0.0 && min_area < max_area && max_area < 1.0))
      throw std::invalid_argument("SyntheticConfig: need 0 < min_area < max_area < 1");
    if (!(texture_low >= 0.0 && texture_low < texture_high && texture_high + delta <= 1.0))
      throw std::invalid_argument("SyntheticConfig: need 0 <= texture_low < texture_high <= 1 - delta");
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Sum of octaves of lattice noise with smoothstep interpolation, rescaled to [lo, hi].
inline Grid value_noise(int h, int w, int octaves, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid field(h, w, 0.0);
  double cell = std::max(h, w) / 4.0, amp = 1.0;
  for (int o = 0; o < octaves; ++o) {
    const int gh = static_cast<int>(std::ceil(h / cell)) + 2, gw = static_cast<int>(std::ceil(w / cell)) + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
    for (double& v : lattice) v = u(rng);
    for (int i = 0; i < h; ++i) {
      const double fy = i / cell;
      const int y0 = static_cast<int>(fy);
      const double ty = smoothstep(fy - y0);
      for (int j = 0; j < w; ++j) {
        const double fx = j / cell;
        const int x0 = static_cast<int>(fx);
        const double tx = smoothstep(fx - x0);
        auto at = [&](int a, int b) { return lattice[static_cast<std::size_t>(a) * gw + b]; };
        const double top = at(y0, x0) + tx * (at(y0, x0 + 1) - at(y0, x0));
        const double bot = at(y0 + 1, x0) + tx * (at(y0 + 1, x0 + 1) - at(y0 + 1, x0));
        field(i, j) += amp * (top + ty * (bot - top));
      }
    }
    cell = std::max(1.0, cell / 2.0);
    amp *= 0.5;
  }
  const double fmin = field.min(), fmax = field.max();
  const double span = fmax > fmin ? fmax - fmin : 1.0;
  for (auto& v : field.values()) v = lo + (hi - lo) * (v - fmin) / span;
  return field;
}

struct StarShape {
  double cy = 0, cx = 0, radius = 1, rotation = 0;
  double aspect = 1.0;                         // elongation along the rotated x axis
  std::vector<std::array<double, 3>> harmonics;  // (order, amplitude, phase)

  double boundary(double theta) const {
    const double a = theta - rotation;
    double r = radius / std::sqrt(std::pow(std::cos(a) / aspect, 2) + std::pow(std::sin(a), 2));
    double mod = 1.0;
    for (const auto& hm : harmonics) mod += hm[1] * std::cos(hm[0] * a + hm[2]);
    return r * std::max(0.05, mod);
  }
};

inline Grid rasterize(const StarShape& s, int h, int w) {
  Grid m(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double dy = i + 0.5 - s.cy, dx = j + 0.5 - s.cx;
      const double r = std::hypot(dy, dx);
      m(i, j) = r <= s.boundary(std::atan2(dy, dx)) ? 1.0 : 0.0;
    }
  }
  return m;
}

// Keeps the 4-connected component containing (ci, cj) and fills every
// background region that does not reach the image border.
inline Grid simply_connected(const Grid& m, int ci, int cj) {
  const int h = m.height(), w = m.width();
  Grid out(h, w, 0.0);
  if (m(ci, cj) != 1.0) return out;
  std::deque<std::pair<int, int>> q{{ci, cj}};
  out(ci, cj) = 1.0;
  const int d4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  while (!q.empty()) {
    const auto [i, j] = q.front();
    q.pop_front();
    for (const auto& d : d4) {
      const int a = i + d[0], b = j + d[1];
      if (a < 0 || a >= h || b < 0 || b >= w || out(a, b) == 1.0 || m(a, b) != 1.0) continue;
      out(a, b) = 1.0;
      q.emplace_back(a, b);
    }
  }
  // 8-connected background flood from the border; everything unreached is a hole.
  Grid outside(h, w, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if ((i == 0 || j == 0 || i == h - 1 || j == w - 1) && out(i, j) == 0.0) {
        outside(i, j) = 1.0;
        q.emplace_back(i, j);
      }
    }
  }
  while (!q.empty()) {
    const auto [i, j] = q.front();
    q.pop_front();
    for (int a = i - 1; a <= i + 1; ++a) {
      for (int b = j - 1; b <= j + 1; ++b) {
        if (a < 0 || a >= h || b < 0 || b >= w || outside(a, b) == 1.0 || out(a, b) == 1.0) continue;
        outside(a, b) = 1.0;
        q.emplace_back(a, b);
      }
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = outside[k] == 1.0 ? 0.0 : 1.0;
  return out;
}

inline StarShape random_shape(ShapeFamily family, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr double kTwoPi = 6.283185307179586;
  StarShape s;
  s.cy = h * (0.35 + 0.3 * u(rng));
  s.cx = w * (0.35 + 0.3 * u(rng));
  s.rotation = kTwoPi * u(rng);
  const double base = std::min(h, w);
  switch (family) {
    case ShapeFamily::Blob:
      s.radius = base * (0.15 + 0.12 * u(rng));
      s.harmonics = {{2, 0.15 * u(rng), kTwoPi * u(rng)}, {3, 0.1 * u(rng), kTwoPi * u(rng)}};
      break;
    case ShapeFamily::Elongated:
      s.radius = base * (0.07 + 0.04 * u(rng));
      s.aspect = 3.0 + 2.0 * u(rng);
      s.harmonics = {{2, 0.05 * u(rng), kTwoPi * u(rng)}};
      break;
    case ShapeFamily::MultiPronged: {
      s.radius = base * (0.17 + 0.08 * u(rng));
      const double prongs = 3.0 + std::floor(3.0 * u(rng));
      s.harmonics = {{prongs, 0.5 + 0.2 * u(rng), kTwoPi * u(rng)}};
      break;
    }
    case ShapeFamily::Mixed:
      throw std::logic_error("random_shape: Mixed must be resolved per sample");
  }
  return s;
}

// Rescales the shape until its area fraction falls inside [lo, hi]; a disc
// of the band's midpoint area is the fallback.
inline Grid shape_mask(StarShape s, int h, int w, double lo, double hi) {
  const int ci = std::clamp(static_cast<int>(s.cy), 0, h - 1);
  const int cj = std::clamp(static_cast<int>(s.cx), 0, w - 1);
  const double n = static_cast<double>(h) * w;
  for (int attempt = 0; attempt < 24; ++attempt) {
    Grid raw = rasterize(s, h, w);
    raw(ci, cj) = 1.0;  // the pixel holding the star centre belongs to the shape
    const Grid m = simply_connected(raw, ci, cj);
    const double frac = m.sum() / n;
    if (frac >= lo && frac <= hi) return m;
    const double target = frac < lo ? 2.0 * lo : 0.75 * hi;
    s.radius *= frac > 0.0 ? std::clamp(std::sqrt(target / frac), 0.5, 2.0) : 2.0;
  }
  StarShape disc;
  disc.cy = h / 2.0;
  disc.cx = w / 2.0;
  disc.radius = std::sqrt(0.5 * (lo + hi) * n / 3.141592653589793);
  return simply_connected(rasterize(disc, h, w), h / 2, w / 2);
}

}  // namespace detail

inline Sample generate_one(const SyntheticConfig& cfg, int index) {
  std::mt19937_64 rng(detail::splitmix64(cfg.seed ^ detail::splitmix64(static_cast<std::uint64_t>(index))));
  const ShapeFamily family = cfg.family == ShapeFamily::Mixed ? static_cast<ShapeFamily>(index % 3)
                                                              : cfg.family;
  const int h = cfg.height, w = cfg.width;
  const Grid mask = detail::shape_mask(detail::random_shape(family, h, w, rng), h, w, cfg.min_area,
                                       cfg.max_area);
  const Grid field = detail::value_noise(h, w, cfg.octaves, cfg.texture_low, cfg.texture_high, rng);

  // Luminance-neutral tint: 0.299 a + 0.587 b + 0.114 c = 0.
  std::uniform_real_distribution<double> t(-0.04, 0.04);
  const double a = t(rng), c = t(rng);
  const double b = -(0.299 * a + 0.114 * c) / 0.587;

  Grid r(h, w), g(h, w), bl(h, w);
  for (std::size_t k = 0; k < field.size(); ++k) {
    const double base = field[k] + cfg.delta * mask[k];
    r[k] = std::clamp(base + a, 0.0, 1.0);
    g[k] = std::clamp(base + b, 0.0, 1.0);
    bl[k] = std::clamp(base + c, 0.0, 1.0);
  }
  char id[32];
  std::snprintf(id, sizeof id, "syn_%05d", index);
  return Sample(id, ImageRGB(r, g, bl), mask);
}

inline std::vector<Sample> generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::vector<Sample> out;
  out.reserve(cfg.count);
  for (int k = 0; k < cfg.count; ++k) out.push_back(generate_one(cfg, k));
  return out;
}

}  // namespace bicamo
