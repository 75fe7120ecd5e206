#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "alf/basis.hpp"
#include "alf/energy.hpp"
#include "alf/raster.hpp"

namespace alf {

/// Forward hazing recipe: a clear image plus either a depth map (with
/// attenuation beta, t = exp(-beta d)) or an explicit transmission map,
/// composited against an airlight field, optionally with seeded Gaussian
/// noise and 8-bit quantization.
struct SyntheticSceneSpec {
  Raster clear;
  std::optional<ScalarMap> depth;
  std::optional<ScalarMap> transmission;
  double beta = 0.0;
  AirlightField airlight;
  double noise_sigma = 0.0;
  bool quantize = false;
  uint64_t seed = 0;

  SyntheticSceneSpec() : clear(1, 1), airlight(AirlightField::constant(Rgb{1, 1, 1})) {}
  explicit SyntheticSceneSpec(Raster clear_image)
      : clear(std::move(clear_image)), airlight(AirlightField::constant(Rgb{1, 1, 1})) {}

  void validate() const {
    if (depth.has_value() == transmission.has_value()) {
      throw ConfigError("scene: exactly one of depth or transmission must be given");
    }
    if (depth && !(beta > 0.0)) {
      throw ConfigError("scene: beta must be > 0 when depth is given");
    }
    if (noise_sigma < 0.0) throw ConfigError("scene: noise_sigma must be >= 0");
  }
};

struct SyntheticScene {
  Raster hazy;
  ScalarMap truth_t;
};

inline double quantize8_value(double v) {
  return std::floor(clamp01(v) * 255.0 + 0.5) / 255.0;
}

/// Composites hazy = t J + (1 - t) A per channel and returns it with the
/// ground-truth transmission. Noise is drawn from one seeded generator in
/// row-major r,g,b order, so identical specs reproduce identical scenes.
inline SyntheticScene synthesize(const SyntheticSceneSpec& spec) {
  spec.validate();
  const int w = spec.clear.width();
  const int h = spec.clear.height();

  ScalarMap t(w, h);
  if (spec.depth) {
    require_same_size(spec.clear, *spec.depth, "synthesize");
    for (size_t p = 0; p < t.data().size(); ++p) {
      t.data()[p] = std::exp(-spec.beta * spec.depth->data()[p]);
    }
  } else {
    require_same_size(spec.clear, *spec.transmission, "synthesize");
    for (double v : spec.transmission->data()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("scene: explicit transmission values must lie in [0,1]");
      }
    }
    t = *spec.transmission;
  }

  Raster hazy(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tv = t.at(x, y);
      const Rgb J = spec.clear.rgb(x, y);
      const Rgb A = spec.airlight.eval_rgb(x, y);
      for (int c = 0; c < 3; ++c) {
        hazy.at(x, y, c) = tv * J[c] + (1.0 - tv) * A[c];
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : hazy.data()) v = clamp01(v + noise(rng));
  }
  if (spec.quantize) {
    for (double& v : hazy.data()) v = quantize8_value(v);
  }
  return SyntheticScene{std::move(hazy), std::move(t)};
}

/// Division-based recovery J = (I - A) / max(t, t0) + A, clamped to [0,1].
inline Raster recover_direct(const Raster& hazy, const ScalarMap& t,
                             const AirlightField& field, double t0) {
  if (!(t0 > 0.0)) throw ConfigError("recover_direct: t0 must be > 0");
  require_same_size(hazy, t, "recover_direct");
  const int w = hazy.width();
  const int h = hazy.height();
  Raster out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double denom = std::max(t.at(x, y), t0);
      const Rgb A = field.eval_rgb(x, y);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = clamp01((hazy.at(x, y, c) - A[c]) / denom + A[c]);
      }
    }
  }
  return out;
}

namespace detail {

// Sliding window minimum over [i-r, i+r] clamped to the line, done naively.
// Window sizes here are small; the separable pass keeps the total cost at
// O(N * patch) instead of O(N * patch^2).
inline void line_window_min(const std::vector<double>& src, std::vector<double>& dst,
                            int n, int stride, size_t base, int radius) {
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - radius);
    const int hi = std::min(n - 1, i + radius);
    double m = src[base + static_cast<size_t>(lo) * stride];
    for (int k = lo + 1; k <= hi; ++k) {
      m = std::min(m, src[base + static_cast<size_t>(k) * stride]);
    }
    dst[base + static_cast<size_t>(i) * stride] = m;
  }
}

}  // namespace detail

/// Patch-minimum transmission baseline: 1 - omega * min over the patch
/// window (clamped at image borders) of the per-channel minimum of I/A,
/// clamped to [0,1]. Patch must be odd so the window is centered.
inline ScalarMap dark_channel_t(const Raster& hazy, const AirlightField& field,
                                double omega, int patch) {
  if (!(omega > 0.0 && omega <= 1.0)) throw ConfigError("dark_channel_t: omega must be in (0,1]");
  if (patch < 1 || patch % 2 == 0) throw ConfigError("dark_channel_t: patch must be odd and >= 1");
  const int w = hazy.width();
  const int h = hazy.height();
  const int radius = patch / 2;

  std::vector<double> ratio(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Rgb I = hazy.rgb(x, y);
      const Rgb A = field.eval_rgb(x, y);
      ratio[static_cast<size_t>(y) * w + x] =
          std::min(I.r / A.r, std::min(I.g / A.g, I.b / A.b));
    }
  }

  std::vector<double> rowmin(ratio.size());
  for (int y = 0; y < h; ++y) {
    detail::line_window_min(ratio, rowmin, w, 1, static_cast<size_t>(y) * w, radius);
  }
  std::vector<double> winmin(ratio.size());
  for (int x = 0; x < w; ++x) {
    detail::line_window_min(rowmin, winmin, h, w, static_cast<size_t>(x), radius);
  }

  ScalarMap t(w, h);
  for (size_t p = 0; p < winmin.size(); ++p) {
    t.data()[p] = clamp01(1.0 - omega * winmin[p]);
  }
  return t;
}

}  // namespace alf
