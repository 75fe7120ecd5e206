#pragma once

#include <array>
#include <vector>

#include "alf/errors.hpp"
#include "alf/raster.hpp"

namespace alf {

/// Evaluated airlight values are clamped to [kAirlightFloor, 1] before being
/// used as divisors anywhere in the energy.
inline constexpr double kAirlightFloor = 1e-3;

/// Legendre polynomial P_k(u) by the three-term recurrence.
inline double legendre_1d(int k, double u) {
  if (k <= 0) return 1.0;
  double prev = 1.0;  // P_0
  double cur = u;     // P_1
  for (int n = 1; n < k; ++n) {
    const double next = ((2 * n + 1) * u * cur - n * prev) / (n + 1);
    prev = cur;
    cur = next;
  }
  return cur;
}

struct BasisMember {
  int degree_u = 0;
  int degree_v = 0;
};

/// Separable 2D Legendre family over [-1,1]^2. Member i is
/// P_{degree_u}(u) * P_{degree_v}(v); member 0 is the constant (DC) term.
struct BasisSet {
  int order = 0;
  bool cross_terms = false;
  std::vector<BasisMember> members;

  int size() const { return static_cast<int>(members.size()); }
};

/// Members ordered by total degree, then u-degree descending. With cross
/// terms every pair a+b <= n appears (M = (n+1)(n+2)/2); without them only
/// the axis-pure terms do (M = 2n+1).
inline BasisSet build_basis(int order, bool include_cross_terms) {
  if (order < 0) throw Error("build_basis: order must be >= 0");
  BasisSet basis;
  basis.order = order;
  basis.cross_terms = include_cross_terms;
  for (int d = 0; d <= order; ++d) {
    for (int a = d; a >= 0; --a) {
      const int b = d - a;
      if (!include_cross_terms && a != 0 && b != 0) continue;
      basis.members.push_back(BasisMember{a, b});
    }
  }
  return basis;
}

/// Corner-to-corner affine map of pixel indices onto [-1,1]; a 1-pixel
/// dimension maps to 0.
inline std::array<double, 2> normalize_coords(int x, int y, int width, int height) {
  const double u = width > 1 ? 2.0 * x / (width - 1) - 1.0 : 0.0;
  const double v = height > 1 ? 2.0 * y / (height - 1) - 1.0 : 0.0;
  return {u, v};
}

inline double eval_member(const BasisMember& m, double u, double v) {
  return legendre_1d(m.degree_u, u) * legendre_1d(m.degree_v, v);
}

/// Airlight model: either a single constant radiance triple, or per-channel
/// weight vectors over a shared basis evaluated on normalized coordinates of
/// a fixed image grid. Evaluation clamps to [kAirlightFloor, 1].
class AirlightField {
 public:
  enum class Mode { Constant, Basis };

  static AirlightField constant(Rgb a0) {
    AirlightField f;
    f.mode_ = Mode::Constant;
    f.a0_ = a0;
    return f;
  }

  static AirlightField from_weights(BasisSet basis,
                                    std::array<std::vector<double>, 3> weights,
                                    int width, int height) {
    for (const auto& w : weights) {
      if (static_cast<int>(w.size()) != basis.size()) {
        throw Error("AirlightField: weight count does not match basis size");
      }
    }
    detail::check_dims(width, height, "AirlightField");
    AirlightField f;
    f.mode_ = Mode::Basis;
    f.basis_ = std::move(basis);
    f.weights_ = std::move(weights);
    f.width_ = width;
    f.height_ = height;
    return f;
  }

  Mode mode() const { return mode_; }
  const Rgb& a0() const { return a0_; }
  const BasisSet& basis() const { return basis_; }
  const std::array<std::vector<double>, 3>& weights() const { return weights_; }
  int width() const { return width_; }
  int height() const { return height_; }

  double eval(int x, int y, int channel) const {
    if (mode_ == Mode::Constant) {
      return std::clamp(a0_[channel], kAirlightFloor, 1.0);
    }
    const auto [u, v] = normalize_coords(x, y, width_, height_);
    double sum = 0.0;
    const auto& w = weights_[channel];
    for (int i = 0; i < basis_.size(); ++i) {
      sum += w[i] * eval_member(basis_.members[i], u, v);
    }
    return std::clamp(sum, kAirlightFloor, 1.0);
  }

  Rgb eval_rgb(int x, int y) const {
    return Rgb{eval(x, y, 0), eval(x, y, 1), eval(x, y, 2)};
  }

 private:
  Mode mode_ = Mode::Constant;
  Rgb a0_{};
  BasisSet basis_;
  std::array<std::vector<double>, 3> weights_{};
  int width_ = 1;
  int height_ = 1;
};

inline double eval_field(const AirlightField& field, int x, int y, int channel) {
  return field.eval(x, y, channel);
}

/// Renders the field over a pixel grid (for export and field-error metrics).
inline Raster render_field(const AirlightField& field, int width, int height) {
  Raster out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.set_rgb(x, y, field.eval_rgb(x, y));
    }
  }
  return out;
}

}  // namespace alf
