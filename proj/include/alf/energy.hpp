#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "alf/basis.hpp"
#include "alf/parallel.hpp"
#include "alf/raster.hpp"

namespace alf {

/// Least-squares denominators at or below this are treated as degenerate
/// (t identically 1 over the support) and the update is skipped.
inline constexpr double kDenominatorFloor = 1e-9;

/// Residual form of the haze-level term: the per-channel intensity ratio, or
/// the min-channel (dark-channel-like) ratio. The min-channel form is the
/// default; it is also the form whose exact minimizer optimal_t_prior returns.
enum class ResidualVariant { PerChannel, MinChannel };

struct Hyperparameters {
  double lambda1 = 0.1;     // transmission smoothness
  double lambda2 = 0.0001;  // image smoothness
  double lambda3 = 1.0;     // haze-level prior
  double lambda4 = 0.1;     // non-DC weight penalty
  ResidualVariant residual = ResidualVariant::MinChannel;
};

/// Raw (unweighted) energy components; total applies the lambda weights.
struct EnergyBreakdown {
  double data = 0.0;
  double smooth_t = 0.0;
  double smooth_J = 0.0;
  double haze_level = 0.0;
  double weight_penalty = 0.0;
  double total = 0.0;

  EnergyBreakdown& operator+=(const EnergyBreakdown& o) {
    data += o.data;
    smooth_t += o.smooth_t;
    smooth_J += o.smooth_J;
    haze_level += o.haze_level;
    weight_penalty += o.weight_penalty;
    return *this;
  }

  void finalize(const Hyperparameters& hp) {
    total = data + hp.lambda1 * smooth_t + hp.lambda2 * smooth_J +
            hp.lambda3 * haze_level + hp.lambda4 * weight_penalty;
  }
};

namespace detail {

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline double min3(Rgb c) { return std::min(c.r, std::min(c.g, c.b)); }

// Sum of f(center - neighbour) over the in-bounds 4-neighbourhood, reading a
// row-major buffer with a fixed element stride (1 for maps, 3 for a raster
// channel). Neighbour order: left, right, up, down.
template <typename F>
inline double neighbor_sum(const double* base, int stride, int w, int h, int x, int y,
                           F&& f) {
  const size_t p = (static_cast<size_t>(y) * w + x) * stride;
  const double center = base[p];
  double s = 0.0;
  if (x > 0) s += f(center - base[p - stride]);
  if (x + 1 < w) s += f(center - base[p + stride]);
  if (y > 0) s += f(center - base[p - static_cast<size_t>(w) * stride]);
  if (y + 1 < h) s += f(center - base[p + static_cast<size_t>(w) * stride]);
  return s;
}

inline double neighbor_abs_sum(const double* base, int stride, int w, int h, int x, int y) {
  return neighbor_sum(base, stride, w, h, x, y, [](double d) { return std::fabs(d); });
}

inline double neighbor_sign_sum(const double* base, int stride, int w, int h, int x, int y) {
  return neighbor_sum(base, stride, w, h, x, y, [](double d) { return sgn(d); });
}

// d/dt of the pixel's squared data residual plus the haze-level term; the
// smoothness part is added by the caller.
inline double grad_t_local(Rgb I, Rgb J, Rgb A, double t,
                           const Hyperparameters& hp) {
  const double m = min3(I);
  double data_part = 0.0;
  double residual_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double res = I[c] - t * J[c] - (1.0 - t) * A[c];
    data_part += res * (A[c] - J[c]);
    const double num = hp.residual == ResidualVariant::MinChannel ? m : I[c];
    residual_sum += t - 1.0 + num / A[c];
  }
  return 2.0 * data_part + 2.0 * hp.lambda3 * residual_sum;
}

inline double grad_j_local(double Ic, double Jc, double Ac, double t) {
  const double res = Ic - t * Jc - (1.0 - t) * Ac;
  return 2.0 * res * (-t);
}

}  // namespace detail

/// Sum of absolute differences to the in-bounds 4-neighbours.
inline double sad_rho(const ScalarMap& map, int x, int y) {
  return detail::neighbor_abs_sum(map.data().data(), 1, map.width(), map.height(), x, y);
}

inline double sad_rho(const Raster& img, int x, int y, int channel) {
  return detail::neighbor_abs_sum(img.data().data() + channel, 3, img.width(),
                                  img.height(), x, y);
}

/// Haze-level residual at one pixel and channel. Requires A[channel] >=
/// kAirlightFloor (field evaluation guarantees it).
inline double haze_residual(double t, Rgb I, Rgb A, int channel, ResidualVariant variant) {
  const double num = variant == ResidualVariant::MinChannel ? detail::min3(I) : I[channel];
  return t - 1.0 + num / A[channel];
}

/// The transmission minimizing the summed squared min-channel residuals,
/// clamped to [0,1]: 1 - mean over channels of min_c I / A.
inline double optimal_t_prior(Rgb I, Rgb A) {
  const double m = detail::min3(I);
  const double mean_ratio = (m / A.r + m / A.g + m / A.b) / 3.0;
  return clamp01(1.0 - mean_ratio);
}

/// Per-index weight penalty of the field: sum of squared non-DC weights over
/// channels; zero for a constant field.
inline double weight_penalty_of(const AirlightField& field) {
  if (field.mode() == AirlightField::Mode::Constant) return 0.0;
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto& w = field.weights()[c];
    for (size_t i = 1; i < w.size(); ++i) sum += w[i] * w[i];
  }
  return sum;
}

/// Full energy with the airlight prerendered into an interleaved RGB buffer
/// (values already clamped by field evaluation). Reduction order is fixed:
/// per-row partials summed row 0 first, so the result does not depend on the
/// worker count.
inline EnergyBreakdown total_energy_prerendered(
    const Raster& I, const ScalarMap& t, const Raster& J,
    const std::vector<double>& airlight, double weight_penalty,
    const Hyperparameters& hp, int threads = 1) {
  require_same_size(I, t, "total_energy");
  require_same_size(I, J, "total_energy");
  const int w = I.width();
  const int h = I.height();
  EnergyBreakdown sum = ordered_row_sum<EnergyBreakdown>(h, threads, [&](int y) {
    EnergyBreakdown row;
    for (int x = 0; x < w; ++x) {
      const double tv = t.at(x, y);
      const Rgb Ip = I.rgb(x, y);
      const Rgb Jp = J.rgb(x, y);
      const size_t p = I.index(x, y, 0);
      const Rgb Ap{airlight[p], airlight[p + 1], airlight[p + 2]};
      const double m = detail::min3(Ip);
      for (int c = 0; c < 3; ++c) {
        const double res = Ip[c] - tv * Jp[c] - (1.0 - tv) * Ap[c];
        row.data += res * res;
        const double num = hp.residual == ResidualVariant::MinChannel ? m : Ip[c];
        const double R = tv - 1.0 + num / Ap[c];
        row.haze_level += R * R;
        row.smooth_J += sad_rho(J, x, y, c);
      }
      row.smooth_t += sad_rho(t, x, y);
    }
    return row;
  });
  sum.weight_penalty = weight_penalty;
  sum.finalize(hp);
  return sum;
}

inline std::vector<double> render_field_buffer(const AirlightField& field, int w, int h,
                                               int threads = 1) {
  std::vector<double> buf(static_cast<size_t>(w) * h * 3);
  parallel_rows(h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const size_t p = (static_cast<size_t>(y) * w + x) * 3;
      buf[p] = field.eval(x, y, 0);
      buf[p + 1] = field.eval(x, y, 1);
      buf[p + 2] = field.eval(x, y, 2);
    }
  });
  return buf;
}

inline EnergyBreakdown total_energy(const Raster& I, const ScalarMap& t, const Raster& J,
                                    const AirlightField& field, const Hyperparameters& hp,
                                    int threads = 1) {
  const auto airlight = render_field_buffer(field, I.width(), I.height(), threads);
  return total_energy_prerendered(I, t, J, airlight, weight_penalty_of(field), hp, threads);
}

/// Analytic d(total energy)/d t(x). The smoothness part uses sgn with
/// sgn(0) = 0; each neighbour edge appears twice in the energy, hence the
/// factor 2 on the sign sum.
inline double grad_t(const Raster& I, const ScalarMap& t, const Raster& J,
                     const AirlightField& field, const Hyperparameters& hp,
                     int x, int y) {
  const double local = detail::grad_t_local(I.rgb(x, y), J.rgb(x, y),
                                            field.eval_rgb(x, y), t.at(x, y), hp);
  const double sign_sum = detail::neighbor_sign_sum(t.data().data(), 1, t.width(),
                                                    t.height(), x, y);
  return local + 2.0 * hp.lambda1 * sign_sum;
}

/// Analytic d(total energy)/d J^c(x).
inline double grad_J(const Raster& I, const ScalarMap& t, const Raster& J,
                     const AirlightField& field, const Hyperparameters& hp,
                     int x, int y, int channel) {
  const double tv = t.at(x, y);
  const double local = detail::grad_j_local(I.at(x, y, channel), J.at(x, y, channel),
                                            field.eval(x, y, channel), tv);
  const double sign_sum = detail::neighbor_sign_sum(J.data().data() + channel, 3,
                                                    J.width(), J.height(), x, y);
  return local + 2.0 * hp.lambda2 * sign_sum;
}

/// Least-squares constant airlight given t and J, per channel:
///   A0 = sum((I - t J)(1 - t)) / sum((1 - t)^2), clamped to [floor, 1].
/// Returns nullopt when the denominator is degenerate (t == 1 everywhere);
/// the caller keeps its previous value.
inline std::optional<Rgb> update_constant_airlight(const Raster& I, const ScalarMap& t,
                                                   const Raster& J) {
  require_same_size(I, t, "update_constant_airlight");
  require_same_size(I, J, "update_constant_airlight");
  const int w = I.width();
  const int h = I.height();
  double num[3] = {0.0, 0.0, 0.0};
  double den = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tv = t.at(x, y);
      const double omt = 1.0 - tv;
      for (int c = 0; c < 3; ++c) {
        num[c] += (I.at(x, y, c) - tv * J.at(x, y, c)) * omt;
      }
      den += omt * omt;
    }
  }
  if (den <= kDenominatorFloor) return std::nullopt;
  Rgb a0;
  for (int c = 0; c < 3; ++c) a0[c] = std::clamp(num[c] / den, kAirlightFloor, 1.0);
  return a0;
}

/// Per-pixel table of basis member values on a w x h grid.
struct BasisTable {
  int width = 0;
  int height = 0;
  std::vector<std::vector<double>> values;  // values[i][y*width + x]
};

inline BasisTable tabulate_basis(const BasisSet& basis, int width, int height) {
  BasisTable table;
  table.width = width;
  table.height = height;
  table.values.assign(basis.size(), std::vector<double>(static_cast<size_t>(width) * height));
  for (int i = 0; i < basis.size(); ++i) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const auto [u, v] = normalize_coords(x, y, width, height);
        table.values[i][static_cast<size_t>(y) * width + x] =
            eval_member(basis.members[i], u, v);
      }
    }
  }
  return table;
}

struct WeightUpdate {
  std::array<std::vector<double>, 3> weights;
  std::vector<uint8_t> degenerate;  // per basis index, channel-independent
  int degenerate_count = 0;
};

/// Closed-form per-coefficient weight update:
///   w_i = sum((I - t J)(1 - t) g_i) / (sum((1 - t)^2 g_i^2) + lambda4*[i != 0]).
/// Each coefficient is computed independently, exactly as the closed form is
/// written; this equals the joint least-squares solution only when the
/// (1-t)^2-weighted Gram matrix of the basis is diagonal. A degenerate
/// denominator keeps prev[i] for that index and flags it.
inline WeightUpdate update_weights_tabulated(
    const Raster& I, const ScalarMap& t, const Raster& J, const BasisTable& table,
    double lambda4, const std::array<std::vector<double>, 3>& prev) {
  require_same_size(I, t, "update_weights");
  require_same_size(I, J, "update_weights");
  const int w = I.width();
  const int h = I.height();
  const int members = static_cast<int>(table.values.size());
  WeightUpdate out;
  out.degenerate.assign(members, 0);
  for (int c = 0; c < 3; ++c) out.weights[c].assign(members, 0.0);

  for (int i = 0; i < members; ++i) {
    const std::vector<double>& g = table.values[i];
    double num[3] = {0.0, 0.0, 0.0};
    double den = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const size_t p = static_cast<size_t>(y) * w + x;
        const double tv = t.data()[p];
        const double omt = 1.0 - tv;
        const double gv = g[p];
        for (int c = 0; c < 3; ++c) {
          num[c] += (I.data()[p * 3 + c] - tv * J.data()[p * 3 + c]) * omt * gv;
        }
        den += omt * omt * gv * gv;
      }
    }
    const double den_i = den + (i == 0 ? 0.0 : lambda4);
    if (den_i <= kDenominatorFloor) {
      out.degenerate[i] = 1;
      ++out.degenerate_count;
      for (int c = 0; c < 3; ++c) {
        out.weights[c][i] = i < static_cast<int>(prev[c].size()) ? prev[c][i] : 0.0;
      }
      continue;
    }
    for (int c = 0; c < 3; ++c) out.weights[c][i] = num[c] / den_i;
  }
  return out;
}

inline WeightUpdate update_weights(const Raster& I, const ScalarMap& t, const Raster& J,
                                   const BasisSet& basis, double lambda4,
                                   const std::array<std::vector<double>, 3>& prev = {}) {
  const BasisTable table = tabulate_basis(basis, I.width(), I.height());
  return update_weights_tabulated(I, t, J, table, lambda4, prev);
}

}  // namespace alf
