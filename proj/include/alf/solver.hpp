#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "alf/energy.hpp"
#include "alf/parallel.hpp"
#include "alf/raster.hpp"

namespace alf {

inline void (*solver_warning_handler)(const std::string&) = nullptr;

namespace detail {
inline void solver_warn(const std::string& msg) {
  if (solver_warning_handler) {
    solver_warning_handler(msg);
  } else {
    std::fprintf(stderr, "warning: %s\n", msg.c_str());
  }
}
}  // namespace detail

enum class SolverMode { Cbr, Alf };

struct SolverConfig {
  Hyperparameters hp;
  SolverMode mode = SolverMode::Alf;
  int basis_order = 2;
  bool include_cross_terms = false;
  double step_size = 0.1;
  double step_size_j = -1.0;  // negative: follow step_size
  int max_iters = 200;
  double convergence_tol = 1e-5;
  bool clamp_iterates = true;
  int threads = 1;

  void validate() const {
    if (!(step_size > 0.0)) throw ConfigError("solver: step_size must be > 0");
    if (max_iters < 0) throw ConfigError("solver: max_iters must be >= 0");
    if (convergence_tol < 0.0) throw ConfigError("solver: convergence_tol must be >= 0");
    if (mode == SolverMode::Alf && basis_order < 0) {
      throw ConfigError("solver: basis_order must be >= 0");
    }
  }
};

struct SolverResult {
  ScalarMap transmission;
  Raster dehazed;
  AirlightField airlight;
  std::vector<EnergyBreakdown> energy_trace;
  int iterations_run = 0;
  bool converged = false;

  SolverResult(int w, int h)
      : transmission(w, h), dehazed(w, h),
        airlight(AirlightField::constant(Rgb{})) {}
};

inline std::string energy_csv_header() {
  return "iter,data,smooth_t,smooth_J,haze_level,weight_penalty,total";
}

inline std::string energy_csv_row(int iter, const EnergyBreakdown& e) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", iter,
                e.data, e.smooth_t, e.smooth_J, e.haze_level, e.weight_penalty, e.total);
  return buf;
}

namespace detail {

// Locates the first row-major pixel whose state or energy contribution is
// non-finite, for the abort diagnostic.
inline std::pair<int, int> first_non_finite_pixel(const Raster& I, const ScalarMap& t,
                                                  const Raster& J,
                                                  const std::vector<double>& A,
                                                  const Hyperparameters& hp) {
  const int w = I.width();
  const int h = I.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t p = static_cast<size_t>(y) * w + x;
      const double tv = t.data()[p];
      if (!std::isfinite(tv)) return {x, y};
      bool bad = false;
      const Rgb Ip = I.rgb(x, y);
      const Rgb Jp = J.rgb(x, y);
      const Rgb Ap{A[p * 3], A[p * 3 + 1], A[p * 3 + 2]};
      const double m = min3(Ip);
      for (int c = 0; c < 3 && !bad; ++c) {
        const double res = Ip[c] - tv * Jp[c] - (1.0 - tv) * Ap[c];
        const double num = hp.residual == ResidualVariant::MinChannel ? m : Ip[c];
        const double R = tv - 1.0 + num / Ap[c];
        bad = !std::isfinite(Jp[c]) || !std::isfinite(Ap[c]) || !std::isfinite(res) ||
              !std::isfinite(R);
      }
      if (bad) return {x, y};
    }
  }
  return {-1, -1};
}

}  // namespace detail

/// Alternating descent on (t, J, airlight):
///   1. t and J start at 0 and I; all weights start at 0.
///   2. The airlight is evaluated from the current weights.
///   3. One gradient step on t (every pixel reads the previous t iterate).
///   4. One gradient step on each J channel (same Jacobi rule), using the
///      already-updated t.
///   5. Closed-form airlight update (constant least squares in Cbr mode,
///      per-coefficient weight update in Alf mode).
///   6. Stop when the relative total-energy change stays below
///      convergence_tol for 3 consecutive iterations, or at max_iters.
/// Iterates are clamped to [0,1] after each step when clamp_iterates is set.
/// All sweeps read an immutable snapshot and reductions run in a fixed order,
/// so results are bit-identical for any thread count.
inline SolverResult run(const Raster& I, const SolverConfig& config) {
  config.validate();
  const int w = I.width();
  const int h = I.height();
  const int threads = resolve_thread_count(config.threads);
  const Hyperparameters& hp = config.hp;
  const double step_t = config.step_size;
  const double step_j = config.step_size_j > 0.0 ? config.step_size_j : config.step_size;

  const bool field_mode = config.mode == SolverMode::Alf;
  BasisSet basis;
  BasisTable table;
  std::array<std::vector<double>, 3> weights;
  Rgb a0{0.0, 0.0, 0.0};
  if (field_mode) {
    basis = build_basis(config.basis_order, config.include_cross_terms);
    table = tabulate_basis(basis, w, h);
    for (auto& wc : weights) wc.assign(basis.size(), 0.0);
  }

  ScalarMap t_cur(w, h, 0.0), t_next(w, h);
  Raster J_cur = I, J_next(w, h);
  std::vector<double> airlight(static_cast<size_t>(w) * h * 3);

  const auto render_airlight = [&] {
    if (field_mode) {
      parallel_rows(h, threads, [&](int y) {
        for (int x = 0; x < w; ++x) {
          const size_t p = (static_cast<size_t>(y) * w + x) * 3;
          const size_t q = static_cast<size_t>(y) * w + x;
          for (int c = 0; c < 3; ++c) {
            double sum = 0.0;
            for (int i = 0; i < basis.size(); ++i) {
              sum += weights[c][i] * table.values[i][q];
            }
            airlight[p + c] = std::clamp(sum, kAirlightFloor, 1.0);
          }
        }
      });
    } else {
      const Rgb clamped{std::clamp(a0.r, kAirlightFloor, 1.0),
                        std::clamp(a0.g, kAirlightFloor, 1.0),
                        std::clamp(a0.b, kAirlightFloor, 1.0)};
      parallel_rows(h, threads, [&](int y) {
        for (int x = 0; x < w; ++x) {
          const size_t p = (static_cast<size_t>(y) * w + x) * 3;
          airlight[p] = clamped.r;
          airlight[p + 1] = clamped.g;
          airlight[p + 2] = clamped.b;
        }
      });
    }
  };

  const auto current_weight_penalty = [&]() -> double {
    if (!field_mode) return 0.0;
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      for (size_t i = 1; i < weights[c].size(); ++i) sum += weights[c][i] * weights[c][i];
    }
    return sum;
  };

  const auto measure = [&]() -> EnergyBreakdown {
    return total_energy_prerendered(I, t_cur, J_cur, airlight, current_weight_penalty(),
                                    hp, threads);
  };

  SolverResult result(w, h);
  render_airlight();
  result.energy_trace.reserve(config.max_iters + 1);
  result.energy_trace.push_back(measure());

  int consecutive_small = 0;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    // t sweep: neighbours read the previous iterate.
    parallel_rows(h, threads, [&](int y) {
      for (int x = 0; x < w; ++x) {
        const size_t p = (static_cast<size_t>(y) * w + x) * 3;
        const Rgb Ap{airlight[p], airlight[p + 1], airlight[p + 2]};
        const double g =
            detail::grad_t_local(I.rgb(x, y), J_cur.rgb(x, y), Ap, t_cur.at(x, y), hp) +
            2.0 * hp.lambda1 *
                detail::neighbor_sign_sum(t_cur.data().data(), 1, w, h, x, y);
        const double stepped = t_cur.at(x, y) - step_t * g;
        t_next.at(x, y) = config.clamp_iterates ? clamp01(stepped) : stepped;
      }
    });
    std::swap(t_cur, t_next);

    // J sweep: data term sees the updated t, neighbours the previous J.
    parallel_rows(h, threads, [&](int y) {
      for (int x = 0; x < w; ++x) {
        const size_t p = (static_cast<size_t>(y) * w + x) * 3;
        const double tv = t_cur.at(x, y);
        for (int c = 0; c < 3; ++c) {
          const double g =
              detail::grad_j_local(I.data()[p + c], J_cur.data()[p + c],
                                   airlight[p + c], tv) +
              2.0 * hp.lambda2 *
                  detail::neighbor_sign_sum(J_cur.data().data() + c, 3, w, h, x, y);
          const double stepped = J_cur.data()[p + c] - step_j * g;
          J_next.data()[p + c] = config.clamp_iterates ? clamp01(stepped) : stepped;
        }
      }
    });
    std::swap(J_cur, J_next);

    if (field_mode) {
      WeightUpdate upd =
          update_weights_tabulated(I, t_cur, J_cur, table, hp.lambda4, weights);
      if (upd.degenerate_count > 0) {
        detail::solver_warn("iteration " + std::to_string(iter) + ": " +
                            std::to_string(upd.degenerate_count) +
                            " weight denominator(s) degenerate, coefficients kept");
      }
      weights = std::move(upd.weights);
    } else {
      if (auto a = update_constant_airlight(I, t_cur, J_cur)) {
        a0 = *a;
      } else {
        detail::solver_warn("iteration " + std::to_string(iter) +
                            ": constant-airlight denominator degenerate, value kept");
      }
    }
    render_airlight();

    result.energy_trace.push_back(measure());
    result.iterations_run = iter;

    const EnergyBreakdown& cur = result.energy_trace.back();
    if (!std::isfinite(cur.total)) {
      const auto [bx, by] = detail::first_non_finite_pixel(I, t_cur, J_cur, airlight, hp);
      throw NonFiniteError(bx, by,
                           "solver: non-finite energy at iteration " + std::to_string(iter) +
                               ", first offending pixel (" + std::to_string(bx) + "," +
                               std::to_string(by) + ")");
    }

    const double prev_total = result.energy_trace[result.energy_trace.size() - 2].total;
    const double rel =
        std::fabs(prev_total - cur.total) / std::max(std::fabs(prev_total), 1e-12);
    consecutive_small = rel < config.convergence_tol ? consecutive_small + 1 : 0;
    if (consecutive_small >= 3) {
      result.converged = true;
      break;
    }
  }

  result.transmission = std::move(t_cur);
  result.dehazed = std::move(J_cur);
  result.airlight = field_mode
                        ? AirlightField::from_weights(std::move(basis), std::move(weights), w, h)
                        : AirlightField::constant(a0);
  return result;
}

inline void energy_trace_csv(const SolverResult& result, std::ostream& os) {
  os << energy_csv_header() << "\n";
  for (size_t i = 0; i < result.energy_trace.size(); ++i) {
    os << energy_csv_row(static_cast<int>(i), result.energy_trace[i]) << "\n";
  }
}

inline void energy_trace_csv(const SolverResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoError::Kind::Unwritable, "cannot write " + path);
  energy_trace_csv(result, os);
}

}  // namespace alf
