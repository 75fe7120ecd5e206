#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "alf/raster.hpp"

namespace alf {

/// PSNR is reported on a [0,1] signal range and capped at 99 dB; the cap also
/// stands in for the infinite value of an exact match.
inline constexpr double kPsnrCap = 99.0;

inline double mse(const Raster& a, const Raster& b) {
  require_same_size(a, b, "mse");
  double sum = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data().size());
}

inline double psnr_from_mse(double mse_value) {
  if (mse_value < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse_value));
}

inline double psnr(const Raster& a, const Raster& b) {
  return psnr_from_mse(mse(a, b));
}

inline double mean_abs_diff(const ScalarMap& a, const ScalarMap& b) {
  require_same_size(a, b, "mean_abs_diff");
  double sum = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    sum += std::fabs(a.data()[i] - b.data()[i]);
  }
  return sum / static_cast<double>(a.data().size());
}

inline double mean_abs_diff(const Raster& a, const Raster& b) {
  require_same_size(a, b, "mean_abs_diff");
  double sum = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    sum += std::fabs(a.data()[i] - b.data()[i]);
  }
  return sum / static_cast<double>(a.data().size());
}

/// Population variance of the masked pixels, averaged over channels. The mask
/// must be binary (every value exactly 0 or 1) and select at least one pixel.
inline double masked_variance(const Raster& img, const ScalarMap& mask) {
  require_same_size(img, mask, "masked_variance");
  size_t count = 0;
  for (size_t i = 0; i < mask.data().size(); ++i) {
    const double m = mask.data()[i];
    if (m != 0.0 && m != 1.0) {
      throw Error("masked_variance: mask must contain only 0 and 1");
    }
    count += m == 1.0;
  }
  if (count == 0) throw Error("masked_variance: mask selects no pixels");

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (size_t p = 0; p < mask.data().size(); ++p) {
      if (mask.data()[p] == 1.0) mean += img.data()[p * 3 + c];
    }
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (size_t p = 0; p < mask.data().size(); ++p) {
      if (mask.data()[p] == 1.0) {
        const double d = img.data()[p * 3 + c] - mean;
        var += d * d;
      }
    }
    total += var / static_cast<double>(count);
  }
  return total / 3.0;
}

/// Comparison summary; fields without an input stay NaN and print as n/a in
/// the table and nan in the CSV.
struct EvalReport {
  double mse = std::numeric_limits<double>::quiet_NaN();
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double t_mae = std::numeric_limits<double>::quiet_NaN();
  double a_mae = std::numeric_limits<double>::quiet_NaN();
  double sky_variance = std::numeric_limits<double>::quiet_NaN();
};

inline std::string eval_csv_header() { return "mse,psnr,t_mae,a_mae,sky_variance"; }

inline std::string eval_csv_row(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g", r.mse, r.psnr,
                r.t_mae, r.a_mae, r.sky_variance);
  return buf;
}

inline void print_eval_report(const EvalReport& r, std::ostream& os) {
  const auto line = [&](const char* name, double v, const char* unit) {
    char buf[128];
    if (std::isnan(v)) {
      std::snprintf(buf, sizeof(buf), "%-14s n/a", name);
    } else {
      std::snprintf(buf, sizeof(buf), "%-14s %.6f%s", name, v, unit);
    }
    os << buf << "\n";
  };
  line("mse", r.mse, "");
  line("psnr", r.psnr, " dB");
  line("t_mae", r.t_mae, "");
  line("a_mae", r.a_mae, "");
  line("sky_variance", r.sky_variance, "");
}

}  // namespace alf
