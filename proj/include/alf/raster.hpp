#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "alf/errors.hpp"

namespace alf {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }
  double& operator[](int c) { return c == 0 ? r : (c == 1 ? g : b); }
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

namespace detail {
inline void check_dims(int width, int height, const char* what) {
  if (width < 1 || height < 1) {
    throw DimensionError(std::string(what) + ": dimensions must be positive, got " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
}
}  // namespace detail

/// RGB image with channels stored interleaved, row-major. Channel values are
/// real; file I/O and the synthesizer keep them in [0,1], solver iterates may
/// leave that range transiently when clamping is disabled.
class Raster {
 public:
  Raster(int width, int height, Rgb fill = Rgb{})
      : width_(width), height_(height) {
    detail::check_dims(width, height, "Raster");
    data_.resize(static_cast<size_t>(width) * height * 3);
    for (size_t p = 0; p < data_.size(); p += 3) {
      data_[p] = fill.r;
      data_[p + 1] = fill.g;
      data_[p + 2] = fill.b;
    }
  }

  static Raster from_data(int width, int height, std::vector<double> interleaved) {
    detail::check_dims(width, height, "Raster");
    if (interleaved.size() != static_cast<size_t>(width) * height * 3) {
      throw DimensionError("Raster::from_data: buffer size does not match dimensions");
    }
    Raster r(width, height);
    r.data_ = std::move(interleaved);
    return r;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int pixel_count() const { return width_ * height_; }

  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
  double& at(int x, int y, int c) { return data_[index(x, y, c)]; }

  Rgb rgb(int x, int y) const {
    const size_t p = index(x, y, 0);
    return Rgb{data_[p], data_[p + 1], data_[p + 2]};
  }
  void set_rgb(int x, int y, Rgb v) {
    const size_t p = index(x, y, 0);
    data_[p] = v.r;
    data_[p + 1] = v.g;
    data_[p + 2] = v.b;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool in_unit_range() const {
    for (double v : data_) {
      if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  size_t index(int x, int y, int c) const {
    return (static_cast<size_t>(y) * width_ + x) * 3 + c;
  }

 private:
  int width_;
  int height_;
  std::vector<double> data_;
};

/// Single-channel map matching a Raster's grid; holds transmissions, depths,
/// masks and per-channel airlight slices.
class ScalarMap {
 public:
  ScalarMap(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    detail::check_dims(width, height, "ScalarMap");
    data_.assign(static_cast<size_t>(width) * height, fill);
  }

  static ScalarMap from_data(int width, int height, std::vector<double> values) {
    detail::check_dims(width, height, "ScalarMap");
    if (values.size() != static_cast<size_t>(width) * height) {
      throw DimensionError("ScalarMap::from_data: buffer size does not match dimensions");
    }
    ScalarMap m(width, height);
    m.data_ = std::move(values);
    return m;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int pixel_count() const { return width_ * height_; }

  double at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }
  double& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool in_unit_range() const {
    for (double v : data_) {
      if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
  }

 private:
  int width_;
  int height_;
  std::vector<double> data_;
};

inline void require_same_size(const Raster& a, const Raster& b, const char* ctx) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(ctx) + ": raster sizes differ");
  }
}

inline void require_same_size(const Raster& a, const ScalarMap& b, const char* ctx) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(ctx) + ": raster and map sizes differ");
  }
}

inline void require_same_size(const ScalarMap& a, const ScalarMap& b, const char* ctx) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(ctx) + ": map sizes differ");
  }
}

}  // namespace alf
