#pragma once

#include <stdexcept>
#include <string>

namespace alf {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// File I/O failure with a machine-readable class, so callers can tell a
/// missing file from a malformed one.
struct IoError : Error {
  enum class Kind { NotFound, Unsupported, Corrupt, Unwritable };

  IoError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
  Kind kind;
};

struct DimensionError : Error {
  using Error::Error;
};

/// Bad scene/config input (unknown key, missing required key, bad value).
struct ConfigError : Error {
  using Error::Error;
};

/// Raised when the solver hits a non-finite energy; carries the first
/// offending pixel.
struct NonFiniteError : Error {
  NonFiniteError(int px, int py, const std::string& msg)
      : Error(msg), x(px), y(py) {}
  int x;
  int y;
};

}  // namespace alf
