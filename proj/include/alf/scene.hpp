#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "alf/image_io.hpp"
#include "alf/scatter.hpp"

namespace alf {

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& key, const std::string& value) {
  size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &consumed);
  } catch (const std::exception&) {
    throw ConfigError("scene: key '" + key + "' expects a number, got '" + value + "'");
  }
  if (consumed != value.size()) {
    throw ConfigError("scene: key '" + key + "' expects a number, got '" + value + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("scene: key '" + key + "' expects true or false, got '" + value + "'");
}

inline uint64_t parse_uint(const std::string& key, const std::string& value) {
  size_t consumed = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &consumed);
  } catch (const std::exception&) {
    throw ConfigError("scene: key '" + key + "' expects a non-negative integer, got '" +
                      value + "'");
  }
  if (consumed != value.size() || value[0] == '-') {
    throw ConfigError("scene: key '" + key + "' expects a non-negative integer, got '" +
                      value + "'");
  }
  return v;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  size_t start = 0;
  while (start <= value.size()) {
    const size_t comma = value.find(',', start);
    const std::string item =
        trim(value.substr(start, comma == std::string::npos ? comma : comma - start));
    if (item.empty()) {
      throw ConfigError("scene: key '" + key + "' has an empty list element");
    }
    out.push_back(parse_double(key, item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Parses a flat `key = value` config. Blank lines are skipped, `#` starts a
/// comment, keys must be unique. Returns the pairs in an ordered map.
inline std::map<std::string, std::string> parse_key_values(std::istream& is,
                                                           const std::string& origin) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!out.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                        key + "'");
    }
  }
  return out;
}

/// Loads a synthetic-scene description. Recognized keys:
///   clear = <image path>                      required
///   depth = <scalar map path>                 exclusive with t_map, needs beta
///   t_map = <scalar map path>
///   beta = <float>                            extinction coefficient
///   airlight.constant = r,g,b                 each in [0,1]
///   airlight.order = <int>                    polynomial airlight instead
///   airlight.cross_terms = true|false         default false
///   airlight.weights.r|g|b = <comma list>     one weight per basis member
///   noise_sigma = <float >= 0>                default 0
///   quantize = true|false                     default false
///   seed = <uint>                             default 0
/// File paths are resolved relative to the config file's directory.
inline SyntheticSceneSpec load_scene_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(IoError::Kind::NotFound, "cannot open scene config " + path);
  auto kv = parse_key_values(is, path);

  static const char* known[] = {"clear",
                                "depth",
                                "t_map",
                                "beta",
                                "airlight.constant",
                                "airlight.order",
                                "airlight.cross_terms",
                                "airlight.weights.r",
                                "airlight.weights.g",
                                "airlight.weights.b",
                                "noise_sigma",
                                "quantize",
                                "seed"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("scene: unknown key '" + key + "'");
  }
  const auto has = [&](const char* key) { return kv.count(key) != 0; };
  const auto dir = std::filesystem::path(path).parent_path();
  const auto resolve = [&](const std::string& rel) {
    const std::filesystem::path p(rel);
    return (p.is_absolute() ? p : dir / p).string();
  };

  if (!has("clear")) throw ConfigError("scene: missing required key 'clear'");
  SyntheticSceneSpec spec(load_image(resolve(kv["clear"])));
  const int w = spec.clear.width();
  const int h = spec.clear.height();

  if (has("depth") && has("t_map")) {
    throw ConfigError("scene: keys 'depth' and 't_map' are mutually exclusive");
  }
  if (!has("depth") && !has("t_map")) {
    throw ConfigError("scene: one of 'depth' or 't_map' is required");
  }
  if (has("depth")) {
    if (!has("beta")) throw ConfigError("scene: 'depth' requires 'beta'");
    spec.depth = load_scalar_map(resolve(kv["depth"]));
    spec.beta = detail::parse_double("beta", kv["beta"]);
    if (!(spec.beta > 0.0)) throw ConfigError("scene: 'beta' must be > 0");
  } else {
    if (has("beta")) throw ConfigError("scene: 'beta' is only valid with 'depth'");
    spec.transmission = load_scalar_map(resolve(kv["t_map"]));
  }

  const bool basis_field = has("airlight.order") || has("airlight.cross_terms") ||
                           has("airlight.weights.r") || has("airlight.weights.g") ||
                           has("airlight.weights.b");
  if (has("airlight.constant") && basis_field) {
    throw ConfigError(
        "scene: 'airlight.constant' cannot be combined with the airlight.* basis keys");
  }
  if (has("airlight.constant")) {
    const auto rgb = detail::parse_list("airlight.constant", kv["airlight.constant"]);
    if (rgb.size() != 3) {
      throw ConfigError("scene: 'airlight.constant' expects exactly three values");
    }
    for (double v : rgb) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("scene: 'airlight.constant' components must be in [0,1]");
      }
    }
    spec.airlight = AirlightField::constant(Rgb{rgb[0], rgb[1], rgb[2]});
  } else if (basis_field) {
    if (!has("airlight.order")) {
      throw ConfigError("scene: airlight basis keys require 'airlight.order'");
    }
    const double order_v = detail::parse_double("airlight.order", kv["airlight.order"]);
    const int order = static_cast<int>(order_v);
    if (order_v != order || order < 0) {
      throw ConfigError("scene: 'airlight.order' must be a non-negative integer");
    }
    const bool cross = has("airlight.cross_terms")
                           ? detail::parse_bool("airlight.cross_terms",
                                                kv["airlight.cross_terms"])
                           : false;
    BasisSet basis = build_basis(order, cross);
    std::array<std::vector<double>, 3> weights;
    const char* wkeys[3] = {"airlight.weights.r", "airlight.weights.g",
                            "airlight.weights.b"};
    for (int c = 0; c < 3; ++c) {
      if (!has(wkeys[c])) {
        throw ConfigError(std::string("scene: missing '") + wkeys[c] + "'");
      }
      weights[c] = detail::parse_list(wkeys[c], kv[wkeys[c]]);
      if (static_cast<int>(weights[c].size()) != basis.size()) {
        throw ConfigError(std::string("scene: '") + wkeys[c] + "' expects " +
                          std::to_string(basis.size()) + " weights, got " +
                          std::to_string(weights[c].size()));
      }
    }
    spec.airlight = AirlightField::from_weights(std::move(basis), std::move(weights), w, h);
  }

  if (has("noise_sigma")) {
    spec.noise_sigma = detail::parse_double("noise_sigma", kv["noise_sigma"]);
    if (spec.noise_sigma < 0.0) throw ConfigError("scene: 'noise_sigma' must be >= 0");
  }
  if (has("quantize")) spec.quantize = detail::parse_bool("quantize", kv["quantize"]);
  if (has("seed")) spec.seed = detail::parse_uint("seed", kv["seed"]);

  spec.validate();
  return spec;
}

}  // namespace alf
