#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "alf/errors.hpp"
#include "alf/version.hpp"

namespace alf {

struct ManifestFile {
  std::string path;
  std::string crc32;
};

/// Reproducibility record written next to every command's outputs. Checksums
/// cover file bytes, so two runs match iff their artifacts match.
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  uint64_t seed = 0;
  double duration_seconds = 0.0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ManifestFile> inputs;
  std::vector<ManifestFile> outputs;
};

inline std::string file_crc32(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::NotFound, "cannot open " + path);
  uLong crc = crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buf),
                static_cast<uInt>(is.gcount()));
  }
  char hex[16];
  std::snprintf(hex, sizeof(hex), "%08lx", static_cast<unsigned long>(crc));
  return hex;
}

inline void add_file(std::vector<ManifestFile>& list, const std::string& path) {
  list.push_back(ManifestFile{path, file_crc32(path)});
}

inline void write_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j;
  j["command"] = m.command;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  j["duration_seconds"] = m.duration_seconds;
  j["config"] = m.config;
  const auto files = [](const std::vector<ManifestFile>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : list) arr.push_back({{"path", f.path}, {"crc32", f.crc32}});
    return arr;
  };
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoError::Kind::Unwritable, "cannot write " + path);
  os << j.dump(2) << "\n";
}

}  // namespace alf
