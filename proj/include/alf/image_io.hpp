#pragma once

#include <png.h>

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "alf/errors.hpp"
#include "alf/raster.hpp"

namespace alf {

/// Hook for non-fatal I/O warnings (e.g. out-of-range samples clamped on
/// save). Replaceable by tests; defaults to stderr.
inline void (*io_warning_handler)(const std::string&) = nullptr;

namespace detail {

inline void io_warn(const std::string& msg) {
  if (io_warning_handler) {
    io_warning_handler(msg);
  } else {
    std::fprintf(stderr, "warning: %s\n", msg.c_str());
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_for_read(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError(IoError::Kind::NotFound, "cannot open " + path);
  return FilePtr(f);
}

inline FilePtr open_for_write(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError(IoError::Kind::Unwritable, "cannot write " + path);
  return FilePtr(f);
}

// Round half-up to 8 bits after clamping; counts samples that needed the clamp.
inline uint8_t quantize8(double v, long* clamped) {
  if (v < 0.0 || v > 1.0) {
    ++*clamped;
    v = clamp01(v);
  }
  return static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
}

// --- PNG ---------------------------------------------------------------

// Decodes an 8-bit PNG into interleaved bytes with `channels` = 1 (gray) or
// 3 (rgb). Gray/palette/alpha inputs are expanded or stripped; 16-bit depth
// is refused as unsupported.
inline void read_png(const std::string& path, std::vector<uint8_t>& out,
                     int& width, int& height, int channels) {
  FilePtr file = open_for_read(path);
  uint8_t sig[8] = {};
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(IoError::Kind::Unsupported, path + ": not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng allocation failed");
  }

  // Everything the error path needs is allocated before setjmp.
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(IoError::Kind::Corrupt, path + ": corrupt PNG data");
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(IoError::Kind::Unsupported, path + ": 16-bit PNG not supported");
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (channels == 3) {
    png_set_gray_to_rgb(png);
  } else if (color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(IoError::Kind::Unsupported, path + ": expected a grayscale PNG");
  }
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<size_t>(width) * channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(IoError::Kind::Unsupported, path + ": unexpected PNG layout");
  }

  out.resize(static_cast<size_t>(width) * height * channels);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = out.data() + static_cast<size_t>(y) * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

inline void write_png(const std::string& path, const std::vector<uint8_t>& bytes,
                      int width, int height, int channels) {
  FilePtr file = open_for_write(path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng allocation failed");
  }

  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * width * channels);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(IoError::Kind::Unwritable, path + ": PNG write failed");
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// --- PPM (binary P6) ---------------------------------------------------

inline int ppm_next_int(std::FILE* f, const std::string& path) {
  int ch = std::fgetc(f);
  for (;;) {
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = std::fgetc(f);
    } else if (std::isspace(ch)) {
      ch = std::fgetc(f);
    } else {
      break;
    }
  }
  if (ch == EOF || !std::isdigit(ch)) {
    throw IoError(IoError::Kind::Corrupt, path + ": bad PPM header");
  }
  int value = 0;
  while (std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    ch = std::fgetc(f);
  }
  return value;
}

inline void read_ppm(const std::string& path, std::vector<uint8_t>& out,
                     int& width, int& height) {
  FilePtr file = open_for_read(path);
  char magic[2] = {};
  if (std::fread(magic, 1, 2, file.get()) != 2 || magic[0] != 'P' || magic[1] != '6') {
    throw IoError(IoError::Kind::Unsupported, path + ": not a binary PPM (P6)");
  }
  width = ppm_next_int(file.get(), path);
  height = ppm_next_int(file.get(), path);
  const int maxval = ppm_next_int(file.get(), path);
  if (width < 1 || height < 1) {
    throw IoError(IoError::Kind::Corrupt, path + ": bad PPM dimensions");
  }
  if (maxval != 255) {
    throw IoError(IoError::Kind::Unsupported, path + ": only maxval 255 PPM supported");
  }
  // Header ends with exactly one whitespace byte (already consumed by the
  // integer scanner's lookahead).
  out.resize(static_cast<size_t>(width) * height * 3);
  if (std::fread(out.data(), 1, out.size(), file.get()) != out.size()) {
    throw IoError(IoError::Kind::Corrupt, path + ": truncated PPM data");
  }
}

// --- PFM (grayscale "Pf") ----------------------------------------------

inline std::string pfm_token(std::FILE* f, const std::string& path) {
  int ch = std::fgetc(f);
  while (std::isspace(ch)) ch = std::fgetc(f);
  if (ch == EOF) throw IoError(IoError::Kind::Corrupt, path + ": truncated PFM header");
  std::string tok;
  while (ch != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(ch));
    ch = std::fgetc(f);
  }
  return tok;
}

}  // namespace detail

/// Loads an RGB image from PNG or binary PPM; 8-bit samples are divided by
/// 255 with no gamma transform. The container format is sniffed from the
/// file's magic bytes, not its extension.
inline Raster load_image(const std::string& path) {
  {
    detail::FilePtr probe = detail::open_for_read(path);
    uint8_t magic[2] = {};
    const size_t got = std::fread(magic, 1, 2, probe.get());
    if (got == 2 && magic[0] == 'P' && magic[1] == '6') {
      int w = 0, h = 0;
      std::vector<uint8_t> bytes;
      detail::read_ppm(path, bytes, w, h);
      std::vector<double> data(bytes.size());
      for (size_t i = 0; i < bytes.size(); ++i) data[i] = bytes[i] / 255.0;
      return Raster::from_data(w, h, std::move(data));
    }
    if (got < 2 || !(magic[0] == 0x89 && magic[1] == 'P')) {
      throw IoError(IoError::Kind::Unsupported, path + ": unrecognized image format");
    }
  }
  int w = 0, h = 0;
  std::vector<uint8_t> bytes;
  detail::read_png(path, bytes, w, h, 3);
  std::vector<double> data(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) data[i] = bytes[i] / 255.0;
  return Raster::from_data(w, h, std::move(data));
}

/// Writes an 8-bit RGB PNG. Samples are clamped to [0,1] (with a warning when
/// any actually were out of range) and rounded half-up.
inline void save_image(const Raster& raster, const std::string& path) {
  long clamped = 0;
  std::vector<uint8_t> bytes(raster.data().size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = detail::quantize8(raster.data()[i], &clamped);
  }
  if (clamped > 0) {
    detail::io_warn(path + ": " + std::to_string(clamped) +
                    " sample(s) outside [0,1] were clamped");
  }
  detail::write_png(path, bytes, raster.width(), raster.height(), 3);
}

/// Writes a map as lossless grayscale PFM (.pfm, little-endian, scale -1.0)
/// or as a linear 8-bit grayscale PNG (.png).
inline void save_scalar_map(const ScalarMap& map, const std::string& path) {
  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".pfm") {
    detail::FilePtr file = detail::open_for_write(path);
    std::fprintf(file.get(), "Pf\n%d %d\n-1.0\n", map.width(), map.height());
    // PFM scanlines run bottom-to-top.
    std::vector<float> row(map.width());
    for (int y = map.height() - 1; y >= 0; --y) {
      for (int x = 0; x < map.width(); ++x) row[x] = static_cast<float>(map.at(x, y));
      if (std::fwrite(row.data(), sizeof(float), row.size(), file.get()) != row.size()) {
        throw IoError(IoError::Kind::Unwritable, path + ": PFM write failed");
      }
    }
    return;
  }
  if (ext == ".png") {
    long clamped = 0;
    std::vector<uint8_t> bytes(map.data().size());
    for (size_t i = 0; i < bytes.size(); ++i) {
      bytes[i] = detail::quantize8(map.data()[i], &clamped);
    }
    if (clamped > 0) {
      detail::io_warn(path + ": " + std::to_string(clamped) +
                      " sample(s) outside [0,1] were clamped");
    }
    detail::write_png(path, bytes, map.width(), map.height(), 1);
    return;
  }
  throw IoError(IoError::Kind::Unsupported, path + ": unsupported map extension '" + ext + "'");
}

/// Reads a grayscale map back from PFM or 8-bit grayscale PNG (PNG samples
/// divided by 255).
inline ScalarMap load_scalar_map(const std::string& path) {
  {
    detail::FilePtr probe = detail::open_for_read(path);
    uint8_t magic[2] = {};
    const size_t got = std::fread(magic, 1, 2, probe.get());
    if (got == 2 && magic[0] == 0x89 && magic[1] == 'P') {
      int w = 0, h = 0;
      std::vector<uint8_t> bytes;
      detail::read_png(path, bytes, w, h, 1);
      std::vector<double> data(bytes.size());
      for (size_t i = 0; i < bytes.size(); ++i) data[i] = bytes[i] / 255.0;
      return ScalarMap::from_data(w, h, std::move(data));
    }
    if (got < 2 || magic[0] != 'P') {
      throw IoError(IoError::Kind::Unsupported, path + ": unrecognized map format");
    }
    if (magic[1] == 'F') {
      throw IoError(IoError::Kind::Unsupported, path + ": color PFM not supported");
    }
    if (magic[1] != 'f') {
      throw IoError(IoError::Kind::Unsupported, path + ": unrecognized map format");
    }
  }
  detail::FilePtr file = detail::open_for_read(path);
  std::fgetc(file.get());  // 'P'
  std::fgetc(file.get());  // 'f'
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(detail::pfm_token(file.get(), path));
    h = std::stoi(detail::pfm_token(file.get(), path));
    scale = std::stod(detail::pfm_token(file.get(), path));
  } catch (const std::exception&) {
    throw IoError(IoError::Kind::Corrupt, path + ": bad PFM header");
  }
  if (w < 1 || h < 1 || scale == 0.0) {
    throw IoError(IoError::Kind::Corrupt, path + ": bad PFM header");
  }
  const bool little_endian = scale < 0.0;
  std::vector<float> row(w);
  std::vector<double> data(static_cast<size_t>(w) * h);
  for (int y = h - 1; y >= 0; --y) {
    if (std::fread(row.data(), sizeof(float), row.size(), file.get()) != row.size()) {
      throw IoError(IoError::Kind::Corrupt, path + ": truncated PFM data");
    }
    if (!little_endian) {
      for (float& v : row) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
    }
    for (int x = 0; x < w; ++x) data[static_cast<size_t>(y) * w + x] = row[x];
  }
  return ScalarMap::from_data(w, h, std::move(data));
}

}  // namespace alf
