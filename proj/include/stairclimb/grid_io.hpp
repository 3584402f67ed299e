#pragma once

// Plain-text and image export for 2-D scalar grids (heightfields, critic
// heatmaps). Missing cells are NaN in memory, "nan" in CSV and 0 in PGM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace stairclimb {

struct GridView {
  int nx = 0;
  int ny = 0;
  std::span<const double> values;  // row-major, iy * nx + ix
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

/// Header row carries the x coordinate of each column's cell centre; then one
/// row per y index, lowest y first.
inline void write_grid_csv(const std::filesystem::path& path, GridView grid, double origin_x,
                           double spacing) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (int ix = 0; ix < grid.nx; ++ix) {
    if (ix) out << ',';
    out << format_double(origin_x + (ix + 0.5) * spacing);
  }
  out << '\n';
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      if (ix) out << ',';
      out << format_double(grid.values[static_cast<std::size_t>(iy) * grid.nx + ix]);
    }
    out << '\n';
  }
}

struct PgmScale {
  double offset = 0.0;  // value = offset + scale * (pixel - 1) for pixel >= 1
  double scale = 1.0;
};

/// 16-bit binary PGM (P5, big-endian). Rows are written top (max y) first so
/// the image displays with y pointing up. Valid values map affinely to
/// [1, 65535]; pixel 0 marks a missing cell.
inline PgmScale write_grid_pgm(const std::filesystem::path& path, GridView grid) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : grid.values) {
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  PgmScale scale;
  if (std::isfinite(lo)) {
    scale.offset = lo;
    scale.scale = hi > lo ? (hi - lo) / 65534.0 : 1.0;
  }
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "P5\n" << grid.nx << ' ' << grid.ny << "\n65535\n";
  for (int iy = grid.ny - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double v = grid.values[static_cast<std::size_t>(iy) * grid.nx + ix];
      std::uint16_t px = 0;
      if (!std::isnan(v)) {
        const double q = std::round((v - scale.offset) / scale.scale);
        px = static_cast<std::uint16_t>(1 + std::clamp(q, 0.0, 65534.0));
      }
      const char bytes[2] = {static_cast<char>(px >> 8), static_cast<char>(px & 0xff)};
      out.write(bytes, 2);
    }
  }
  return scale;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace stairclimb
