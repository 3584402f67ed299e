#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <unistd.h>

#include "stairclimb/terrain.hpp"

namespace stairclimb::testing {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("stairclimb_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Hand-built field of `nx` x `ny` cells; `height(x, y)` is evaluated at cell centres.
template <typename Fn>
HeightField make_field(int nx, int ny, double cell, Fn height) {
  HeightField hf;
  hf.cell_size = cell;
  hf.nx = nx;
  hf.ny = ny;
  hf.heights.resize(static_cast<std::size_t>(nx) * ny);
  hf.wall.assign(hf.heights.size(), 0);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      hf.heights[static_cast<std::size_t>(iy) * nx + ix] = height((ix + 0.5) * cell, (iy + 0.5) * cell);
    }
  }
  hf.centerline = Centerline({{0.0, 0.0}, {nx * cell, 0.0}});
  return hf;
}

inline HeightField flat_field(int n = 120, double cell = 0.05) {
  return make_field(n, n, cell, [](double, double) { return 0.0; });
}

}  // namespace stairclimb::testing
