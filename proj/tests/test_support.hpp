#pragma once

// Small helpers shared by the unit tests.

#include <cmath>
#include <filesystem>
#include <string>

#include "voxdiff/mesh.hpp"
#include "voxdiff/rng.hpp"
#include "voxdiff/voxgrid.hpp"

namespace testing {

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("voxdiff_" + tag + "_" + std::to_string(voxdiff::hash_string(tag) ^ reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline voxdiff::VoxelGrid ball_grid(int n, double r, double cz, double cy, double cx) {
  voxdiff::VoxelGrid g(voxdiff::Dims3{n, n, n});
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double d2 = (z - cz) * (z - cz) + (y - cy) * (y - cy) + (x - cx) * (x - cx);
        g.at(z, y, x) = d2 <= r * r ? 1.0 : 0.0;
      }
  return g;
}

inline voxdiff::VoxelGrid centered_ball(int n, double r) {
  const double c = 0.5 * (n - 1);
  return ball_grid(n, r, c, c, c);
}

inline voxdiff::VoxelGrid random_binary(voxdiff::Dims3 d, double p, voxdiff::Rng& rng) {
  voxdiff::VoxelGrid g(d);
  for (double& v : g.values()) v = rng.uniform() < p ? 1.0 : 0.0;
  return g;
}

inline voxdiff::Image2D disc_mask(int n, double r) {
  voxdiff::Image2D m(n, n);
  const double c = 0.5 * (n - 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.at(y, x) = (y - c) * (y - c) + (x - c) * (x - c) <= r * r ? 1.0 : 0.0;
  return m;
}

inline voxdiff::SurfaceMesh unit_cube() {
  voxdiff::SurfaceMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  // Outward winding, two triangles per face.
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

}  // namespace testing
