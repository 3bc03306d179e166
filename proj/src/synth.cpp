#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "voxdiff/rng.hpp"
#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

std::string_view shape_class_name(ShapeClass c) noexcept {
  switch (c) {
    case ShapeClass::Ball: return "ball";
    case ShapeClass::Biconcave: return "biconcave";
    case ShapeClass::Spiky: return "spiky";
    case ShapeClass::Elongated: return "elongated";
  }
  return "unknown";
}

ShapeClass parse_shape_class(std::string_view name) {
  for (auto c : {ShapeClass::Ball, ShapeClass::Biconcave, ShapeClass::Spiky, ShapeClass::Elongated}) {
    if (shape_class_name(c) == name) return c;
  }
  throw Error(Errc::InvalidArgument, "unknown shape class '" + std::string(name) + "'");
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-9) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

// Keep only the largest 6-connected foreground component.
void keep_largest_component(VoxelGrid& grid) {
  const Dims3 d = grid.dims();
  std::vector<int> label(grid.size(), 0);
  std::vector<std::size_t> sizes{0};
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < grid.size(); ++start) {
    if (label[start] || grid.values()[start] <= 0.5) continue;
    const int id = static_cast<int>(sizes.size());
    sizes.push_back(0);
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++sizes[id];
      const int x = static_cast<int>(i % d.width);
      const int y = static_cast<int>((i / d.width) % d.height);
      const int z = static_cast<int>(i / (static_cast<std::size_t>(d.width) * d.height));
      const int nb[6][3] = {{z - 1, y, x}, {z + 1, y, x}, {z, y - 1, x},
                            {z, y + 1, x}, {z, y, x - 1}, {z, y, x + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= d.depth || n[1] >= d.height || n[2] >= d.width) continue;
        const std::size_t j = grid.index(n[0], n[1], n[2]);
        if (!label[j] && grid.values()[j] > 0.5) {
          label[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  if (sizes.size() <= 2) return;
  const int best = static_cast<int>(std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (label[i] != best) grid.values()[i] = 0.0;
  }
}

}  // namespace

SynthResult synth_shape_detailed(ShapeClass cls, int size, std::uint64_t seed) {
  if (size < 16 || size > 64) throw Error(Errc::SizeOutOfRange, "synthetic grid side must be in [16, 64]");
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls) + 1, static_cast<std::uint64_t>(size)));
  const double s = size;
  const double mid = (s - 1.0) / 2.0;
  const Vec3 c{mid + rng.uniform(-0.5, 0.5), mid + rng.uniform(-0.5, 0.5), mid + rng.uniform(-0.5, 0.5)};
  const double rmax = 0.46 * s;

  SynthParams params;
  VoxelGrid grid(Dims3{size, size, size});

  // Implicit membership test in grid coordinates (z, y, x) relative to c.
  auto fill = [&](auto&& inside) {
    for (int z = 0; z < size; ++z) {
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const Vec3 p{z - c[0], y - c[1], x - c[2]};
          if (inside(p)) grid.at(z, y, x) = 1.0;
        }
      }
    }
  };

  switch (cls) {
    case ShapeClass::Ball: {
      const double r = rng.uniform(0.2, 0.35) * s;
      params.radius = r;
      fill([&](const Vec3& p) { return dot(p, p) <= r * r; });
      break;
    }
    case ShapeClass::Biconcave: {
      // Sphere with Gaussian dimples carved from both poles along the depth axis.
      const double r = rng.uniform(0.25, 0.35) * s;
      const double depth_dimple = rng.uniform(0.45, 0.65) * r;
      const double width = rng.uniform(0.3, 0.4) * r;
      params.radius = r;
      fill([&](const Vec3& p) {
        const double rho2 = p[1] * p[1] + p[2] * p[2];
        if (rho2 + p[0] * p[0] > r * r) return false;
        const double half = std::sqrt(std::max(0.0, r * r - rho2)) -
                            depth_dimple * std::exp(-rho2 / (2.0 * width * width));
        return std::abs(p[0]) <= half;
      });
      break;
    }
    case ShapeClass::Spiky: {
      const double r = rng.uniform(0.2, 0.3) * s;
      const int k = static_cast<int>(rng.uniform_int(6, 12));
      const double ang = rng.uniform(0.25, 0.35);
      std::vector<Vec3> dirs(k);
      std::vector<double> heights(k);
      for (int i = 0; i < k; ++i) {
        dirs[i] = random_unit(rng);
        heights[i] = rng.uniform(0.3, 0.5) * r;
      }
      params.radius = r;
      params.bumps = k;
      fill([&](const Vec3& p) {
        const double n2 = dot(p, p);
        if (n2 <= r * r) return true;
        const double n = std::sqrt(n2);
        if (n > rmax) return false;
        const Vec3 u{p[0] / n, p[1] / n, p[2] / n};
        double radius = r;
        for (int i = 0; i < k; ++i) {
          const double theta = std::acos(std::clamp(dot(u, dirs[i]), -1.0, 1.0));
          radius += heights[i] * std::exp(-theta * theta / (2.0 * ang * ang));
        }
        return n <= std::min(radius, rmax);
      });
      break;
    }
    case ShapeClass::Elongated: {
      const double b = rng.uniform(0.13, 0.17) * s;
      const double ratio = rng.uniform(1.8, 2.6);
      const double a = ratio * b;
      // Long axis tilted at most 45 degrees out of the imaging plane.
      const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double elevation = rng.uniform(-std::numbers::pi / 4, std::numbers::pi / 4);
      const Vec3 axis{std::sin(elevation), std::cos(elevation) * std::sin(azimuth),
                      std::cos(elevation) * std::cos(azimuth)};
      params.radius = b;
      params.axis_ratio = ratio;
      fill([&](const Vec3& p) {
        const double along = dot(p, axis);
        const double perp2 = dot(p, p) - along * along;
        return (along * along) / (a * a) + perp2 / (b * b) <= 1.0;
      });
      break;
    }
  }

  keep_largest_component(grid);

  SynthResult out;
  out.params = params;
  out.sample.id = std::string(shape_class_name(cls)) + "_" + std::to_string(seed);
  out.sample.class_label = std::string(shape_class_name(cls));
  out.sample.prior = extract_prior(grid);
  out.sample.target = std::move(grid);
  return out;
}

Sample synth_shape(ShapeClass cls, int size, std::uint64_t seed) {
  return synth_shape_detailed(cls, size, seed).sample;
}

}  // namespace voxdiff
