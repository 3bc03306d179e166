#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "test_support.hpp"
#include "voxdiff/mesh.hpp"

using namespace voxdiff;
constexpr double kPi = std::numbers::pi;

namespace {

// Subdivided icosahedron projected onto a sphere of radius r.
SurfaceMesh icosphere(int levels, double r) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  SurfaceMesh m;
  for (auto v : {Eigen::Vector3d(-1, p, 0), Eigen::Vector3d(1, p, 0), Eigen::Vector3d(-1, -p, 0),
                 Eigen::Vector3d(1, -p, 0), Eigen::Vector3d(0, -1, p), Eigen::Vector3d(0, 1, p),
                 Eigen::Vector3d(0, -1, -p), Eigen::Vector3d(0, 1, -p), Eigen::Vector3d(p, 0, -1),
                 Eigen::Vector3d(p, 0, 1), Eigen::Vector3d(-p, 0, -1), Eigen::Vector3d(-p, 0, 1)})
    m.vertices.push_back(v.normalized());
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < levels; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const int id = static_cast<int>(m.vertices.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& t : m.triangles) {
      const int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    m.triangles = std::move(next);
  }
  for (auto& v : m.vertices) v *= r;
  return m;
}

VoxelGrid sphere_sdf(int n, double r) {
  VoxelGrid g(Dims3{n, n, n});
  const double c = 0.5 * (n - 1);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        g.at(z, y, x) = r - std::sqrt((z - c) * (z - c) + (y - c) * (y - c) + (x - c) * (x - c));
  return g;
}

VoxelGrid rotate_xy(const VoxelGrid& g) {
  VoxelGrid out(Dims3{g.depth(), g.width(), g.height()});
  for (int z = 0; z < g.depth(); ++z)
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) out.at(z, x, g.height() - 1 - y) = g.at(z, y, x);
  return out;
}

}  // namespace

TEST_CASE("unit cube") {
  const SurfaceMesh cube = testing::unit_cube();
  const MeshTopology topo = mesh_topology(cube);
  CHECK(topo.closed);
  CHECK(topo.consistently_oriented);
  CHECK(topo.euler_characteristic() == 2);
  CHECK(mesh_volume(cube) == doctest::Approx(1.0));
  CHECK(surface_area(cube) == doctest::Approx(6.0));
  const CurvatureStats cs = curvature_stats(cube);
  CHECK(cs.total_deficit == doctest::Approx(4 * kPi));
  CHECK(cs.mean_deficit == doctest::Approx(kPi / 2));
  CHECK(cs.std_deficit == doctest::Approx(0.0));
}

TEST_CASE("open meshes are rejected") {
  SurfaceMesh open = testing::unit_cube();
  open.triangles.pop_back();
  CHECK_FALSE(mesh_topology(open).closed);
  CHECK_THROWS_AS(mesh_volume(open), Error);
  CHECK_THROWS_AS(curvature_stats(open), Error);
  CHECK_THROWS_AS(surface_roughness(open, 10), Error);
}

TEST_CASE("marching cubes basics") {
  VoxelGrid dot(Dims3{3, 3, 3});
  dot.at(1, 1, 1) = 1.0;
  const SurfaceMesh m = marching_cubes(dot, 0.5);
  const MeshTopology t = mesh_topology(m);
  CHECK(t.closed);
  CHECK(t.consistently_oriented);
  CHECK(t.euler_characteristic() == 2);
  CHECK(mesh_volume(m) > 0.0);

  try {
    marching_cubes(VoxelGrid(Dims3{4, 4, 4}), 0.5);
    FAIL("expected EmptySurface");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptySurface);
  }
  CHECK(voxel_volume(VoxelGrid(Dims3{64, 64, 64}, 1.0)) == 262144.0);
}

TEST_CASE("sphere measurements") {
  const double vol = 4.0 / 3.0 * kPi * 1000.0, area = 4 * kPi * 100.0;
  SUBCASE("binary sphere volume") {
    const VoxelGrid ball = testing::centered_ball(32, 10.0);
    const SurfaceMesh raw = marching_cubes(ball, 0.5);
    CHECK(std::abs(mesh_volume(raw) - vol) / vol < 0.05);
    CHECK(std::abs(mesh_volume(raw) - voxel_volume(ball)) / voxel_volume(ball) < 0.06);
    const SurfaceMesh metric = mesh_for_metrics(ball);
    CHECK(std::abs(mesh_volume(metric) - vol) / vol < 0.05);
  }
  SUBCASE("signed distance sphere area") {
    const SurfaceMesh m = marching_cubes(sphere_sdf(32, 10.0), 0.0);
    CHECK(std::abs(surface_area(m) - area) / area < 0.03);
    CHECK(std::abs(mesh_volume(m) - vol) / vol < 0.02);
  }
  SUBCASE("hard binary sphere after five smoothing passes") {
    const SurfaceMesh m = laplacian_smooth(marching_cubes(testing::centered_ball(32, 10.0), 0.5), 5);
    CHECK(std::abs(surface_area(m) - area) / area < 0.08);
  }
}

TEST_CASE("roughness") {
  SUBCASE("smooth analytic sphere") {
    const SurfaceMesh s = icosphere(4, 10.0);
    REQUIRE(mesh_topology(s).closed);
    CHECK(surface_roughness(s, 10) < 0.15);
  }
  SUBCASE("translation invariance") {
    const SurfaceMesh m = mesh_for_metrics(synth_shape(ShapeClass::Spiky, 32, 4).target.value());
    SurfaceMesh moved = m;
    for (auto& v : moved.vertices) v += Eigen::Vector3d(3.0, -7.0, 11.0);
    CHECK(surface_roughness(moved, 10) == doctest::Approx(surface_roughness(m, 10)).epsilon(1e-9));
  }
  SUBCASE("spiky shapes are rougher than their ball") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SynthResult spiky = synth_shape_detailed(ShapeClass::Spiky, 32, seed);
      const double c = 0.5 * 31;
      const VoxelGrid ball = testing::ball_grid(32, spiky.params.radius, c, c, c);
      const SurfaceMesh ms = mesh_for_metrics(*spiky.sample.target);
      const SurfaceMesh mb = mesh_for_metrics(ball);
      CHECK(surface_roughness(ms, 10) > surface_roughness(mb, 10));
    }
  }
  SUBCASE("spiky shapes carry more absolute angle deficit than their ball") {
    // At 32^3 some ball radii facet badly enough to swamp the bumps, so use 48^3.
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SynthResult spiky = synth_shape_detailed(ShapeClass::Spiky, 48, seed);
      const double c = 0.5 * 47;
      const VoxelGrid ball = testing::ball_grid(48, spiky.params.radius, c, c, c);
      CHECK(curvature_stats(mesh_for_metrics(*spiky.sample.target)).total_abs_deficit >
            curvature_stats(mesh_for_metrics(ball)).total_abs_deficit);
    }
  }
  CHECK_THROWS_AS(surface_roughness(testing::unit_cube(), 0), Error);
}

TEST_CASE("Gauss-Bonnet and manifold checks on random blobs") {
  Rng r(12);
  for (int i = 0; i < 40; ++i) {
    VoxelGrid g = testing::random_binary(Dims3{8, 9, 10}, 0.45, r);
    g.at(4, 4, 4) = 1.0;
    for (bool smooth : {false, true}) {
      const SurfaceMesh m = smooth ? mesh_for_metrics(g) : marching_cubes(g, 0.5);
      const MeshTopology t = mesh_topology(m);
      REQUIRE(t.closed);
      CHECK(t.consistently_oriented);
      CHECK(min_triangle_area(m) > 1e-12);
      CHECK(curvature_stats(m).total_deficit == doctest::Approx(2 * kPi * t.euler_characteristic()).epsilon(1e-9));
      CHECK(mesh_volume(m) > 0.0);
    }
  }
  for (ShapeClass c : {ShapeClass::Ball, ShapeClass::Biconcave, ShapeClass::Spiky, ShapeClass::Elongated}) {
    const SurfaceMesh m = mesh_for_metrics(*synth_shape(c, 32, 1).target);
    const MeshTopology t = mesh_topology(m);
    CHECK(t.euler_characteristic() == 2);
    CHECK(std::abs(curvature_stats(m).total_deficit - 4 * kPi) < 1e-6);
  }
}

TEST_CASE("scaling a mesh") {
  const SurfaceMesh m = mesh_for_metrics(synth_shape(ShapeClass::Biconcave, 32, 2).target.value());
  SurfaceMesh big = m;
  for (auto& v : big.vertices) v *= 2.5;
  CHECK(mesh_volume(big) == doctest::Approx(std::pow(2.5, 3) * mesh_volume(m)).epsilon(1e-9));
  CHECK(surface_area(big) == doctest::Approx(6.25 * surface_area(m)).epsilon(1e-9));
}

TEST_CASE("quarter turns barely change the measurements") {
  const VoxelGrid g = *synth_shape(ShapeClass::Elongated, 32, 5).target;
  const VoxelGrid rot = rotate_xy(g);
  CHECK(voxel_volume(rot) == voxel_volume(g));
  const SurfaceMesh a = mesh_for_metrics(g), b = mesh_for_metrics(rot);
  CHECK(std::abs(surface_area(a) - surface_area(b)) / surface_area(a) < 0.02);
  CHECK(std::abs(mesh_volume(a) - mesh_volume(b)) / mesh_volume(a) < 0.02);
}

TEST_CASE("blur and OBJ export") {
  VoxelGrid g(Dims3{9, 9, 9});
  g.at(4, 4, 4) = 1.0;
  const VoxelGrid b = gaussian_blur(g, 1.0);
  double total = 0;
  for (double v : b.values()) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(b.at(4, 4, 4) > b.at(4, 4, 5));
  CHECK_THROWS_AS(gaussian_blur(g, 0.0), Error);

  testing::TempDir dir("obj");
  write_obj(testing::unit_cube(), dir / "c.obj");
  std::ifstream in(dir / "c.obj");
  int v = 0, f = 0;
  std::string line;
  while (std::getline(in, line)) {
    v += line.rfind("v ", 0) == 0;
    f += line.rfind("f ", 0) == 0;
  }
  CHECK(v == 8);
  CHECK(f == 12);
}
