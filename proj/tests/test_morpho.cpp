#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "test_support.hpp"
#include "voxdiff/hull.hpp"
#include "voxdiff/morpho.hpp"

using namespace voxdiff;

namespace {

double feature(const FeatureVector& f, const std::string& name) {
  const auto it = std::find(f.names.begin(), f.names.end(), name);
  REQUIRE(it != f.names.end());
  return f.values[static_cast<std::size_t>(it - f.names.begin())];
}

VoxelGrid shifted(const VoxelGrid& g, int dz, int dy, int dx) {
  VoxelGrid out(g.dims());
  for (int z = 0; z < g.depth(); ++z)
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) {
        const int zz = z + dz, yy = y + dy, xx = x + dx;
        if (zz < 0 || yy < 0 || xx < 0 || zz >= g.depth() || yy >= g.height() || xx >= g.width()) continue;
        out.at(zz, yy, xx) = g.at(z, y, x);
      }
  return out;
}

Prior2D shifted(const Prior2D& p, int dy, int dx) {
  Prior2D out;
  out.mask = Image2D(p.height(), p.width());
  out.fluorescence = Image2D(p.height(), p.width());
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) {
      const int yy = y + dy, xx = x + dx;
      if (yy < 0 || xx < 0 || yy >= p.height() || xx >= p.width()) continue;
      out.mask.at(yy, xx) = p.mask.at(y, x);
      out.fluorescence.at(yy, xx) = p.fluorescence.at(y, x);
    }
  return out;
}

}  // namespace

TEST_CASE("registry") {
  const auto& names = feature_names();
  CHECK(names.size() == 37);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
}

TEST_CASE("sphericity formula") {
  const double r = 3.0;
  CHECK(sphericity(4.0 / 3.0 * std::numbers::pi * r * r * r, 4 * std::numbers::pi * r * r) == doctest::Approx(1.0));
  // Unit cube: pi^(1/3) 6^(2/3) / 6.
  CHECK(sphericity(1.0, 6.0) == doctest::Approx(std::cbrt(std::numbers::pi / 6.0)));
}

TEST_CASE("ball features") {
  const VoxelGrid ball = testing::centered_ball(32, 10.0);
  const FeatureVector f = extract_features(ball, extract_prior(ball));
  CHECK(f.values.size() == feature_names().size());
  CHECK(f.names == feature_names());
  for (double v : f.values) CHECK(std::isfinite(v));
  CHECK(feature(f, "sphericity") >= 0.9);
  CHECK(feature(f, "sphericity") <= 1.0);
  CHECK(feature(f, "voxel_volume") == ball.foreground_count());
  std::set<int> zs;
  for (int z = 0; z < 32; ++z)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (ball.at(z, y, x) > 0.5) zs.insert(z);
  CHECK(feature(f, "extent_depth") == static_cast<double>(zs.size()));
  CHECK(feature(f, "extent_depth") == feature(f, "extent_width"));
  CHECK(feature(f, "pca_ratio_minor") == doctest::Approx(1.0).epsilon(0.02));
  CHECK(feature(f, "pca_axis_major") == doctest::Approx(20.0).epsilon(0.05));
  CHECK(feature(f, "radial_mean") == doctest::Approx(10.0).epsilon(0.05));
  CHECK(feature(f, "mask_eccentricity") < 0.1);
  double hist = 0;
  for (int b = 0; b < 8; ++b) hist += feature(f, "radial_hist_" + std::to_string(b));
  CHECK(hist == doctest::Approx(1.0));
}

TEST_CASE("convexity orders balls above spiky shapes") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const SynthResult sp = synth_shape_detailed(ShapeClass::Spiky, 32, seed);
    const double c = 15.5;
    const VoxelGrid ball = testing::ball_grid(32, sp.params.radius, c, c, c);
    const double cs = feature(extract_features(*sp.sample.target, sp.sample.prior), "convexity");
    const double cb = feature(extract_features(ball, extract_prior(ball)), "convexity");
    CHECK(cb >= cs);
    CHECK(cb <= 1.0);
  }
}

TEST_CASE("hulls") {
  std::vector<IPoint3> cube;
  for (int i = 0; i < 8; ++i) cube.push_back({i & 1, (i >> 1) & 1, (i >> 2) & 1});
  cube.push_back({0, 0, 0});
  cube.push_back({1, 1, 1});
  CHECK(convex_hull_volume(cube) == doctest::Approx(1.0));
  std::vector<IPoint3> tet{{0, 0, 0}, {3, 0, 0}, {0, 3, 0}, {0, 0, 3}, {1, 1, 0}};
  CHECK(convex_hull_volume(tet) == doctest::Approx(4.5));
  CHECK(convex_hull_volume({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}}) == 0.0);
  CHECK(convex_hull_area({{0, 0}, {4, 0}, {4, 3}, {0, 3}, {2, 1}}) == doctest::Approx(12.0));

  VoxelGrid box(Dims3{5, 5, 5});
  for (int z = 1; z < 4; ++z)
    for (int y = 1; y < 3; ++y)
      for (int x = 1; x < 4; ++x) box.at(z, y, x) = 1.0;
  CHECK(voxel_hull_volume(box) == doctest::Approx(18.0));
  Image2D rect(6, 6);
  for (int y = 1; y < 3; ++y)
    for (int x = 0; x < 5; ++x) rect.at(y, x) = 1.0;
  CHECK(pixel_hull_area(rect) == doctest::Approx(10.0));

  // Random points: every input lies inside, and the hull is the same whatever the order.
  Rng r(5);
  std::vector<IPoint3> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({r.uniform_int(-20, 20), r.uniform_int(-20, 20), r.uniform_int(-20, 20)});
  const double v = convex_hull_volume(pts);
  std::reverse(pts.begin(), pts.end());
  CHECK(convex_hull_volume(pts) == doctest::Approx(v).epsilon(1e-12));
  CHECK(v <= 40.0 * 40 * 40);
}

TEST_CASE("translation leaves every feature unchanged") {
  const Sample s = synth_shape(ShapeClass::Biconcave, 32, 3);
  const FeatureVector a = extract_features(*s.target, s.prior);
  const FeatureVector b = extract_features(shifted(*s.target, 1, -2, 2), shifted(s.prior, -2, 2));
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    INFO(a.names[i]);
    CHECK(b.values[i] == doctest::Approx(a.values[i]).epsilon(1e-9));
  }
}

TEST_CASE("determinism and errors") {
  const Sample s = synth_shape(ShapeClass::Spiky, 24, 8);
  CHECK(extract_features(*s.target, s.prior).values == extract_features(*s.target, s.prior).values);
  try {
    extract_features(VoxelGrid(Dims3{8, 8, 8}), s.prior);
    FAIL("expected EmptyForeground");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyForeground);
  }
  CHECK_THROWS_AS(shape_metrics(VoxelGrid(Dims3{8, 8, 8})), Error);
}

TEST_CASE("shape metrics agree with the feature vector") {
  const Sample s = synth_shape(ShapeClass::Elongated, 32, 6);
  const ShapeMetrics m = shape_metrics(*s.target);
  const FeatureVector f = extract_features(*s.target, s.prior);
  CHECK(m.volume == feature(f, "voxel_volume"));
  CHECK(m.surface_area == doctest::Approx(feature(f, "surface_area")));
  CHECK(m.roughness == doctest::Approx(feature(f, "roughness_k10")));
  CHECK(m.curvature == doctest::Approx(feature(f, "deficit_total_abs")));
}

TEST_CASE("feature table round trip") {
  testing::TempDir dir("feat");
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 3; ++i) {
    const Sample s = synth_shape(ShapeClass::Ball, 16, static_cast<std::uint64_t>(i));
    rows.push_back({"b" + std::to_string(i), "ball", i, extract_features(*s.target, s.prior)});
  }
  write_features_csv(rows, dir / "f.csv");
  const auto back = read_features_csv(dir / "f.csv");
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].id == rows[i].id);
    CHECK(back[i].class_label == "ball");
    CHECK(back[i].fold == i);
    CHECK(back[i].features.values == rows[i].features.values);
  }
}
