#include "voxdiff/morpho.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "csv_util.hpp"
#include "voxdiff/hull.hpp"

namespace voxdiff {

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = {
        "voxel_volume",     "mesh_volume",      "surface_area",    "roughness_k5",    "roughness_k10",
        "roughness_k20",    "deficit_total_abs", "deficit_mean",   "deficit_std",     "convexity",
        "sphericity",       "extent_depth",     "extent_height",   "extent_width",    "pca_axis_major",
        "pca_axis_middle",  "pca_axis_minor",   "pca_ratio_middle", "pca_ratio_minor", "radial_min",
        "radial_max",       "radial_mean",      "radial_std",
    };
    for (int b = 0; b < 8; ++b) n.push_back("radial_hist_" + std::to_string(b));
    for (const char* s : {"mask_area", "mask_perimeter", "mask_eccentricity", "mask_solidity", "intensity_mean",
                          "intensity_std"}) {
      n.emplace_back(s);
    }
    return n;
  }();
  return names;
}

double sphericity(double volume, double area) {
  return std::cbrt(std::numbers::pi) * std::pow(6.0 * volume, 2.0 / 3.0) / area;
}

ShapeMetrics shape_metrics(const VoxelGrid& grid) {
  if (grid.foreground_count() == 0) throw Error(Errc::EmptyForeground, "no foreground voxels");
  const SurfaceMesh mesh = mesh_for_metrics(grid);
  ShapeMetrics m;
  m.volume = voxel_volume(grid);
  m.surface_area = surface_area(mesh);
  m.roughness = surface_roughness(mesh, 10);
  m.curvature = curvature_stats(mesh).total_abs_deficit;
  return m;
}

FeatureVector extract_features(const VoxelGrid& grid, const Prior2D& prior) {
  const std::size_t n_fg = grid.foreground_count();
  if (n_fg == 0) throw Error(Errc::EmptyForeground, "no foreground voxels");
  if (prior.mask.foreground_count() == 0) throw Error(Errc::EmptyForeground, "empty prior mask");
  prior.validate(false);

  std::vector<double> f;
  f.reserve(feature_names().size());

  const SurfaceMesh mesh = mesh_for_metrics(grid);
  const double vvol = static_cast<double>(n_fg);
  const double mvol = mesh_volume(mesh);
  const double area = surface_area(mesh);
  f.push_back(vvol);
  f.push_back(mvol);
  f.push_back(area);
  for (int k : {5, 10, 20}) f.push_back(surface_roughness(mesh, k));
  const CurvatureStats cs = curvature_stats(mesh);
  f.push_back(cs.total_abs_deficit);
  f.push_back(cs.mean_deficit);
  f.push_back(cs.std_deficit);
  f.push_back(vvol / voxel_hull_volume(grid));
  f.push_back(sphericity(mvol, area));

  // Extents, centroid and second moments of the foreground voxel centres, as (x, y, z).
  int lo[3] = {grid.width(), grid.height(), grid.depth()};
  int hi[3] = {-1, -1, -1};
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int z = 0; z < grid.depth(); ++z)
    for (int y = 0; y < grid.height(); ++y)
      for (int x = 0; x < grid.width(); ++x) {
        if (grid.at(z, y, x) <= 0.5) continue;
        const int p[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a]);
        }
        mean += Eigen::Vector3d(x, y, z);
      }
  mean /= vvol;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int z = 0; z < grid.depth(); ++z)
    for (int y = 0; y < grid.height(); ++y)
      for (int x = 0; x < grid.width(); ++x) {
        if (grid.at(z, y, x) <= 0.5) continue;
        const Eigen::Vector3d r = Eigen::Vector3d(x, y, z) - mean;
        cov += r * r.transpose();
      }
  cov /= vvol;
  f.push_back(hi[2] - lo[2] + 1);
  f.push_back(hi[1] - lo[1] + 1);
  f.push_back(hi[0] - lo[0] + 1);

  // Full axes of the uniform ellipsoid with the same second moments: 2 sqrt(5 lambda).
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Eigen::Vector3d lam = eig.eigenvalues().cwiseMax(0.0);
  std::array<double, 3> axes{};
  for (int a = 0; a < 3; ++a) axes[a] = 2.0 * std::sqrt(5.0 * lam[2 - a]);
  f.push_back(axes[0]);
  f.push_back(axes[1]);
  f.push_back(axes[2]);
  f.push_back(axes[0] > 0 ? axes[1] / axes[0] : 0.0);
  f.push_back(axes[0] > 0 ? axes[2] / axes[0] : 0.0);

  // Distances from the voxel centroid to the surface vertices.
  std::vector<double> dist;
  dist.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) dist.push_back((v - mean).norm());
  const auto [dmin, dmax] = std::minmax_element(dist.begin(), dist.end());
  double dsum = 0.0;
  for (double d : dist) dsum += d;
  const double dmean = dsum / static_cast<double>(dist.size());
  double dss = 0.0;
  for (double d : dist) dss += (d - dmean) * (d - dmean);
  f.push_back(*dmin);
  f.push_back(*dmax);
  f.push_back(dmean);
  f.push_back(std::sqrt(dss / static_cast<double>(dist.size())));
  std::array<double, 8> hist{};
  for (double d : dist) {
    const int b = std::min(7, static_cast<int>(8.0 * d / *dmax));
    hist[b] += 1.0;
  }
  for (double h : hist) f.push_back(h / static_cast<double>(dist.size()));

  // 2D prior features.
  const Image2D& m = prior.mask;
  double area2 = 0.0, perim = 0.0;
  double cy = 0.0, cx = 0.0;
  auto fg = [&](int y, int x) { return y >= 0 && x >= 0 && y < m.height && x < m.width && m.at(y, x) > 0.5; };
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!fg(y, x)) continue;
      area2 += 1.0;
      cy += y;
      cx += x;
      perim += !fg(y - 1, x) + !fg(y + 1, x) + !fg(y, x - 1) + !fg(y, x + 1);
    }
  cy /= area2;
  cx /= area2;
  Eigen::Matrix2d c2 = Eigen::Matrix2d::Zero();
  double isum = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!fg(y, x)) continue;
      const Eigen::Vector2d r(x - cx, y - cy);
      c2 += r * r.transpose();
      isum += prior.fluorescence.at(y, x);
    }
  c2 /= area2;
  const Eigen::Vector2d l2 = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(c2).eigenvalues().cwiseMax(0.0);
  const double ecc = l2[1] > 0 ? std::sqrt(std::max(0.0, 1.0 - l2[0] / l2[1])) : 0.0;
  const double imean = isum / area2;
  double iss = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!fg(y, x)) continue;
      const double dv = prior.fluorescence.at(y, x) - imean;
      iss += dv * dv;
    }
  f.push_back(area2);
  f.push_back(perim);
  f.push_back(ecc);
  f.push_back(area2 / pixel_hull_area(m));
  f.push_back(imean);
  f.push_back(std::sqrt(iss / area2));

  for (double v : f) {
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteOutput, "non-finite feature value");
  }
  return FeatureVector{feature_names(), std::move(f)};
}

void write_features_csv(const std::vector<FeatureRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << "id,class,fold";
  for (const auto& n : feature_names()) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    csv::check_field(r.id, Errc::InvalidArgument);
    csv::check_field(r.class_label, Errc::InvalidArgument);
    if (r.features.values.size() != feature_names().size()) {
      throw Error(Errc::DimMismatch, "feature row length differs from the registry");
    }
    out << r.id << ',' << r.class_label << ',' << r.fold;
    for (double v : r.features.values) out << ',' << csv::num(v);
    out << '\n';
  }
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::BadManifest, "empty feature table");
  csv::strip_cr(line);
  const auto header = csv::split(line);
  const auto& names = feature_names();
  if (header.size() != names.size() + 3 || header[0] != "id" || header[1] != "class" || header[2] != "fold" ||
      !std::equal(names.begin(), names.end(), header.begin() + 3)) {
    throw Error(Errc::BadManifest, "feature table header does not match the registry");
  }
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    csv::strip_cr(line);
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != header.size()) throw Error(Errc::BadManifest, "feature row has the wrong field count");
    FeatureRow r;
    r.id = f[0];
    r.class_label = f[1];
    r.fold = csv::parse_int(f[2], Errc::BadManifest);
    r.features.names = names;
    for (std::size_t i = 3; i < f.size(); ++i) r.features.values.push_back(csv::parse_double(f[i], Errc::BadManifest));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace voxdiff
