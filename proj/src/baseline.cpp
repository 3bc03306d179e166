#include "voxdiff/baseline.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace voxdiff {

EllipseFit fit_ellipse(const Image2D& mask) {
  double n = 0.0, sy = 0.0, sx = 0.0;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) <= 0.5) continue;
      n += 1.0;
      sy += y;
      sx += x;
    }
  if (n < 3.0) throw Error(Errc::DegenerateMask, "ellipse fit needs at least 3 foreground pixels");
  EllipseFit fit;
  fit.centroid_y = sy / n;
  fit.centroid_x = sx / n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) <= 0.5) continue;
      const Eigen::Vector2d r(x - fit.centroid_x, y - fit.centroid_y);
      cov += r * r.transpose();
    }
  cov /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double lmin = std::max(0.0, eig.eigenvalues()[0]);
  const double lmax = std::max(0.0, eig.eigenvalues()[1]);
  fit.major_axis = 4.0 * std::sqrt(lmax);
  fit.minor_axis = 4.0 * std::sqrt(lmin);
  if (!(fit.minor_axis > 1e-9)) throw Error(Errc::DegenerateMask, "mask is a line; minor axis is zero");
  const Eigen::Vector2d v = eig.eigenvectors().col(1);
  double angle = std::atan2(v.y(), v.x());
  if (angle <= -std::numbers::pi / 2) angle += std::numbers::pi;
  if (angle > std::numbers::pi / 2) angle -= std::numbers::pi;
  // Near-isotropic masks have no meaningful direction; report 0 for determinism.
  if (lmax - lmin <= 1e-12 * std::max(1.0, lmax)) angle = 0.0;
  fit.orientation = angle;
  return fit;
}

int extrusion_height(const EllipseFit& fit) {
  return std::max(1, static_cast<int>(std::floor((fit.major_axis + fit.minor_axis) / 2.0 + 0.5)));
}

VoxelGrid extrude_mask(const Image2D& mask, int h, int depth) {
  if (h < 1) throw Error(Errc::InvalidArgument, "extrusion height must be positive");
  if (h > depth) throw Error(Errc::ExtentExceedsGrid, "extrusion height exceeds grid depth");
  VoxelGrid out(Dims3{depth, mask.height, mask.width});
  const int z0 = (depth - h) / 2;
  for (int z = z0; z < z0 + h; ++z)
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x) out.at(z, y, x) = mask.at(y, x) > 0.5 ? 1.0 : 0.0;
  return out;
}

VoxelGrid cylinder_fit(const Image2D& mask, int depth) {
  return extrude_mask(mask, extrusion_height(fit_ellipse(mask)), depth);
}

VoxelGrid ellipsoid_fit(const Image2D& mask, int depth) {
  const EllipseFit fit = fit_ellipse(mask);
  const double a = fit.major_axis / 2.0;
  const double b = fit.minor_axis / 2.0;
  const double c = (a + b) / 2.0;
  if (2.0 * c > depth) throw Error(Errc::ExtentExceedsGrid, "ellipsoid depth extent exceeds grid depth");
  const double cz = (depth - 1) / 2.0;
  const double ca = std::cos(fit.orientation), sa = std::sin(fit.orientation);
  VoxelGrid out(Dims3{depth, mask.height, mask.width});
  for (int z = 0; z < depth; ++z)
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x) {
        const double dx = x - fit.centroid_x, dy = y - fit.centroid_y, dz = z - cz;
        const double u = ca * dx + sa * dy;
        const double w = -sa * dx + ca * dy;
        if ((u * u) / (a * a) + (w * w) / (b * b) + (dz * dz) / (c * c) <= 1.0) out.at(z, y, x) = 1.0;
      }
  return out;
}

}  // namespace voxdiff
