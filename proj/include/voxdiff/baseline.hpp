#pragma once

#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

// Moments-equivalent ellipse of a 2D mask. Axes are full lengths in pixels
// (4 sqrt(eigenvalue) of the foreground covariance); orientation is the
// major-axis angle from the +x (width) axis, in (-pi/2, pi/2].
struct EllipseFit {
  double centroid_y = 0.0;
  double centroid_x = 0.0;
  double major_axis = 0.0;
  double minor_axis = 0.0;
  double orientation = 0.0;
};

// Throws DegenerateMask for fewer than 3 foreground pixels or a zero minor axis.
EllipseFit fit_ellipse(const Image2D& mask);

// Extrusion height used by both fits: round((major + minor) / 2), at least 1.
int extrusion_height(const EllipseFit& fit);

// Stacks the mask over slices [(depth - h) / 2, (depth - h) / 2 + h).
VoxelGrid extrude_mask(const Image2D& mask, int h, int depth);

// Raw mask stacked over h slices centred on depth / 2. Throws ExtentExceedsGrid if h > depth.
VoxelGrid cylinder_fit(const Image2D& mask, int depth);

// Ellipsoid with in-plane semi-axes major/2, minor/2 at the fitted pose and
// depth semi-axis (a + b) / 2, centred on depth / 2.
VoxelGrid ellipsoid_fit(const Image2D& mask, int depth);

}  // namespace voxdiff
