#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

using IPoint3 = std::array<std::int64_t, 3>;
using IPoint2 = std::array<std::int64_t, 2>;

// Volume of the convex hull of integer points, exact orientation tests.
// Returns 0 for coplanar or fewer than four distinct points.
double convex_hull_volume(std::vector<IPoint3> points);

// Area of the 2D convex hull (monotone chain).
double convex_hull_area(std::vector<IPoint2> points);

// Hull of the corner points of every foreground voxel (> 0.5).
double voxel_hull_volume(const VoxelGrid& grid);
// Hull of the corner points of every foreground pixel (> 0.5).
double pixel_hull_area(const Image2D& mask);

}  // namespace voxdiff
