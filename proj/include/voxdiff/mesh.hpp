#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

// Triangle mesh in voxel units. Vertex coordinates are (x, y, z) =
// (width, height, depth) indices; triangles are wound counter-clockwise
// when seen from outside.
struct SurfaceMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;
};

struct MeshTopology {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t faces = 0;
  // Every undirected edge is used by exactly two triangles, once in each direction.
  bool closed = false;
  bool consistently_oriented = false;

  long euler_characteristic() const noexcept {
    return static_cast<long>(vertices) - static_cast<long>(edges) + static_cast<long>(faces);
  }
};

MeshTopology mesh_topology(const SurfaceMesh& mesh);

// Isosurface {value = iso} with foreground = value > iso. The grid is padded
// with one background layer, so the result is closed. Throws EmptySurface
// when iso is not strictly between the grid's min and max.
SurfaceMesh marching_cubes(const VoxelGrid& grid, double iso);

// Signed tetrahedron sum; throws OpenMesh unless the mesh is closed.
double mesh_volume(const SurfaceMesh& mesh);
// Number of voxels > 0.5.
double voxel_volume(const VoxelGrid& grid);
double surface_area(const SurfaceMesh& mesh);

// Uniform (umbrella) Laplacian smoothing, Jacobi updates.
SurfaceMesh laplacian_smooth(const SurfaceMesh& mesh, int iterations, double lambda = 0.5);

// Each vertex is smoothed k times (lambda 0.5) and its displacement projected
// on the original vertex normal; roughness is the standard deviation of that
// signed displacement over vertices. Throws OpenMesh on open meshes.
double surface_roughness(const SurfaceMesh& mesh, int iterations = 10);

struct CurvatureStats {
  // Sum of |2 pi - incident angles| over vertices.
  double total_abs_deficit = 0.0;
  // Signed sum; equals 2 pi times the Euler characteristic on closed meshes.
  double total_deficit = 0.0;
  double mean_deficit = 0.0;
  double std_deficit = 0.0;
};

CurvatureStats curvature_stats(const SurfaceMesh& mesh);

// Smallest triangle area; degenerate meshes report values near 0.
double min_triangle_area(const SurfaceMesh& mesh);

// Separable Gaussian blur with reflect borders, kernel radius ceil(3 sigma).
VoxelGrid gaussian_blur(const VoxelGrid& grid, double sigma);

// Metric meshing pipeline: binarize at 0.5, optionally blur the indicator
// (sigma 1 voxel), then marching cubes at iso 0.5.
SurfaceMesh mesh_for_metrics(const VoxelGrid& grid, bool smooth = true, double sigma = 1.0);

void write_obj(const SurfaceMesh& mesh, const std::filesystem::path& path);

}  // namespace voxdiff
