#include "voxdiff/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <unordered_map>

#include <Eigen/Geometry>

namespace voxdiff {

namespace {

#include "mc_tables.inc"

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (hi << 32) | lo;
}

std::vector<std::vector<int>> vertex_neighbours(const SurfaceMesh& mesh) {
  std::vector<std::vector<int>> nb(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      nb[a].push_back(b);
      nb[b].push_back(a);
    }
  }
  for (auto& v : nb) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return nb;
}

void require_closed(const SurfaceMesh& mesh, const char* what) {
  if (mesh.triangles.empty() || !mesh_topology(mesh).closed) {
    throw Error(Errc::OpenMesh, std::string(what) + " needs a closed mesh");
  }
}

}  // namespace

MeshTopology mesh_topology(const SurfaceMesh& mesh) {
  MeshTopology topo;
  topo.faces = mesh.triangles.size();
  std::vector<char> used(mesh.vertices.size(), 0);
  // Per undirected edge: count of uses, and net direction (+1 for lo->hi, -1 for hi->lo).
  std::unordered_map<std::uint64_t, std::pair<int, int>> edges;
  edges.reserve(mesh.triangles.size() * 2);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      used[a] = 1;
      auto& e = edges[edge_key(a, b)];
      ++e.first;
      e.second += a < b ? 1 : -1;
    }
  }
  topo.vertices = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
  topo.edges = edges.size();
  topo.closed = !edges.empty();
  topo.consistently_oriented = !edges.empty();
  for (const auto& [key, e] : edges) {
    if (e.first != 2) topo.closed = false;
    if (e.first != 2 || e.second != 0) topo.consistently_oriented = false;
  }
  return topo;
}

SurfaceMesh marching_cubes(const VoxelGrid& grid, double iso) {
  if (grid.empty()) throw Error(Errc::EmptySurface, "empty grid");
  const auto [mn, mx] = std::minmax_element(grid.values().begin(), grid.values().end());
  if (!(iso > *mn && iso < *mx)) throw Error(Errc::EmptySurface, "iso value outside the grid's range");

  const Dims3 d = grid.dims();
  const int PD = d.depth + 2, PH = d.height + 2, PW = d.width + 2;
  const double pad = *mn;
  auto value = [&](int z, int y, int x) {
    if (z < 1 || y < 1 || x < 1 || z > d.depth || y > d.height || x > d.width) return pad;
    return grid.at(z - 1, y - 1, x - 1);
  };
  auto lattice = [&](int z, int y, int x) { return (z * PH + y) * PW + x; };

  SurfaceMesh mesh;
  std::unordered_map<std::uint64_t, int> vertex_of_edge;

  for (int z = 0; z + 1 < PD; ++z) {
    for (int y = 0; y + 1 < PH; ++y) {
      for (int x = 0; x + 1 < PW; ++x) {
        double v[8];
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          v[c] = value(z + kCorner[c][2], y + kCorner[c][1], x + kCorner[c][0]);
          if (v[c] <= iso) cube |= 1 << c;
        }
        if (cube == 0 || cube == 255) continue;
        int ids[12];
        for (int e = 0; e < 12; ++e) ids[e] = -1;
        for (int k = 0; kTriTable[cube][k] != -1; k += 3) {
          std::array<int, 3> tri{};
          for (int j = 0; j < 3; ++j) {
            const int e = kTriTable[cube][k + j];
            if (ids[e] < 0) {
              const int c0 = kEdge[e][0], c1 = kEdge[e][1];
              const int p0 = lattice(z + kCorner[c0][2], y + kCorner[c0][1], x + kCorner[c0][0]);
              const int p1 = lattice(z + kCorner[c1][2], y + kCorner[c1][1], x + kCorner[c1][0]);
              const auto key = edge_key(p0, p1);
              auto it = vertex_of_edge.find(key);
              if (it == vertex_of_edge.end()) {
                double s = (iso - v[c0]) / (v[c1] - v[c0]);
                s = std::clamp(s, 1e-4, 1.0 - 1e-4);
                Eigen::Vector3d a(x + kCorner[c0][0], y + kCorner[c0][1], z + kCorner[c0][2]);
                Eigen::Vector3d b(x + kCorner[c1][0], y + kCorner[c1][1], z + kCorner[c1][2]);
                mesh.vertices.push_back(a + s * (b - a) - Eigen::Vector3d::Ones());
                it = vertex_of_edge.emplace(key, static_cast<int>(mesh.vertices.size()) - 1).first;
              }
              ids[e] = it->second;
            }
            tri[j] = ids[e];
          }
          mesh.triangles.push_back(tri);
        }
      }
    }
  }
  if (mesh.triangles.empty()) throw Error(Errc::EmptySurface, "no iso crossing");
  return mesh;
}

double mesh_volume(const SurfaceMesh& mesh) {
  require_closed(mesh, "mesh_volume");
  double six_v = 0.0;
  for (const auto& t : mesh.triangles) {
    six_v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  }
  return six_v / 6.0;
}

double voxel_volume(const VoxelGrid& grid) { return static_cast<double>(grid.foreground_count()); }

double surface_area(const SurfaceMesh& mesh) {
  double a = 0.0;
  for (const auto& t : mesh.triangles) {
    a += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
  }
  return a;
}

double min_triangle_area(const SurfaceMesh& mesh) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles) {
    m = std::min(m, 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                              .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]])
                              .norm());
  }
  return m;
}

SurfaceMesh laplacian_smooth(const SurfaceMesh& mesh, int iterations, double lambda) {
  if (iterations < 0) throw Error(Errc::InvalidArgument, "negative smoothing iteration count");
  SurfaceMesh out = mesh;
  const auto nb = vertex_neighbours(mesh);
  std::vector<Eigen::Vector3d> next(out.vertices.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < out.vertices.size(); ++i) {
      if (nb[i].empty()) {
        next[i] = out.vertices[i];
        continue;
      }
      Eigen::Vector3d avg = Eigen::Vector3d::Zero();
      for (int j : nb[i]) avg += out.vertices[j];
      avg /= static_cast<double>(nb[i].size());
      next[i] = out.vertices[i] + lambda * (avg - out.vertices[i]);
    }
    out.vertices.swap(next);
  }
  return out;
}

double surface_roughness(const SurfaceMesh& mesh, int iterations) {
  if (iterations < 1) throw Error(Errc::InvalidArgument, "roughness needs at least one smoothing iteration");
  require_closed(mesh, "surface_roughness");
  const SurfaceMesh smooth = laplacian_smooth(mesh, iterations, 0.5);
  // Area-weighted vertex normals of the original mesh.
  std::vector<Eigen::Vector3d> normal(mesh.vertices.size(), Eigen::Vector3d::Zero());
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d n =
        (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (int v : t) normal[v] += n;
  }
  // Signed normal displacement; its spread around the mean discounts the
  // uniform shrink of the smoother and tangential vertex sliding.
  double s = 0.0, ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const double len = normal[i].norm();
    if (len <= 0.0) continue;
    const double dn = (mesh.vertices[i] - smooth.vertices[i]).dot(normal[i] / len);
    s += dn;
    ss += dn * dn;
    ++n;
  }
  if (n == 0) throw Error(Errc::OpenMesh, "mesh has no vertex with a defined normal");
  const double mean = s / static_cast<double>(n);
  return std::sqrt(std::max(0.0, ss / static_cast<double>(n) - mean * mean));
}

CurvatureStats curvature_stats(const SurfaceMesh& mesh) {
  require_closed(mesh, "curvature_stats");
  std::vector<double> angle_sum(mesh.vertices.size(), 0.0);
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d& p = mesh.vertices[t[k]];
      const Eigen::Vector3d u = mesh.vertices[t[(k + 1) % 3]] - p;
      const Eigen::Vector3d w = mesh.vertices[t[(k + 2) % 3]] - p;
      angle_sum[t[k]] += std::atan2(u.cross(w).norm(), u.dot(w));
      used[t[k]] = 1;
    }
  }
  CurvatureStats s;
  std::vector<double> deficits;
  deficits.reserve(mesh.vertices.size());
  for (std::size_t i = 0; i < angle_sum.size(); ++i) {
    if (!used[i]) continue;
    const double dv = 2.0 * std::numbers::pi - angle_sum[i];
    deficits.push_back(dv);
    s.total_deficit += dv;
    s.total_abs_deficit += std::abs(dv);
  }
  const double n = static_cast<double>(deficits.size());
  s.mean_deficit = s.total_deficit / n;
  double ss = 0.0;
  for (double dv : deficits) ss += (dv - s.mean_deficit) * (dv - s.mean_deficit);
  s.std_deficit = std::sqrt(ss / n);
  return s;
}

VoxelGrid gaussian_blur(const VoxelGrid& grid, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::InvalidArgument, "blur sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& w : k) w /= sum;

  const Dims3 d = grid.dims();
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
  };

  VoxelGrid cur = grid;
  VoxelGrid tmp(d);
  const int n_axis[3] = {d.width, d.height, d.depth};
  for (int axis = 0; axis < 3; ++axis) {
    for (int z = 0; z < d.depth; ++z) {
      for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
          double acc = 0.0;
          for (int o = -r; o <= r; ++o) {
            int p[3] = {x, y, z};
            p[axis] = reflect(p[axis] + o, n_axis[axis]);
            acc += k[o + r] * cur.at(p[2], p[1], p[0]);
          }
          tmp.at(z, y, x) = acc;
        }
      }
    }
    std::swap(cur, tmp);
  }
  return cur;
}

SurfaceMesh mesh_for_metrics(const VoxelGrid& grid, bool smooth, double sigma) {
  if (grid.foreground_count() == 0) throw Error(Errc::EmptySurface, "no foreground voxels");
  // Zero margin wide enough that the blur never sees the border.
  const int m = smooth ? static_cast<int>(std::ceil(3.0 * sigma)) + 1 : 0;
  const Dims3 d = grid.dims();
  VoxelGrid field(Dims3{d.depth + 2 * m, d.height + 2 * m, d.width + 2 * m});
  for (int z = 0; z < d.depth; ++z)
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x) field.at(z + m, y + m, x + m) = grid.at(z, y, x) > 0.5 ? 1.0 : 0.0;
  if (smooth) field = gaussian_blur(field, sigma);
  SurfaceMesh mesh = marching_cubes(field, 0.5);
  for (auto& v : mesh.vertices) v -= Eigen::Vector3d::Constant(m);
  return mesh;
}

void write_obj(const SurfaceMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string());
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace voxdiff
