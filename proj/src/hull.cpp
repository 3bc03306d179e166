#include "voxdiff/hull.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "voxdiff/rng.hpp"

namespace voxdiff {

namespace {

IPoint3 sub(const IPoint3& a, const IPoint3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

// Six times the signed volume of (a, b, c, d); positive when d is above the
// counter-clockwise plane (a, b, c).
std::int64_t orient(const IPoint3& a, const IPoint3& b, const IPoint3& c, const IPoint3& d) {
  const IPoint3 u = sub(b, a), v = sub(c, a), w = sub(d, a);
  return u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0]) +
         u[2] * (v[0] * w[1] - v[1] * w[0]);
}

bool collinear(const IPoint3& a, const IPoint3& b, const IPoint3& c) {
  const IPoint3 u = sub(b, a), v = sub(c, a);
  return u[1] * v[2] - u[2] * v[1] == 0 && u[2] * v[0] - u[0] * v[2] == 0 && u[0] * v[1] - u[1] * v[0] == 0;
}

}  // namespace

double convex_hull_volume(std::vector<IPoint3> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n < 4) return 0.0;

  // Seed tetrahedron.
  std::size_t i1 = 1;
  std::size_t i2 = n;
  std::size_t i3 = n;
  for (std::size_t k = 2; k < n && i2 == n; ++k) {
    if (!collinear(pts[0], pts[i1], pts[k])) i2 = k;
  }
  if (i2 == n) return 0.0;
  for (std::size_t k = 2; k < n && i3 == n; ++k) {
    if (k != i2 && orient(pts[0], pts[i1], pts[i2], pts[k]) != 0) i3 = k;
  }
  if (i3 == n) return 0.0;

  using Face = std::array<int, 3>;
  std::vector<Face> faces;
  int a = 0, b = static_cast<int>(i1), c = static_cast<int>(i2), d = static_cast<int>(i3);
  if (orient(pts[a], pts[b], pts[c], pts[d]) > 0) std::swap(b, c);
  // Now d lies below (a, b, c); every face keeps the interior on its negative side.
  faces = {{a, b, c}, {a, d, b}, {b, d, c}, {c, d, a}};

  // Deterministic shuffle keeps the incremental construction near its expected cost.
  std::vector<int> order;
  order.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int kk = static_cast<int>(k);
    if (kk != a && kk != b && kk != c && kk != d) order.push_back(kk);
  }
  Rng rng(0x68756c6cULL);
  for (std::size_t k = order.size(); k > 1; --k) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
    std::swap(order[k - 1], order[j]);
  }

  std::vector<char> visible;
  std::set<std::pair<int, int>> vis_edges;
  std::vector<Face> kept;
  for (int p : order) {
    visible.assign(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (orient(pts[faces[f][0]], pts[faces[f][1]], pts[faces[f][2]], pts[p]) > 0) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;
    vis_edges.clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      for (int e = 0; e < 3; ++e) vis_edges.emplace(faces[f][e], faces[f][(e + 1) % 3]);
    }
    kept.clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) kept.push_back(faces[f]);
    }
    for (const auto& [u, v] : vis_edges) {
      if (!vis_edges.count({v, u})) kept.push_back({u, v, p});
    }
    faces.swap(kept);
  }

  // Signed volume relative to a hull vertex.
  const IPoint3& o = pts[faces[0][0]];
  long double six_v = 0.0L;
  for (const auto& f : faces) six_v -= static_cast<long double>(orient(pts[f[0]], pts[f[1]], pts[f[2]], o));
  return static_cast<double>(six_v / 6.0L);
}

double convex_hull_area(std::vector<IPoint2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return 0.0;
  auto cross = [](const IPoint2& o, const IPoint2& a, const IPoint2& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<IPoint2> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i > 0; --i) {
    while (k >= lower && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
    h[k++] = pts[i - 1];
  }
  h.resize(k - 1);
  std::int64_t twice = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& p = h[i];
    const auto& q = h[(i + 1) % h.size()];
    twice += p[0] * q[1] - p[1] * q[0];
  }
  return std::abs(static_cast<double>(twice)) / 2.0;
}

double voxel_hull_volume(const VoxelGrid& grid) {
  // Only the first and last foreground voxel of each row can contribute hull vertices.
  std::vector<IPoint3> pts;
  for (int z = 0; z < grid.depth(); ++z) {
    for (int y = 0; y < grid.height(); ++y) {
      int lo = -1, hi = -1;
      for (int x = 0; x < grid.width(); ++x) {
        if (grid.at(z, y, x) > 0.5) {
          if (lo < 0) lo = x;
          hi = x;
        }
      }
      if (lo < 0) continue;
      for (int dz = 0; dz <= 1; ++dz)
        for (int dy = 0; dy <= 1; ++dy) {
          pts.push_back({lo, y + dy, z + dz});
          pts.push_back({hi + 1, y + dy, z + dz});
        }
    }
  }
  return convex_hull_volume(std::move(pts));
}

double pixel_hull_area(const Image2D& mask) {
  std::vector<IPoint2> pts;
  for (int y = 0; y < mask.height; ++y) {
    int lo = -1, hi = -1;
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) > 0.5) {
        if (lo < 0) lo = x;
        hi = x;
      }
    }
    if (lo < 0) continue;
    for (int dy = 0; dy <= 1; ++dy) {
      pts.push_back({lo, y + dy});
      pts.push_back({hi + 1, y + dy});
    }
  }
  return convex_hull_area(std::move(pts));
}

}  // namespace voxdiff
