#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "divc/marching_cubes.hpp"
#include "divc/rng.hpp"

namespace divc {

/// Closest point on triangle (a,b,c) to p. Ericson, Real-Time Collision
/// Detection, 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double t = d1 / (d1 - d3);
    return a + ab * t;
  }

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double t = d2 / (d2 - d6);
    return a + ac * t;
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + (c - b) * t;
  }

  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return a + ab * v + ac * w;
}

// Median-split AABB tree over mesh triangles for exact point-to-surface
// distance queries.
class TriangleBvh {
 public:
  explicit TriangleBvh(const Mesh& mesh) : mesh_(&mesh) {
    size_t n = mesh.triangles.size();
    if (n == 0) throw std::invalid_argument("TriangleBvh: empty mesh");
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), uint32_t(0));
    centroids_.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const auto& t = mesh.triangles[i];
      centroids_[i] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) * (1.0 / 3.0);
    }
    nodes_.reserve(2 * n);
    build(0, n);
  }

  double distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    query(0, p, best);
    return std::sqrt(best);
  }

 private:
  struct Node {
    Vec3 lo, hi;
    uint32_t left = 0, right = 0;   // child node ids (internal)
    uint32_t begin = 0, end = 0;    // triangle range (leaf when end > begin)
  };

  uint32_t build(size_t begin, size_t end) {
    uint32_t id = uint32_t(nodes_.size());
    nodes_.push_back({});
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (size_t i = begin; i < end; ++i) {
      const auto& t = mesh_->triangles[order_[i]];
      for (int c = 0; c < 3; ++c) {
        const Vec3& v = mesh_->vertices[t[size_t(c)]];
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
      }
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= 4) {
      nodes_[id].begin = uint32_t(begin);
      nodes_[id].end = uint32_t(end);
      return id;
    }
    Vec3 ext = hi - lo;
    int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
    size_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + long(begin), order_.begin() + long(mid),
                     order_.begin() + long(end), [&](uint32_t a, uint32_t b) {
                       double ca = axis == 0 ? centroids_[a].x : axis == 1 ? centroids_[a].y : centroids_[a].z;
                       double cb = axis == 0 ? centroids_[b].x : axis == 1 ? centroids_[b].y : centroids_[b].z;
                       if (ca != cb) return ca < cb;
                       return a < b;
                     });
    uint32_t l = build(begin, mid);
    uint32_t r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  double box_dist2(const Node& n, const Vec3& p) const {
    double dx = std::max({n.lo.x - p.x, 0.0, p.x - n.hi.x});
    double dy = std::max({n.lo.y - p.y, 0.0, p.y - n.hi.y});
    double dz = std::max({n.lo.z - p.z, 0.0, p.z - n.hi.z});
    return dx * dx + dy * dy + dz * dz;
  }

  void query(uint32_t id, const Vec3& p, double& best) const {
    const Node& n = nodes_[id];
    if (box_dist2(n, p) >= best) return;
    if (n.end > n.begin) {
      for (uint32_t i = n.begin; i < n.end; ++i) {
        const auto& t = mesh_->triangles[order_[i]];
        Vec3 q = closest_point_on_triangle(p, mesh_->vertices[t[0]], mesh_->vertices[t[1]],
                                           mesh_->vertices[t[2]]);
        Vec3 e = p - q;
        best = std::min(best, e.dot(e));
      }
      return;
    }
    double dl = box_dist2(nodes_[n.left], p), dr = box_dist2(nodes_[n.right], p);
    if (dl <= dr) {
      query(n.left, p, best);
      query(n.right, p, best);
    } else {
      query(n.right, p, best);
      query(n.left, p, best);
    }
  }

  const Mesh* mesh_;
  std::vector<uint32_t> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

/// Exact shortest distance (mm) from a point to the mesh surface.
inline double point_to_mesh_distance(const Vec3& p, const TriangleBvh& bvh) {
  return bvh.distance(p);
}

// ---------------------------------------------------------------------------
// Surface sampling and the two distortion metrics

/// All mesh vertices plus area-weighted random surface points (a base count
/// per triangle, distributed across triangles by area share, largest
/// remainder). The sample set depends only on the mesh and the seed, so both
/// metric directions see identical sets regardless of argument order.
inline std::vector<Vec3> sample_surface_points(const Mesh& m, int samples_per_triangle,
                                               uint64_t seed) {
  std::vector<Vec3> pts = m.vertices;
  if (m.triangles.empty() || samples_per_triangle <= 0) return pts;

  std::vector<double> area(m.triangles.size());
  double total = 0.0;
  for (size_t i = 0; i < m.triangles.size(); ++i) {
    const auto& t = m.triangles[i];
    Vec3 ab = m.vertices[t[1]] - m.vertices[t[0]];
    Vec3 ac = m.vertices[t[2]] - m.vertices[t[0]];
    area[i] = 0.5 * ab.cross(ac).norm();
    total += area[i];
  }
  size_t budget = size_t(samples_per_triangle) * m.triangles.size();
  std::vector<size_t> count(m.triangles.size(), 0);
  std::vector<std::pair<double, size_t>> rema(m.triangles.size());
  size_t assigned = 0;
  for (size_t i = 0; i < m.triangles.size(); ++i) {
    double share = total > 0 ? double(budget) * area[i] / total : 0.0;
    count[i] = size_t(share);
    assigned += count[i];
    rema[i] = {share - double(count[i]), i};
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (size_t i = 0; assigned < budget && i < rema.size(); ++i, ++assigned) ++count[rema[i].second];

  Rng rng(seed);
  for (size_t i = 0; i < m.triangles.size(); ++i) {
    const auto& t = m.triangles[i];
    const Vec3 &a = m.vertices[t[0]], &b = m.vertices[t[1]], &c = m.vertices[t[2]];
    for (size_t s = 0; s < count[i]; ++s) {
      double u = rng.uniform01(), v = rng.uniform01();
      if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
      }
      pts.push_back(a + (b - a) * u + (c - a) * v);
    }
  }
  return pts;
}

struct SurfaceMetrics {
  double hausdorff_mm = 0.0;
  double chamfer_mm = 0.0;
};

/// Hausdorff H = max(max_x d(x, S2), max_y d(y, S1)) and symmetric Chamfer
/// C = mean_x d(x, S2)/2 + mean_y d(y, S1)/2 over the sampled point sets,
/// each direction normalized by its own sample count.
inline SurfaceMetrics surface_metrics(const Mesh& s1, const Mesh& s2, int samples_per_triangle = 4,
                                      uint64_t seed = 0) {
  if (s1.triangles.empty() || s2.triangles.empty())
    throw std::invalid_argument("surface_metrics: empty mesh");
  TriangleBvh b1(s1), b2(s2);
  std::vector<Vec3> p1 = sample_surface_points(s1, samples_per_triangle, seed);
  std::vector<Vec3> p2 = sample_surface_points(s2, samples_per_triangle, seed);
  double max1 = 0.0, sum1 = 0.0;
  for (const Vec3& p : p1) {
    double dd = b2.distance(p);
    max1 = std::max(max1, dd);
    sum1 += dd;
  }
  double max2 = 0.0, sum2 = 0.0;
  for (const Vec3& p : p2) {
    double dd = b1.distance(p);
    max2 = std::max(max2, dd);
    sum2 += dd;
  }
  SurfaceMetrics r;
  r.hausdorff_mm = std::max(max1, max2);
  r.chamfer_mm = 0.5 * sum1 / double(p1.size()) + 0.5 * sum2 / double(p2.size());
  return r;
}

inline double hausdorff(const Mesh& a, const Mesh& b, int samples_per_triangle = 4,
                        uint64_t seed = 0) {
  return surface_metrics(a, b, samples_per_triangle, seed).hausdorff_mm;
}

inline double chamfer(const Mesh& a, const Mesh& b, int samples_per_triangle = 4,
                      uint64_t seed = 0) {
  return surface_metrics(a, b, samples_per_triangle, seed).chamfer_mm;
}

}  // namespace divc
