#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "divc/marching_cubes.hpp"

namespace divc {

struct Vec2 {
  double u = 0, v = 0;
  Vec2 operator+(const Vec2& o) const { return {u + o.u, v + o.v}; }
  Vec2 operator-(const Vec2& o) const { return {u - o.u, v - o.v}; }
  double dot(const Vec2& o) const { return u * o.u + v * o.v; }
  double cross(const Vec2& o) const { return u * o.v - v * o.u; }
  double norm() const { return std::sqrt(u * u + v * v); }
};

// ---------------------------------------------------------------------------
// Convex hull (monotone chain, CCW, collinear points dropped)

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a.u == b.u && a.v == b.v; }),
            pts.end());
  size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// ---------------------------------------------------------------------------
// Minimum-area enclosing rectangle (rotating calipers)

/// Axes (axis_u, axis_v) are unit and orthogonal; the rectangle spans
/// origin + [0,width]*axis_u + [0,height]*axis_v and contains every input
/// point. The minimal rectangle is aligned with some hull edge.
struct MinAreaRect {
  Vec2 axis_u{1, 0}, axis_v{0, 1};
  Vec2 origin{0, 0};
  double width = 0, height = 0;
  double angle = 0;  // of axis_u against +u
  double area() const { return width * height; }
};

inline MinAreaRect min_area_rect(const std::vector<Vec2>& points) {
  if (points.empty()) throw std::invalid_argument("min_area_rect: no points");
  std::vector<Vec2> hull = convex_hull(points);

  auto from_axis = [&](Vec2 e) {
    MinAreaRect r;
    double n = e.norm();
    r.axis_u = n > 0 ? Vec2{e.u / n, e.v / n} : Vec2{1, 0};
    r.axis_v = {-r.axis_u.v, r.axis_u.u};
    double ulo = 1e300, uhi = -1e300, vlo = 1e300, vhi = -1e300;
    for (const Vec2& p : points) {
      double pu = p.dot(r.axis_u), pv = p.dot(r.axis_v);
      ulo = std::min(ulo, pu);
      uhi = std::max(uhi, pu);
      vlo = std::min(vlo, pv);
      vhi = std::max(vhi, pv);
    }
    r.width = uhi - ulo;
    r.height = vhi - vlo;
    r.origin = Vec2{ulo * r.axis_u.u + vlo * r.axis_v.u, ulo * r.axis_u.v + vlo * r.axis_v.v};
    r.angle = std::atan2(r.axis_u.v, r.axis_u.u);
    return r;
  };

  if (hull.size() <= 2) {  // degenerate: point or segment (zero-height rect)
    return from_axis(hull.size() == 2 ? hull[1] - hull[0] : Vec2{1, 0});
  }

  const size_t m = hull.size();
  auto edge = [&](size_t i) { return hull[(i + 1) % m] - hull[i]; };

  // support indices advance monotonically around the hull
  size_t jv = 1, ju_hi = 1, ju_lo = 1;
  MinAreaRect best;
  double best_area = 1e300;
  for (size_t i = 0; i < m; ++i) {
    Vec2 e = edge(i);
    double n = e.norm();
    if (n == 0) continue;
    Vec2 du{e.u / n, e.v / n};
    Vec2 dv{-du.v, du.u};
    auto proj_u = [&](size_t j) { return hull[j % m].dot(du); };
    auto proj_v = [&](size_t j) { return hull[j % m].dot(dv); };
    if (i == 0) {
      for (size_t j = 1; j < m; ++j) {
        if (proj_v(j) > proj_v(jv)) jv = j;
        if (proj_u(j) > proj_u(ju_hi)) ju_hi = j;
        if (proj_u(j) < proj_u(ju_lo)) ju_lo = j;
      }
    } else {
      while (proj_v(jv + 1) >= proj_v(jv)) ++jv;
      while (proj_u(ju_hi + 1) >= proj_u(ju_hi)) ++ju_hi;
      while (proj_u(ju_lo + 1) <= proj_u(ju_lo)) ++ju_lo;
    }
    double width = proj_u(ju_hi) - proj_u(ju_lo);
    double height = proj_v(jv) - hull[i].dot(dv);
    double area = width * height;
    if (area < best_area - 1e-15) {
      best_area = area;
      best = from_axis(e);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Quadtree rectangle packing

/// Packs axis-aligned rectangles into a power-of-two square by recursive
/// quadrant subdivision, visiting quadrants in a fixed order. Each rectangle
/// lands at the origin corner of the smallest free power-of-two cell that
/// holds it, so placements never overlap.
class QuadtreePacker {
 public:
  explicit QuadtreePacker(int size) : size_(size) {
    if (size <= 0 || (size & (size - 1)) != 0)
      throw std::invalid_argument("packer size must be a power of two");
    nodes_.push_back({0, 0, size, State::Free, {-1, -1, -1, -1}});
  }

  std::optional<std::pair<int, int>> insert(int w, int h) {
    if (w <= 0 || h <= 0 || w > size_ || h > size_) return std::nullopt;
    int cell = 1;
    while (cell < std::max(w, h)) cell <<= 1;
    return try_insert(0, cell);
  }

 private:
  enum class State : uint8_t { Free, Split, Occupied };
  struct Node {
    int x, y, size;
    State state;
    std::array<int, 4> kid;
  };

  std::optional<std::pair<int, int>> try_insert(int ni, int cell) {
    Node& n = nodes_[size_t(ni)];
    if (n.state == State::Occupied || n.size < cell) return std::nullopt;
    if (n.state == State::Free) {
      if (n.size == cell) {
        n.state = State::Occupied;
        return std::make_pair(n.x, n.y);
      }
      int half = n.size / 2;
      int x = n.x, y = n.y;
      n.state = State::Split;
      for (int q = 0; q < 4; ++q) {
        nodes_.push_back({x + (q & 1) * half, y + (q >> 1) * half, half, State::Free,
                          {-1, -1, -1, -1}});
        nodes_[size_t(ni)].kid[size_t(q)] = int(nodes_.size()) - 1;
      }
    }
    for (int q = 0; q < 4; ++q) {
      auto r = try_insert(nodes_[size_t(ni)].kid[size_t(q)], cell);
      if (r) return r;
    }
    return std::nullopt;
  }

  int size_;
  std::vector<Node> nodes_;
};

struct RectPlacement {
  int x = 0, y = 0;
  bool placed = false;
};

/// Largest-first quadtree packing. Returns one placement per input rect (in
/// input order); sizes include whatever gutter the caller wants.
inline std::vector<RectPlacement> pack_rects(const std::vector<std::pair<int, int>>& rects,
                                             int chart_size) {
  std::vector<size_t> order(rects.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    int ma = std::max(rects[a].first, rects[a].second);
    int mb = std::max(rects[b].first, rects[b].second);
    if (ma != mb) return ma > mb;
    long aa = long(rects[a].first) * rects[a].second;
    long ab = long(rects[b].first) * rects[b].second;
    if (aa != ab) return aa > ab;
    return a < b;
  });
  QuadtreePacker packer(chart_size);
  std::vector<RectPlacement> out(rects.size());
  for (size_t i : order) {
    auto pos = packer.insert(rects[i].first, rects[i].second);
    if (pos) out[i] = {pos->first, pos->second, true};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normal grouping

struct TriangleGroup {
  std::vector<uint32_t> tris;  // indices into the block's triangle-id list
  Vec3 mean_normal;            // unit, area weighted
};

inline Vec3 triangle_normal(const Mesh& m, uint32_t tri) {
  const auto& t = m.triangles[tri];
  Vec3 ab = m.vertices[t[1]] - m.vertices[t[0]];
  Vec3 ac = m.vertices[t[2]] - m.vertices[t[0]];
  return ab.cross(ac);  // length = 2*area
}

/// Greedy clustering of one block's triangles by normal: seed with the
/// largest-area unassigned triangle, absorb everything within 60 degrees of
/// the running mean, recompute, repeat to a fixpoint. Ties break on the
/// lower triangle id, so the grouping is deterministic.
inline std::vector<TriangleGroup> group_triangles(const Mesh& m,
                                                  const std::vector<uint32_t>& block_tris) {
  const double cos_thresh = 0.5;  // cos 60
  std::vector<Vec3> scaled_normals(block_tris.size());
  std::vector<double> area(block_tris.size());
  for (size_t i = 0; i < block_tris.size(); ++i) {
    scaled_normals[i] = triangle_normal(m, block_tris[i]);
    area[i] = 0.5 * scaled_normals[i].norm();
  }
  std::vector<uint8_t> assigned(block_tris.size(), 0);
  std::vector<TriangleGroup> groups;
  for (;;) {
    size_t seed = block_tris.size();
    for (size_t i = 0; i < block_tris.size(); ++i)
      if (!assigned[i] && (seed == block_tris.size() || area[i] > area[seed])) seed = i;
    if (seed == block_tris.size()) break;

    TriangleGroup g;
    g.tris.push_back(uint32_t(seed));
    assigned[seed] = 1;
    Vec3 mean = scaled_normals[seed].normalized();
    for (int pass = 0; pass < 8; ++pass) {
      bool grew = false;
      for (size_t i = 0; i < block_tris.size(); ++i) {
        if (assigned[i]) continue;
        if (scaled_normals[i].normalized().dot(mean) > cos_thresh) {
          g.tris.push_back(uint32_t(i));
          assigned[i] = 1;
          grew = true;
        }
      }
      Vec3 acc{0, 0, 0};
      for (uint32_t i : g.tris) acc = acc + scaled_normals[i];
      mean = acc.normalized();
      if (!grew) break;
    }
    g.mean_normal = mean;
    groups.push_back(std::move(g));
  }
  return groups;
}

/// Deterministic tangent frame for a unit normal: the reference axis is the
/// coordinate axis least aligned with it (ties to the lower axis index).
inline void tangent_frame(const Vec3& n, Vec3& tu, Vec3& tv) {
  double ax = std::abs(n.x), ay = std::abs(n.y), az = std::abs(n.z);
  Vec3 ref = (ax <= ay && ax <= az) ? Vec3{1, 0, 0} : (ay <= az ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
  tu = ref.cross(n).normalized();
  tv = n.cross(tu);
}

}  // namespace divc
