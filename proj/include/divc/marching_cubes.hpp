#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "divc/common.hpp"
#include "divc/mc_tables.hpp"
#include "divc/volume.hpp"

namespace divc {

/// Interpolation parameter clamp: vertices stay strictly inside their grid
/// edge, so displacement under magnitude changes stays below the edge length.
inline constexpr double kEdgeTClamp = 1e-4;

/// Triangles with less area than this (mm^2) are dropped as degenerate.
inline constexpr double kDegenerateArea = 1e-12;

// Triangle mesh extracted from a TSDF grid. Every vertex lies strictly
// inside one grid edge between two voxels of opposite sign; vertex_edge
// records that edge (voxel_linear_index * 3 + axis), which makes vertices of
// two topology-equal meshes correspond one to one.
struct Mesh {
  std::vector<Vec3> vertices;  // mm
  std::vector<std::array<uint32_t, 3>> triangles;
  std::vector<uint64_t> vertex_edge;
  std::vector<uint64_t> triangle_cell;    // emitting cell, x + (w-1)*(y + (h-1)*z)
  uint32_t w = 0, h = 0, d = 0;           // voxel grid dims
  std::vector<uint8_t> cell_configs;      // (w-1)*(h-1)*(d-1) marching cubes cases

  size_t cell_count() const { return size_t(w - 1) * (h - 1) * (d - 1); }
};

inline uint64_t grid_edge_key(const TsdfVolume& v, uint32_t x, uint32_t y, uint32_t z, int axis) {
  return v.idx(x, y, z) * 3 + uint64_t(axis);
}

/// Marching cubes with the topology fixed by the supplied signs; values
/// contribute only magnitudes for edge interpolation. Signs must follow the
/// zero-is-positive rule used across the codec.
inline Mesh marching_cubes(const TsdfVolume& v, const std::vector<int8_t>& signs) {
  if (signs.size() != v.count())
    throw std::invalid_argument("marching_cubes: sign grid does not match volume");
  Mesh mesh;
  mesh.w = v.w;
  mesh.h = v.h;
  mesh.d = v.d;
  if (v.w < 2 || v.h < 2 || v.d < 2) return mesh;
  mesh.cell_configs.assign(mesh.cell_count(), 0);

  std::unordered_map<uint64_t, uint32_t> edge_vertex;
  edge_vertex.reserve(4096);

  const double vs = double(v.voxel_size);
  auto signed_dist = [&](uint32_t x, uint32_t y, uint32_t z) {
    size_t i = v.idx(x, y, z);
    double mag = std::abs(double(v.values[i]));
    if (mag < 1e-12) mag = 1e-12;  // exact-zero stored values: keep t well defined
    return signs[i] > 0 ? mag : -mag;
  };

  size_t ci = 0;
  for (uint32_t z = 0; z + 1 < v.d; ++z)
    for (uint32_t y = 0; y + 1 < v.h; ++y)
      for (uint32_t x = 0; x + 1 < v.w; ++x, ++ci) {
        int config = 0;
        double dist[8];
        for (int c = 0; c < 8; ++c) {
          uint32_t cx = x + kMcCornerOffset[c][0];
          uint32_t cy = y + kMcCornerOffset[c][1];
          uint32_t cz = z + kMcCornerOffset[c][2];
          dist[c] = signed_dist(cx, cy, cz);
          if (dist[c] < 0.0) config |= 1 << c;
        }
        mesh.cell_configs[ci] = uint8_t(config);
        uint16_t edges = kMcEdgeTable[config];
        if (edges == 0) continue;

        uint32_t everts[12];
        for (int e = 0; e < 12; ++e) {
          if (!(edges & (1u << e))) continue;
          int c0 = kMcEdgeCorners[e][0], c1 = kMcEdgeCorners[e][1];
          uint32_t ax = x + std::min(kMcCornerOffset[c0][0], kMcCornerOffset[c1][0]);
          uint32_t ay = y + std::min(kMcCornerOffset[c0][1], kMcCornerOffset[c1][1]);
          uint32_t az = z + std::min(kMcCornerOffset[c0][2], kMcCornerOffset[c1][2]);
          int axis = kMcCornerOffset[c0][0] != kMcCornerOffset[c1][0]   ? 0
                     : kMcCornerOffset[c0][1] != kMcCornerOffset[c1][1] ? 1
                                                                        : 2;
          uint64_t key = grid_edge_key(v, ax, ay, az, axis);
          auto it = edge_vertex.find(key);
          if (it == edge_vertex.end()) {
            double d0 = dist[c0], d1 = dist[c1];
            double t = d0 / (d0 - d1);
            t = std::clamp(t, kEdgeTClamp, 1.0 - kEdgeTClamp);
            // orient t from the low-index voxel along +axis
            if (kMcCornerOffset[c0][size_t(axis)] > kMcCornerOffset[c1][size_t(axis)]) t = 1.0 - t;
            Vec3 p = v.voxel_center(ax, ay, az);
            p = p + Vec3{axis == 0 ? t * vs : 0.0, axis == 1 ? t * vs : 0.0,
                         axis == 2 ? t * vs : 0.0};
            uint32_t id = uint32_t(mesh.vertices.size());
            mesh.vertices.push_back(p);
            mesh.vertex_edge.push_back(key);
            it = edge_vertex.emplace(key, id).first;
          }
          everts[e] = it->second;
        }

        const int8_t* tri = kMcTriTable[config];
        for (int t = 0; tri[t] != -1; t += 3) {
          uint32_t a = everts[tri[t]], b = everts[tri[t + 1]], c = everts[tri[t + 2]];
          Vec3 ab = mesh.vertices[b] - mesh.vertices[a];
          Vec3 ac = mesh.vertices[c] - mesh.vertices[a];
          if (ab.cross(ac).norm() * 0.5 <= kDegenerateArea) continue;
          mesh.triangles.push_back({a, b, c});
          mesh.triangle_cell.push_back(ci);
        }
      }
  return mesh;
}

inline Mesh marching_cubes(const TsdfVolume& v) { return marching_cubes(v, v.signs()); }

/// Meshes are topology-equal when their per-cell marching cubes
/// configuration sequences are identical.
inline bool topology_equal(const Mesh& a, const Mesh& b) {
  return a.w == b.w && a.h == b.h && a.d == b.d && a.cell_configs == b.cell_configs;
}

/// Max displacement (mm) between corresponding vertices of two
/// topology-equal meshes (vertices correspond via their grid edge). The
/// marching cubes construction bounds this by the voxel size.
inline double error_bound_check(const Mesh& a, const Mesh& b) {
  if (!topology_equal(a, b))
    throw std::invalid_argument("error_bound_check requires topology-equal meshes");
  if (a.vertices.size() != b.vertices.size())
    throw std::logic_error("topology-equal meshes with different vertex counts");
  std::unordered_map<uint64_t, uint32_t> by_edge;
  by_edge.reserve(b.vertices.size());
  for (uint32_t i = 0; i < b.vertices.size(); ++i) by_edge.emplace(b.vertex_edge[i], i);
  double worst = 0.0;
  for (uint32_t i = 0; i < a.vertices.size(); ++i) {
    auto it = by_edge.find(a.vertex_edge[i]);
    if (it == by_edge.end()) throw std::logic_error("vertex without counterpart on same edge");
    worst = std::max(worst, (a.vertices[i] - b.vertices[it->second]).norm());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// OBJ export (UV-less; the atlas module emits the textured variant)

inline std::string obj_from_mesh(const Mesh& m) {
  std::string s;
  s.reserve(m.vertices.size() * 40 + m.triangles.size() * 24);
  char line[128];
  for (const Vec3& p : m.vertices) {
    std::snprintf(line, sizeof line, "v %.9g %.9g %.9g\n", p.x, p.y, p.z);
    s += line;
  }
  for (const auto& t : m.triangles) {
    std::snprintf(line, sizeof line, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    s += line;
  }
  return s;
}

inline void save_obj(const Mesh& m, const std::string& path) { write_file(path, obj_from_mesh(m)); }

}  // namespace divc
