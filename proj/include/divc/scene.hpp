#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "divc/rng.hpp"

namespace divc {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return n > 0 ? Vec3{x / n, y / n, z / n} : Vec3{0, 0, 0};
  }
};

// Analytic signed-distance primitives for building desk-scale test scenes.
// Units are millimetres; positive outside, negative inside.

struct SdfPrimitive {
  enum class Kind { Sphere, Box, Torus } kind = Kind::Sphere;
  Vec3 center;
  // Sphere: params[0] = radius.
  // Box: params = half extents.
  // Torus: params[0] = major radius, params[1] = minor radius (axis = y).
  std::array<double, 3> params{0, 0, 0};

  double eval(const Vec3& p) const {
    Vec3 q = p - center;
    switch (kind) {
      case Kind::Sphere:
        return q.norm() - params[0];
      case Kind::Box: {
        double dx = std::abs(q.x) - params[0];
        double dy = std::abs(q.y) - params[1];
        double dz = std::abs(q.z) - params[2];
        double ox = std::max(dx, 0.0), oy = std::max(dy, 0.0), oz = std::max(dz, 0.0);
        double outside = std::sqrt(ox * ox + oy * oy + oz * oz);
        double inside = std::min(std::max({dx, dy, dz}), 0.0);
        return outside + inside;
      }
      case Kind::Torus: {
        double ring = std::sqrt(q.x * q.x + q.z * q.z) - params[0];
        return std::sqrt(ring * ring + q.y * q.y) - params[1];
      }
    }
    return 0.0;
  }
};

// A scene is a smooth union of primitives: ordinary min when blend = 0,
// polynomial smooth-min otherwise.
struct SceneSpec {
  std::vector<SdfPrimitive> primitives;
  double blend = 0.0;  // mm

  double eval(const Vec3& p) const {
    if (primitives.empty()) return 1e30;
    double d = primitives[0].eval(p);
    for (size_t i = 1; i < primitives.size(); ++i) {
      double d2 = primitives[i].eval(p);
      if (blend <= 0.0) {
        d = std::min(d, d2);
      } else {
        double h = std::clamp(0.5 + 0.5 * (d2 - d) / blend, 0.0, 1.0);
        d = d2 + (d - d2) * h - blend * h * (1.0 - h);
      }
    }
    return d;
  }
};

inline SdfPrimitive make_sphere(Vec3 c, double r) {
  return {SdfPrimitive::Kind::Sphere, c, {r, 0, 0}};
}
inline SdfPrimitive make_box(Vec3 c, Vec3 half) {
  return {SdfPrimitive::Kind::Box, c, {half.x, half.y, half.z}};
}
inline SdfPrimitive make_torus(Vec3 c, double major, double minor) {
  return {SdfPrimitive::Kind::Torus, c, {major, minor}};
}

/// Named preset scenes; extent is the world-space size of the volume in mm.
/// "random" draws a small blended composition from the seed.
inline SceneSpec make_scene(const std::string& name, Vec3 extent, uint64_t seed = 0) {
  Vec3 c = extent * 0.5;
  double s = std::min({extent.x, extent.y, extent.z});
  SceneSpec scene;
  if (name == "sphere") {
    scene.primitives.push_back(make_sphere(c, 0.3 * s));
  } else if (name == "box") {
    scene.primitives.push_back(make_box(c, {0.28 * s, 0.2 * s, 0.24 * s}));
  } else if (name == "torus") {
    scene.primitives.push_back(make_torus(c, 0.26 * s, 0.1 * s));
  } else if (name == "blend") {
    scene.blend = 0.12 * s;
    scene.primitives.push_back(make_sphere(c + Vec3{-0.12 * s, 0, 0}, 0.2 * s));
    scene.primitives.push_back(make_sphere(c + Vec3{0.16 * s, 0.08 * s, 0.05 * s}, 0.16 * s));
    scene.primitives.push_back(make_box(c + Vec3{0, -0.18 * s, 0}, {0.26 * s, 0.06 * s, 0.2 * s}));
  } else if (name == "random") {
    Rng rng(seed ^ 0xD1BCull);
    scene.blend = rng.uniform(0.0, 0.15 * s);
    int n = rng.uniform_int(1, 3);
    for (int i = 0; i < n; ++i) {
      Vec3 pc = c + Vec3{rng.uniform(-0.18, 0.18) * s, rng.uniform(-0.18, 0.18) * s,
                         rng.uniform(-0.18, 0.18) * s};
      switch (rng.uniform_int(0, 2)) {
        case 0:
          scene.primitives.push_back(make_sphere(pc, rng.uniform(0.1, 0.24) * s));
          break;
        case 1:
          scene.primitives.push_back(make_box(
              pc, {rng.uniform(0.08, 0.2) * s, rng.uniform(0.08, 0.2) * s,
                   rng.uniform(0.08, 0.2) * s}));
          break;
        default:
          scene.primitives.push_back(
              make_torus(pc, rng.uniform(0.12, 0.22) * s, rng.uniform(0.04, 0.09) * s));
          break;
      }
    }
  } else {
    throw std::invalid_argument("unknown scene: " + name);
  }
  return scene;
}

}  // namespace divc
