#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace divc {

// Dense channel-major volume tensor (c, d, h, w), doubles throughout: network
// evaluation feeds the entropy coder, so arithmetic must be reproducible.
struct Tensor {
  int c = 0, d = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int d_, int h_, int w_)
      : c(c_), d(d_), h(h_), w(w_), v(size_t(c_) * d_ * h_ * w_, 0.0) {}

  size_t spatial() const { return size_t(d) * h * w; }
  size_t size() const { return v.size(); }

  size_t idx(int ci, int z, int y, int x) const {
    return ((size_t(ci) * d + z) * h + y) * w + x;
  }
  double& at(int ci, int z, int y, int x) { return v[idx(ci, z, y, x)]; }
  double at(int ci, int z, int y, int x) const { return v[idx(ci, z, y, x)]; }

  bool same_shape(const Tensor& o) const {
    return c == o.c && d == o.d && h == o.h && w == o.w;
  }
  void require_shape(int c_, int d_, int h_, int w_, const char* what) const {
    if (c != c_ || d != d_ || h != h_ || w != w_)
      throw std::invalid_argument(std::string(what) + ": tensor shape mismatch");
  }
  void zero() { v.assign(v.size(), 0.0); }
};

inline constexpr double kLeakySlope = 0.2;

inline void leaky_relu_inplace(Tensor& t) {
  for (double& x : t.v)
    if (x < 0.0) x *= kLeakySlope;
}

/// d(lrelu)/dx evaluated at pre-activation x (slope at 0 taken as the
/// negative-side slope; measure-zero choice).
inline double leaky_relu_grad(double pre) { return pre > 0.0 ? 1.0 : kLeakySlope; }

}  // namespace divc
