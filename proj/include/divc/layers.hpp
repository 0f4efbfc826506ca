#pragma once

#include <cmath>
#include <vector>

#include "divc/rng.hpp"
#include "divc/tensor.hpp"

namespace divc {

// The three convolution shapes used by the codec network. Downsampling and
// upsampling use kernel 2 / stride 2 (non-overlapping), the decoder heads
// use kernel 3 / stride 1 / zero padding 1. Backward passes accumulate (+=)
// into caller-owned gradient holders of the same layer type.

namespace detail {
inline double init_limit(size_t fan_in, size_t fan_out) {
  return std::sqrt(6.0 / double(fan_in + fan_out));
}
}  // namespace detail

/// kernel 2, stride 2: (cin, n^3) -> (cout, (n/2)^3)
struct ConvDown {
  int cin = 0, cout = 0;
  std::vector<double> w;  // [cout][cin][8]
  std::vector<double> b;  // [cout]

  void resize(int cin_, int cout_) {
    cin = cin_;
    cout = cout_;
    w.assign(size_t(cout) * cin * 8, 0.0);
    b.assign(size_t(cout), 0.0);
  }
  void init(Rng& rng) {
    double lim = detail::init_limit(size_t(cin) * 8, size_t(cout) * 8);
    for (double& x : w) x = rng.uniform(-lim, lim);
  }
  size_t widx(int co, int ci, int off) const { return (size_t(co) * cin + ci) * 8 + off; }

  Tensor forward(const Tensor& in) const {
    Tensor out(cout, in.d / 2, in.h / 2, in.w / 2);
    for (int co = 0; co < cout; ++co)
      for (int z = 0; z < out.d; ++z)
        for (int y = 0; y < out.h; ++y)
          for (int x = 0; x < out.w; ++x) {
            double acc = b[co];
            for (int ci = 0; ci < cin; ++ci)
              for (int oz = 0; oz < 2; ++oz)
                for (int oy = 0; oy < 2; ++oy)
                  for (int ox = 0; ox < 2; ++ox)
                    acc += w[widx(co, ci, oz * 4 + oy * 2 + ox)] *
                           in.at(ci, 2 * z + oz, 2 * y + oy, 2 * x + ox);
            out.at(co, z, y, x) = acc;
          }
    return out;
  }

  void backward(const Tensor& in, const Tensor& gout, Tensor& gin, ConvDown& g) const {
    gin = Tensor(in.c, in.d, in.h, in.w);
    for (int co = 0; co < cout; ++co)
      for (int z = 0; z < gout.d; ++z)
        for (int y = 0; y < gout.h; ++y)
          for (int x = 0; x < gout.w; ++x) {
            double go = gout.at(co, z, y, x);
            g.b[co] += go;
            for (int ci = 0; ci < cin; ++ci)
              for (int oz = 0; oz < 2; ++oz)
                for (int oy = 0; oy < 2; ++oy)
                  for (int ox = 0; ox < 2; ++ox) {
                    size_t wi = widx(co, ci, oz * 4 + oy * 2 + ox);
                    g.w[wi] += go * in.at(ci, 2 * z + oz, 2 * y + oy, 2 * x + ox);
                    gin.at(ci, 2 * z + oz, 2 * y + oy, 2 * x + ox) += go * w[wi];
                  }
          }
  }

  /// Frobenius norm of the kernel; upper-bounds the operator norm because
  /// the stride-2 kernel-2 map is block diagonal with identical blocks.
  double op_norm_bound() const {
    double s = 0.0;
    for (double x : w) s += x * x;
    return std::sqrt(s);
  }
};

/// transposed, kernel 2, stride 2: (cin, n^3) -> (cout, (2n)^3)
struct ConvUp {
  int cin = 0, cout = 0;
  std::vector<double> w;  // [cin][cout][8]
  std::vector<double> b;  // [cout]

  void resize(int cin_, int cout_) {
    cin = cin_;
    cout = cout_;
    w.assign(size_t(cin) * cout * 8, 0.0);
    b.assign(size_t(cout), 0.0);
  }
  void init(Rng& rng) {
    double lim = detail::init_limit(size_t(cin), size_t(cout));
    for (double& x : w) x = rng.uniform(-lim, lim);
  }
  size_t widx(int ci, int co, int off) const { return (size_t(ci) * cout + co) * 8 + off; }

  Tensor forward(const Tensor& in) const {
    Tensor out(cout, in.d * 2, in.h * 2, in.w * 2);
    for (int co = 0; co < cout; ++co)
      for (int z = 0; z < in.d; ++z)
        for (int y = 0; y < in.h; ++y)
          for (int x = 0; x < in.w; ++x)
            for (int oz = 0; oz < 2; ++oz)
              for (int oy = 0; oy < 2; ++oy)
                for (int ox = 0; ox < 2; ++ox) {
                  double acc = 0.0;
                  for (int ci = 0; ci < cin; ++ci)
                    acc += w[widx(ci, co, oz * 4 + oy * 2 + ox)] * in.at(ci, z, y, x);
                  out.at(co, 2 * z + oz, 2 * y + oy, 2 * x + ox) = acc + b[co];
                }
    return out;
  }

  void backward(const Tensor& in, const Tensor& gout, Tensor& gin, ConvUp& g) const {
    gin = Tensor(in.c, in.d, in.h, in.w);
    for (int co = 0; co < cout; ++co)
      for (int z = 0; z < in.d; ++z)
        for (int y = 0; y < in.h; ++y)
          for (int x = 0; x < in.w; ++x)
            for (int oz = 0; oz < 2; ++oz)
              for (int oy = 0; oy < 2; ++oy)
                for (int ox = 0; ox < 2; ++ox) {
                  double go = gout.at(co, 2 * z + oz, 2 * y + oy, 2 * x + ox);
                  g.b[co] += go;
                  for (int ci = 0; ci < cin; ++ci) {
                    size_t wi = widx(ci, co, oz * 4 + oy * 2 + ox);
                    g.w[wi] += go * in.at(ci, z, y, x);
                    gin.at(ci, z, y, x) += go * w[wi];
                  }
                }
  }
};

/// kernel 3, stride 1, zero pad 1: (cin, n^3) -> (cout, n^3)
struct ConvSame {
  int cin = 0, cout = 0;
  std::vector<double> w;  // [cout][cin][27]
  std::vector<double> b;  // [cout]

  void resize(int cin_, int cout_) {
    cin = cin_;
    cout = cout_;
    w.assign(size_t(cout) * cin * 27, 0.0);
    b.assign(size_t(cout), 0.0);
  }
  void init(Rng& rng) {
    double lim = detail::init_limit(size_t(cin) * 27, size_t(cout) * 27);
    for (double& x : w) x = rng.uniform(-lim, lim);
  }
  size_t widx(int co, int ci, int off) const { return (size_t(co) * cin + ci) * 27 + off; }

  Tensor forward(const Tensor& in) const {
    Tensor out(cout, in.d, in.h, in.w);
    for (int co = 0; co < cout; ++co)
      for (int z = 0; z < in.d; ++z)
        for (int y = 0; y < in.h; ++y)
          for (int x = 0; x < in.w; ++x) {
            double acc = b[co];
            for (int ci = 0; ci < cin; ++ci)
              for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                  for (int dx = -1; dx <= 1; ++dx) {
                    int zz = z + dz, yy = y + dy, xx = x + dx;
                    if (zz < 0 || zz >= in.d || yy < 0 || yy >= in.h || xx < 0 || xx >= in.w)
                      continue;
                    acc += w[widx(co, ci, (dz + 1) * 9 + (dy + 1) * 3 + (dx + 1))] *
                           in.at(ci, zz, yy, xx);
                  }
            out.at(co, z, y, x) = acc;
          }
    return out;
  }

  void backward(const Tensor& in, const Tensor& gout, Tensor& gin, ConvSame& g) const {
    gin = Tensor(in.c, in.d, in.h, in.w);
    for (int co = 0; co < cout; ++co)
      for (int z = 0; z < in.d; ++z)
        for (int y = 0; y < in.h; ++y)
          for (int x = 0; x < in.w; ++x) {
            double go = gout.at(co, z, y, x);
            g.b[co] += go;
            for (int ci = 0; ci < cin; ++ci)
              for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                  for (int dx = -1; dx <= 1; ++dx) {
                    int zz = z + dz, yy = y + dy, xx = x + dx;
                    if (zz < 0 || zz >= in.d || yy < 0 || yy >= in.h || xx < 0 || xx >= in.w)
                      continue;
                    size_t wi = widx(co, ci, (dz + 1) * 9 + (dy + 1) * 3 + (dx + 1));
                    g.w[wi] += go * in.at(ci, zz, yy, xx);
                    gin.at(ci, zz, yy, xx) += go * w[wi];
                  }
          }
  }
};

}  // namespace divc
