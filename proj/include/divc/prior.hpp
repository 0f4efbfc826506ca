#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "divc/coding_table.hpp"
#include "divc/tensor.hpp"

namespace divc {

inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

/// Interval probabilities below this are floored before the log to keep the
/// rate estimate finite early in training.
inline constexpr double kRateProbFloor = 0x1.0p-30;

// Learned factorized prior over quantized latents: one strictly increasing
// cumulative c(x) per channel, built from three monotone stages
//   u = softplus(w)*h + b,  h' = u + tanh(a)*tanh(u)
// with a final logistic squash. Monotone by construction for any parameter
// values, with limits 0 and 1, so every integer bin has positive mass.
struct FactorizedPrior {
  int channels = 0;
  // 8 parameters per channel, stored channel-major.
  std::vector<double> w1, b1, a1, w2, b2, a2, w3, b3;

  static constexpr int kParamsPerChannel = 8;

  void resize(int ch) {
    channels = ch;
    const double w0 = 0.5413248546129181;  // softplus^-1(1): identity-scale start
    w1.assign(ch, w0);
    b1.assign(ch, 0.0);
    a1.assign(ch, 0.0);
    w2.assign(ch, w0);
    b2.assign(ch, 0.0);
    a2.assign(ch, 0.0);
    w3.assign(ch, w0);
    b3.assign(ch, 0.0);
  }

  struct Eval {
    double c;         // cumulative value in (0,1)
    double dx;        // dc/dx
    double dp[8];     // dc/d{w1,b1,a1,w2,b2,a2,w3,b3}
  };

  Eval eval(int ch, double x) const {
    Eval e{};
    double s1 = softplus(w1[ch]), s2 = softplus(w2[ch]), s3 = softplus(w3[ch]);
    double g1 = sigmoid(w1[ch]), g2 = sigmoid(w2[ch]), g3 = sigmoid(w3[ch]);  // softplus'
    double t1 = std::tanh(a1[ch]), t2 = std::tanh(a2[ch]);

    double u1 = s1 * x + b1[ch];
    double tu1 = std::tanh(u1);
    double h1 = u1 + t1 * tu1;
    double dh1_du1 = 1.0 + t1 * (1.0 - tu1 * tu1);

    double u2 = s2 * h1 + b2[ch];
    double tu2 = std::tanh(u2);
    double h2 = u2 + t2 * tu2;
    double dh2_du2 = 1.0 + t2 * (1.0 - tu2 * tu2);

    double u3 = s3 * h2 + b3[ch];
    double c = sigmoid(u3);
    double dc_du3 = c * (1.0 - c);

    e.c = c;
    // chain rule back down the stack
    double dc_dh2 = dc_du3 * s3;
    double dc_dh1 = dc_dh2 * dh2_du2 * s2;
    double dc_du1 = dc_dh1 * dh1_du1;
    e.dx = dc_du1 * s1;

    e.dp[0] = dc_du1 * g1 * x;                                  // w1
    e.dp[1] = dc_du1;                                           // b1
    e.dp[2] = dc_dh1 * (1.0 - t1 * t1) * tu1;                   // a1
    e.dp[3] = dc_dh2 * dh2_du2 * g2 * h1;                       // w2
    e.dp[4] = dc_dh2 * dh2_du2;                                 // b2
    e.dp[5] = dc_dh2 * (1.0 - t2 * t2) * tu2;                   // a2
    e.dp[6] = dc_du3 * g3 * h2;                                 // w3
    e.dp[7] = dc_du3;                                           // b3
    return e;
  }

  double cdf(int ch, double x) const { return eval(ch, x).c; }

  /// Probability that the quantized latent equals integer n.
  double pmf(int ch, int32_t n) const { return cdf(ch, n + 0.5) - cdf(ch, n - 0.5); }
};

/// Gradient holder mirroring FactorizedPrior parameters.
struct PriorGrads {
  std::vector<double> g;  // channels * 8, layout [ch][param]
  void resize(int channels) { g.assign(size_t(channels) * 8, 0.0); }
  double& at(int ch, int p) { return g[size_t(ch) * 8 + p]; }
};

/// -sum log2 P(z in [z_i - 0.5, z_i + 0.5]) over a latent tensor whose
/// channel dimension indexes prior channels. Differentiable rate estimate
/// used during training (z carries additive uniform noise) and exact code
/// length in bits when z is integer.
inline double latent_rate_bits(const Tensor& z, const FactorizedPrior& prior) {
  double bits = 0.0;
  const size_t sp = z.spatial();
  for (int ch = 0; ch < z.c; ++ch)
    for (size_t i = 0; i < sp; ++i) {
      double x = z.v[size_t(ch) * sp + i];
      double p = prior.cdf(ch, x + 0.5) - prior.cdf(ch, x - 0.5);
      bits -= std::log2(std::max(p, kRateProbFloor));
    }
  return bits;
}

/// As latent_rate_bits, also accumulating d(bits)/dz into gz (+=, scaled by
/// `scale`) and d(bits)/dphi into gp.
inline double latent_rate_bits_backward(const Tensor& z, const FactorizedPrior& prior,
                                        double scale, Tensor& gz, PriorGrads& gp) {
  constexpr double kInvLn2 = 1.4426950408889634;
  double bits = 0.0;
  const size_t sp = z.spatial();
  for (int ch = 0; ch < z.c; ++ch)
    for (size_t i = 0; i < sp; ++i) {
      size_t at = size_t(ch) * sp + i;
      double x = z.v[at];
      FactorizedPrior::Eval hi = prior.eval(ch, x + 0.5);
      FactorizedPrior::Eval lo = prior.eval(ch, x - 0.5);
      double p = hi.c - lo.c;
      if (p <= kRateProbFloor) {
        bits -= std::log2(kRateProbFloor);
        continue;  // floored region: flat
      }
      bits -= std::log2(p);
      double dbits_dp = -kInvLn2 / p;
      gz.v[at] += scale * dbits_dp * (hi.dx - lo.dx);
      for (int q = 0; q < 8; ++q) gp.at(ch, q) += scale * dbits_dp * (hi.dp[q] - lo.dp[q]);
    }
  return bits;
}

// ---------------------------------------------------------------------------
// Coder tables

/// Integer support of one channel: [median - 32, median + 32] clipped to the
/// training-time observed range +- 8 (escape covers the tail).
inline void channel_support(const FactorizedPrior& prior, int ch, int32_t z_lo, int32_t z_hi,
                            int32_t& n_lo, int32_t& n_hi) {
  int32_t med = 0;
  // integer closest to the cumulative median, searched over a generous range
  double best = 2.0;
  for (int32_t n = -256; n <= 256; ++n) {
    double d = std::abs(prior.cdf(ch, double(n)) - 0.5);
    if (d < best) {
      best = d;
      med = n;
    }
  }
  n_lo = std::max(med - 32, z_lo - 8);
  n_hi = std::min(med + 32, z_hi + 8);
  if (n_lo > med) n_lo = med;
  if (n_hi < med) n_hi = med;
}

/// Deterministic bridge from the continuous prior to 16-bit coder
/// frequencies; both ends rebuild these from the model file, so the tables
/// are never serialized.
inline std::vector<CodingTable> build_coding_tables(const FactorizedPrior& prior,
                                                    const std::vector<int32_t>& z_lo,
                                                    const std::vector<int32_t>& z_hi) {
  std::vector<CodingTable> tables(prior.channels);
  for (int ch = 0; ch < prior.channels; ++ch) {
    int32_t lo, hi;
    channel_support(prior, ch, z_lo[ch], z_hi[ch], lo, hi);
    std::vector<double> masses;
    masses.reserve(size_t(hi - lo + 1) + 1);
    double in_range = 0.0;
    for (int32_t n = lo; n <= hi; ++n) {
      double p = prior.pmf(ch, n);
      masses.push_back(std::max(p, 1e-12));
      in_range += p;
    }
    masses.push_back(std::max(1.0 - in_range, 1e-6));  // escape
    tables[ch] = make_table_from_masses(lo, masses);
  }
  return tables;
}

}  // namespace divc
