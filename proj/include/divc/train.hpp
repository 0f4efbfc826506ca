#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "divc/nnet.hpp"
#include "divc/rng.hpp"
#include "divc/volume.hpp"

namespace divc {

struct TrainConfig {
  double lambda = 1e-3;
  double lr = 1e-3;
  double momentum = 0.9;
  long steps = 2000;
  int batch = 16;
  uint64_t seed = 0;
};

/// Step size that stays stable across the whole lambda sweep: the sign-rate
/// gradients scale with lambda, so the base rate is damped for large lambda.
inline double stable_lr(double lambda, double base = 1e-3) {
  return base / (1.0 + 3.0 * lambda);
}

/// The 12-point rate sweep schedule: lambda = 10^-mu, mu = i*log10(200000)/11.
inline std::vector<double> lambda_schedule() {
  std::vector<double> l(12);
  const double mu_step = std::log10(200000.0) / 11.0;
  for (int i = 0; i < 12; ++i) l[i] = std::pow(10.0, -mu_step * i);
  return l;
}

/// One training sample: normalized block values, signs, distortion masks.
struct TrainSample {
  Tensor x;  // (1, k^3), values / tau
  std::vector<int8_t> s;
  TopologyMasks masks;
};

inline TrainSample make_sample(const Block& b, float tau, uint32_t k) {
  TrainSample ts;
  ts.x = Tensor(1, int(k), int(k), int(k));
  ts.s.resize(b.values.size());
  for (size_t i = 0; i < b.values.size(); ++i) {
    ts.x.v[i] = double(b.values[i]) / double(tau);
    ts.s[i] = sign_of(b.values[i]);
  }
  ts.masks = topology_masks(ts.s, int(k));
  return ts;
}

struct TrainResult {
  Model model;
  std::vector<LossParts> history;  // per-step batch means
};

/// Momentum-SGD over the three-term objective, bit-reproducible for a given
/// seed: sequential gradient accumulation in block order, single-threaded
/// parameter updates, hand-rolled RNG. Aborts on non-finite loss. The
/// returned model is canonicalized (parameters rounded through float32) and
/// carries the observed quantized-latent range per channel.
inline TrainResult train(const std::vector<Block>& dataset, float tau, const ModelConfig& cfg,
                         const TrainConfig& tc) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (!(tc.lambda > 0.0)) throw std::invalid_argument("train: lambda must be positive");

  std::vector<TrainSample> samples;
  samples.reserve(dataset.size());
  for (const Block& b : dataset) samples.push_back(make_sample(b, tau, cfg.k));

  Rng rng(tc.seed);
  Model m = Model::make(cfg);
  m.init(rng);
  Model vel = m.zeros_like();

  TrainResult res;
  res.history.reserve(size_t(tc.steps));
  const size_t latent_n = cfg.latent_size();
  const int ld = int(cfg.latent_dim());
  Tensor noise(int(cfg.zc), ld, ld, ld);

  for (long step = 0; step < tc.steps; ++step) {
    Model g = m.zeros_like();
    LossParts mean;
    int batch = std::min<int>(tc.batch, int(samples.size()));
    double scale = 1.0 / double(batch);
    for (int bi = 0; bi < batch; ++bi) {
      const TrainSample& ts = samples[rng.below(samples.size())];
      for (size_t i = 0; i < latent_n; ++i) noise.v[i] = rng.uniform01() - 0.5;
      LossParts p = block_loss_backward(m, ts.x, ts.s, ts.masks, noise, tc.lambda, scale, g);
      mean.distortion += p.distortion * scale;
      mean.latent_bits += p.latent_bits * scale;
      mean.sign_bits += p.sign_bits * scale;
    }
    double total = mean.total(tc.lambda);
    if (!std::isfinite(total))
      throw divergence_error("training loss became non-finite", step);
    res.history.push_back(mean);

    // v = momentum*v - lr*g; w += v
    std::vector<std::vector<double>*> gs;
    g.for_each_param_array([&](std::vector<double>& a) { gs.push_back(&a); });
    size_t gi = 0;
    std::vector<std::vector<double>*> vs;
    vel.for_each_param_array([&](std::vector<double>& a) { vs.push_back(&a); });
    m.for_each_param_array([&](std::vector<double>& a) {
      std::vector<double>& gv = *gs[gi];
      std::vector<double>& vv = *vs[gi];
      for (size_t i = 0; i < a.size(); ++i) {
        vv[i] = tc.momentum * vv[i] - tc.lr * gv[i];
        a[i] += vv[i];
      }
      ++gi;
    });
  }

  m.canonicalize();

  // Observed integer-latent range per channel (computed with the canonical
  // parameters the coder will see), for the coder support.
  std::vector<int32_t> lo(cfg.zc, 0), hi(cfg.zc, 0);
  const size_t sp = size_t(ld) * ld * ld;
  for (const TrainSample& ts : samples) {
    Tensor z = encode_forward(m, ts.x);
    Tensor q = quantize_latent(z);
    for (uint32_t ch = 0; ch < cfg.zc; ++ch)
      for (size_t i = 0; i < sp; ++i) {
        int32_t n = int32_t(q.v[ch * sp + i]);
        lo[ch] = std::min(lo[ch], n);
        hi[ch] = std::max(hi[ch], n);
      }
  }
  m.z_lo = lo;
  m.z_hi = hi;
  res.model = std::move(m);
  return res;
}

/// Blocks of every occupied block of every volume, concatenated.
inline std::vector<Block> gather_blocks(const std::vector<TsdfVolume>& volumes, uint32_t k) {
  std::vector<Block> blocks;
  for (const TsdfVolume& v : volumes) {
    BlockExtraction e = extract_occupied_blocks(v, k);
    for (Block& b : e.blocks) blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace divc
