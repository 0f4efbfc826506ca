#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "divc/common.hpp"
#include "divc/layers.hpp"
#include "divc/prior.hpp"
#include "divc/rng.hpp"
#include "divc/tensor.hpp"

namespace divc {

inline constexpr char kModelMagic[4] = {'D', 'I', 'V', 'M'};
inline constexpr uint8_t kModelVersion = 1;

/// Probabilities are clamped this far from {0,1} before logs in the sign
/// cross entropy.
inline constexpr double kSignProbEps = 0x1.0p-20;

// ---------------------------------------------------------------------------
// Architecture

struct ModelConfig {
  uint32_t k = 8;       // block edge, power of two
  uint32_t layers = 3;  // stride-2 stages on each side, k >> layers >= 1
  uint32_t zc = 32;     // latent channels
  std::vector<uint32_t> enc_out;  // encoder widths, last == zc
  std::vector<uint32_t> dec_out;  // decoder trunk widths, last == head input

  static ModelConfig make(uint32_t k = 8, uint32_t layers = 3) {
    if (k == 0 || (k & (k - 1)) != 0) throw std::invalid_argument("block size must be a power of two");
    if (layers < 1 || layers > 4 || (k >> layers) == 0)
      throw std::invalid_argument("layer count incompatible with block size");
    ModelConfig c;
    c.k = k;
    c.layers = layers;
    switch (layers) {
      case 1:
        c.enc_out = {32};
        c.dec_out = {16};
        break;
      case 2:
        c.enc_out = {16, 32};
        c.dec_out = {16, 16};
        break;
      case 3:
        c.enc_out = {16, 32, 32};
        c.dec_out = {32, 16, 16};
        break;
      default:
        c.enc_out = {16, 16, 32, 32};
        c.dec_out = {32, 16, 16, 16};
        break;
    }
    c.zc = c.enc_out.back();
    return c;
  }

  uint32_t latent_dim() const { return k >> layers; }
  size_t latent_size() const { return size_t(zc) * latent_dim() * latent_dim() * latent_dim(); }
};

// Encoder, decoder trunk, the two stride-1 heads, and the latent prior.
// Gradient and momentum holders reuse this struct via zeros_like().
struct Model {
  ModelConfig cfg;
  std::vector<ConvDown> enc;
  std::vector<ConvUp> dec;
  ConvSame head_mag;   // TSDF magnitude estimate
  ConvSame head_sign;  // sign logits
  FactorizedPrior prior;
  std::vector<int32_t> z_lo, z_hi;  // observed quantized-latent range per channel

  static Model make(const ModelConfig& cfg) {
    Model m;
    m.cfg = cfg;
    uint32_t cin = 1;
    for (uint32_t l = 0; l < cfg.layers; ++l) {
      ConvDown cd;
      cd.resize(int(cin), int(cfg.enc_out[l]));
      m.enc.push_back(std::move(cd));
      cin = cfg.enc_out[l];
    }
    cin = cfg.zc;
    for (uint32_t l = 0; l < cfg.layers; ++l) {
      ConvUp cu;
      cu.resize(int(cin), int(cfg.dec_out[l]));
      m.dec.push_back(std::move(cu));
      cin = cfg.dec_out[l];
    }
    m.head_mag.resize(int(cin), 1);
    m.head_sign.resize(int(cin), 1);
    m.prior.resize(int(cfg.zc));
    m.z_lo.assign(cfg.zc, -32);
    m.z_hi.assign(cfg.zc, 32);
    return m;
  }

  void init(Rng& rng) {
    for (auto& l : enc) l.init(rng);
    for (auto& l : dec) l.init(rng);
    head_mag.init(rng);
    head_sign.init(rng);
    // prior starts at resize() defaults (identity-scale logistic)
  }

  Model zeros_like() const {
    Model z = *this;
    z.for_each_param_array([](std::vector<double>& a) { a.assign(a.size(), 0.0); });
    return z;
  }

  /// Visits every parameter vector in a fixed order shared by the SGD
  /// update, finite-difference probing, and serialization.
  template <class Fn>
  void for_each_param_array(Fn&& fn) {
    for (auto& l : enc) {
      fn(l.w);
      fn(l.b);
    }
    for (auto& l : dec) {
      fn(l.w);
      fn(l.b);
    }
    fn(head_mag.w);
    fn(head_mag.b);
    fn(head_sign.w);
    fn(head_sign.b);
    fn(prior.w1);
    fn(prior.b1);
    fn(prior.a1);
    fn(prior.w2);
    fn(prior.b2);
    fn(prior.a2);
    fn(prior.w3);
    fn(prior.b3);
  }
  template <class Fn>
  void for_each_param_array(Fn&& fn) const {
    const_cast<Model*>(this)->for_each_param_array(
        [&](std::vector<double>& a) { fn(const_cast<const std::vector<double>&>(a)); });
  }

  size_t param_count() const {
    size_t n = 0;
    for_each_param_array([&](const std::vector<double>& a) { n += a.size(); });
    return n;
  }

  std::vector<double*> param_ptrs() {
    std::vector<double*> p;
    for_each_param_array([&](std::vector<double>& a) {
      for (double& x : a) p.push_back(&x);
    });
    return p;
  }

  /// Rounds every parameter through float32. Models are always canonicalized
  /// before any value feeds the entropy coder, so the in-memory model and
  /// the one a receiver loads from file are bit-identical.
  void canonicalize() {
    for_each_param_array([](std::vector<double>& a) {
      for (double& x : a) x = double(float(x));
    });
  }
};

// ---------------------------------------------------------------------------
// Forward passes

struct EncodeTrace {
  std::vector<Tensor> in;   // input of each encoder conv
  std::vector<Tensor> pre;  // conv output before activation
};

/// x: (1, k, k, k) block normalized to [-1, 1]. Leaky-rectifier between
/// layers, identity on the latent.
inline Tensor encode_forward(const Model& m, const Tensor& x, EncodeTrace* tr = nullptr) {
  x.require_shape(1, int(m.cfg.k), int(m.cfg.k), int(m.cfg.k), "encode");
  Tensor t = x;
  for (size_t l = 0; l < m.enc.size(); ++l) {
    if (tr) tr->in.push_back(t);
    Tensor pre = m.enc[l].forward(t);
    if (tr) tr->pre.push_back(pre);
    if (l + 1 < m.enc.size()) leaky_relu_inplace(pre);
    t = std::move(pre);
  }
  return t;
}

struct DecodeTrace {
  std::vector<Tensor> in;   // input of each trunk conv
  std::vector<Tensor> pre;  // trunk conv output before activation
  Tensor trunk_out;         // head input
};

struct DecodeOut {
  Tensor mag;    // (1, k^3) raw magnitude-head output (sign applied via |.|)
  Tensor logit;  // (1, k^3) sign-head logits; P(s=+1) = sigmoid(logit)
};

inline DecodeOut decode_forward(const Model& m, const Tensor& zhat, DecodeTrace* tr = nullptr) {
  int ld = int(m.cfg.latent_dim());
  zhat.require_shape(int(m.cfg.zc), ld, ld, ld, "decode");
  Tensor t = zhat;
  for (size_t l = 0; l < m.dec.size(); ++l) {
    if (tr) tr->in.push_back(t);
    Tensor pre = m.dec[l].forward(t);
    if (tr) tr->pre.push_back(pre);
    leaky_relu_inplace(pre);
    t = std::move(pre);
  }
  if (tr) tr->trunk_out = t;
  DecodeOut out;
  out.mag = m.head_mag.forward(t);
  out.logit = m.head_sign.forward(t);
  return out;
}

/// Inference quantization: round to nearest integer, ties away from zero.
inline Tensor quantize_latent(const Tensor& z) {
  Tensor q = z;
  for (double& x : q.v) x = std::round(x);
  return q;
}

// ---------------------------------------------------------------------------
// Topology masks and losses

/// Per-axis masks over one block: a voxel is marked in axis d iff one of its
/// in-block d-neighbors has the opposite sign (both endpoints of a crossing
/// edge are marked; a voxel crossing on several axes appears in several
/// masks and so gets proportionally more weight in the distortion).
struct TopologyMasks {
  int k = 0;
  std::vector<uint8_t> mx, my, mz;  // k^3 each

  int weight(size_t i) const { return int(mx[i]) + int(my[i]) + int(mz[i]); }
};

inline TopologyMasks topology_masks(const std::vector<int8_t>& s, int k) {
  TopologyMasks m;
  m.k = k;
  size_t n = size_t(k) * k * k;
  m.mx.assign(n, 0);
  m.my.assign(n, 0);
  m.mz.assign(n, 0);
  auto id = [k](int x, int y, int z) { return size_t(x) + size_t(k) * (size_t(y) + size_t(k) * z); };
  for (int z = 0; z < k; ++z)
    for (int y = 0; y < k; ++y)
      for (int x = 0; x < k; ++x) {
        int8_t v = s[id(x, y, z)];
        if (x + 1 < k && v != s[id(x + 1, y, z)]) m.mx[id(x, y, z)] = m.mx[id(x + 1, y, z)] = 1;
        if (y + 1 < k && v != s[id(x, y + 1, z)]) m.my[id(x, y, z)] = m.my[id(x, y + 1, z)] = 1;
        if (z + 1 < k && v != s[id(x, y, z + 1)]) m.mz[id(x, y, z)] = m.mz[id(x, y, z + 1)] = 1;
      }
  return m;
}

/// sum_d || m_d . (xhat - x) ||^2 for one block (no batch normalization).
inline double masked_distortion(const std::vector<double>& x, const std::vector<double>& xhat,
                                const TopologyMasks& m) {
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double e = xhat[i] - x[i];
    acc += double(m.weight(i)) * e * e;
  }
  return acc;
}

/// Cross entropy in bits between ground-truth signs (-1 remapped to 0) and
/// P(s=+1) probabilities; probabilities clamped to [eps, 1-eps].
inline double sign_rate_bits(const std::vector<int8_t>& s, const std::vector<double>& prob_one) {
  double bits = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    double p = std::clamp(prob_one[i], kSignProbEps, 1.0 - kSignProbEps);
    bits -= (s[i] > 0) ? std::log2(p) : std::log2(1.0 - p);
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Training-step forward/backward over one block

struct LossParts {
  double distortion = 0.0;
  double latent_bits = 0.0;
  double sign_bits = 0.0;
  double total(double lambda) const { return distortion + lambda * (latent_bits + sign_bits); }
};

/// Forward + backward through the additive-noise quantization surrogate for
/// one block. Gradients are scaled by `scale` (1/batch) and accumulated into
/// `g`. `noise` must have latent shape; pass zeros for deterministic probes.
inline LossParts block_loss_backward(const Model& m, const Tensor& x, const std::vector<int8_t>& s,
                                     const TopologyMasks& masks, const Tensor& noise,
                                     double lambda, double scale, Model& g) {
  // forward
  EncodeTrace etr;
  Tensor z = encode_forward(m, x, &etr);
  Tensor zh = z;
  for (size_t i = 0; i < zh.v.size(); ++i) zh.v[i] += noise.v[i];

  DecodeTrace dtr;
  DecodeOut out = decode_forward(m, zh, &dtr);

  const size_t n = x.v.size();
  std::vector<double> xhat(n);
  for (size_t i = 0; i < n; ++i) xhat[i] = double(s[i]) * std::abs(out.mag.v[i]);

  LossParts parts;
  parts.distortion = masked_distortion(x.v, xhat, masks);

  std::vector<double> prob(n);
  for (size_t i = 0; i < n; ++i) prob[i] = sigmoid(out.logit.v[i]);
  parts.sign_bits = sign_rate_bits(s, prob);

  // backward: heads
  constexpr double kInvLn2 = 1.4426950408889634;
  Tensor gmag(1, x.d, x.h, x.w), glogit(1, x.d, x.h, x.w);
  for (size_t i = 0; i < n; ++i) {
    double e = xhat[i] - x.v[i];
    double dD_dxhat = 2.0 * double(masks.weight(i)) * e;
    double sgn = out.mag.v[i] > 0.0 ? 1.0 : (out.mag.v[i] < 0.0 ? -1.0 : 0.0);
    gmag.v[i] = scale * dD_dxhat * double(s[i]) * sgn;
    double sp = s[i] > 0 ? 1.0 : 0.0;
    bool clamped = prob[i] < kSignProbEps || prob[i] > 1.0 - kSignProbEps;
    glogit.v[i] = clamped ? 0.0 : scale * lambda * (prob[i] - sp) * kInvLn2;
  }

  Tensor gtrunk, tmp;
  m.head_mag.backward(dtr.trunk_out, gmag, gtrunk, g.head_mag);
  m.head_sign.backward(dtr.trunk_out, glogit, tmp, g.head_sign);
  for (size_t i = 0; i < gtrunk.v.size(); ++i) gtrunk.v[i] += tmp.v[i];

  // backward: decoder trunk (leaky-rectifier after every trunk conv)
  Tensor gout = std::move(gtrunk);
  for (size_t l = m.dec.size(); l-- > 0;) {
    for (size_t i = 0; i < gout.v.size(); ++i) gout.v[i] *= leaky_relu_grad(dtr.pre[l].v[i]);
    Tensor gin;
    m.dec[l].backward(dtr.in[l], gout, gin, g.dec[l]);
    gout = std::move(gin);
  }
  Tensor gzh = std::move(gout);  // gradient into zhat from reconstruction path

  // latent rate on the noisy code: adds to gzh and prior grads
  PriorGrads gp;
  gp.resize(m.prior.channels);
  parts.latent_bits = latent_rate_bits_backward(zh, m.prior, scale * lambda, gzh, gp);
  for (int ch = 0; ch < m.prior.channels; ++ch) {
    g.prior.w1[ch] += gp.at(ch, 0);
    g.prior.b1[ch] += gp.at(ch, 1);
    g.prior.a1[ch] += gp.at(ch, 2);
    g.prior.w2[ch] += gp.at(ch, 3);
    g.prior.b2[ch] += gp.at(ch, 4);
    g.prior.a2[ch] += gp.at(ch, 5);
    g.prior.w3[ch] += gp.at(ch, 6);
    g.prior.b3[ch] += gp.at(ch, 7);
  }

  // backward: encoder (noise surrogate passes gradients through unchanged)
  gout = std::move(gzh);
  for (size_t l = m.enc.size(); l-- > 0;) {
    if (l + 1 < m.enc.size())  // identity activation on the latent layer
      for (size_t i = 0; i < gout.v.size(); ++i) gout.v[i] *= leaky_relu_grad(etr.pre[l].v[i]);
    Tensor gin;
    m.enc[l].backward(etr.in[l], gout, gin, g.enc[l]);
    gout = std::move(gin);
  }
  return parts;
}

/// Loss only (no gradients); same arithmetic path as block_loss_backward.
inline LossParts block_loss(const Model& m, const Tensor& x, const std::vector<int8_t>& s,
                            const TopologyMasks& masks, const Tensor& noise) {
  Tensor z = encode_forward(m, x);
  Tensor zh = z;
  for (size_t i = 0; i < zh.v.size(); ++i) zh.v[i] += noise.v[i];
  DecodeOut out = decode_forward(m, zh);
  const size_t n = x.v.size();
  std::vector<double> xhat(n), prob(n);
  for (size_t i = 0; i < n; ++i) {
    xhat[i] = double(s[i]) * std::abs(out.mag.v[i]);
    prob[i] = sigmoid(out.logit.v[i]);
  }
  LossParts parts;
  parts.distortion = masked_distortion(x.v, xhat, masks);
  parts.sign_bits = sign_rate_bits(s, prob);
  parts.latent_bits = latent_rate_bits(zh, m.prior);
  return parts;
}

// ---------------------------------------------------------------------------
// Serialization: "DIVM" | version | k | layers | zc | enc widths | dec widths
// | z_lo[zc] | z_hi[zc] | param count u64 | params f32le | fnv1a64 hash

inline Bytes serialize_model(const Model& m) {
  Bytes b;
  b.insert(b.end(), kModelMagic, kModelMagic + 4);
  put_u8(b, kModelVersion);
  put_u32le(b, m.cfg.k);
  put_u32le(b, m.cfg.layers);
  put_u32le(b, m.cfg.zc);
  for (uint32_t wdt : m.cfg.enc_out) put_u32le(b, wdt);
  for (uint32_t wdt : m.cfg.dec_out) put_u32le(b, wdt);
  for (int32_t v : m.z_lo) put_u32le(b, uint32_t(v));
  for (int32_t v : m.z_hi) put_u32le(b, uint32_t(v));
  put_u64le(b, m.param_count());
  m.for_each_param_array([&](const std::vector<double>& a) {
    for (double x : a) put_f32le(b, float(x));
  });
  put_u64le(b, fnv1a64(b));
  return b;
}

inline uint64_t model_content_hash(const Model& m) {
  Bytes b = serialize_model(m);
  ByteReader r(b);
  r.view(b.size() - 8);
  uint64_t h = r.u64le();
  return h;
}

inline Model parse_model(const Bytes& bytes) {
  if (bytes.size() < 12) throw format_error("model file truncated");
  uint64_t stored;
  {
    ByteReader tail(bytes.data() + bytes.size() - 8, 8);
    stored = tail.u64le();
  }
  if (fnv1a64(bytes.data(), bytes.size() - 8) != stored)
    throw format_error("model file hash mismatch (corrupt or truncated)");

  ByteReader r(bytes);
  uint8_t magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw format_error("not a DIVM model file");
  if (r.u8() != kModelVersion) throw format_error("unsupported model version");
  ModelConfig cfg;
  cfg.k = r.u32le();
  cfg.layers = r.u32le();
  cfg.zc = r.u32le();
  if (cfg.layers < 1 || cfg.layers > 8 || cfg.k == 0 || (cfg.k & (cfg.k - 1)) != 0 ||
      (cfg.k >> cfg.layers) == 0 || cfg.zc == 0 || cfg.zc > 4096)
    throw format_error("bad model architecture descriptor");
  cfg.enc_out.resize(cfg.layers);
  cfg.dec_out.resize(cfg.layers);
  for (auto& wdt : cfg.enc_out) wdt = r.u32le();
  for (auto& wdt : cfg.dec_out) wdt = r.u32le();
  if (cfg.enc_out.back() != cfg.zc) throw format_error("bad model architecture descriptor");
  Model m = Model::make(cfg);
  for (auto& v : m.z_lo) v = int32_t(r.u32le());
  for (auto& v : m.z_hi) v = int32_t(r.u32le());
  uint64_t n = r.u64le();
  if (n != m.param_count()) throw format_error("model parameter count mismatch");
  m.for_each_param_array([&](std::vector<double>& a) {
    for (double& x : a) x = double(r.f32le());
  });
  return m;
}

inline void save_model(const Model& m, const std::string& path) {
  write_file(path, serialize_model(m));
}

inline Model load_model(const std::string& path) { return parse_model(read_file(path)); }

}  // namespace divc
