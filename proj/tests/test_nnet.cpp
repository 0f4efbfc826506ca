#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "divc/nnet.hpp"
#include "divc/rng.hpp"

using namespace divc;

namespace {

ModelConfig toy_config() {
  // 2-channel toy network: k=4, two stages each side
  ModelConfig cfg;
  cfg.k = 4;
  cfg.layers = 2;
  cfg.zc = 2;
  cfg.enc_out = {2, 2};
  cfg.dec_out = {2, 2};
  return cfg;
}

struct ToyProblem {
  Model m;
  Tensor x;
  std::vector<int8_t> s;
  TopologyMasks masks;
  Tensor noise;
  double lambda = 0.02;
};

ToyProblem make_toy(uint64_t seed) {
  ToyProblem t;
  Rng rng(seed);
  t.m = Model::make(toy_config());
  t.m.init(rng);
  t.x = Tensor(1, 4, 4, 4);
  t.s.resize(64);
  for (size_t i = 0; i < 64; ++i) {
    t.x.v[i] = rng.uniform(-1.0, 1.0);
    t.s[i] = t.x.v[i] < 0 ? -1 : 1;
  }
  t.masks = topology_masks(t.s, 4);
  int ld = int(t.m.cfg.latent_dim());
  t.noise = Tensor(2, ld, ld, ld);
  for (auto& e : t.noise.v) e = rng.uniform(-0.5, 0.5);
  return t;
}

double toy_loss(const ToyProblem& t, const Model& m) {
  return block_loss(m, t.x, t.s, t.masks, t.noise).total(t.lambda);
}

// generic linear-functional gradient check for a conv layer
template <class Layer>
void check_layer_gradients(Layer& layer, const Tensor& in, uint64_t seed) {
  Rng rng(seed);
  Tensor out = layer.forward(in);
  Tensor gout(out.c, out.d, out.h, out.w);
  for (auto& g : gout.v) g = rng.uniform(-1.0, 1.0);

  Layer grads = layer;
  for (auto& w : grads.w) w = 0;
  for (auto& b : grads.b) b = 0;
  Tensor gin;
  layer.backward(in, gout, gin, grads);

  auto loss = [&](const Layer& l, const Tensor& input) {
    Tensor o = l.forward(input);
    double acc = 0;
    for (size_t i = 0; i < o.v.size(); ++i) acc += gout.v[i] * o.v[i];
    return acc;
  };

  const double h = 1e-3;
  auto check = [&](double analytic, double fd, const char* what, size_t i) {
    double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-3});
    ASSERT_LT(rel, 1e-4) << what << " " << i;
  };
  for (size_t i = 0; i < layer.w.size(); i += std::max<size_t>(1, layer.w.size() / 16)) {
    Layer lp = layer, lm = layer;
    lp.w[i] += h;
    lm.w[i] -= h;
    check(grads.w[i], (loss(lp, in) - loss(lm, in)) / (2 * h), "w", i);
  }
  for (size_t i = 0; i < layer.b.size(); ++i) {
    Layer lp = layer, lm = layer;
    lp.b[i] += h;
    lm.b[i] -= h;
    check(grads.b[i], (loss(lp, in) - loss(lm, in)) / (2 * h), "b", i);
  }
  for (size_t i = 0; i < in.v.size(); i += std::max<size_t>(1, in.v.size() / 16)) {
    Tensor ip = in, im = in;
    ip.v[i] += h;
    im.v[i] -= h;
    check(gin.v[i], (loss(layer, ip) - loss(layer, im)) / (2 * h), "x", i);
  }
}

}  // namespace

TEST(Encoder, ZeroWeightsPassOnlyBias) {
  Model m = Model::make(ModelConfig::make(8, 3));  // all parameters zero
  for (size_t ch = 0; ch < m.enc.back().b.size(); ++ch)
    m.enc.back().b[ch] = 0.25 * double(ch + 1);
  Tensor x(1, 8, 8, 8);
  for (auto& v : x.v) v = 1.0;  // all-(+tau) block, normalized
  Tensor z = encode_forward(m, x);
  ASSERT_EQ(z.c, 32);
  ASSERT_EQ(z.spatial(), 1u);
  for (int ch = 0; ch < z.c; ++ch) EXPECT_DOUBLE_EQ(z.v[size_t(ch)], 0.25 * double(ch + 1));
}

TEST(Encoder, DeterministicGivenSeed) {
  auto run = [] {
    Rng rng(123);
    Model m = Model::make(ModelConfig::make(8, 3));
    m.init(rng);
    Tensor x(1, 8, 8, 8);
    Rng rx(5);
    for (auto& v : x.v) v = rx.uniform(-1.0, 1.0);
    return encode_forward(m, x);
  };
  Tensor a = run(), b = run();
  ASSERT_EQ(a.v.size(), b.v.size());
  EXPECT_EQ(std::memcmp(a.v.data(), b.v.data(), a.v.size() * sizeof(double)), 0);
}

TEST(Encoder, LipschitzBoundHolds) {
  Rng rng(9);
  Model m = Model::make(ModelConfig::make(8, 3));
  m.init(rng);
  double bound = 1.0;
  for (const auto& l : m.enc) bound *= l.op_norm_bound();

  Tensor x(1, 8, 8, 8);
  for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);
  Tensor z0 = encode_forward(m, x);
  const double delta = 1e-3;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor xp = x;
    xp.v[rng.below(xp.v.size())] += delta;
    Tensor z1 = encode_forward(m, xp);
    double dist = 0;
    for (size_t i = 0; i < z0.v.size(); ++i) {
      double e = z1.v[i] - z0.v[i];
      dist += e * e;
    }
    EXPECT_LE(std::sqrt(dist), bound * delta * (1.0 + 1e-9));
  }
}

TEST(Decoder, ZeroEverythingGivesHalfProbs) {
  Model m = Model::make(ModelConfig::make(8, 3));
  Tensor zhat(32, 1, 1, 1);
  DecodeOut out = decode_forward(m, zhat);
  for (double logit : out.logit.v) EXPECT_DOUBLE_EQ(sigmoid(logit), 0.5);
}

TEST(Decoder, ProbsStrictlyInsideUnitInterval) {
  Rng rng(31);
  Model m = Model::make(ModelConfig::make(8, 3));
  m.init(rng);
  Tensor zhat(32, 1, 1, 1);
  for (auto& v : zhat.v) v = double(rng.uniform_int(-8, 8));
  DecodeOut out = decode_forward(m, zhat);
  for (double logit : out.logit.v) {
    double p = sigmoid(logit);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_TRUE(std::isfinite(p));
  }
  // reconstruction sign fidelity: sign(s*|mag|) = s wherever mag != 0
  for (size_t i = 0; i < out.mag.v.size(); ++i) {
    if (out.mag.v[i] == 0.0) continue;
    double xhat_pos = 1.0 * std::abs(out.mag.v[i]);
    double xhat_neg = -1.0 * std::abs(out.mag.v[i]);
    EXPECT_GT(xhat_pos, 0.0);
    EXPECT_LT(xhat_neg, 0.0);
  }
}

TEST(Masks, CrossingMarksBothEndpoints) {
  Rng rng(17);
  const int k = 8;
  std::vector<int8_t> s(size_t(k) * k * k);
  for (auto& v : s) v = rng.coin(0.3) ? -1 : 1;
  TopologyMasks m = topology_masks(s, k);
  auto id = [&](int x, int y, int z) { return size_t(x) + size_t(k) * (size_t(y) + size_t(k) * z); };
  for (int z = 0; z < k; ++z)
    for (int y = 0; y < k; ++y)
      for (int x = 0; x < k; ++x) {
        bool cx = (x + 1 < k && s[id(x, y, z)] != s[id(x + 1, y, z)]) ||
                  (x > 0 && s[id(x, y, z)] != s[id(x - 1, y, z)]);
        ASSERT_EQ(m.mx[id(x, y, z)] != 0, cx);
        bool cy = (y + 1 < k && s[id(x, y, z)] != s[id(x, y + 1, z)]) ||
                  (y > 0 && s[id(x, y, z)] != s[id(x, y - 1, z)]);
        ASSERT_EQ(m.my[id(x, y, z)] != 0, cy);
        bool cz = (z + 1 < k && s[id(x, y, z)] != s[id(x, y, z + 1)]) ||
                  (z > 0 && s[id(x, y, z)] != s[id(x, y, z - 1)]);
        ASSERT_EQ(m.mz[id(x, y, z)] != 0, cz);
      }
}

TEST(Distortion, ExactReconstructionIsZero) {
  Rng rng(2);
  const int k = 4;
  std::vector<int8_t> s(64);
  std::vector<double> x(64);
  for (size_t i = 0; i < 64; ++i) {
    x[i] = rng.uniform(-1, 1);
    s[i] = x[i] < 0 ? -1 : 1;
  }
  TopologyMasks m = topology_masks(s, k);
  EXPECT_EQ(masked_distortion(x, x, m), 0.0);
}

TEST(Distortion, SingleAxisCrossingWeighsOnce) {
  const int k = 4;
  std::vector<int8_t> s(64, 1);
  s[0] = -1;  // voxel (0,0,0): crossings to (1,0,0), (0,1,0), (0,0,1)
  TopologyMasks m = topology_masks(s, k);
  std::vector<double> x(64, 0.5), xhat(64, 0.5);
  // (1,0,0) is masked on the x axis only; give it error e
  const double e = 0.25;
  xhat[1] += e;
  EXPECT_NEAR(masked_distortion(x, xhat, m), e * e, 1e-15);
}

TEST(Distortion, DoubleCrossingWeighsTwice) {
  const int k = 4;
  auto id = [&](int x, int y, int z) { return size_t(x) + size_t(k) * (size_t(y) + size_t(k) * z); };
  std::vector<int8_t> s(64, 1);
  // voxel (1,1,1) negative: its +x and +y neighbors are masked on one axis
  // each, while (1,1,1) itself lands in mx, my and mz
  s[id(1, 1, 1)] = -1;
  TopologyMasks m = topology_masks(s, k);
  ASSERT_EQ(m.weight(id(1, 1, 1)), 3);
  ASSERT_EQ(m.weight(id(2, 1, 1)), 1);
  std::vector<double> x(64, 0.0), xhat(64, 0.0);
  const double e = 0.5;
  xhat[id(1, 1, 1)] += e;
  EXPECT_NEAR(masked_distortion(x, xhat, m), 3 * e * e, 1e-15);
  xhat[id(1, 1, 1)] = 0.0;
  xhat[id(2, 1, 1)] += e;
  EXPECT_NEAR(masked_distortion(x, xhat, m), e * e, 1e-15);
}

TEST(SignRate, HalfProbsCostOneBitPerVoxel) {
  std::vector<int8_t> s(512, 1);
  for (size_t i = 0; i < s.size(); i += 3) s[i] = -1;
  std::vector<double> p(512, 0.5);
  EXPECT_NEAR(sign_rate_bits(s, p), 512.0, 1e-9);
}

TEST(SignRate, PerfectPredictionsNearZero) {
  std::vector<int8_t> s(512);
  std::vector<double> p(512);
  Rng rng(6);
  for (size_t i = 0; i < 512; ++i) {
    s[i] = rng.coin() ? 1 : -1;
    p[i] = s[i] > 0 ? 1.0 - kSignProbEps : kSignProbEps;
  }
  EXPECT_LT(sign_rate_bits(s, p), 0.001);
}

TEST(SignRate, MatchesElementwiseOracle) {
  Rng rng(44);
  std::vector<int8_t> s(256);
  std::vector<double> p(256);
  for (size_t i = 0; i < 256; ++i) {
    s[i] = rng.coin() ? 1 : -1;
    p[i] = rng.uniform(0.01, 0.99);
  }
  const double ln2 = std::log(2.0);
  double oracle = 0.0;
  for (size_t i = 0; i < 256; ++i) {
    double sp = (double(s[i]) + 1.0) / 2.0;
    oracle -= (sp * std::log(p[i]) + (1.0 - sp) * std::log(1.0 - p[i])) / ln2;
  }
  double got = sign_rate_bits(s, p);
  EXPECT_NEAR(got, oracle, 1e-9 * oracle);
}

TEST(Loss, DecomposesIntoThreeTerms) {
  ToyProblem t = make_toy(1);
  LossParts parts = block_loss(t.m, t.x, t.s, t.masks, t.noise);

  // recompute each term independently from the forward pieces
  Tensor z = encode_forward(t.m, t.x);
  Tensor zh = z;
  for (size_t i = 0; i < zh.v.size(); ++i) zh.v[i] += t.noise.v[i];
  DecodeOut out = decode_forward(t.m, zh);
  std::vector<double> xhat(64), prob(64);
  for (size_t i = 0; i < 64; ++i) {
    xhat[i] = double(t.s[i]) * std::abs(out.mag.v[i]);
    prob[i] = sigmoid(out.logit.v[i]);
  }
  double d = masked_distortion(t.x.v, xhat, t.masks);
  double rz = latent_rate_bits(zh, t.m.prior);
  double rs = sign_rate_bits(t.s, prob);
  EXPECT_NEAR(parts.distortion, d, 1e-9 * std::max(1.0, d));
  EXPECT_NEAR(parts.latent_bits, rz, 1e-9 * std::max(1.0, rz));
  EXPECT_NEAR(parts.sign_bits, rs, 1e-9 * std::max(1.0, rs));
  double total = parts.total(t.lambda);
  EXPECT_NEAR(total, d + t.lambda * (rz + rs), 1e-9 * std::max(1.0, total));
  // lambda -> 0 recovers the pure distortion objective
  EXPECT_NEAR(parts.total(0.0), d, 1e-12 * std::max(1.0, d));
}

TEST(Gradcheck, ConvDown) {
  Rng rng(3);
  ConvDown layer;
  layer.resize(2, 3);
  layer.init(rng);
  Tensor in(2, 4, 4, 4);
  for (auto& v : in.v) v = rng.uniform(-1, 1);
  check_layer_gradients(layer, in, 100);
}

TEST(Gradcheck, ConvUp) {
  Rng rng(4);
  ConvUp layer;
  layer.resize(3, 2);
  layer.init(rng);
  Tensor in(3, 2, 2, 2);
  for (auto& v : in.v) v = rng.uniform(-1, 1);
  check_layer_gradients(layer, in, 101);
}

TEST(Gradcheck, ConvSame) {
  Rng rng(5);
  ConvSame layer;
  layer.resize(2, 2);
  layer.init(rng);
  Tensor in(2, 3, 3, 3);
  for (auto& v : in.v) v = rng.uniform(-1, 1);
  check_layer_gradients(layer, in, 102);
}

TEST(Gradcheck, FullToyNetworkAgainstCentralDifferences) {
  ToyProblem t = make_toy(7);
  Model grads = t.m.zeros_like();
  block_loss_backward(t.m, t.x, t.s, t.masks, t.noise, t.lambda, 1.0, grads);

  std::vector<double*> params = t.m.param_ptrs();
  std::vector<double*> gptrs = grads.param_ptrs();
  ASSERT_EQ(params.size(), gptrs.size());

  Rng rng(2024);
  const double h = 1e-3;
  double worst = 0.0;
  for (int probe = 0; probe < 64; ++probe) {
    size_t i = rng.below(params.size());
    double saved = *params[i];
    *params[i] = saved + h;
    double fp = toy_loss(t, t.m);
    *params[i] = saved - h;
    double fm = toy_loss(t, t.m);
    *params[i] = saved;
    double fd = (fp - fm) / (2 * h);
    double analytic = *gptrs[i];
    double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-3});
    worst = std::max(worst, rel);
    ASSERT_LT(rel, 1e-4) << "param index " << i << " analytic " << analytic << " fd " << fd;
  }
  RecordProperty("worst_rel_error", std::to_string(worst));
}

TEST(ModelIO, RoundTripAndHashGuard) {
  Rng rng(8);
  Model m = Model::make(ModelConfig::make(8, 3));
  m.init(rng);
  m.canonicalize();
  m.z_lo.assign(32, -5);
  m.z_hi.assign(32, 6);
  Bytes b = serialize_model(m);
  Model u = parse_model(b);
  EXPECT_EQ(u.cfg.k, m.cfg.k);
  EXPECT_EQ(u.z_lo, m.z_lo);
  EXPECT_EQ(model_content_hash(u), model_content_hash(m));
  Bytes broken = b;
  broken[100] ^= 0x40;
  EXPECT_THROW(parse_model(broken), format_error);
}
