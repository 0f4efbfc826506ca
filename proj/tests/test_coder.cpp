#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "divc/coding_table.hpp"
#include "divc/range_coder.hpp"
#include "divc/rng.hpp"

using namespace divc;

namespace {

CodingTable binary_table(double p0, double p1) {
  return make_table_from_masses(0, {p0, p1, 1e-9});
}

}  // namespace

TEST(RangeCoder, EmptySequenceIsFlushOnly) {
  RangeEncoder enc;
  Bytes b = enc.finish();
  EXPECT_EQ(b.size(), 5u);
  CodingTable t = binary_table(0.5, 0.5);
  std::vector<int32_t> out = decode_symbols(b, 0, t);
  EXPECT_TRUE(out.empty());
}

TEST(RangeCoder, EightUniformBinarySymbols) {
  CodingTable t = binary_table(0.5, 0.5);
  std::vector<int32_t> symbols = {0, 1, 1, 0, 1, 0, 0, 1};
  Bytes b = encode_symbols(symbols, t);
  // ~1 bit/symbol payload + fixed coder overhead (lead byte + 5-byte flush)
  EXPECT_LE(b.size() * 8, 8u + 48u + 8u);
  EXPECT_EQ(decode_symbols(b, symbols.size(), t), symbols);
}

TEST(RangeCoder, NearShannonOnBiasedSource) {
  // iid p = (0.9, 0.1): H = 0.469 bits/symbol
  const size_t n = 10000;
  CodingTable t = binary_table(0.9, 0.1);
  Rng rng(7);
  std::vector<int32_t> symbols(n);
  for (auto& s : symbols) s = rng.uniform01() < 0.9 ? 0 : 1;
  double info_bits = 0.0;
  for (int32_t s : symbols) info_bits -= std::log2(s == 0 ? 0.9 : 0.1);
  Bytes b = encode_symbols(symbols, t);
  EXPECT_LE(double(b.size() * 8), 1.01 * info_bits + 64.0);
  EXPECT_EQ(decode_symbols(b, n, t), symbols);
}

TEST(RangeCoder, EscapeSymbolRoundTrip) {
  CodingTable t = make_table_from_masses(-2, {0.2, 0.2, 0.2, 0.2, 0.2, 0.01});
  std::vector<int32_t> symbols = {-2, 0, 2, 1000000, -7, 2, -2000000000, 1};
  Bytes b = encode_symbols(symbols, t);
  EXPECT_EQ(decode_symbols(b, symbols.size(), t), symbols);
}

TEST(RangeCoder, BitsAllOnesConfident) {
  const size_t n = 512;
  std::vector<uint8_t> bits(n, 1);
  std::vector<uint16_t> probs(n, quantize_prob(0.99));
  Bytes b = encode_bits(bits, probs);
  // -log2(0.99) = 0.0145 bits/bit -> ~7.4 payload bits + flush
  EXPECT_LE(b.size(), 8u);
  EXPECT_EQ(decode_bits(b, n, probs), bits);
}

TEST(RangeCoder, BitsIncompressibleAtHalf) {
  const size_t n = 512;
  Rng rng(3);
  std::vector<uint8_t> bits(n);
  for (auto& bit : bits) bit = uint8_t(rng.coin());
  std::vector<uint16_t> probs(n, quantize_prob(0.5));
  Bytes b = encode_bits(bits, probs);
  EXPECT_LE(double(b.size() * 8), 1.01 * double(n) + 48.0);
  EXPECT_GE(b.size() * 8, n);
  EXPECT_EQ(decode_bits(b, n, probs), bits);
}

TEST(RangeCoder, BitsAdversarialAgainstModel) {
  // every bit contradicts its p = 0.99 prediction: -log2(0.01) = 6.64 bits/bit
  const size_t n = 512;
  std::vector<uint8_t> bits(n, 0);
  std::vector<uint16_t> probs(n, quantize_prob(0.99));
  Bytes b = encode_bits(bits, probs);
  double expected = double(n) * -std::log2(0.01);
  EXPECT_LE(double(b.size() * 8), 1.02 * expected + 48.0);
  EXPECT_GE(double(b.size() * 8), 0.98 * expected);
  EXPECT_EQ(decode_bits(b, n, probs), bits);
}

TEST(RangeCoder, RandomizedRoundTrips) {
  Rng rng(99);
  for (int trial = 0; trial < 3000; ++trial) {
    size_t n = size_t(rng.uniform_int(0, 64));
    std::vector<uint8_t> bits(n);
    std::vector<uint16_t> probs(n);
    for (size_t i = 0; i < n; ++i) {
      bits[i] = uint8_t(rng.coin());
      // include grid-edge probabilities
      switch (rng.uniform_int(0, 3)) {
        case 0: probs[i] = 1; break;
        case 1: probs[i] = 65535; break;
        default: probs[i] = uint16_t(rng.uniform_int(1, 65535));
      }
    }
    Bytes b = encode_bits(bits, probs);
    ASSERT_EQ(decode_bits(b, n, probs), bits) << "trial " << trial;
  }
}

TEST(RangeCoder, RandomizedSymbolRoundTrips) {
  Rng rng(1234);
  for (int trial = 0; trial < 300; ++trial) {
    int nsym = rng.uniform_int(1, 40);
    std::vector<double> masses(size_t(nsym) + 1);
    for (auto& m : masses) m = rng.uniform(1e-4, 1.0);
    CodingTable t = make_table_from_masses(rng.uniform_int(-20, 20), masses);
    size_t n = size_t(rng.uniform_int(0, 200));
    std::vector<int32_t> symbols(n);
    for (auto& s : symbols)
      s = rng.coin(0.95) ? rng.uniform_int(t.n_min, t.n_max) : rng.uniform_int(-100000, 100000);
    Bytes b = encode_symbols(symbols, t);
    ASSERT_EQ(decode_symbols(b, n, t), symbols) << "trial " << trial;
  }
}

TEST(RangeCoder, DeterministicAcrossRuns) {
  auto make = [] {
    Rng rng(5);
    std::vector<uint8_t> bits(4096);
    std::vector<uint16_t> probs(4096);
    for (size_t i = 0; i < bits.size(); ++i) {
      bits[i] = uint8_t(rng.coin(0.3));
      probs[i] = uint16_t(rng.uniform_int(1, 65535));
    }
    return encode_bits(bits, probs);
  };
  EXPECT_EQ(make(), make());
}

TEST(RangeCoder, TruncatedStreamDetected) {
  CodingTable t = binary_table(0.5, 0.5);
  Rng rng(11);
  std::vector<int32_t> symbols(4096);
  for (auto& s : symbols) s = int32_t(rng.coin());
  Bytes b = encode_symbols(symbols, t);
  Bytes cut(b.begin(), b.begin() + long(b.size() / 2));
  EXPECT_THROW(decode_symbols(cut, symbols.size(), t), corrupt_stream_error);
}

TEST(CodingTable, FrequenciesSumExactly) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    int nsym = rng.uniform_int(2, 300);
    std::vector<double> masses(size_t(nsym), 0.0);
    for (auto& m : masses) m = rng.uniform(1e-9, 1.0);
    CodingTable t = make_table_from_masses(0, masses);
    uint32_t sum = 0;
    for (uint32_t f : t.freq) {
      EXPECT_GE(f, 1u);
      sum += f;
    }
    EXPECT_EQ(sum, kFreqTotal);
    EXPECT_EQ(t.cum.back(), kFreqTotal);
  }
}
