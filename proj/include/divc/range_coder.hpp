#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "divc/coding_table.hpp"
#include "divc/common.hpp"

namespace divc {

// Byte-renormalized range coder (64-bit low, 32-bit range, carry counting).
// All probabilities enter as 16-bit integers, so encoder and decoder agree
// by integer arithmetic alone. Streams are self-delimiting only by symbol
// count: the caller must know how many symbols to decode.

namespace detail {
inline constexpr uint32_t kRangeTop = 1u << 24;
}

class RangeEncoder {
 public:
  /// symbol occupies [cum, cum+freq) out of kFreqTotal; freq >= 1.
  void encode(uint32_t cum, uint32_t freq) {
    uint32_t r = range_ >> 16;
    low_ += uint64_t(r) * cum;
    range_ = r * freq;
    while (range_ < detail::kRangeTop) {
      shift_low();
      range_ <<= 8;
    }
  }

  /// p1 = quantized P(bit == 1), in [1, 65535].
  void encode_bit(int bit, uint16_t p1) {
    uint32_t bound = (range_ >> 16) * p1;
    if (bit) {
      range_ = bound;
    } else {
      low_ += bound;
      range_ -= bound;
    }
    while (range_ < detail::kRangeTop) {
      shift_low();
      range_ <<= 8;
    }
  }

  void encode_symbol(int32_t v, const CodingTable& t) {
    if (t.contains(v)) {
      size_t s = t.index_of(v);
      encode(t.cum[s], t.freq[s]);
    } else {
      size_t e = t.escape_index();
      encode(t.cum[e], t.freq[e]);
      uint32_t raw = uint32_t(v);
      for (int i = 31; i >= 0; --i) encode_bit(int(raw >> i) & 1, 1u << 15);
    }
  }

  /// Flushes the coder state; the encoder must not be reused afterwards.
  Bytes finish() {
    for (int i = 0; i < 5; ++i) shift_low_final();
    return std::move(out_);
  }

 private:
  void shift_low() {
    uint32_t carry = uint32_t(low_ >> 32);  // 0 or 1
    if (carry != 0 || uint32_t(low_) < 0xFF000000u) {
      out_.push_back(uint8_t(cache_ + carry));
      for (; pending_ff_ > 0; --pending_ff_) out_.push_back(uint8_t(0xFF + carry));
      cache_ = uint8_t(uint32_t(low_) >> 24);
    } else {
      ++pending_ff_;  // byte value not final until the next carry is known
    }
    // slide the window: the cached byte leaves low entirely
    low_ = (low_ & 0x00FFFFFFull) << 8;
  }

  // During finish no further additions can arrive, so pending bytes are
  // final and every shift may emit unconditionally.
  void shift_low_final() {
    uint32_t carry = uint32_t(low_ >> 32);
    out_.push_back(uint8_t(cache_ + carry));
    for (; pending_ff_ > 0; --pending_ff_) out_.push_back(uint8_t(0xFF + carry));
    cache_ = uint8_t(uint32_t(low_) >> 24);
    low_ = (low_ & 0x00FFFFFFull) << 8;
  }

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;  // first emitted byte is always 0x00
  uint64_t pending_ff_ = 0;
  Bytes out_;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
  }
  explicit RangeDecoder(std::span<const uint8_t> b) : RangeDecoder(b.data(), b.size()) {}

  /// Cumulative-frequency slot of the next symbol, in [0, kFreqTotal).
  uint32_t decode_freq() {
    uint32_t r = range_ >> 16;
    uint32_t f = code_ / r;
    return f < kFreqTotal ? f : kFreqTotal - 1;
  }

  void decode_advance(uint32_t cum, uint32_t freq) {
    uint32_t r = range_ >> 16;
    code_ -= r * cum;
    range_ = r * freq;
    while (range_ < detail::kRangeTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
  }

  int decode_bit(uint16_t p1) {
    uint32_t bound = (range_ >> 16) * p1;
    int bit;
    if (code_ < bound) {
      bit = 1;
      range_ = bound;
    } else {
      bit = 0;
      code_ -= bound;
      range_ -= bound;
    }
    while (range_ < detail::kRangeTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
    return bit;
  }

  int32_t decode_symbol(const CodingTable& t) {
    uint32_t f = decode_freq();
    size_t s = t.find(f);
    decode_advance(t.cum[s], t.freq[s]);
    if (s == t.escape_index()) {
      uint32_t raw = 0;
      for (int i = 0; i < 32; ++i) raw = (raw << 1) | uint32_t(decode_bit(1u << 15));
      return int32_t(raw);
    }
    return t.n_min + int32_t(s);
  }

 private:
  uint8_t next_byte() {
    if (pos_ >= size_) throw corrupt_stream_error("range decoder read past stream end");
    return data_[pos_++];
  }

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// ---------------------------------------------------------------------------
// Whole-sequence helpers

inline Bytes encode_symbols(std::span<const int32_t> symbols, const CodingTable& t) {
  RangeEncoder enc;
  for (int32_t v : symbols) enc.encode_symbol(v, t);
  return enc.finish();
}

inline std::vector<int32_t> decode_symbols(std::span<const uint8_t> bytes, size_t n,
                                           const CodingTable& t) {
  RangeDecoder dec(bytes);
  std::vector<int32_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = dec.decode_symbol(t);
  return out;
}

/// Quantizes a probability to the 16-bit coding grid. Saturated inputs are
/// clamped to the grid edge; both sides of the link must apply this before
/// touching the coder.
inline uint16_t quantize_prob(double p) {
  long q = std::lround(p * 65536.0);
  if (q < 1) q = 1;
  if (q > 65535) q = 65535;
  return uint16_t(q);
}

inline Bytes encode_bits(std::span<const uint8_t> bits, std::span<const uint16_t> probs_of_one) {
  RangeEncoder enc;
  for (size_t i = 0; i < bits.size(); ++i) enc.encode_bit(bits[i], probs_of_one[i]);
  return enc.finish();
}

inline std::vector<uint8_t> decode_bits(std::span<const uint8_t> bytes, size_t n,
                                        std::span<const uint16_t> probs_of_one) {
  RangeDecoder dec(bytes);
  std::vector<uint8_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = uint8_t(dec.decode_bit(probs_of_one[i]));
  return out;
}

}  // namespace divc
