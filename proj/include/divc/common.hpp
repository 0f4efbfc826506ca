#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace divc {

// ---------------------------------------------------------------------------
// Errors

/// Malformed or unexpected bytes in a file or bitstream.
class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

/// Entropy-coded payload ran out of bytes or failed its checksum.
class corrupt_stream_error : public format_error {
 public:
  explicit corrupt_stream_error(const std::string& what) : format_error(what) {}
};

/// Bitstream was produced with a different model than the one supplied.
class model_mismatch_error : public format_error {
 public:
  explicit model_mismatch_error(const std::string& what) : format_error(what) {}
};

/// Training loss became non-finite.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& what, long step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// ---------------------------------------------------------------------------
// Little-endian byte I/O

using Bytes = std::vector<uint8_t>;

inline void put_u8(Bytes& b, uint8_t v) { b.push_back(v); }

inline void put_u16le(Bytes& b, uint16_t v) {
  b.push_back(uint8_t(v));
  b.push_back(uint8_t(v >> 8));
}

inline void put_u32le(Bytes& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(uint8_t(v >> (8 * i)));
}

inline void put_u64le(Bytes& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(uint8_t(v >> (8 * i)));
}

inline void put_f32le(Bytes& b, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32le(b, u);
}

/// Cursor over an immutable byte buffer; every read is bounds-checked.
class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const Bytes& b) : data_(b.data()), size_(b.size()) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint16_t u16le() {
    need(2);
    uint16_t v = uint16_t(data_[pos_]) | uint16_t(data_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
  }
  uint32_t u32le() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64le() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32le() {
    uint32_t u = u32le();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  void bytes(uint8_t* dst, size_t n) {
    need(n);
    std::memcpy(dst, data_ + pos_, n);
    pos_ += n;
  }
  const uint8_t* view(size_t n) {
    need(n);
    const uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

 private:
  void need(size_t n) const {
    if (pos_ + n > size_) throw corrupt_stream_error("read past end of stream");
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// LEB128 varints

inline void put_varint(Bytes& b, uint64_t v) {
  while (v >= 0x80) {
    b.push_back(uint8_t(v) | 0x80);
    v >>= 7;
  }
  b.push_back(uint8_t(v));
}

inline uint64_t read_varint(ByteReader& r) {
  uint64_t v = 0;
  int shift = 0;
  for (;;) {
    uint8_t byte = r.u8();
    v |= uint64_t(byte & 0x7F) << shift;
    if (!(byte & 0x80)) return v;
    shift += 7;
    if (shift >= 64) throw corrupt_stream_error("varint too long");
  }
}

// ---------------------------------------------------------------------------
// FNV-1a

inline uint64_t fnv1a64(const uint8_t* data, size_t n, uint64_t h = 14695981039346656037ull) {
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64(const Bytes& b) { return fnv1a64(b.data(), b.size()); }

/// 32-bit fold of FNV-1a, used as the container trailing checksum.
inline uint32_t checksum32(const uint8_t* data, size_t n) {
  uint64_t h = fnv1a64(data, n);
  return uint32_t(h) ^ uint32_t(h >> 32);
}

// ---------------------------------------------------------------------------
// Whole-file helpers

inline Bytes read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw format_error("cannot open file: " + path);
  f.seekg(0, std::ios::end);
  std::streamoff n = f.tellg();
  f.seekg(0);
  Bytes b(size_t(n), 0);
  if (n > 0) f.read(reinterpret_cast<char*>(b.data()), n);
  if (!f) throw format_error("short read: " + path);
  return b;
}

inline void write_file(const std::string& path, const Bytes& b) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw format_error("cannot open file for writing: " + path);
  f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
  if (!f) throw format_error("short write: " + path);
}

inline void write_file(const std::string& path, const std::string& s) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw format_error("cannot open file for writing: " + path);
  f.write(s.data(), std::streamsize(s.size()));
  if (!f) throw format_error("short write: " + path);
}

}  // namespace divc
