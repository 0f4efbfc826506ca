#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "divc/common.hpp"
#include "divc/scene.hpp"

namespace divc {

inline constexpr char kVolumeMagic[4] = {'T', 'S', 'D', 'F'};
inline constexpr uint8_t kVolumeVersion = 1;

/// Sign convention used everywhere: a stored value of exactly 0 is positive.
inline int8_t sign_of(float v) { return v < 0.0f ? int8_t(-1) : int8_t(1); }

// Dense truncated signed distance volume. Values are voxel-center distances
// in mm, clamped to [-tau, +tau]; positive outside the surface, negative
// inside. Immutable after construction in all pipeline uses.
struct TsdfVolume {
  uint32_t w = 0, h = 0, d = 0;
  float voxel_size = 5.0f;  // mm
  float tau = 10.0f;        // mm
  Vec3 origin;              // mm, position of voxel (0,0,0) center
  std::vector<float> values;  // row-major, x fastest

  size_t count() const { return size_t(w) * h * d; }
  size_t idx(uint32_t x, uint32_t y, uint32_t z) const {
    return size_t(x) + size_t(w) * (size_t(y) + size_t(h) * z);
  }
  float at(uint32_t x, uint32_t y, uint32_t z) const { return values[idx(x, y, z)]; }
  float& at(uint32_t x, uint32_t y, uint32_t z) { return values[idx(x, y, z)]; }

  Vec3 voxel_center(uint32_t x, uint32_t y, uint32_t z) const {
    return origin + Vec3{double(x), double(y), double(z)} * double(voxel_size);
  }

  bool dims_divisible_by(uint32_t k) const { return w % k == 0 && h % k == 0 && d % k == 0; }

  std::vector<int8_t> signs() const {
    std::vector<int8_t> s(count());
    for (size_t i = 0; i < s.size(); ++i) s[i] = sign_of(values[i]);
    return s;
  }
};

/// One k^3 sub-cube, the unit of compression.
struct Block {
  uint32_t bx = 0, by = 0, bz = 0;  // block coordinates (grid of dims/k)
  std::vector<float> values;        // k^3, row-major x fastest
};

struct BlockIndexStream {
  std::vector<uint64_t> sorted_indices;  // ascending row-major linear block indices
  std::vector<uint64_t> deltas;          // first index, then successive differences
};

// ---------------------------------------------------------------------------
// Synthesis

/// Samples an analytic scene into a TSDF grid. dims must be multiples of the
/// block size so that downstream block extraction needs no padding.
inline TsdfVolume synth_volume(const SceneSpec& scene, uint32_t w, uint32_t h, uint32_t d,
                               float voxel_size, float tau, uint32_t k = 8,
                               Vec3 origin = {0, 0, 0}) {
  if (k == 0 || w == 0 || h == 0 || d == 0)
    throw std::invalid_argument("synth_volume: dims and k must be positive");
  if (w % k || h % k || d % k)
    throw std::invalid_argument("synth_volume: dims (" + std::to_string(w) + "," +
                                std::to_string(h) + "," + std::to_string(d) +
                                ") must be multiples of block size " + std::to_string(k));
  if (!(tau > 0.0f) || !(voxel_size > 0.0f))
    throw std::invalid_argument("synth_volume: voxel_size and tau must be positive");
  TsdfVolume v;
  v.w = w;
  v.h = h;
  v.d = d;
  v.voxel_size = voxel_size;
  v.tau = tau;
  v.origin = origin;
  v.values.resize(v.count());
  for (uint32_t z = 0; z < d; ++z)
    for (uint32_t y = 0; y < h; ++y)
      for (uint32_t x = 0; x < w; ++x) {
        double sd = scene.eval(v.voxel_center(x, y, z));
        v.at(x, y, z) = float(std::clamp(sd, -double(tau), double(tau)));
      }
  return v;
}

/// Pads dims up to multiples of k, filling new voxels with +tau (empty
/// space, creates no spurious crossings).
inline TsdfVolume pad_to_block_multiple(const TsdfVolume& v, uint32_t k) {
  if (v.dims_divisible_by(k)) return v;
  TsdfVolume p = v;
  p.w = (v.w + k - 1) / k * k;
  p.h = (v.h + k - 1) / k * k;
  p.d = (v.d + k - 1) / k * k;
  p.values.assign(p.count(), v.tau);
  for (uint32_t z = 0; z < v.d; ++z)
    for (uint32_t y = 0; y < v.h; ++y)
      for (uint32_t x = 0; x < v.w; ++x) p.at(x, y, z) = v.at(x, y, z);
  return p;
}

// ---------------------------------------------------------------------------
// Occupied-block extraction

/// A block is occupied iff some axis-adjacent voxel pair with opposite signs
/// has at least one endpoint inside it. Marking both endpoint blocks makes
/// the occupied set cover every voxel participating in a sign change, which
/// the lossless-topology guarantee depends on.
inline std::vector<uint8_t> occupied_block_mask(const TsdfVolume& v, uint32_t k) {
  if (!v.dims_divisible_by(k)) throw std::invalid_argument("dims not divisible by block size");
  const uint32_t nbx = v.w / k, nby = v.h / k, nbz = v.d / k;
  std::vector<uint8_t> occ(size_t(nbx) * nby * nbz, 0);
  auto mark = [&](uint32_t x, uint32_t y, uint32_t z) {
    occ[size_t(x / k) + size_t(nbx) * (size_t(y / k) + size_t(nby) * (z / k))] = 1;
  };
  for (uint32_t z = 0; z < v.d; ++z)
    for (uint32_t y = 0; y < v.h; ++y)
      for (uint32_t x = 0; x < v.w; ++x) {
        int8_t s = sign_of(v.at(x, y, z));
        if (x + 1 < v.w && s != sign_of(v.at(x + 1, y, z))) {
          mark(x, y, z);
          mark(x + 1, y, z);
        }
        if (y + 1 < v.h && s != sign_of(v.at(x, y + 1, z))) {
          mark(x, y, z);
          mark(x, y + 1, z);
        }
        if (z + 1 < v.d && s != sign_of(v.at(x, y, z + 1))) {
          mark(x, y, z);
          mark(x, y, z + 1);
        }
      }
  return occ;
}

struct BlockExtraction {
  std::vector<Block> blocks;  // ascending row-major linear order
  BlockIndexStream index_stream;
  uint32_t nbx = 0, nby = 0, nbz = 0;
};

inline std::vector<uint64_t> delta_encode_indices(const std::vector<uint64_t>& indices) {
  std::vector<uint64_t> deltas;
  deltas.reserve(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) {
    if (i == 0) {
      deltas.push_back(indices[0]);
    } else {
      if (indices[i] <= indices[i - 1])
        throw std::invalid_argument("delta_encode_indices: input not strictly ascending");
      deltas.push_back(indices[i] - indices[i - 1]);
    }
  }
  return deltas;
}

inline std::vector<uint64_t> delta_decode_indices(const std::vector<uint64_t>& deltas) {
  std::vector<uint64_t> indices;
  indices.reserve(deltas.size());
  uint64_t acc = 0;
  for (size_t i = 0; i < deltas.size(); ++i) {
    acc = (i == 0) ? deltas[0] : acc + deltas[i];
    indices.push_back(acc);
  }
  return indices;
}

inline BlockExtraction extract_occupied_blocks(const TsdfVolume& v, uint32_t k) {
  BlockExtraction out;
  out.nbx = v.w / k;
  out.nby = v.h / k;
  out.nbz = v.d / k;
  std::vector<uint8_t> occ = occupied_block_mask(v, k);
  for (uint32_t bz = 0; bz < out.nbz; ++bz)
    for (uint32_t by = 0; by < out.nby; ++by)
      for (uint32_t bx = 0; bx < out.nbx; ++bx) {
        uint64_t li = uint64_t(bx) + uint64_t(out.nbx) * (uint64_t(by) + uint64_t(out.nby) * bz);
        if (!occ[li]) continue;
        Block b;
        b.bx = bx;
        b.by = by;
        b.bz = bz;
        b.values.resize(size_t(k) * k * k);
        size_t j = 0;
        for (uint32_t z = 0; z < k; ++z)
          for (uint32_t y = 0; y < k; ++y)
            for (uint32_t x = 0; x < k; ++x)
              b.values[j++] = v.at(bx * k + x, by * k + y, bz * k + z);
        out.blocks.push_back(std::move(b));
        out.index_stream.sorted_indices.push_back(li);
      }
  out.index_stream.deltas = delta_encode_indices(out.index_stream.sorted_indices);
  return out;
}

// ---------------------------------------------------------------------------
// File format: "TSDF" | version u8 | W H D u32le | voxel_size f32 | tau f32 |
// origin 3*f32 | values f32le row-major

inline Bytes serialize_volume(const TsdfVolume& v) {
  Bytes b;
  b.insert(b.end(), kVolumeMagic, kVolumeMagic + 4);
  put_u8(b, kVolumeVersion);
  put_u32le(b, v.w);
  put_u32le(b, v.h);
  put_u32le(b, v.d);
  put_f32le(b, v.voxel_size);
  put_f32le(b, v.tau);
  put_f32le(b, float(v.origin.x));
  put_f32le(b, float(v.origin.y));
  put_f32le(b, float(v.origin.z));
  for (float f : v.values) put_f32le(b, f);
  return b;
}

inline TsdfVolume parse_volume(const Bytes& bytes) {
  ByteReader r(bytes);
  uint8_t magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kVolumeMagic, 4) != 0) throw format_error("not a TSDF volume file");
  uint8_t ver = r.u8();
  if (ver != kVolumeVersion) throw format_error("unsupported TSDF version");
  TsdfVolume v;
  v.w = r.u32le();
  v.h = r.u32le();
  v.d = r.u32le();
  v.voxel_size = r.f32le();
  v.tau = r.f32le();
  v.origin = {double(r.f32le()), double(r.f32le()), double(r.f32le())};
  if (v.count() == 0 || v.count() > (size_t(1) << 32)) throw format_error("bad TSDF dims");
  v.values.resize(v.count());
  for (size_t i = 0; i < v.values.size(); ++i) v.values[i] = r.f32le();
  return v;
}

inline void save_volume(const TsdfVolume& v, const std::string& path) {
  write_file(path, serialize_volume(v));
}

inline TsdfVolume load_volume(const std::string& path) { return parse_volume(read_file(path)); }

}  // namespace divc
