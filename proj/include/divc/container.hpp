#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "divc/common.hpp"
#include "divc/nnet.hpp"
#include "divc/prior.hpp"
#include "divc/range_coder.hpp"
#include "divc/volume.hpp"

namespace divc {

inline constexpr char kContainerMagic[4] = {'D', 'I', 'V', 'C'};
inline constexpr uint8_t kContainerVersion = 1;

/// Decoded magnitudes are floored at this fraction of tau so that the sign
/// of every reconstructed value survives storage as float32.
inline constexpr double kMagnitudeFloor = 1e-6;

// Static geometric prior over block-index deltas (value 255 escapes to a raw
// 32-bit integer). The decay parameter was fit offline on synthetic
// desk-scale volumes and is baked into container version 1.
inline const CodingTable& delta_coding_table() {
  static const CodingTable table = [] {
    constexpr double kDecay = 0.85;
    std::vector<double> masses(256);
    double m = 1.0;
    for (int i = 0; i < 255; ++i) {
      masses[size_t(i)] = m;
      m *= kDecay;
    }
    masses[255] = m / (1.0 - kDecay);  // tail -> escape
    return make_table_from_masses(0, masses);
  }();
  return table;
}

struct RateReport {
  // All section figures include their length prefixes; the trailing
  // checksum counts toward header_bits. Sections sum to total_bits exactly.
  uint64_t header_bits = 0;
  uint64_t index_bits = 0;
  uint64_t latent_bits = 0;
  uint64_t sign_bits = 0;
  uint64_t total_bits = 0;
  uint32_t block_count = 0;
  uint64_t voxels_in_blocks = 0;
  double kb_per_volume() const { return double(total_bits) / 8.0 / 1024.0; }
  double sign_bits_per_voxel() const {
    return voxels_in_blocks ? double(sign_bits) / double(voxels_in_blocks) : 0.0;
  }
};

namespace detail {

inline void require_canonical(const Model& m) {
  bool ok = true;
  m.for_each_param_array([&](const std::vector<double>& a) {
    for (double x : a)
      if (x != double(float(x))) ok = false;
  });
  if (!ok)
    throw std::invalid_argument(
        "model parameters are not float32-canonical; train() or load_model() output required");
}

/// Sign-head probabilities from one decoder evaluation, quantized to the
/// 16-bit coding grid. Runs on both ends of the link; the strict evaluation
/// order of the network makes the result bit-identical.
inline std::vector<uint16_t> sign_probs_q16(const DecodeOut& out) {
  std::vector<uint16_t> q(out.logit.v.size());
  for (size_t i = 0; i < q.size(); ++i) q[i] = quantize_prob(sigmoid(out.logit.v[i]));
  return q;
}

/// Reconstructed block values (mm) from the magnitude head and the lossless
/// signs: xhat = s * clamp(|mag|*tau, floor, tau).
inline std::vector<float> reconstruct_block(const DecodeOut& out,
                                            const std::vector<uint8_t>& sign_bits, double tau) {
  std::vector<float> values(out.mag.v.size());
  for (size_t i = 0; i < values.size(); ++i) {
    double mag = std::abs(out.mag.v[i]) * tau;
    mag = std::clamp(mag, kMagnitudeFloor * tau, tau);
    values[i] = float(sign_bits[i] ? mag : -mag);
  }
  return values;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Compression

/// Sender protocol, per occupied block: zhat = round(E(x)), latents coded
/// under the shared prior tables, signs coded under the quantized
/// conditional p(s|zhat) that the receiver will recompute. Block indices go
/// delta + entropy coded up front.
inline Bytes compress_volume(const TsdfVolume& v, const Model& m) {
  detail::require_canonical(m);
  if (!v.dims_divisible_by(m.cfg.k))
    throw std::invalid_argument("volume dims not a multiple of block size (pad first)");
  const uint32_t k = m.cfg.k;
  BlockExtraction ex = extract_occupied_blocks(v, k);
  const std::vector<CodingTable> tables = build_coding_tables(m.prior, m.z_lo, m.z_hi);
  const int ld = int(m.cfg.latent_dim());
  const size_t latent_spatial = size_t(ld) * ld * ld;

  Bytes out;
  out.insert(out.end(), kContainerMagic, kContainerMagic + 4);
  put_u8(out, kContainerVersion);
  put_u32le(out, v.w);
  put_u32le(out, v.h);
  put_u32le(out, v.d);
  put_f32le(out, v.voxel_size);
  put_f32le(out, v.tau);
  put_f32le(out, float(v.origin.x));
  put_f32le(out, float(v.origin.y));
  put_f32le(out, float(v.origin.z));
  put_u32le(out, k);
  put_u64le(out, model_content_hash(m));
  put_u32le(out, uint32_t(ex.blocks.size()));

  // index section
  {
    RangeEncoder enc;
    const CodingTable& dt = delta_coding_table();
    for (uint64_t delta : ex.index_stream.deltas) {
      if (delta > uint64_t(INT32_MAX)) throw std::invalid_argument("block index out of range");
      enc.encode_symbol(int32_t(delta), dt);
    }
    Bytes payload = ex.blocks.empty() ? Bytes{} : enc.finish();
    put_varint(out, payload.size());
    out.insert(out.end(), payload.begin(), payload.end());
  }

  // per-block payloads: all latent streams, then all sign streams
  std::vector<Bytes> latent_streams, sign_streams;
  latent_streams.reserve(ex.blocks.size());
  sign_streams.reserve(ex.blocks.size());
  for (const Block& b : ex.blocks) {
    Tensor x(1, int(k), int(k), int(k));
    for (size_t i = 0; i < b.values.size(); ++i) x.v[i] = double(b.values[i]) / double(v.tau);
    Tensor zhat = quantize_latent(encode_forward(m, x));

    RangeEncoder lenc;
    for (int ch = 0; ch < int(m.cfg.zc); ++ch)
      for (size_t i = 0; i < latent_spatial; ++i)
        lenc.encode_symbol(int32_t(zhat.v[size_t(ch) * latent_spatial + i]), tables[size_t(ch)]);
    latent_streams.push_back(lenc.finish());

    std::vector<uint16_t> probs = detail::sign_probs_q16(decode_forward(m, zhat));
    std::vector<uint8_t> bits(b.values.size());
    for (size_t i = 0; i < bits.size(); ++i) bits[i] = sign_of(b.values[i]) > 0 ? 1 : 0;
    sign_streams.push_back(encode_bits(bits, probs));
  }
  for (const Bytes& s : latent_streams) {
    put_varint(out, s.size());
    out.insert(out.end(), s.begin(), s.end());
  }
  for (const Bytes& s : sign_streams) {
    put_varint(out, s.size());
    out.insert(out.end(), s.begin(), s.end());
  }

  put_u32le(out, checksum32(out.data(), out.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Decompression

struct DecompressResult {
  TsdfVolume volume;
  std::vector<int8_t> signs;              // whole grid, matches volume layout
  std::vector<uint64_t> block_indices;    // decoded ascending linear indices
  uint32_t k = 0;
};

inline DecompressResult decompress_volume(const Bytes& bytes, const Model& m) {
  detail::require_canonical(m);
  if (bytes.size() < 4 + 1 + 12 + 8 + 12 + 4 + 8 + 4 + 4)
    throw corrupt_stream_error("container truncated");
  {
    uint32_t stored;
    ByteReader tail(bytes.data() + bytes.size() - 4, 4);
    stored = tail.u32le();
    if (checksum32(bytes.data(), bytes.size() - 4) != stored)
      throw corrupt_stream_error("container checksum mismatch");
  }
  ByteReader r(bytes.data(), bytes.size() - 4);
  uint8_t magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kContainerMagic, 4) != 0) throw format_error("not a DIVC container");
  if (r.u8() != kContainerVersion) throw format_error("unsupported container version");

  DecompressResult res;
  TsdfVolume& v = res.volume;
  v.w = r.u32le();
  v.h = r.u32le();
  v.d = r.u32le();
  v.voxel_size = r.f32le();
  v.tau = r.f32le();
  v.origin = {double(r.f32le()), double(r.f32le()), double(r.f32le())};
  uint32_t k = r.u32le();
  res.k = k;
  uint64_t model_hash = r.u64le();
  if (model_hash != model_content_hash(m))
    throw model_mismatch_error("container was produced with a different model");
  if (k != m.cfg.k) throw format_error("container block size does not match model");
  uint32_t nblocks = r.u32le();
  if (k == 0 || v.w % k || v.h % k || v.d % k) throw format_error("bad container dims");

  const uint32_t nbx = v.w / k, nby = v.h / k, nbz = v.d / k;
  const uint64_t total_blocks = uint64_t(nbx) * nby * nbz;
  if (nblocks > total_blocks) throw format_error("container block count exceeds grid");

  // index section
  {
    uint64_t len = read_varint(r);
    const uint8_t* p = r.view(len);
    if (nblocks > 0) {
      RangeDecoder dec(p, len);
      const CodingTable& dt = delta_coding_table();
      std::vector<uint64_t> deltas(nblocks);
      for (uint32_t i = 0; i < nblocks; ++i) {
        int32_t d = dec.decode_symbol(dt);
        if (d < 0 || (i > 0 && d == 0)) throw corrupt_stream_error("bad index delta");
        deltas[i] = uint64_t(d);
      }
      res.block_indices = delta_decode_indices(deltas);
      if (res.block_indices.back() >= total_blocks)
        throw corrupt_stream_error("decoded block index out of range");
    }
  }

  const std::vector<CodingTable> tables = build_coding_tables(m.prior, m.z_lo, m.z_hi);
  const int ld = int(m.cfg.latent_dim());
  const size_t latent_spatial = size_t(ld) * ld * ld;
  const size_t block_voxels = size_t(k) * k * k;

  std::vector<Tensor> zhats(nblocks);
  for (uint32_t bi = 0; bi < nblocks; ++bi) {
    uint64_t len = read_varint(r);
    const uint8_t* p = r.view(len);
    RangeDecoder dec(p, len);
    Tensor zhat(int(m.cfg.zc), ld, ld, ld);
    for (int ch = 0; ch < int(m.cfg.zc); ++ch)
      for (size_t i = 0; i < latent_spatial; ++i)
        zhat.v[size_t(ch) * latent_spatial + i] = double(dec.decode_symbol(tables[size_t(ch)]));
    zhats[bi] = std::move(zhat);
  }

  v.values.assign(v.count(), v.tau);
  res.signs.assign(v.count(), 1);
  std::vector<uint8_t> occupied(total_blocks, 0);

  for (uint32_t bi = 0; bi < nblocks; ++bi) {
    uint64_t len = read_varint(r);
    const uint8_t* p = r.view(len);
    DecodeOut dout = decode_forward(m, zhats[bi]);
    std::vector<uint16_t> probs = detail::sign_probs_q16(dout);
    std::vector<uint8_t> bits;
    {
      RangeDecoder dec(p, len);
      bits.resize(block_voxels);
      for (size_t i = 0; i < block_voxels; ++i) bits[i] = uint8_t(dec.decode_bit(probs[i]));
    }
    std::vector<float> values = detail::reconstruct_block(dout, bits, double(v.tau));

    uint64_t li = res.block_indices[bi];
    occupied[li] = 1;
    uint32_t bx = uint32_t(li % nbx), by = uint32_t((li / nbx) % nby), bz = uint32_t(li / (uint64_t(nbx) * nby));
    size_t j = 0;
    for (uint32_t z = 0; z < k; ++z)
      for (uint32_t y = 0; y < k; ++y)
        for (uint32_t x = 0; x < k; ++x, ++j) {
          size_t at = v.idx(bx * k + x, by * k + y, bz * k + z);
          v.values[at] = values[j];
          res.signs[at] = bits[j] ? int8_t(1) : int8_t(-1);
        }
  }
  if (r.remaining() != 0) throw corrupt_stream_error("trailing bytes in container");

  // Unoccupied blocks carry no crossing, so each connected component of them
  // has a single sign: the sign of any decoded voxel just across its
  // boundary (+1 when the component touches no occupied block). Filling with
  // that sign reproduces the original sign at every voxel of the grid.
  {
    std::vector<uint8_t> visited(total_blocks, 0);
    auto block_at = [&](uint32_t bx, uint32_t by, uint32_t bz) {
      return uint64_t(bx) + uint64_t(nbx) * (uint64_t(by) + uint64_t(nby) * bz);
    };
    for (uint64_t start = 0; start < total_blocks; ++start) {
      if (occupied[start] || visited[start]) continue;
      std::vector<uint64_t> component;
      std::deque<uint64_t> queue{start};
      visited[start] = 1;
      int8_t comp_sign = 0;
      while (!queue.empty()) {
        uint64_t cur = queue.front();
        queue.pop_front();
        component.push_back(cur);
        uint32_t bx = uint32_t(cur % nbx), by = uint32_t((cur / nbx) % nby),
                 bz = uint32_t(cur / (uint64_t(nbx) * nby));
        const int32_t nb[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                  {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
        for (const auto& dxyz : nb) {
          int64_t nx = int64_t(bx) + dxyz[0], ny = int64_t(by) + dxyz[1], nz = int64_t(bz) + dxyz[2];
          if (nx < 0 || ny < 0 || nz < 0 || nx >= nbx || ny >= nby || nz >= nbz) continue;
          uint64_t nli = block_at(uint32_t(nx), uint32_t(ny), uint32_t(nz));
          if (occupied[nli]) {
            if (comp_sign == 0) {
              // decoded voxel of the occupied neighbor facing this block
              uint32_t vx = dxyz[0] < 0 ? uint32_t(nx) * k + k - 1
                                        : (dxyz[0] > 0 ? uint32_t(nx) * k : bx * k);
              uint32_t vy = dxyz[1] < 0 ? uint32_t(ny) * k + k - 1
                                        : (dxyz[1] > 0 ? uint32_t(ny) * k : by * k);
              uint32_t vz = dxyz[2] < 0 ? uint32_t(nz) * k + k - 1
                                        : (dxyz[2] > 0 ? uint32_t(nz) * k : bz * k);
              comp_sign = res.signs[v.idx(vx, vy, vz)];
            }
          } else if (!visited[nli]) {
            visited[nli] = 1;
            queue.push_back(nli);
          }
        }
      }
      if (comp_sign == 0) comp_sign = 1;  // isolated component: empty space
      float fill = comp_sign > 0 ? v.tau : -v.tau;
      for (uint64_t li : component) {
        uint32_t bx = uint32_t(li % nbx), by = uint32_t((li / nbx) % nby),
                 bz = uint32_t(li / (uint64_t(nbx) * nby));
        for (uint32_t z = 0; z < k; ++z)
          for (uint32_t y = 0; y < k; ++y)
            for (uint32_t x = 0; x < k; ++x) {
              size_t at = v.idx(bx * k + x, by * k + y, bz * k + z);
              v.values[at] = fill;
              res.signs[at] = comp_sign;
            }
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Accounting

inline RateReport rate_report(const Bytes& bytes) {
  RateReport rep;
  ByteReader r(bytes.data(), bytes.size());
  uint8_t magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kContainerMagic, 4) != 0) throw format_error("not a DIVC container");
  r.u8();
  r.u32le();
  r.u32le();
  r.u32le();
  r.f32le();
  r.f32le();
  r.f32le();
  r.f32le();
  r.f32le();
  uint32_t k = r.u32le();
  r.u64le();
  uint32_t nblocks = r.u32le();
  size_t fixed_header = r.pos();

  size_t index_start = r.pos();
  uint64_t ilen = read_varint(r);
  r.view(ilen);
  rep.index_bits = (r.pos() - index_start) * 8;

  size_t latent_start = r.pos();
  for (uint32_t i = 0; i < nblocks; ++i) r.view(read_varint(r));
  rep.latent_bits = (r.pos() - latent_start) * 8;

  size_t sign_start = r.pos();
  for (uint32_t i = 0; i < nblocks; ++i) r.view(read_varint(r));
  rep.sign_bits = (r.pos() - sign_start) * 8;

  if (r.remaining() != 4) throw format_error("container has unexpected trailing bytes");
  rep.header_bits = (fixed_header + 4) * 8;  // fixed header + trailing checksum
  rep.total_bits = bytes.size() * 8;
  rep.block_count = nblocks;
  rep.voxels_in_blocks = uint64_t(nblocks) * k * k * k;
  return rep;
}

}  // namespace divc
