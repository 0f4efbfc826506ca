#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace divc {

// Z-order curves used for atlas placement. The 3D code interleaves bits with
// y given the highest weight (bit triple = y x z), matching the vertical
// axis of typically standing subjects; the 2D code interleaves u over v.

inline constexpr int kMortonMaxBits3 = 21;  // 3*21 = 63 bits
inline constexpr int kMortonMaxBits2 = 31;

inline uint64_t morton3(uint32_t x, uint32_t y, uint32_t z) {
  if ((x | y | z) >> kMortonMaxBits3)
    throw std::invalid_argument("morton3 coordinate out of range");
  uint64_t code = 0;
  for (int b = 0; b < kMortonMaxBits3; ++b) {
    uint64_t triple = (uint64_t((y >> b) & 1) << 2) | (uint64_t((x >> b) & 1) << 1) |
                      uint64_t((z >> b) & 1);
    code |= triple << (3 * b);
  }
  return code;
}

struct Coord3 {
  uint32_t x, y, z;
  bool operator==(const Coord3&) const = default;
};

inline Coord3 morton3_inv(uint64_t code) {
  Coord3 c{0, 0, 0};
  for (int b = 0; b < kMortonMaxBits3; ++b) {
    c.z |= uint32_t((code >> (3 * b)) & 1) << b;
    c.x |= uint32_t((code >> (3 * b + 1)) & 1) << b;
    c.y |= uint32_t((code >> (3 * b + 2)) & 1) << b;
  }
  return c;
}

inline uint64_t morton2(uint32_t u, uint32_t v) {
  if ((u | v) >> kMortonMaxBits2) throw std::invalid_argument("morton2 coordinate out of range");
  uint64_t code = 0;
  for (int b = 0; b < kMortonMaxBits2; ++b) {
    uint64_t pair = (uint64_t((u >> b) & 1) << 1) | uint64_t((v >> b) & 1);
    code |= pair << (2 * b);
  }
  return code;
}

struct Coord2 {
  uint32_t u, v;
  bool operator==(const Coord2&) const = default;
};

inline Coord2 morton2_inv(uint64_t code) {
  Coord2 c{0, 0};
  for (int b = 0; b < kMortonMaxBits2; ++b) {
    c.v |= uint32_t((code >> (2 * b)) & 1) << b;
    c.u |= uint32_t((code >> (2 * b + 1)) & 1) << b;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Chart slot assignment: (u,v) = M2^-1(rank(M3(x,y,z)))

struct SlotAssignment {
  std::vector<Coord3> blocks;  // sorted by 3D Morton code
  std::vector<Coord2> slots;   // slots[i] is the atlas slot of blocks[i]
};

/// Maps occupied block coordinates to 2D atlas slots by Morton rank. The
/// result is independent of the input order.
inline SlotAssignment assign_chart_slots(std::vector<Coord3> blocks) {
  std::sort(blocks.begin(), blocks.end(), [](const Coord3& a, const Coord3& b) {
    return morton3(a.x, a.y, a.z) < morton3(b.x, b.y, b.z);
  });
  for (size_t i = 1; i < blocks.size(); ++i)
    if (blocks[i] == blocks[i - 1]) throw std::invalid_argument("duplicate block index");
  SlotAssignment a;
  a.blocks = std::move(blocks);
  a.slots.resize(a.blocks.size());
  for (size_t rank = 0; rank < a.blocks.size(); ++rank) a.slots[rank] = morton2_inv(rank);
  return a;
}

}  // namespace divc
