#include <algorithm>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "divc/rng.hpp"
#include "divc/volume.hpp"

using namespace divc;

namespace {

SceneSpec centered_sphere(const TsdfVolume& shape, double radius_mm) {
  SceneSpec s;
  Vec3 c = Vec3{double(shape.w / 2), double(shape.h / 2), double(shape.d / 2)} *
           double(shape.voxel_size);
  s.primitives.push_back(make_sphere(c, radius_mm));
  return s;
}

/// Independent per-block scan: occupied iff some grid edge with an endpoint
/// in the block crosses zero.
bool block_occupied_oracle(const TsdfVolume& v, uint32_t k, uint32_t bx, uint32_t by,
                           uint32_t bz) {
  for (uint32_t z = bz * k; z < (bz + 1) * k; ++z)
    for (uint32_t y = by * k; y < (by + 1) * k; ++y)
      for (uint32_t x = bx * k; x < (bx + 1) * k; ++x) {
        int8_t s = sign_of(v.at(x, y, z));
        const int32_t d[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                 {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
        for (auto& dd : d) {
          int64_t nx = int64_t(x) + dd[0], ny = int64_t(y) + dd[1], nz = int64_t(z) + dd[2];
          if (nx < 0 || ny < 0 || nz < 0 || nx >= v.w || ny >= v.h || nz >= v.d) continue;
          if (s != sign_of(v.at(uint32_t(nx), uint32_t(ny), uint32_t(nz)))) return true;
        }
      }
  return false;
}

}  // namespace

TEST(SynthVolume, SphereCenterFullyTruncated) {
  TsdfVolume shape;
  shape.w = shape.h = shape.d = 32;
  shape.voxel_size = 5.0f;
  SceneSpec s = centered_sphere(shape, 10.0 * 5.0);
  TsdfVolume v = synth_volume(s, 32, 32, 32, 5.0f, 10.0f);
  EXPECT_FLOAT_EQ(v.at(16, 16, 16), -10.0f);
}

TEST(SynthVolume, PointOnSurfaceIsZero) {
  TsdfVolume shape;
  shape.w = shape.h = shape.d = 32;
  shape.voxel_size = 5.0f;
  SceneSpec s = centered_sphere(shape, 10.0 * 5.0);
  TsdfVolume v = synth_volume(s, 32, 32, 32, 5.0f, 10.0f);
  EXPECT_FLOAT_EQ(v.at(26, 16, 16), 0.0f);  // exactly on the radius
}

TEST(SynthVolume, MatchesAnalyticOracleAtRandomVoxels) {
  const double r = 50.0;
  TsdfVolume shape;
  shape.w = shape.h = shape.d = 32;
  shape.voxel_size = 5.0f;
  SceneSpec s = centered_sphere(shape, r);
  TsdfVolume v = synth_volume(s, 32, 32, 32, 5.0f, 10.0f);
  Vec3 c{16 * 5.0, 16 * 5.0, 16 * 5.0};
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    uint32_t x = uint32_t(rng.below(32)), y = uint32_t(rng.below(32)), z = uint32_t(rng.below(32));
    Vec3 p = v.voxel_center(x, y, z);
    double expect = std::clamp((p - c).norm() - r, -10.0, 10.0);
    EXPECT_NEAR(v.at(x, y, z), expect, 1e-5) << x << "," << y << "," << z;
  }
}

TEST(SynthVolume, RejectsDimsNotMultipleOfBlock) {
  SceneSpec s = make_scene("sphere", {100, 100, 100});
  EXPECT_THROW(synth_volume(s, 30, 32, 32, 5.0f, 10.0f, 8), std::invalid_argument);
}

TEST(SynthVolume, AllValuesWithinTau) {
  for (const char* name : {"sphere", "box", "torus", "blend"}) {
    SceneSpec s = make_scene(name, {160, 160, 160});
    TsdfVolume v = synth_volume(s, 32, 32, 32, 5.0f, 10.0f);
    for (float f : v.values) {
      EXPECT_LE(std::abs(f), 10.0f);
    }
  }
}

TEST(Blocks, AllPositiveVolumeHasNoBlocks) {
  TsdfVolume v;
  v.w = v.h = v.d = 16;
  v.values.assign(v.count(), v.tau);
  BlockExtraction e = extract_occupied_blocks(v, 8);
  EXPECT_TRUE(e.blocks.empty());
  EXPECT_TRUE(e.index_stream.deltas.empty());
}

TEST(Blocks, SingleInteriorNegativeVoxel) {
  TsdfVolume v;
  v.w = v.h = v.d = 16;
  v.values.assign(v.count(), v.tau);
  v.at(4, 4, 4) = -v.tau;  // interior of block (0,0,0)
  BlockExtraction e = extract_occupied_blocks(v, 8);
  ASSERT_EQ(e.blocks.size(), 1u);
  EXPECT_EQ(e.blocks[0].bx, 0u);
  EXPECT_EQ(e.index_stream.sorted_indices[0], 0u);
}

TEST(Blocks, SphereMatchesBruteForceScan) {
  SceneSpec s = make_scene("sphere", {160, 160, 160});
  TsdfVolume v = synth_volume(s, 32, 32, 32, 5.0f, 10.0f);
  BlockExtraction e = extract_occupied_blocks(v, 8);
  size_t oracle_count = 0;
  std::vector<uint64_t> oracle_indices;
  for (uint32_t bz = 0; bz < 4; ++bz)
    for (uint32_t by = 0; by < 4; ++by)
      for (uint32_t bx = 0; bx < 4; ++bx)
        if (block_occupied_oracle(v, 8, bx, by, bz)) {
          ++oracle_count;
          oracle_indices.push_back(bx + 4ull * (by + 4ull * bz));
        }
  EXPECT_GT(oracle_count, 0u);
  EXPECT_EQ(e.blocks.size(), oracle_count);
  EXPECT_EQ(e.index_stream.sorted_indices, oracle_indices);
  // strictly ascending
  EXPECT_TRUE(std::is_sorted(e.index_stream.sorted_indices.begin(),
                             e.index_stream.sorted_indices.end()));
}

TEST(Blocks, OccupiedSetCoversEveryCrossingVoxel) {
  SceneSpec s = make_scene("blend", {160, 160, 160});
  TsdfVolume v = synth_volume(s, 32, 32, 32, 5.0f, 10.0f);
  std::vector<uint8_t> occ = occupied_block_mask(v, 8);
  auto in_occupied_block = [&](uint32_t x, uint32_t y, uint32_t z) {
    return occ[(x / 8) + 4 * ((y / 8) + 4 * (z / 8))] != 0;
  };
  for (uint32_t z = 0; z < 32; ++z)
    for (uint32_t y = 0; y < 32; ++y)
      for (uint32_t x = 0; x < 32; ++x) {
        int8_t sg = sign_of(v.at(x, y, z));
        bool crossing = (x + 1 < 32 && sg != sign_of(v.at(x + 1, y, z))) ||
                        (x > 0 && sg != sign_of(v.at(x - 1, y, z))) ||
                        (y + 1 < 32 && sg != sign_of(v.at(x, y + 1, z))) ||
                        (y > 0 && sg != sign_of(v.at(x, y - 1, z))) ||
                        (z + 1 < 32 && sg != sign_of(v.at(x, y, z + 1))) ||
                        (z > 0 && sg != sign_of(v.at(x, y, z - 1)));
        if (crossing) ASSERT_TRUE(in_occupied_block(x, y, z));
      }
}

TEST(DeltaCoding, KnownExamples) {
  EXPECT_EQ(delta_encode_indices({3, 7, 15}), (std::vector<uint64_t>{3, 4, 8}));
  EXPECT_EQ(delta_encode_indices({0}), (std::vector<uint64_t>{0}));
  EXPECT_EQ(delta_decode_indices({3, 4, 8}), (std::vector<uint64_t>{3, 7, 15}));
}

TEST(DeltaCoding, RejectsNonAscending) {
  EXPECT_THROW(delta_encode_indices({3, 3}), std::invalid_argument);
  EXPECT_THROW(delta_encode_indices({5, 2}), std::invalid_argument);
}

TEST(DeltaCoding, RandomRoundTrip) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<uint64_t> indices;
    uint64_t cur = rng.below(100);
    for (int i = 0; i < 1000; ++i) {
      indices.push_back(cur);
      cur += 1 + rng.below(50);
    }
    EXPECT_EQ(delta_decode_indices(delta_encode_indices(indices)), indices);
  }
}

TEST(Padding, FillsWithTauAndAddsNoCrossings) {
  SceneSpec s = make_scene("sphere", {150, 150, 150});
  TsdfVolume v = synth_volume(s, 30, 30, 30, 5.0f, 10.0f, 2);
  TsdfVolume p = pad_to_block_multiple(v, 8);
  EXPECT_EQ(p.w, 32u);
  EXPECT_EQ(p.h, 32u);
  EXPECT_EQ(p.d, 32u);
  for (uint32_t z = 0; z < 32; ++z)
    for (uint32_t y = 0; y < 32; ++y)
      for (uint32_t x = 0; x < 32; ++x) {
        if (x >= 30 || y >= 30 || z >= 30) {
          EXPECT_EQ(p.at(x, y, z), p.tau);
        } else {
          EXPECT_EQ(p.at(x, y, z), v.at(x, y, z));
        }
      }
}

TEST(VolumeIO, FileRoundTrip) {
  SceneSpec s = make_scene("torus", {160, 160, 160});
  TsdfVolume v = synth_volume(s, 32, 32, 32, 5.0f, 10.0f);
  v.origin = {1.5, -2.25, 3.75};
  std::string path = std::filesystem::temp_directory_path() / "divc_test_vol.tsdf";
  save_volume(v, path);
  TsdfVolume u = load_volume(path);
  EXPECT_EQ(u.w, v.w);
  EXPECT_EQ(u.voxel_size, v.voxel_size);
  EXPECT_EQ(u.tau, v.tau);
  EXPECT_EQ(u.origin.x, v.origin.x);
  EXPECT_EQ(u.values, v.values);
  std::filesystem::remove(path);
}

TEST(VolumeIO, RejectsGarbage) {
  Bytes junk = {'N', 'O', 'P', 'E', 1};
  EXPECT_THROW(parse_volume(junk), format_error);
}
