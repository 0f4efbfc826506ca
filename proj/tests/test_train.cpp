#include <gtest/gtest.h>

#include "divc/train.hpp"

using namespace divc;

namespace {

std::vector<Block> small_dataset() {
  SceneSpec s = make_scene("sphere", {120, 120, 120});
  TsdfVolume v = synth_volume(s, 24, 24, 24, 5.0f, 10.0f);
  BlockExtraction e = extract_occupied_blocks(v, 8);
  return e.blocks;
}

}  // namespace

TEST(LambdaSchedule, MatchesTwelvePointSweep) {
  std::vector<double> l = lambda_schedule();
  ASSERT_EQ(l.size(), 12u);
  EXPECT_DOUBLE_EQ(l[0], 1.0);
  EXPECT_NEAR(l[11], 1.0 / 200000.0, 1e-12);
  for (size_t i = 1; i < l.size(); ++i) EXPECT_LT(l[i], l[i - 1]);
}

TEST(Train, DistortionDecreasesOverFirstHundredSteps) {
  std::vector<Block> blocks = small_dataset();
  ASSERT_FALSE(blocks.empty());
  TrainConfig tc;
  tc.lambda = 1e-4;
  tc.steps = 101;
  tc.batch = 8;
  tc.seed = 1;
  TrainResult r = train(blocks, 10.0f, ModelConfig::make(8, 3), tc);
  ASSERT_EQ(r.history.size(), 101u);
  EXPECT_LT(r.history[100].distortion, r.history[0].distortion);
}

TEST(Train, SameSeedSameParameterHash) {
  std::vector<Block> blocks = small_dataset();
  TrainConfig tc;
  tc.steps = 40;
  tc.batch = 4;
  tc.seed = 99;
  TrainResult a = train(blocks, 10.0f, ModelConfig::make(8, 3), tc);
  TrainResult b = train(blocks, 10.0f, ModelConfig::make(8, 3), tc);
  EXPECT_EQ(model_content_hash(a.model), model_content_hash(b.model));
}

TEST(Train, DivergenceAbortsWithStepNumber) {
  std::vector<Block> blocks = small_dataset();
  TrainConfig tc;
  tc.steps = 400;
  tc.batch = 4;
  tc.lr = 1e9;  // guaranteed blow-up
  tc.seed = 3;
  try {
    train(blocks, 10.0f, ModelConfig::make(8, 3), tc);
    FAIL() << "expected divergence_error";
  } catch (const divergence_error& e) {
    EXPECT_GE(e.step(), 0);
    EXPECT_LT(e.step(), 400);
  }
}

TEST(Train, EmptyDatasetRejected) {
  TrainConfig tc;
  EXPECT_THROW(train({}, 10.0f, ModelConfig::make(8, 3), tc), std::invalid_argument);
}

TEST(Train, RecordsLatentRangeAndCanonicalParams) {
  std::vector<Block> blocks = small_dataset();
  TrainConfig tc;
  tc.steps = 30;
  tc.batch = 4;
  TrainResult r = train(blocks, 10.0f, ModelConfig::make(8, 3), tc);
  bool canonical = true;
  r.model.for_each_param_array([&](const std::vector<double>& a) {
    for (double x : a)
      if (x != double(float(x))) canonical = false;
  });
  EXPECT_TRUE(canonical);
  for (size_t ch = 0; ch < 32; ++ch) EXPECT_LE(r.model.z_lo[ch], r.model.z_hi[ch]);
}
