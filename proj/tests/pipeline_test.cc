#include "planemerge/pipeline.h"

#include <string>

#include <gtest/gtest.h>

#include "planemerge/error.h"

namespace planemerge {
namespace {

// Single typical seed; the averaged criterion lives in the acceptance binary.
TEST(RunPipeline, CornerScene) {
  const SceneSpec spec = Preset("corner", 5);
  const GeneratedScene scene = GenerateScene(spec);
  PipelineConfig cfg;
  cfg.seed = 5;
  const PipelineResult r = RunPipeline(scene.matches, spec.intrinsics, cfg);
  ASSERT_TRUE(r.eval.has_value());
  EXPECT_LE(r.eval->error_percent, 15.0);
  EXPECT_GE(r.eval->detected_planes, 3);
  EXPECT_LE(r.eval->detected_planes, 5);
  ASSERT_TRUE(r.solve.has_value());
  EXPECT_LE(r.solve->lower_bounds.back(), r.solve->energy + 1e-9);
  EXPECT_EQ(r.final_labeling.labels.size(), scene.matches.size());
  EXPECT_EQ(r.plane_models.size(), static_cast<size_t>(r.refined_patches.patch_count));
  EXPECT_EQ(r.timings.size(), 5u);
}

TEST(RunPipeline, MrfMergesOverSegmentation) {
  const SceneSpec spec = Preset("corner", 2);
  const GeneratedScene scene = GenerateScene(spec);
  PipelineConfig cfg;
  cfg.seed = 2;
  const PipelineResult with = RunPipeline(scene.matches, spec.intrinsics, cfg);
  cfg.use_mrf = false;
  const PipelineResult without = RunPipeline(scene.matches, spec.intrinsics, cfg);
  EXPECT_GT(without.final_labeling.patch_count, with.final_labeling.patch_count);
  EXPECT_FALSE(without.solve.has_value());
}

TEST(RunPipeline, SinglePlane) {
  SceneSpec spec = Preset("corner", 3);
  spec.planes.resize(1);
  spec.planes[0].normal = Eigen::Vector3d(0.1, -0.2, 1).normalized();
  spec.planes[0].distance = 2.5;
  const GeneratedScene scene = GenerateScene(spec);
  PipelineConfig cfg;
  cfg.seed = 3;
  const PipelineResult r = RunPipeline(scene.matches, spec.intrinsics, cfg);
  ASSERT_TRUE(r.eval.has_value());
  EXPECT_EQ(r.eval->detected_planes, 1);
  EXPECT_LT(r.eval->error_percent, 5.0);
}

TEST(RunPipeline, TooFewMatches) {
  const GeneratedScene scene = GenerateScene(Preset("corner", 1));
  const Matches few(scene.matches.begin(), scene.matches.begin() + 19);
  try {
    RunPipeline(few, Intrinsics::FromFocal(500, 500, 320, 240), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientMatches);
  }
}

TEST(RunPipeline, StageTaggedErrors) {
  const SceneSpec spec = Preset("corner", 4);
  GeneratedScene scene = GenerateScene(spec);
  for (auto& c : scene.matches) c.color_mean.reset();
  try {
    RunPipeline(scene.matches, spec.intrinsics, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingTexture);
    EXPECT_EQ(std::string(e.what()).find("mrf: "), std::string(ErrorCodeName(e.code())).size() + 2);
  }
}

TEST(PipelineConfig, Validation) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(ValidatePipelineConfig(cfg));
  cfg.mrf.weights.lambda1 = -1.0;
  EXPECT_THROW(ValidatePipelineConfig(cfg), Error);
  cfg = {};
  cfg.cut_factor = 0.0;
  EXPECT_THROW(ValidatePipelineConfig(cfg), Error);
  cfg = {};
  cfg.cluster.oversegmentation = 0.5;
  EXPECT_THROW(ValidatePipelineConfig(cfg), Error);
}

}  // namespace
}  // namespace planemerge
