#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "vdepth/datapipe.hpp"
#include "vdepth/depthspace.hpp"
#include "vdepth/metrics.hpp"
#include "vdepth/packing.hpp"
#include "vdepth/random.hpp"

using namespace vdepth;

namespace {

SceneConfig default_scene(int frames = 6, CameraMotion motion = CameraMotion::kTranslate) {
  SceneConfig cfg;
  cfg.frames = frames;
  cfg.height = 24;
  cfg.width = 24;
  cfg.object_count = 3;
  cfg.camera_motion = motion;
  return cfg;
}

// Inverse of the generator's shading: luminance = 0.75 * near / z, so
// z = 0.75 * near / luminance. An exact depth oracle for rendered frames.
Tensor shading_depth_oracle(const Tensor& rgb, double near) {
  const Tensor luma = rgb_to_luma(reshape(rgb, {1, 3, rgb.dim(1), rgb.dim(2)}));
  Tensor depth = Tensor::zeros({rgb.dim(1), rgb.dim(2)});
  for (size_t i = 0; i < depth.values().size(); ++i) {
    const double l = std::max(1e-4, luma.values()[i]);
    depth.mutable_values()[i] = 0.75 * near / l;
  }
  return depth;
}

}  // namespace

TEST_CASE("generate_clip: deterministic in (config, seed)") {
  const SceneConfig cfg = default_scene();
  const Clip a = generate_clip(cfg, 42);
  const Clip b = generate_clip(cfg, 42);
  CHECK(a.frames.values() == b.frames.values());
  CHECK(a.depth.values() == b.depth.values());
  const Clip c = generate_clip(cfg, 43);
  CHECK(a.frames.values() != c.frames.values());
}

TEST_CASE("generate_clip: static scenes are constant with zero ground-truth TAE") {
  const Clip clip = generate_clip(default_scene(4, CameraMotion::kStatic), 7);
  const int64_t frame = static_cast<int64_t>(3) * 24 * 24;
  for (int k = 1; k < 4; ++k)
    for (int64_t i = 0; i < frame; ++i)
      CHECK(clip.frames.values()[static_cast<size_t>(k * frame + i)] ==
            clip.frames.values()[static_cast<size_t>(i)]);
  CHECK(tae(clip.depth, clip.poses) == 0.0);
}

TEST_CASE("generate_clip: objects occlude the background (z-buffer)") {
  SceneConfig cfg = default_scene(1);
  cfg.object_count = 4;
  const Clip clip = generate_clip(cfg, 11);
  // Object slots sit well in front of the slanted background, so covered
  // pixels are strictly closer than any background depth there.
  int object_pixels = 0;
  double min_depth = 1e300, max_depth = 0.0;
  for (double d : clip.depth.values()) {
    min_depth = std::min(min_depth, d);
    max_depth = std::max(max_depth, d);
    if (d < 0.55 * cfg.far) ++object_pixels;
  }
  CHECK(object_pixels > 10);
  CHECK(min_depth >= cfg.near * 0.5);
  CHECK(max_depth <= 2.5 * cfg.far);
}

TEST_CASE("generate_clip: ground-truth geometry is self-consistent across motions") {
  for (CameraMotion motion : {CameraMotion::kTranslate, CameraMotion::kOrbit}) {
    const Clip clip = generate_clip(default_scene(6, motion), 13);
    CHECK(tae(clip.depth, clip.poses) < 0.01);
  }
}

TEST_CASE("detect_scene_cuts: constant clip has none; a hard switch is found exactly") {
  const Tensor constant = Tensor::full({5, 3, 8, 8}, 0.4);
  CHECK(detect_scene_cuts(constant, kDefaultSceneCutThreshold).empty());

  Tensor jump = Tensor::zeros({16, 3, 8, 8});
  const int64_t frame = 3 * 64;
  for (int k = 10; k < 16; ++k)
    for (int64_t i = 0; i < frame; ++i)
      jump.mutable_values()[static_cast<size_t>(k * frame + i)] = 1.0;
  const std::vector<int> cuts = detect_scene_cuts(jump, kDefaultSceneCutThreshold);
  CHECK(cuts == std::vector<int>{10});
}

TEST_CASE("detect_scene_cuts: smooth generated motion stays below the default threshold") {
  for (CameraMotion motion : {CameraMotion::kTranslate, CameraMotion::kOrbit}) {
    const Clip clip = generate_clip(default_scene(8, motion), 17);
    CHECK(detect_scene_cuts(clip.frames, kDefaultSceneCutThreshold).empty());
  }
}

TEST_CASE("detect_scene_cuts: invariant to appending an identical final frame") {
  const Clip clip = generate_clip(default_scene(6), 19);
  const std::vector<int> base = detect_scene_cuts(clip.frames, kDefaultSceneCutThreshold);
  const Tensor extended = concat({clip.frames, slice(clip.frames, 0, 5, 1)}, 0);
  CHECK(detect_scene_cuts(extended, kDefaultSceneCutThreshold) == base);
}

TEST_CASE("similarity_score: identical, anti-correlated, independent") {
  Rng rng(23);
  Tensor depth = Tensor::zeros({24, 24});
  for (double& v : depth.mutable_values()) v = rng.uniform(1.0, 9.0);
  CHECK(similarity_score(depth, depth) == doctest::Approx(1.0).epsilon(1e-9));

  // Negation about the mean flips the colorized features exactly.
  double mean = 0.0;
  for (double v : depth.values()) mean += v;
  mean /= static_cast<double>(depth.numel());
  Tensor negated = Tensor::zeros({24, 24});
  for (size_t i = 0; i < negated.values().size(); ++i)
    negated.mutable_values()[i] = 2.0 * mean - depth.values()[i];
  CHECK(similarity_score(depth, negated) == doctest::Approx(-1.0).epsilon(1e-9));

  double total_abs = 0.0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    Rng r2(static_cast<uint64_t>(1000 + i));
    Tensor a = Tensor::zeros({32, 32});
    Tensor b = Tensor::zeros({32, 32});
    for (double& v : a.mutable_values()) v = r2.uniform(1.0, 9.0);
    for (double& v : b.mutable_values()) v = r2.uniform(1.0, 9.0);
    total_abs += std::abs(similarity_score(a, b));
  }
  CHECK(total_abs / trials < 0.1);

  CHECK_THROWS(similarity_score(Tensor::full({8, 8}, 3.0), depth));
  CHECK_THROWS(similarity_score(depth, Tensor::zeros({8, 9})));
}

namespace {

FrameDepthFn oracle_model(double near) {
  return [near](const Tensor& rgb, uint64_t) { return shading_depth_oracle(rgb, near); };
}

Clip shuffle_depth(const Clip& clip, uint64_t seed) {
  Clip out = clip;
  out.depth = Tensor::from_vector(clip.depth.shape(), clip.depth.values());
  Rng rng(seed);
  auto& dv = out.depth.mutable_values();
  const int64_t frame = static_cast<int64_t>(clip.height()) * clip.width();
  for (int k = 0; k < clip.frame_count(); ++k) {
    double* f = dv.data() + k * frame;
    for (int64_t i = frame - 1; i > 0; --i) {
      const int64_t j = rng.uniform_int(0, i);
      std::swap(f[i], f[j]);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("filter_clips: aligned kept, shuffled removed, report consistent") {
  SceneConfig scene = default_scene();
  scene.object_count = 8;  // spread depth so shuffling collapses delta1
  scene.far = 12.0;
  std::vector<Clip> clips;
  for (int i = 0; i < 4; ++i) clips.push_back(generate_clip(scene, 100 + i));
  clips[1] = shuffle_depth(clips[1], 5);
  clips[3] = shuffle_depth(clips[3], 6);
  clips[1].id += "corrupt";
  clips[3].id += "corrupt";

  const FilterResult result = filter_clips(clips, oracle_model(2.0), 0.5, 0.5, 77);
  CHECK(result.kept.size() + result.removed.size() == result.report.size());
  for (const Clip& c : result.removed) CHECK(c.id.find("corrupt") != std::string::npos);
  for (const Clip& c : result.kept) CHECK(c.id.find("corrupt") == std::string::npos);
  CHECK(result.removed.size() == 2);

  // Removal requires both medians below their thresholds.
  for (const SegmentReport& r : result.report)
    if (!r.kept && r.scored_frames > 0) {
      CHECK(r.median_delta1 < 0.5);
      CHECK(r.median_similarity < 0.5);
    }
}

TEST_CASE("filter_clips: self-predictions always kept; deterministic") {
  std::vector<Clip> clips;
  for (int i = 0; i < 3; ++i) clips.push_back(generate_clip(default_scene(), 200 + i));
  // Model that returns the stored depth itself: both medians are maximal.
  std::vector<Tensor> stored;
  for (const Clip& c : clips) stored.push_back(c.depth);
  int call = 0;
  const FrameDepthFn self_model = [&](const Tensor& rgb, uint64_t) {
    (void)rgb;
    (void)call;
    // The filter samples frames in clip order; return matching stored depth
    // via the shading oracle instead, which reproduces it to high accuracy.
    return shading_depth_oracle(rgb, 2.0);
  };
  const FilterResult a = filter_clips(clips, self_model, 0.5, 0.5, 1);
  CHECK(a.removed.empty());
  const FilterResult b = filter_clips(clips, self_model, 0.5, 0.5, 1);
  REQUIRE(a.report.size() == b.report.size());
  for (size_t i = 0; i < a.report.size(); ++i) {
    CHECK(a.report[i].median_delta1 == b.report[i].median_delta1);
    CHECK(a.report[i].median_similarity == b.report[i].median_similarity);
  }
}

TEST_CASE("filter_clips: failing model removes the segment; zero thresholds keep all") {
  std::vector<Clip> clips = {generate_clip(default_scene(), 300)};
  const FrameDepthFn broken = [](const Tensor&, uint64_t) -> Tensor {
    throw std::runtime_error("model failure");
  };
  const FilterResult r = filter_clips(clips, broken, 0.5, 0.5, 2);
  CHECK(r.kept.empty());
  CHECK(r.removed.size() == 1);
  CHECK(r.report[0].scored_frames == 0);

  // At zero thresholds the both-fail rule cannot trigger on scored
  // segments: delta1 >= 0 never satisfies `< 0`.
  const FilterResult keep_all =
      filter_clips({shuffle_depth(clips[0], 1)}, oracle_model(2.0), -1.0, 0.0, 3);
  CHECK(keep_all.removed.empty());
}
