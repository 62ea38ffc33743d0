#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vdepth/datapipe_types.hpp"

namespace vdepth {

// Renders a clip of textured rectangles and ellipsoids at distinct depths
// under a pinhole camera on the configured trajectory. The depth buffer is
// the exact camera-space z of the nearest surface per pixel; poses are
// recorded per frame. Deterministic in (config, seed).
Clip generate_clip(const SceneConfig& config, uint64_t seed);

// Cut detection on HSV frames: frame k starts a new segment when the mean
// absolute inter-frame difference (hue measured circularly) exceeds the
// threshold.
std::vector<int> detect_scene_cuts(const Tensor& frames, double threshold);
constexpr double kDefaultSceneCutThreshold = 0.1;

// Structural agreement between two depth maps: colorize each by its own
// percentile range, box-average down to 16x16, and return the Pearson
// correlation of the flattened results. Throws on zero-variance inputs.
double similarity_score(const Tensor& depth_a, const Tensor& depth_b);

// Single-frame depth predictor used by the filter; seeded per frame.
using FrameDepthFn = std::function<Tensor(const Tensor& rgb /* (3,H,W) */, uint64_t seed)>;

struct SegmentReport {
  std::string segment_id;
  double median_delta1 = 0.0;
  double median_similarity = 0.0;
  bool kept = false;
  int scored_frames = 0;
};

struct FilterResult {
  std::vector<Clip> kept;
  std::vector<Clip> removed;
  std::vector<SegmentReport> report;
};

// Quality filter: split each clip at scene cuts, score 10 uniformly sampled
// frames per segment (all frames when fewer) with per-frame delta1 after
// scale/shift alignment and the colorized similarity score, and remove a
// segment only when BOTH medians fall below their thresholds. Frames the
// model fails on are skipped; segments with no scored frames are removed.
FilterResult filter_clips(const std::vector<Clip>& clips, const FrameDepthFn& depth_model,
                          double sim_threshold, double metric_threshold, uint64_t seed);

}  // namespace vdepth
