#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "vdepth/datapipe_types.hpp"
#include "vdepth/flow.hpp"
#include "vdepth/frame_positions.hpp"

namespace vdepth {

// K frames drawn without replacement from a T-frame clip, keeping their
// original indices sorted ascending.
FramePositions frame_dropout(int total_frames, int keep_frames, uint64_t seed);

// One shape-homogeneous training batch: fragments share (K, H, W) so they
// can run as one unit, with the batch size chosen by the element budget.
struct PackedBatch {
  struct Fragment {
    Tensor frames;  // (K, 3, H, W)
    Tensor depth;   // (K, 1, H, W)
    FramePositions positions;
    int clip_index = 0;  // into the source group
  };
  std::vector<Fragment> clips;
  int height = 0, width = 0;
  int frame_count = 0;
  int batch_size = 0;
};

// Assigns each clip to the bucket resolution that minimizes aspect-ratio
// distortion, then resizes (downscale only) and center-crops to the exact
// bucket size. Clips smaller than every bucket are rejected.
std::map<std::pair<int, int>, std::vector<Clip>> bucket_clips(
    const std::vector<Clip>& clips, const std::vector<std::pair<int, int>>& resolutions);

// Samples B = max(1, floor(budget / (K*H*W))) fragments from the group,
// each with its own frame-dropout draw from a per-fragment derived seed.
// All fragments share the same K.
PackedBatch pack_batch(const std::vector<Clip>& group, int keep_frames, int64_t budget,
                       uint64_t seed);

// Loss prep shared by training and the packing-neutrality checks: latents
// for one fragment of a clip whose depth was already normalized per clip.
struct FragmentLatents {
  Tensor z_d;  // (K, 4, H/2, W/2)
  Tensor z_c;  // (K, 4, H/2, W/2), from the luminance channel
  FramePositions positions;
};

// Converts RGB (N,3,H,W) to a single luminance channel (N,1,H,W).
Tensor rgb_to_luma(const Tensor& frames);

// Mean flow-matching loss over the fragments of a batch, computed in one
// graph. Equals the arithmetic mean of the per-fragment losses.
Tensor batch_fm_loss(const VelocityFn& model, const std::vector<FragmentLatents>& fragments,
                     const std::vector<double>& ts, const std::vector<Tensor>& noises);

}  // namespace vdepth
