#pragma once

#include <cstdint>
#include <vector>

#include "vdepth/datapipe_types.hpp"
#include "vdepth/denoiser.hpp"
#include "vdepth/tensor.hpp"

namespace vdepth {

// Long-video schedule: a sparse set of keyframes that fits in one model
// pass, plus interpolation windows spanning consecutive keys. Windows tile
// [0, T-1] and share exactly their boundary keyframes.
struct InferencePlan {
  struct Window {
    int start_key = 0;
    int end_key = 0;
    std::vector<int> interior;  // strictly between the keys
  };
  std::vector<int> key_indices;
  std::vector<Window> windows;

  void validate(int total_frames, int max_frames_per_pass) const;
};

// Uniform keyframe stride ceil((T-1)/(max-1)); first and last frames are
// always keys.
InferencePlan plan_inference(int total_frames, int max_frames_per_pass);

struct InferenceSettings {
  int steps = 3;
  int max_frames_per_pass = 32;
};

// One short-video pass: encode the conditioning, sample the latent depth,
// decode. Output is normalized depth in the model's affine space, (T,1,H,W).
Tensor infer_single_pass(const Clip& video, const Denoiser& base, int steps, uint64_t seed);

// Keyframe pass with the base model, then per-window masked interpolation
// with the interpolation variant conditioned on the two predicted boundary
// key latents. Keyframe outputs come from the keyframe pass. For
// T <= max_frames_per_pass this reduces to infer_single_pass bit-for-bit.
Tensor infer_long(const Clip& video, const Denoiser& base, const Denoiser& interp,
                  const InferenceSettings& settings, uint64_t seed);

}  // namespace vdepth
