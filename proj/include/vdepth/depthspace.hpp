#pragma once

#include <utility>
#include <vector>

#include "vdepth/tensor.hpp"

namespace vdepth {

// Per-clip robust depth range used for normalization: the 2% and 98%
// percentiles of all T*H*W depth values of the clip.
struct NormalizationParams {
  double d2 = 0.0;
  double d98 = 1.0;
};

// Spatially compressed clip representation. The codec is a lossless
// space-to-depth rearrangement with factor 2: every 2x2 spatial block of a
// source channel becomes 4 latent channels, ordered top-left, top-right,
// bottom-left, bottom-right. A C-channel source maps to 4*C latent channels.
struct LatentClip {
  Tensor frames;  // (T, 4*C, H/2, W/2)
  int source_channels = 0;
  static constexpr int kSpatialFactor = 2;
};

// Linear-interpolation percentile over sorted values, rank p/100*(n-1).
double percentile(const std::vector<double>& values, double p);

// Maps depth into [-1, 1] via the clip's (d2, d98) range and clamps.
// Throws on near-constant clips (d98 - d2 < 1e-8).
std::pair<Tensor, NormalizationParams> normalize_depth(const Tensor& depth);

// The affine map of normalize_depth with given params, then clamp to [-1,1].
Tensor normalize_depth_with(const Tensor& depth, const NormalizationParams& params);

// Inverse affine map (no clamp): values inside [d2, d98] round-trip exactly.
Tensor denormalize_depth(const Tensor& normalized, const NormalizationParams& params);

LatentClip encode_latent(const Tensor& clip);   // (T,C,H,W), H and W even
Tensor decode_latent(const LatentClip& latent);

// 1-channel depth to a 3-channel image in [0,1]: normalize by (d2, d98),
// clamp, replicate across channels.
Tensor colorize_depth(const Tensor& depth, const NormalizationParams& params);

}  // namespace vdepth
