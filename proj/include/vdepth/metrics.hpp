#pragma once

#include <array>
#include <utility>
#include <vector>

#include "vdepth/tensor.hpp"

namespace vdepth {

// Pinhole camera with a camera-to-world rigid transform. The camera looks
// down +z and depth is the z coordinate in the camera frame.
struct CameraPose {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  std::array<double, 16> cam_to_world{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

  static CameraPose identity(double fx, double fy, double cx, double cy);
  void validate() const;  // fx, fy > 0; rotation orthonormal within 1e-9
};

struct AlignmentResult {
  double scale = 1.0;
  double shift = 0.0;
  int64_t valid_pixel_count = 0;
};

// Closed-form least squares for min_{s,t} sum_mask (s*pred + t - gt)^2.
// Throws when fewer than 2 valid pixels or pred is constant under the mask.
// An undefined mask means all pixels are valid.
AlignmentResult align_scale_shift(const Tensor& pred, const Tensor& gt, const Tensor& mask);

Tensor apply_affine(const Tensor& x, double scale, double shift);

// Mean of |pred - gt| / gt over valid pixels; gt must be positive there.
double absrel(const Tensor& pred, const Tensor& gt, const Tensor& mask);

// Fraction of valid pixels with max(pred/gt, gt/pred) < 1.25; both positive.
double delta1(const Tensor& pred, const Tensor& gt, const Tensor& mask);

// Warps a source depth map into the destination view: unproject with the
// source camera, transform rigidly, project, and splat the transformed z
// with nearest-pixel z-buffering. Returns (warped depth, validity mask).
std::pair<Tensor, Tensor> project_depth(const Tensor& depth_src, const CameraPose& pose_src,
                                        const CameraPose& pose_dst);

// Temporal alignment error: mean bidirectional AbsRel between adjacent
// frames after warping one into the other via the known cameras, averaged
// over the T-1 adjacent pairs.
double tae(const Tensor& depth_seq, const std::vector<CameraPose>& poses);

}  // namespace vdepth
