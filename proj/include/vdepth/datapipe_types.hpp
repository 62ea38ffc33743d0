#pragma once

#include <string>
#include <vector>

#include "vdepth/metrics.hpp"
#include "vdepth/tensor.hpp"

namespace vdepth {

// A video clip with exact per-pixel depth and per-frame cameras.
struct Clip {
  std::string id;
  Tensor frames;  // (T, 3, H, W), values in [0, 1]
  Tensor depth;   // (T, 1, H, W), strictly positive scene units
  std::vector<CameraPose> poses;
  double fps = 8.0;

  int frame_count() const { return frames.defined() ? frames.dim(0) : 0; }
  int height() const { return frames.dim(2); }
  int width() const { return frames.dim(3); }
  void validate() const;
};

enum class CameraMotion { kStatic, kTranslate, kOrbit };

// Procedural scene description for the synthetic clip generator.
struct SceneConfig {
  int object_count = 3;
  double near = 2.0;
  double far = 10.0;
  CameraMotion camera_motion = CameraMotion::kTranslate;
  uint64_t texture_seed = 0;
  int frames = 8;
  int height = 16;
  int width = 16;
  double fps = 8.0;

  void validate() const;
};

}  // namespace vdepth
