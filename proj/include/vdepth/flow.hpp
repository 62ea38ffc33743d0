#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vdepth/frame_positions.hpp"
#include "vdepth/tensor.hpp"

namespace vdepth {

// A velocity field: maps (corrupted latent, conditioning latent, time,
// frame positions) to a predicted velocity of the latent's shape.
using VelocityFn =
    std::function<Tensor(const Tensor& phi, const Tensor& z_c, double t, const FramePositions&)>;

// One training draw of the corruption path.
struct FlowSample {
  Tensor z_d;
  Tensor eps;
  double t = 0.0;
  Tensor phi_t;  // t*z_d + (1-t)*eps

  static FlowSample draw(const Tensor& z_d, double t, uint64_t seed);
};

// Linear corruption path: t*z + (1-t)*eps, t in [0,1].
Tensor corrupt(const Tensor& z, const Tensor& eps, double t);

// Constant velocity of the linear path: z - eps, independent of t.
Tensor target_velocity(const Tensor& z, const Tensor& eps);

// Mean squared error between the model's velocity prediction at the
// corrupted state and the path's target velocity. Differentiable through
// the model.
Tensor fm_loss(const VelocityFn& model, const Tensor& z_d, const Tensor& z_c, double t,
               const Tensor& eps, const FramePositions& positions);

// Integrates the learned velocity field from seeded unit Gaussian noise at
// t=0 to t=1 with forward Euler on the uniform grid t_k = k/steps. The
// state is kept as phi_k = eps + (1/steps) * sum of evaluated velocities,
// which is the same Euler iteration regrouped so that velocity fields
// constant in t integrate exactly, independent of steps.
Tensor sample(const VelocityFn& model, const Tensor& z_c, int steps, uint64_t seed,
              const FramePositions& positions);

// Aligns every prediction to the first by least-squares scale/shift, then
// takes the per-pixel median.
Tensor ensemble_merge(const std::vector<Tensor>& predictions);

}  // namespace vdepth
