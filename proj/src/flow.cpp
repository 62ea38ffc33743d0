#include "vdepth/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vdepth/autograd.hpp"
#include "vdepth/metrics.hpp"
#include "vdepth/random.hpp"

namespace vdepth {

FlowSample FlowSample::draw(const Tensor& z_d, double t, uint64_t seed) {
  FlowSample s;
  s.z_d = z_d;
  s.t = t;
  Rng rng(seed);
  s.eps = Tensor::randn(z_d.shape(), rng);
  s.phi_t = corrupt(z_d, s.eps, t);
  return s;
}

Tensor corrupt(const Tensor& z, const Tensor& eps, double t) {
  check_arg(z.shape() == eps.shape(), "corrupt: shape mismatch");
  check_arg(t >= 0.0 && t <= 1.0, "corrupt: t must lie in [0, 1]");
  if (t == 0.0) return eps;
  if (t == 1.0) return z;
  return add(scale(z, t), scale(eps, 1.0 - t));
}

Tensor target_velocity(const Tensor& z, const Tensor& eps) {
  check_arg(z.shape() == eps.shape(), "target_velocity: shape mismatch");
  return sub(z, eps);
}

Tensor fm_loss(const VelocityFn& model, const Tensor& z_d, const Tensor& z_c, double t,
               const Tensor& eps, const FramePositions& positions) {
  check_arg(z_d.shape() == eps.shape(), "fm_loss: z_d and eps shapes differ");
  check_arg(z_c.dim(0) == z_d.dim(0), "fm_loss: frame count mismatch between z_d and z_c");
  const Tensor phi = corrupt(z_d, eps, t);
  const Tensor target = target_velocity(z_d, eps);
  const Tensor pred = model(phi, z_c, t, positions);
  check_arg(pred.shape() == z_d.shape(), "fm_loss: model output shape mismatch");
  const Tensor diff = sub(pred, target);
  Tensor loss = mean_all(mul(diff, diff));
  if (!std::isfinite(loss.scalar_value()))
    throw std::runtime_error("fm_loss: non-finite loss value");
  return loss;
}

Tensor sample(const VelocityFn& model, const Tensor& z_c, int steps, uint64_t seed,
              const FramePositions& positions) {
  check_arg(steps >= 1, "sample: steps must be >= 1");
  NoGradGuard no_grad;

  Rng rng(seed);
  const Tensor eps = Tensor::randn(z_c.shape(), rng);

  const double dt = 1.0 / static_cast<double>(steps);
  Tensor velocity_sum;  // sum of v(phi_k, t_k) over completed steps
  for (int k = 0; k < steps; ++k) {
    const double t_k = static_cast<double>(k) / static_cast<double>(steps);
    const Tensor phi = (k == 0) ? eps : add(eps, scale(velocity_sum, dt));
    const Tensor v = model(phi, z_c, t_k, positions);
    check_arg(v.shape() == eps.shape(), "sample: model output shape mismatch");
    velocity_sum = (k == 0) ? v : add(velocity_sum, v);
  }
  return add(eps, scale(velocity_sum, dt));
}

Tensor ensemble_merge(const std::vector<Tensor>& predictions) {
  check_arg(!predictions.empty(), "ensemble_merge: empty prediction list");
  const Tensor& ref = predictions.front();
  for (const auto& p : predictions)
    check_arg(p.shape() == ref.shape(), "ensemble_merge: prediction shapes differ");
  if (predictions.size() == 1) return ref;

  std::vector<std::vector<double>> aligned;
  aligned.reserve(predictions.size());
  aligned.push_back(ref.values());
  for (size_t i = 1; i < predictions.size(); ++i) {
    const AlignmentResult a = align_scale_shift(predictions[i], ref, Tensor());
    aligned.push_back(apply_affine(predictions[i], a.scale, a.shift).values());
  }

  const size_t n = aligned.size();
  std::vector<double> out(ref.values().size());
  std::vector<double> column(n);
  for (size_t j = 0; j < out.size(); ++j) {
    for (size_t i = 0; i < n; ++i) column[i] = aligned[i][j];
    std::sort(column.begin(), column.end());
    out[j] = (n % 2 == 1) ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return Tensor::from_vector(ref.shape(), std::move(out));
}

}  // namespace vdepth
