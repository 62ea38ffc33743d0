#pragma once

#include <functional>
#include <vector>

#include "vdepth/tensor.hpp"

namespace vdepth {

// Whether new operations record autodiff nodes on this thread.
bool grad_enabled();

// RAII switch that disables graph recording (inference, samplers).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse-mode backprop from a scalar loss. Allocates zeroed gradient
// buffers for every tensor reachable from `loss` that requires gradients,
// seeds d(loss)/d(loss) = 1 and runs the recorded graph in reverse
// topological order. Deterministic: traversal order depends only on graph
// structure.
void autograd_backward(const Tensor& loss);

// Hook for fused operations implemented outside tensor.cpp: wraps the
// result values in a tensor and records a node when grad mode is on and
// any parent requires gradients.
Tensor make_op(std::vector<int> shape, std::vector<double> values,
               std::vector<Tensor> parents,
               std::function<void(const TensorImpl& out)> backward);

// Central finite differences, (f(x + h e_i) - f(x - h e_i)) / (2h) per
// coordinate. Used as the independent gradient oracle throughout the tests.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h);

}  // namespace vdepth
