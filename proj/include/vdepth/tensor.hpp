#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace vdepth {

class Rng;
class Tensor;
struct TensorImpl;

// One recorded operation in the autodiff graph. `backward` reads the
// output's gradient buffer and accumulates into the parents' buffers.
struct Node {
  std::vector<Tensor> parents;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  bool requires_grad = false;
  std::shared_ptr<Node> node;                    // null for leaves
  std::shared_ptr<std::vector<double>> grad;     // allocated by autograd_backward
};

// Dense row-major tensor of 64-bit reals. Value semantics: copies share
// immutable storage and every operation allocates a fresh result, so
// tensors are safe to hand around and to read concurrently. Gradient
// recording is on by default for tensors flagged requires_grad (see
// NoGradGuard in autograd.hpp).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(const std::vector<int>& shape);
  static Tensor full(const std::vector<int>& shape, double value);
  static Tensor from_vector(const std::vector<int>& shape, std::vector<double> values);
  static Tensor randn(const std::vector<int>& shape, Rng& rng);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int ndim() const;
  int dim(int axis) const;
  int64_t numel() const;

  const std::vector<double>& values() const;
  // Builder access: only valid before the tensor enters any computation.
  std::vector<double>& mutable_values();

  double scalar_value() const;  // requires numel() == 1

  bool requires_grad() const;
  Tensor& set_requires_grad(bool enabled);  // leaf tensors only

  bool has_grad() const;
  const std::vector<double>& grad_values() const;

  TensorImpl& impl() const { return *impl_; }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

  bool all_finite() const;

 private:
  std::shared_ptr<TensorImpl> impl_;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);
void check_arg(bool cond, const std::string& msg);

// ---- operations (all pure; gradients defined for every one) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);          // elementwise
Tensor scale(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);       // (m,k) x (k,n)

// 2-D convolution, stride 1, zero padding to "same" output size.
// x: (N, Cin, H, W), w: (Cout, Cin, kh, kw) with odd kh/kw, bias: (Cout) or
// undefined for none.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor silu(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);

// Layer normalization across the channel axis of (N, C, H, W), with
// per-channel affine parameters gamma, beta of shape (C).
Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           double eps = 1e-5);

Tensor reshape(const Tensor& x, const std::vector<int>& new_shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int length);

Tensor sum_all(const Tensor& x);    // scalar
Tensor mean_all(const Tensor& x);   // scalar

// 2x2 mean pooling / nearest-neighbor 2x upsampling on (N, C, H, W).
Tensor avg_pool2(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);

// x: (N, C, H, W) plus per-channel bias (C), broadcast over N, H, W.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

}  // namespace vdepth
