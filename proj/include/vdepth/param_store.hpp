#pragma once

#include <map>
#include <string>

#include "vdepth/tensor.hpp"

namespace vdepth {

// Named trainable parameters plus per-parameter optimizer state.
// Parameter tensors are leaves with requires_grad set; the optimizer is
// the single writer of their storage.
class ParamStore {
 public:
  Tensor& create(const std::string& name, Tensor init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::map<std::string, Tensor>& all() const { return params_; }
  int64_t parameter_count() const;

  struct AdamState {
    Tensor m;
    Tensor v;
    int64_t step = 0;
  };
  const std::map<std::string, AdamState>& optimizer_state() const { return opt_; }

  // Decoupled weight decay AdamW, applied in place.
  void adamw_step(const std::map<std::string, Tensor>& grads, double lr, double beta1,
                  double beta2, double eps, double weight_decay);

  // Checkpoint container: 8-byte magic "VDCKPT01", little-endian u64 header
  // length, JSON index {"tensors":[{"name","shape","offset"}...],"meta":...},
  // then the payload of raw little-endian 64-bit floats. Offsets are byte
  // positions into the payload.
  void save(const std::string& path, const std::string& meta_json) const;
  static ParamStore load(const std::string& path, std::string* meta_json = nullptr);

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, AdamState> opt_;
};

// Backprop from `loss` and return d(loss)/d(p) for every parameter in the
// store; parameters that did not participate map to zero tensors.
std::map<std::string, Tensor> backward_gradients(const Tensor& loss, const ParamStore& params);

}  // namespace vdepth
