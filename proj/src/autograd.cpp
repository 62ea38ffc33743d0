#include "vdepth/autograd.hpp"

#include <stdexcept>
#include <unordered_set>

namespace vdepth {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_op(std::vector<int> shape, std::vector<double> values,
               std::vector<Tensor> parents,
               std::function<void(const TensorImpl& out)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  if (static_cast<int64_t>(values.size()) != shape_numel(shape))
    throw std::invalid_argument("make_op: data length does not match shape");
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(values));
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents)
      if (p.requires_grad()) {
        any = true;
        break;
      }
    if (any) {
      impl->requires_grad = true;
      impl->node = std::make_shared<Node>();
      impl->node->parents = std::move(parents);
      impl->node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(impl));
}

void autograd_backward(const Tensor& loss) {
  check_arg(loss.defined(), "backward: loss undefined");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;  // nothing participates

  // Post-order DFS; the resulting order is structural, so runs are
  // deterministic regardless of allocation addresses.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* impl;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (seen.insert(loss.impl_ptr().get()).second) stack.push_back({loss.impl_ptr().get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node* node = f.impl->node.get();
    const size_t nparents = node ? node->parents.size() : 0;
    if (f.next_parent < nparents) {
      const Tensor& p = node->parents[f.next_parent++];
      TensorImpl* pi = p.impl_ptr().get();
      if (p.requires_grad() && seen.insert(pi).second) stack.push_back({pi, 0});
    } else {
      order.push_back(f.impl);
      stack.pop_back();
    }
  }

  for (TensorImpl* impl : order)
    impl->grad = std::make_shared<std::vector<double>>(impl->data->size(), 0.0);
  (*loss.impl_ptr()->grad)[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* impl = *it;
    if (impl->node && impl->node->backward) impl->node->backward(*impl);
  }
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h) {
  check_arg(h > 0.0, "finite_difference_gradient: h must be positive");
  std::vector<double> grad(static_cast<size_t>(x.numel()));
  for (int64_t i = 0; i < x.numel(); ++i) {
    std::vector<double> vp = x.values();
    std::vector<double> vm = x.values();
    vp[static_cast<size_t>(i)] += h;
    vm[static_cast<size_t>(i)] -= h;
    const double fp = f(Tensor::from_vector(x.shape(), std::move(vp)));
    const double fm = f(Tensor::from_vector(x.shape(), std::move(vm)));
    grad[static_cast<size_t>(i)] = (fp - fm) / (2.0 * h);
  }
  return Tensor::from_vector(x.shape(), std::move(grad));
}

}  // namespace vdepth
