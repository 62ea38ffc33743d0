#include "vdepth/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vdepth/autograd.hpp"
#include "vdepth/random.hpp"

namespace vdepth {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape entries must be positive");
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

void check_arg(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

namespace {

std::shared_ptr<TensorImpl> new_impl(std::vector<int> shape, std::vector<double> values) {
  if (static_cast<int64_t>(values.size()) != shape_numel(shape))
    throw std::invalid_argument("tensor data length does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(values));
  return impl;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a, b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

// Accumulates into a parent's gradient buffer if that parent participates.
double* grad_of(const Tensor& t) {
  if (!t.requires_grad() || !t.impl().grad) return nullptr;
  return t.impl().grad->data();
}

}  // namespace

Tensor Tensor::zeros(const std::vector<int>& shape) {
  return Tensor(new_impl(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), 0.0)));
}

Tensor Tensor::full(const std::vector<int>& shape, double value) {
  return Tensor(new_impl(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), value)));
}

Tensor Tensor::from_vector(const std::vector<int>& shape, std::vector<double> values) {
  return Tensor(new_impl(shape, std::move(values)));
}

Tensor Tensor::randn(const std::vector<int>& shape, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.normal();
  return Tensor(new_impl(shape, std::move(v)));
}

Tensor Tensor::scalar(double value) { return from_vector({1}, {value}); }

const std::vector<int>& Tensor::shape() const {
  check_arg(defined(), "tensor is undefined");
  return impl_->shape;
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int axis) const {
  check_arg(axis >= 0 && axis < ndim(), "tensor axis out of range");
  return impl_->shape[static_cast<size_t>(axis)];
}

int64_t Tensor::numel() const { return shape_numel(shape()); }

const std::vector<double>& Tensor::values() const {
  check_arg(defined(), "tensor is undefined");
  return *impl_->data;
}

std::vector<double>& Tensor::mutable_values() {
  check_arg(defined(), "tensor is undefined");
  return *impl_->data;
}

double Tensor::scalar_value() const {
  check_arg(numel() == 1, "scalar_value: tensor is not scalar");
  return (*impl_->data)[0];
}

bool Tensor::requires_grad() const { return defined() && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool enabled) {
  check_arg(defined(), "tensor is undefined");
  check_arg(!impl_->node, "set_requires_grad: only leaf tensors");
  impl_->requires_grad = enabled;
  return *this;
}

bool Tensor::has_grad() const { return defined() && impl_->grad != nullptr; }

const std::vector<double>& Tensor::grad_values() const {
  check_arg(has_grad(), "tensor has no gradient buffer");
  return *impl_->grad;
}

bool Tensor::all_finite() const {
  for (double v : values())
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [a, b](const TensorImpl& o) {
    const auto& g = *o.grad;
    if (double* ga = grad_of(a))
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = grad_of(b))
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [a, b](const TensorImpl& o) {
    const auto& g = *o.grad;
    if (double* ga = grad_of(a))
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = grad_of(b))
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [a, b](const TensorImpl& o) {
    const auto& g = *o.grad;
    const auto& av2 = a.values();
    const auto& bv2 = b.values();
    if (double* ga = grad_of(a))
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    if (double* gb = grad_of(b))
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
  });
}

Tensor scale(const Tensor& a, double c) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  return make_op(a.shape(), std::move(out), {a}, [a, c](const TensorImpl& o) {
    const auto& g = *o.grad;
    if (double* ga = grad_of(a))
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  });
}

// ---------------------------------------------------------------------------
// matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_arg(a.ndim() == 2 && b.ndim() == 2, "matmul: expects 2-D operands");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  check_arg(k == k2, "matmul: inner dimensions differ");
  const double* A = a.values().data();
  const double* B = b.values().data();
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const double av = A[static_cast<size_t>(i) * k + l];
      const double* brow = B + static_cast<size_t>(l) * n;
      double* orow = out.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_op({m, n}, std::move(out), {a, b}, [a, b, m, k, n](const TensorImpl& o) {
    const double* G = o.grad->data();
    const double* A2 = a.values().data();
    const double* B2 = b.values().data();
    if (double* ga = grad_of(a)) {
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          double acc = 0.0;
          const double* grow = G + static_cast<size_t>(i) * n;
          const double* brow = B2 + static_cast<size_t>(l) * n;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[static_cast<size_t>(i) * k + l] += acc;
        }
    }
    if (double* gb = grad_of(b)) {
      for (int l = 0; l < k; ++l)
        for (int i = 0; i < m; ++i) {
          const double av = A2[static_cast<size_t>(i) * k + l];
          const double* grow = G + static_cast<size_t>(i) * n;
          double* gbrow = gb + static_cast<size_t>(l) * n;
          for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
    }
  });
}

// ---------------------------------------------------------------------------
// conv2d

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  check_arg(x.ndim() == 4, "conv2d: input must be (N,C,H,W)");
  check_arg(w.ndim() == 4, "conv2d: weight must be (Cout,Cin,kh,kw)");
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  check_arg(w.dim(1) == Ci, "conv2d: channel mismatch");
  check_arg(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel sides must be odd");
  if (bias.defined()) check_arg(bias.ndim() == 1 && bias.dim(0) == Co, "conv2d: bias shape");
  const int ph = kh / 2, pw = kw / 2;
  const int64_t plane = static_cast<int64_t>(H) * W;

  const double* X = x.values().data();
  const double* Wt = w.values().data();
  std::vector<double> out(static_cast<size_t>(N) * Co * plane, 0.0);
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co) {
      double* op = out.data() + (static_cast<int64_t>(n) * Co + co) * plane;
      if (bias.defined()) {
        const double bv = bias.values()[static_cast<size_t>(co)];
        for (int64_t i = 0; i < plane; ++i) op[i] = bv;
      }
      for (int ci = 0; ci < Ci; ++ci) {
        const double* ip = X + (static_cast<int64_t>(n) * Ci + ci) * plane;
        for (int ky = 0; ky < kh; ++ky) {
          const int dy = ky - ph;
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          for (int kx = 0; kx < kw; ++kx) {
            const int dx = kx - pw;
            const double wv = Wt[((static_cast<int64_t>(co) * Ci + ci) * kh + ky) * kw + kx];
            if (wv == 0.0) continue;
            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
            for (int y = y0; y < y1; ++y) {
              const double* irow = ip + static_cast<int64_t>(y + dy) * W + dx;
              double* orow = op + static_cast<int64_t>(y) * W;
              for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
            }
          }
        }
      }
    }
  }

  std::vector<Tensor> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return make_op({N, Co, H, W}, std::move(out), std::move(parents),
                 [x, w, bias, N, Ci, Co, H, W, kh, kw, ph, pw, plane](const TensorImpl& o) {
    const double* G = o.grad->data();
    const double* X2 = x.values().data();
    const double* Wt2 = w.values().data();
    if (double* gx = grad_of(x)) {
      for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Ci; ++ci) {
          double* gp = gx + (static_cast<int64_t>(n) * Ci + ci) * plane;
          for (int co = 0; co < Co; ++co) {
            const double* gop = G + (static_cast<int64_t>(n) * Co + co) * plane;
            for (int ky = 0; ky < kh; ++ky) {
              const int dy = ky - ph;
              const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
              for (int kx = 0; kx < kw; ++kx) {
                const int dx = kx - pw;
                const double wv = Wt2[((static_cast<int64_t>(co) * Ci + ci) * kh + ky) * kw + kx];
                if (wv == 0.0) continue;
                const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                for (int y = y0; y < y1; ++y) {
                  double* grow = gp + static_cast<int64_t>(y + dy) * W + dx;
                  const double* gorow = gop + static_cast<int64_t>(y) * W;
                  for (int xx = x0; xx < x1; ++xx) grow[xx] += wv * gorow[xx];
                }
              }
            }
          }
        }
    }
    if (double* gw = grad_of(w)) {
      for (int co = 0; co < Co; ++co)
        for (int ci = 0; ci < Ci; ++ci)
          for (int ky = 0; ky < kh; ++ky) {
            const int dy = ky - ph;
            const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
            for (int kx = 0; kx < kw; ++kx) {
              const int dx = kx - pw;
              const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
              double acc = 0.0;
              for (int n = 0; n < N; ++n) {
                const double* gop = G + (static_cast<int64_t>(n) * Co + co) * plane;
                const double* ip = X2 + (static_cast<int64_t>(n) * Ci + ci) * plane;
                for (int y = y0; y < y1; ++y) {
                  const double* irow = ip + static_cast<int64_t>(y + dy) * W + dx;
                  const double* gorow = gop + static_cast<int64_t>(y) * W;
                  for (int xx = x0; xx < x1; ++xx) acc += gorow[xx] * irow[xx];
                }
              }
              gw[((static_cast<int64_t>(co) * Ci + ci) * kh + ky) * kw + kx] += acc;
            }
          }
    }
    if (bias.defined()) {
      if (double* gb = grad_of(bias)) {
        for (int n = 0; n < N; ++n)
          for (int co = 0; co < Co; ++co) {
            const double* gop = G + (static_cast<int64_t>(n) * Co + co) * plane;
            double acc = 0.0;
            for (int64_t i = 0; i < plane; ++i) acc += gop[i];
            gb[co] += acc;
          }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// activations / normalization

Tensor silu(const Tensor& x) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-xv[i]));
    out[i] = xv[i] * s;
  }
  return make_op(x.shape(), std::move(out), {x}, [x](const TensorImpl& o) {
    if (double* gx = grad_of(x)) {
      const auto& g = *o.grad;
      const auto& xv2 = x.values();
      for (size_t i = 0; i < g.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-xv2[i]));
        gx[i] += g[i] * s * (1.0 + xv2[i] * (1.0 - s));
      }
    }
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  check_arg(x.ndim() >= 1, "softmax: needs at least one axis");
  const int d = x.dim(x.ndim() - 1);
  const int64_t rows = x.numel() / d;
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double* yr = out.data() + r * d;
    double mx = xr[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    for (int j = 0; j < d; ++j) yr[j] /= sum;
  }
  return make_op(x.shape(), std::move(out), {x}, [x, d, rows](const TensorImpl& o) {
    if (double* gx = grad_of(x)) {
      const double* g = o.grad->data();
      const double* y = o.data->data();
      for (int64_t r = 0; r < rows; ++r) {
        const double* gr = g + r * d;
        const double* yr = y + r * d;
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += gr[j] * yr[j];
        double* gxr = gx + r * d;
        for (int j = 0; j < d; ++j) gxr[j] += yr[j] * (gr[j] - dot);
      }
    }
  });
}

Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_arg(x.ndim() == 4, "layer_norm_channels: input must be (N,C,H,W)");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_arg(gamma.ndim() == 1 && gamma.dim(0) == C, "layer_norm_channels: gamma shape");
  check_arg(beta.ndim() == 1 && beta.dim(0) == C, "layer_norm_channels: beta shape");
  const int64_t plane = static_cast<int64_t>(H) * W;
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  std::vector<double> out(xv.size());
  for (int n = 0; n < N; ++n) {
    const int64_t base = static_cast<int64_t>(n) * C * plane;
    for (int64_t p = 0; p < plane; ++p) {
      double mean = 0.0;
      for (int c = 0; c < C; ++c) mean += xv[base + c * plane + p];
      mean /= C;
      double var = 0.0;
      for (int c = 0; c < C; ++c) {
        const double d = xv[base + c * plane + p] - mean;
        var += d * d;
      }
      var /= C;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (int c = 0; c < C; ++c) {
        const double xn = (xv[base + c * plane + p] - mean) * inv;
        out[base + c * plane + p] = xn * gv[static_cast<size_t>(c)] + bv[static_cast<size_t>(c)];
      }
    }
  }
  return make_op(x.shape(), std::move(out), {x, gamma, beta},
                 [x, gamma, beta, eps, N, C, plane](const TensorImpl& o) {
    const double* g = o.grad->data();
    const auto& xv2 = x.values();
    const auto& gv2 = gamma.values();
    double* gx = grad_of(x);
    double* gg = grad_of(gamma);
    double* gb = grad_of(beta);
    std::vector<double> xn(static_cast<size_t>(C));
    std::vector<double> dyh(static_cast<size_t>(C));
    for (int n = 0; n < N; ++n) {
      const int64_t base = static_cast<int64_t>(n) * C * plane;
      for (int64_t p = 0; p < plane; ++p) {
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += xv2[base + c * plane + p];
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
          const double d = xv2[base + c * plane + p] - mean;
          var += d * d;
        }
        var /= C;
        const double inv = 1.0 / std::sqrt(var + eps);
        double m1 = 0.0, m2 = 0.0;
        for (int c = 0; c < C; ++c) {
          xn[static_cast<size_t>(c)] = (xv2[base + c * plane + p] - mean) * inv;
          const double go = g[base + c * plane + p];
          dyh[static_cast<size_t>(c)] = go * gv2[static_cast<size_t>(c)];
          m1 += dyh[static_cast<size_t>(c)];
          m2 += dyh[static_cast<size_t>(c)] * xn[static_cast<size_t>(c)];
          if (gg) gg[c] += go * xn[static_cast<size_t>(c)];
          if (gb) gb[c] += go;
        }
        m1 /= C;
        m2 /= C;
        if (gx) {
          for (int c = 0; c < C; ++c)
            gx[base + c * plane + p] +=
                inv * (dyh[static_cast<size_t>(c)] - m1 - xn[static_cast<size_t>(c)] * m2);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// shape ops

Tensor reshape(const Tensor& x, const std::vector<int>& new_shape) {
  check_arg(shape_numel(new_shape) == x.numel(), "reshape: element count mismatch");
  std::vector<double> out = x.values();
  return make_op(new_shape, std::move(out), {x}, [x](const TensorImpl& o) {
    if (double* gx = grad_of(x)) {
      const auto& g = *o.grad;
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  check_arg(!parts.empty(), "concat: empty input list");
  const int nd = parts[0].ndim();
  check_arg(axis >= 0 && axis < nd, "concat: axis out of range");
  std::vector<int> out_shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    check_arg(p.ndim() == nd, "concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis) check_arg(p.dim(d) == out_shape[static_cast<size_t>(d)], "concat: shape mismatch");
    total += p.dim(axis);
  }
  out_shape[static_cast<size_t>(axis)] = total;

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[static_cast<size_t>(d)];
  for (int d = axis + 1; d < nd; ++d) inner *= out_shape[static_cast<size_t>(d)];

  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  const int64_t out_stride = static_cast<int64_t>(total) * inner;
  int64_t offset = 0;
  for (const auto& p : parts) {
    const int64_t len = static_cast<int64_t>(p.dim(axis)) * inner;
    const double* src = p.values().data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(src + o * len, src + (o + 1) * len, out.data() + o * out_stride + offset);
    offset += len;
  }
  return make_op(out_shape, std::move(out), parts, [parts, outer, out_stride](const TensorImpl& o) {
    const double* g = o.grad->data();
    int64_t offset2 = 0;
    for (const auto& p : parts) {
      const int64_t plen = p.numel() / outer;
      if (double* gp = grad_of(p)) {
        for (int64_t ou = 0; ou < outer; ++ou) {
          const double* grow = g + ou * out_stride + offset2;
          double* prow = gp + ou * plen;
          for (int64_t i = 0; i < plen; ++i) prow[i] += grow[i];
        }
      }
      offset2 += plen;
    }
  });
}

Tensor slice(const Tensor& x, int axis, int start, int length) {
  const int nd = x.ndim();
  check_arg(axis >= 0 && axis < nd, "slice: axis out of range");
  check_arg(start >= 0 && length > 0 && start + length <= x.dim(axis), "slice: range out of bounds");
  std::vector<int> out_shape = x.shape();
  out_shape[static_cast<size_t>(axis)] = length;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= x.dim(d);
  const int64_t in_stride = static_cast<int64_t>(x.dim(axis)) * inner;
  const int64_t out_stride = static_cast<int64_t>(length) * inner;
  const int64_t off = static_cast<int64_t>(start) * inner;

  const double* src = x.values().data();
  std::vector<double> out(static_cast<size_t>(outer * out_stride));
  for (int64_t o = 0; o < outer; ++o)
    std::copy(src + o * in_stride + off, src + o * in_stride + off + out_stride,
              out.data() + o * out_stride);
  return make_op(out_shape, std::move(out), {x},
                 [x, outer, in_stride, out_stride, off](const TensorImpl& o) {
    if (double* gx = grad_of(x)) {
      const double* g = o.grad->data();
      for (int64_t ou = 0; ou < outer; ++ou) {
        const double* grow = g + ou * out_stride;
        double* xrow = gx + ou * in_stride + off;
        for (int64_t i = 0; i < out_stride; ++i) xrow[i] += grow[i];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_op({1}, {acc}, {x}, [x](const TensorImpl& o) {
    if (double* gx = grad_of(x)) {
      const double g = (*o.grad)[0];
      for (int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
    }
  });
}

Tensor mean_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  const double inv_n = 1.0 / static_cast<double>(x.numel());
  return make_op({1}, {acc * inv_n}, {x}, [x, inv_n](const TensorImpl& o) {
    if (double* gx = grad_of(x)) {
      const double g = (*o.grad)[0] * inv_n;
      for (int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
    }
  });
}

// ---------------------------------------------------------------------------
// resolution changes

Tensor avg_pool2(const Tensor& x) {
  check_arg(x.ndim() == 4, "avg_pool2: input must be (N,C,H,W)");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_arg(H % 2 == 0 && W % 2 == 0, "avg_pool2: H and W must be even");
  const int Ho = H / 2, Wo = W / 2;
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(N) * C * Ho * Wo);
  for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
    const double* ip = xv.data() + nc * H * W;
    double* op = out.data() + nc * Ho * Wo;
    for (int y = 0; y < Ho; ++y)
      for (int xx = 0; xx < Wo; ++xx) {
        const double* r0 = ip + static_cast<int64_t>(2 * y) * W + 2 * xx;
        const double* r1 = r0 + W;
        op[static_cast<int64_t>(y) * Wo + xx] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  }
  return make_op({N, C, Ho, Wo}, std::move(out), {x}, [x, N, C, H, W, Ho, Wo](const TensorImpl& o) {
    if (double* gx = grad_of(x)) {
      const double* g = o.grad->data();
      for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
        double* gp = gx + nc * H * W;
        const double* gop = g + nc * Ho * Wo;
        for (int y = 0; y < Ho; ++y)
          for (int xx = 0; xx < Wo; ++xx) {
            const double gv = 0.25 * gop[static_cast<int64_t>(y) * Wo + xx];
            double* r0 = gp + static_cast<int64_t>(2 * y) * W + 2 * xx;
            double* r1 = r0 + W;
            r0[0] += gv;
            r0[1] += gv;
            r1[0] += gv;
            r1[1] += gv;
          }
      }
    }
  });
}

Tensor upsample_nearest2(const Tensor& x) {
  check_arg(x.ndim() == 4, "upsample_nearest2: input must be (N,C,H,W)");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = H * 2, Wo = W * 2;
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(N) * C * Ho * Wo);
  for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
    const double* ip = xv.data() + nc * H * W;
    double* op = out.data() + nc * Ho * Wo;
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        const double v = ip[static_cast<int64_t>(y) * W + xx];
        double* r0 = op + static_cast<int64_t>(2 * y) * Wo + 2 * xx;
        double* r1 = r0 + Wo;
        r0[0] = v;
        r0[1] = v;
        r1[0] = v;
        r1[1] = v;
      }
  }
  return make_op({N, C, Ho, Wo}, std::move(out), {x}, [x, N, C, H, W, Ho, Wo](const TensorImpl& o) {
    if (double* gx = grad_of(x)) {
      const double* g = o.grad->data();
      for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
        double* gp = gx + nc * H * W;
        const double* gop = g + nc * Ho * Wo;
        for (int y = 0; y < H; ++y)
          for (int xx = 0; xx < W; ++xx) {
            const double* r0 = gop + static_cast<int64_t>(2 * y) * Wo + 2 * xx;
            const double* r1 = r0 + Wo;
            gp[static_cast<int64_t>(y) * W + xx] += r0[0] + r0[1] + r1[0] + r1[1];
          }
      }
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  check_arg(x.ndim() == 4, "add_channel_bias: input must be (N,C,H,W)");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_arg(bias.ndim() == 1 && bias.dim(0) == C, "add_channel_bias: bias must be (C)");
  const int64_t plane = static_cast<int64_t>(H) * W;
  const auto& xv = x.values();
  const auto& bv = bias.values();
  std::vector<double> out(xv.size());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
      const double b = bv[static_cast<size_t>(c)];
      for (int64_t p = 0; p < plane; ++p) out[base + p] = xv[base + p] + b;
    }
  return make_op(x.shape(), std::move(out), {x, bias}, [x, bias, N, C, plane](const TensorImpl& o) {
    const double* g = o.grad->data();
    if (double* gx = grad_of(x))
      for (size_t i = 0; i < o.grad->size(); ++i) gx[i] += g[i];
    if (double* gb = grad_of(bias)) {
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
          double acc = 0.0;
          for (int64_t p = 0; p < plane; ++p) acc += g[base + p];
          gb[c] += acc;
        }
    }
  });
}

}  // namespace vdepth
