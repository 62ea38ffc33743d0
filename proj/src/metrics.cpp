#include "vdepth/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vdepth {

namespace {

// 4x4 rigid transform helpers on row-major arrays.
std::array<double, 16> mat_mul(const std::array<double, 16>& a, const std::array<double, 16>& b) {
  std::array<double, 16> c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a[static_cast<size_t>(i * 4 + k)] * b[static_cast<size_t>(k * 4 + j)];
      c[static_cast<size_t>(i * 4 + j)] = acc;
    }
  return c;
}

// Inverse of a rigid camera-to-world matrix: [R t]^-1 = [R^T, -R^T t].
std::array<double, 16> rigid_inverse(const std::array<double, 16>& m) {
  std::array<double, 16> inv{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) inv[static_cast<size_t>(i * 4 + j)] = m[static_cast<size_t>(j * 4 + i)];
  for (int i = 0; i < 3; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) acc += inv[static_cast<size_t>(i * 4 + j)] * m[static_cast<size_t>(j * 4 + 3)];
    inv[static_cast<size_t>(i * 4 + 3)] = -acc;
  }
  inv[15] = 1.0;
  return inv;
}

bool is_identity(const std::array<double, 16>& m) {
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (m[static_cast<size_t>(i * 4 + j)] != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

bool valid_at(const Tensor& mask, size_t i) {
  return !mask.defined() || mask.values()[i] != 0.0;
}

void require_same_numel(const Tensor& a, const Tensor& b, const char* op) {
  check_arg(a.numel() == b.numel(), std::string(op) + ": size mismatch");
}

}  // namespace

CameraPose CameraPose::identity(double fx, double fy, double cx, double cy) {
  CameraPose p;
  p.fx = fx;
  p.fy = fy;
  p.cx = cx;
  p.cy = cy;
  return p;
}

void CameraPose::validate() const {
  check_arg(fx > 0.0 && fy > 0.0, "CameraPose: focal lengths must be positive");
  // Orthonormality of the rotation block.
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k)
        dot += cam_to_world[static_cast<size_t>(k * 4 + a)] * cam_to_world[static_cast<size_t>(k * 4 + b)];
      const double want = (a == b) ? 1.0 : 0.0;
      if (std::abs(dot - want) > 1e-9)
        throw std::invalid_argument("CameraPose: rotation block is not orthonormal");
    }
  for (double v : cam_to_world) check_arg(std::isfinite(v), "CameraPose: non-finite transform");
}

AlignmentResult align_scale_shift(const Tensor& pred, const Tensor& gt, const Tensor& mask) {
  require_same_numel(pred, gt, "align_scale_shift");
  if (mask.defined()) require_same_numel(pred, mask, "align_scale_shift");
  const auto& pv = pred.values();
  const auto& gv = gt.values();
  double sp = 0.0, sg = 0.0, spp = 0.0, spg = 0.0;
  int64_t n = 0;
  for (size_t i = 0; i < pv.size(); ++i) {
    if (!valid_at(mask, i)) continue;
    sp += pv[i];
    sg += gv[i];
    spp += pv[i] * pv[i];
    spg += pv[i] * gv[i];
    ++n;
  }
  if (n < 2) throw std::runtime_error("align_scale_shift: fewer than 2 valid pixels");
  const double det = static_cast<double>(n) * spp - sp * sp;
  if (det <= 1e-12 * static_cast<double>(n) * (spp + 1e-300))
    throw std::runtime_error("align_scale_shift: prediction is constant under the mask");
  AlignmentResult r;
  r.scale = (static_cast<double>(n) * spg - sp * sg) / det;
  r.shift = (sg - r.scale * sp) / static_cast<double>(n);
  r.valid_pixel_count = n;
  return r;
}

Tensor apply_affine(const Tensor& x, double scale, double shift) {
  std::vector<double> out(x.values().size());
  const auto& xv = x.values();
  for (size_t i = 0; i < xv.size(); ++i) out[i] = scale * xv[i] + shift;
  return Tensor::from_vector(x.shape(), std::move(out));
}

double absrel(const Tensor& pred, const Tensor& gt, const Tensor& mask) {
  require_same_numel(pred, gt, "absrel");
  if (mask.defined()) require_same_numel(pred, mask, "absrel");
  const auto& pv = pred.values();
  const auto& gv = gt.values();
  double acc = 0.0;
  int64_t n = 0;
  for (size_t i = 0; i < pv.size(); ++i) {
    if (!valid_at(mask, i)) continue;
    if (gv[i] <= 0.0) throw std::runtime_error("absrel: nonpositive ground truth under mask");
    acc += std::abs(pv[i] - gv[i]) / gv[i];
    ++n;
  }
  if (n == 0) throw std::runtime_error("absrel: no valid pixels");
  return acc / static_cast<double>(n);
}

double delta1(const Tensor& pred, const Tensor& gt, const Tensor& mask) {
  require_same_numel(pred, gt, "delta1");
  if (mask.defined()) require_same_numel(pred, mask, "delta1");
  const auto& pv = pred.values();
  const auto& gv = gt.values();
  int64_t hit = 0, n = 0;
  for (size_t i = 0; i < pv.size(); ++i) {
    if (!valid_at(mask, i)) continue;
    if (pv[i] <= 0.0 || gv[i] <= 0.0)
      throw std::runtime_error("delta1: nonpositive values under mask");
    const double r = std::max(pv[i] / gv[i], gv[i] / pv[i]);
    if (r < 1.25) ++hit;
    ++n;
  }
  if (n == 0) throw std::runtime_error("delta1: no valid pixels");
  return static_cast<double>(hit) / static_cast<double>(n);
}

std::pair<Tensor, Tensor> project_depth(const Tensor& depth_src, const CameraPose& pose_src,
                                        const CameraPose& pose_dst) {
  check_arg(depth_src.ndim() == 2, "project_depth: depth must be (H,W)");
  pose_src.validate();
  pose_dst.validate();
  const int H = depth_src.dim(0), W = depth_src.dim(1);
  const auto& dv = depth_src.values();

  const std::array<double, 16> rel = mat_mul(rigid_inverse(pose_dst.cam_to_world), pose_src.cam_to_world);

  // An exactly-identity relative transform short-circuits to a copy; this
  // keeps static sequences free of rounding in the warp path.
  if (is_identity(rel) && pose_src.fx == pose_dst.fx && pose_src.fy == pose_dst.fy &&
      pose_src.cx == pose_dst.cx && pose_src.cy == pose_dst.cy) {
    Tensor mask = Tensor::full({H, W}, 1.0);
    for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i)
      if (dv[static_cast<size_t>(i)] <= 0.0) mask.mutable_values()[static_cast<size_t>(i)] = 0.0;
    return {depth_src, mask};
  }

  std::vector<double> warped(static_cast<size_t>(H) * W, std::numeric_limits<double>::infinity());
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const double z = dv[static_cast<size_t>(v) * W + u];
      if (z <= 0.0) continue;
      // Pixel centers at (u + 0.5, v + 0.5).
      const double x = (static_cast<double>(u) + 0.5 - pose_src.cx) / pose_src.fx * z;
      const double y = (static_cast<double>(v) + 0.5 - pose_src.cy) / pose_src.fy * z;
      const double xd = rel[0] * x + rel[1] * y + rel[2] * z + rel[3];
      const double yd = rel[4] * x + rel[5] * y + rel[6] * z + rel[7];
      const double zd = rel[8] * x + rel[9] * y + rel[10] * z + rel[11];
      if (zd <= 0.0) continue;
      const int ud = static_cast<int>(std::floor(pose_dst.fx * xd / zd + pose_dst.cx));
      const int vd = static_cast<int>(std::floor(pose_dst.fy * yd / zd + pose_dst.cy));
      if (ud < 0 || ud >= W || vd < 0 || vd >= H) continue;
      double& cell = warped[static_cast<size_t>(vd) * W + ud];
      if (zd < cell) cell = zd;  // nearest surface wins
    }

  std::vector<double> mask(static_cast<size_t>(H) * W, 0.0);
  for (size_t i = 0; i < warped.size(); ++i) {
    if (std::isfinite(warped[i]) && warped[i] > 0.0)
      mask[i] = 1.0;
    else
      warped[i] = 0.0;
  }
  return {Tensor::from_vector({H, W}, std::move(warped)), Tensor::from_vector({H, W}, std::move(mask))};
}

double tae(const Tensor& depth_seq, const std::vector<CameraPose>& poses) {
  check_arg(depth_seq.ndim() == 4 && depth_seq.dim(1) == 1, "tae: expects (T,1,H,W)");
  const int T = depth_seq.dim(0), H = depth_seq.dim(2), W = depth_seq.dim(3);
  check_arg(T >= 2, "tae: needs at least 2 frames");
  if (static_cast<int>(poses.size()) != T)
    throw std::invalid_argument("tae: pose count does not match frame count");

  auto frame = [&](int k) {
    std::vector<double> v(static_cast<size_t>(H) * W);
    const auto& all = depth_seq.values();
    std::copy(all.begin() + static_cast<int64_t>(k) * H * W,
              all.begin() + static_cast<int64_t>(k + 1) * H * W, v.begin());
    return Tensor::from_vector({H, W}, std::move(v));
  };

  auto masked_absrel = [&](const Tensor& pred, const Tensor& gt, const Tensor& warp_mask) {
    // Restrict the warp validity mask to positive ground truth.
    Tensor m = warp_mask;
    auto& mv = m.mutable_values();
    const auto& gv = gt.values();
    int64_t n = 0;
    for (size_t i = 0; i < mv.size(); ++i) {
      if (mv[i] != 0.0 && gv[i] <= 0.0) mv[i] = 0.0;
      if (mv[i] != 0.0) ++n;
    }
    if (n == 0) return 0.0;  // fully occluded pair contributes nothing
    return absrel(pred, gt, m);
  };

  double acc = 0.0;
  for (int k = 0; k + 1 < T; ++k) {
    const Tensor dk = frame(k);
    const Tensor dk1 = frame(k + 1);
    auto [fwd, fwd_mask] = project_depth(dk, poses[static_cast<size_t>(k)], poses[static_cast<size_t>(k + 1)]);
    auto [bwd, bwd_mask] = project_depth(dk1, poses[static_cast<size_t>(k + 1)], poses[static_cast<size_t>(k)]);
    acc += masked_absrel(fwd, dk1, fwd_mask);
    acc += masked_absrel(bwd, dk, bwd_mask);
  }
  return acc / (2.0 * static_cast<double>(T - 1));
}

}  // namespace vdepth
