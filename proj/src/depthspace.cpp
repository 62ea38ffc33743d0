#include "vdepth/depthspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vdepth {

namespace {
constexpr double kDegenerateRange = 1e-8;
}

double percentile(const std::vector<double>& values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  check_arg(p >= 0.0 && p <= 100.0, "percentile: p must lie in [0, 100]");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(rank));
  const size_t hi = static_cast<size_t>(std::ceil(rank));
  if (lo == hi) return sorted[lo];
  const double w = rank - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

std::pair<Tensor, NormalizationParams> normalize_depth(const Tensor& depth) {
  check_arg(depth.ndim() == 4 && depth.dim(1) == 1, "normalize_depth: expects (T,1,H,W)");
  for (double v : depth.values())
    check_arg(std::isfinite(v) && v >= 0.0, "normalize_depth: depth must be finite and nonnegative");
  NormalizationParams params;
  params.d2 = percentile(depth.values(), 2.0);
  params.d98 = percentile(depth.values(), 98.0);
  if (params.d98 - params.d2 < kDegenerateRange)
    throw std::runtime_error("normalize_depth: degenerate depth range (near-constant clip)");
  return {normalize_depth_with(depth, params), params};
}

Tensor normalize_depth_with(const Tensor& depth, const NormalizationParams& params) {
  if (params.d98 - params.d2 < kDegenerateRange)
    throw std::runtime_error("normalize_depth_with: degenerate normalization range");
  const double inv = 1.0 / (params.d98 - params.d2);
  std::vector<double> out(depth.values().size());
  const auto& dv = depth.values();
  for (size_t i = 0; i < dv.size(); ++i) {
    const double v = ((dv[i] - params.d2) * inv - 0.5) * 2.0;
    out[i] = std::clamp(v, -1.0, 1.0);
  }
  return Tensor::from_vector(depth.shape(), std::move(out));
}

Tensor denormalize_depth(const Tensor& normalized, const NormalizationParams& params) {
  std::vector<double> out(normalized.values().size());
  const auto& nv = normalized.values();
  for (size_t i = 0; i < nv.size(); ++i)
    out[i] = (nv[i] / 2.0 + 0.5) * (params.d98 - params.d2) + params.d2;
  return Tensor::from_vector(normalized.shape(), std::move(out));
}

LatentClip encode_latent(const Tensor& clip) {
  check_arg(clip.ndim() == 4, "encode_latent: expects (T,C,H,W)");
  const int T = clip.dim(0), C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
  check_arg(H % 2 == 0 && W % 2 == 0, "encode_latent: H and W must be even");
  const int h = H / 2, w = W / 2;
  const auto& xv = clip.values();
  std::vector<double> out(xv.size());
  // Block order: (0,0), (0,1), (1,0), (1,1).
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c)
      for (int k = 0; k < 4; ++k) {
        const int dy = k / 2, dx = k % 2;
        const int64_t dst_plane = ((static_cast<int64_t>(t) * 4 * C) + c * 4 + k) * h * w;
        const int64_t src_plane = (static_cast<int64_t>(t) * C + c) * H * W;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            out[dst_plane + static_cast<int64_t>(y) * w + x] =
                xv[src_plane + static_cast<int64_t>(2 * y + dy) * W + (2 * x + dx)];
      }
  LatentClip latent;
  latent.frames = Tensor::from_vector({T, 4 * C, h, w}, std::move(out));
  latent.source_channels = C;
  return latent;
}

Tensor decode_latent(const LatentClip& latent) {
  const Tensor& z = latent.frames;
  check_arg(z.ndim() == 4, "decode_latent: expects (T,4C,h,w)");
  const int T = z.dim(0), C4 = z.dim(1), h = z.dim(2), w = z.dim(3);
  const int C = latent.source_channels;
  check_arg(C > 0 && C4 == 4 * C, "decode_latent: channel count does not match source_channels");
  const int H = h * 2, W = w * 2;
  const auto& zv = z.values();
  std::vector<double> out(zv.size());
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c)
      for (int k = 0; k < 4; ++k) {
        const int dy = k / 2, dx = k % 2;
        const int64_t src_plane = ((static_cast<int64_t>(t) * 4 * C) + c * 4 + k) * h * w;
        const int64_t dst_plane = (static_cast<int64_t>(t) * C + c) * H * W;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            out[dst_plane + static_cast<int64_t>(2 * y + dy) * W + (2 * x + dx)] =
                zv[src_plane + static_cast<int64_t>(y) * w + x];
      }
  return Tensor::from_vector({T, C, H, W}, std::move(out));
}

Tensor colorize_depth(const Tensor& depth, const NormalizationParams& params) {
  check_arg(depth.ndim() == 2, "colorize_depth: expects (H,W)");
  if (params.d98 - params.d2 < kDegenerateRange)
    throw std::runtime_error("colorize_depth: degenerate normalization range");
  const int H = depth.dim(0), W = depth.dim(1);
  const double inv = 1.0 / (params.d98 - params.d2);
  const auto& dv = depth.values();
  std::vector<double> out(static_cast<size_t>(3) * H * W);
  for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i) {
    const double v = std::clamp((dv[static_cast<size_t>(i)] - params.d2) * inv, 0.0, 1.0);
    out[static_cast<size_t>(i)] = v;
    out[static_cast<size_t>(i) + static_cast<size_t>(H) * W] = v;
    out[static_cast<size_t>(i) + 2 * static_cast<size_t>(H) * W] = v;
  }
  return Tensor::from_vector({3, H, W}, std::move(out));
}

}  // namespace vdepth
