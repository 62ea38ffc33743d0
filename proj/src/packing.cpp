#include "vdepth/packing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vdepth/depthspace.hpp"
#include "vdepth/random.hpp"

namespace vdepth {

FramePositions frame_dropout(int total_frames, int keep_frames, uint64_t seed) {
  check_arg(total_frames >= 1, "frame_dropout: clip must have at least one frame");
  if (keep_frames < 1 || keep_frames > total_frames)
    throw std::invalid_argument("frame_dropout: need 1 <= K <= T");
  Rng rng(seed);
  return FramePositions(rng.sample_without_replacement(total_frames, keep_frames));
}

namespace {

// Nearest-neighbor resize of (T, C, H, W) to (T, C, Ho, Wo).
Tensor resize_nearest(const Tensor& x, int ho, int wo) {
  const int T = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (ho == H && wo == W) return x;
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(T) * C * ho * wo);
  for (int64_t tc = 0; tc < static_cast<int64_t>(T) * C; ++tc) {
    const double* ip = xv.data() + tc * H * W;
    double* op = out.data() + tc * ho * wo;
    for (int y = 0; y < ho; ++y) {
      const int sy = std::min(H - 1, static_cast<int>((static_cast<int64_t>(y) * H + H / 2) / ho));
      for (int xx = 0; xx < wo; ++xx) {
        const int sx = std::min(W - 1, static_cast<int>((static_cast<int64_t>(xx) * W + W / 2) / wo));
        op[static_cast<int64_t>(y) * wo + xx] = ip[static_cast<int64_t>(sy) * W + sx];
      }
    }
  }
  return Tensor::from_vector({T, C, ho, wo}, std::move(out));
}

Tensor crop_center(const Tensor& x, int ho, int wo) {
  const int H = x.dim(2), W = x.dim(3);
  if (ho == H && wo == W) return x;
  const int y0 = (H - ho) / 2, x0 = (W - wo) / 2;
  Tensor t = slice(x, 2, y0, ho);
  return slice(t, 3, x0, wo);
}

Clip fit_to_bucket(const Clip& clip, int bh, int bw) {
  const int H = clip.height(), W = clip.width();
  // Cover the bucket, keeping aspect ratio, then center-crop.
  const double s = std::max(static_cast<double>(bh) / H, static_cast<double>(bw) / W);
  const int rh = std::max(bh, static_cast<int>(std::lround(H * s)));
  const int rw = std::max(bw, static_cast<int>(std::lround(W * s)));
  Clip out = clip;
  out.frames = crop_center(resize_nearest(clip.frames, rh, rw), bh, bw);
  out.depth = crop_center(resize_nearest(clip.depth, rh, rw), bh, bw);
  // Keep intrinsics consistent with the resize and crop.
  const double sy = static_cast<double>(rh) / H, sx = static_cast<double>(rw) / W;
  const double y0 = (rh - bh) / 2.0, x0 = (rw - bw) / 2.0;
  for (auto& pose : out.poses) {
    pose.fx *= sx;
    pose.fy *= sy;
    pose.cx = pose.cx * sx - x0;
    pose.cy = pose.cy * sy - y0;
  }
  return out;
}

}  // namespace

std::map<std::pair<int, int>, std::vector<Clip>> bucket_clips(
    const std::vector<Clip>& clips, const std::vector<std::pair<int, int>>& resolutions) {
  check_arg(!resolutions.empty(), "bucket_clips: no bucket resolutions given");
  for (const auto& [h, w] : resolutions)
    check_arg(h > 0 && w > 0, "bucket_clips: bucket sides must be positive");

  std::map<std::pair<int, int>, std::vector<Clip>> groups;
  for (const Clip& clip : clips) {
    const int H = clip.height(), W = clip.width();
    const double clip_log_ar = std::log(static_cast<double>(W) / H);
    int best = -1;
    double best_distortion = 0.0, best_area_gap = 0.0;
    for (size_t i = 0; i < resolutions.size(); ++i) {
      const auto& [bh, bw] = resolutions[i];
      if (bh > H || bw > W) continue;  // only downscale/crop, never upscale
      const double distortion = std::abs(std::log(static_cast<double>(bw) / bh) - clip_log_ar);
      const double area_gap =
          std::abs(std::log(static_cast<double>(bh) * bw / (static_cast<double>(H) * W)));
      if (best < 0 || distortion < best_distortion - 1e-12 ||
          (std::abs(distortion - best_distortion) <= 1e-12 && area_gap < best_area_gap)) {
        best = static_cast<int>(i);
        best_distortion = distortion;
        best_area_gap = area_gap;
      }
    }
    if (best < 0)
      throw std::runtime_error("bucket_clips: clip " + clip.id + " (" + std::to_string(H) + "x" +
                               std::to_string(W) + ") is smaller than every bucket");
    const auto& [bh, bw] = resolutions[static_cast<size_t>(best)];
    groups[{bh, bw}].push_back(fit_to_bucket(clip, bh, bw));
  }
  return groups;
}

PackedBatch pack_batch(const std::vector<Clip>& group, int keep_frames, int64_t budget,
                       uint64_t seed) {
  check_arg(!group.empty(), "pack_batch: empty group");
  check_arg(budget > 0, "pack_batch: budget must be positive");
  const int H = group.front().height(), W = group.front().width();
  for (const Clip& c : group) {
    check_arg(c.height() == H && c.width() == W, "pack_batch: group resolutions differ");
    check_arg(c.frame_count() >= keep_frames, "pack_batch: clip shorter than K");
  }
  const int64_t per_fragment = static_cast<int64_t>(keep_frames) * H * W;
  const int batch = std::max<int64_t>(1, budget / per_fragment);

  Rng rng(derive_seed(seed, 0));
  PackedBatch out;
  out.height = H;
  out.width = W;
  out.frame_count = keep_frames;
  out.batch_size = batch;
  for (int b = 0; b < batch; ++b) {
    const int ci = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(group.size()) - 1));
    const Clip& clip = group[static_cast<size_t>(ci)];
    PackedBatch::Fragment frag;
    frag.clip_index = ci;
    frag.positions = frame_dropout(clip.frame_count(), keep_frames,
                                   derive_seed(seed, static_cast<uint64_t>(b) + 1));
    // Gather the kept frames.
    std::vector<Tensor> fparts, dparts;
    for (int idx : frag.positions.indices) {
      fparts.push_back(slice(clip.frames, 0, idx, 1));
      dparts.push_back(slice(clip.depth, 0, idx, 1));
    }
    frag.frames = fparts.size() == 1 ? fparts[0] : concat(fparts, 0);
    frag.depth = dparts.size() == 1 ? dparts[0] : concat(dparts, 0);
    out.clips.push_back(std::move(frag));
  }
  return out;
}

Tensor rgb_to_luma(const Tensor& frames) {
  check_arg(frames.ndim() == 4 && frames.dim(1) == 3, "rgb_to_luma: expects (N,3,H,W)");
  const int N = frames.dim(0), H = frames.dim(2), W = frames.dim(3);
  const int64_t plane = static_cast<int64_t>(H) * W;
  const auto& fv = frames.values();
  std::vector<double> out(static_cast<size_t>(N) * plane);
  for (int n = 0; n < N; ++n) {
    const double* r = fv.data() + static_cast<int64_t>(n) * 3 * plane;
    const double* g = r + plane;
    const double* b = g + plane;
    double* op = out.data() + static_cast<int64_t>(n) * plane;
    for (int64_t i = 0; i < plane; ++i) op[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  }
  return Tensor::from_vector({N, 1, H, W}, std::move(out));
}

Tensor batch_fm_loss(const VelocityFn& model, const std::vector<FragmentLatents>& fragments,
                     const std::vector<double>& ts, const std::vector<Tensor>& noises) {
  check_arg(!fragments.empty(), "batch_fm_loss: no fragments");
  check_arg(fragments.size() == ts.size() && fragments.size() == noises.size(),
            "batch_fm_loss: fragment/t/noise counts differ");
  Tensor total;
  for (size_t i = 0; i < fragments.size(); ++i) {
    const Tensor loss =
        fm_loss(model, fragments[i].z_d, fragments[i].z_c, ts[i], noises[i], fragments[i].positions);
    total = (i == 0) ? loss : add(total, loss);
  }
  return scale(total, 1.0 / static_cast<double>(fragments.size()));
}

}  // namespace vdepth
