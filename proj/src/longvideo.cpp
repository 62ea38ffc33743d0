#include "vdepth/longvideo.hpp"

#include <cmath>
#include <stdexcept>

#include "vdepth/autograd.hpp"
#include "vdepth/depthspace.hpp"
#include "vdepth/flow.hpp"
#include "vdepth/packing.hpp"
#include "vdepth/random.hpp"

namespace vdepth {

void InferencePlan::validate(int total_frames, int max_frames_per_pass) const {
  check_arg(!key_indices.empty(), "InferencePlan: no keyframes");
  check_arg(key_indices.front() == 0, "InferencePlan: first frame must be a key");
  check_arg(key_indices.back() == total_frames - 1, "InferencePlan: last frame must be a key");
  for (size_t i = 1; i < key_indices.size(); ++i)
    check_arg(key_indices[i] > key_indices[i - 1], "InferencePlan: keys must increase");
  check_arg(static_cast<int>(key_indices.size()) <= max_frames_per_pass,
            "InferencePlan: keyframes exceed one model pass");
  check_arg(windows.size() + 1 == key_indices.size() || (total_frames == 1 && windows.empty()),
            "InferencePlan: windows must span consecutive key pairs");
  std::vector<bool> covered(static_cast<size_t>(total_frames), false);
  for (int k : key_indices) covered[static_cast<size_t>(k)] = true;
  for (size_t w = 0; w < windows.size(); ++w) {
    const Window& win = windows[w];
    check_arg(win.start_key == key_indices[w] && win.end_key == key_indices[w + 1],
              "InferencePlan: window does not match its key pair");
    int prev = win.start_key;
    for (int idx : win.interior) {
      check_arg(idx > prev && idx < win.end_key, "InferencePlan: interior index out of range");
      check_arg(!covered[static_cast<size_t>(idx)], "InferencePlan: interior index covered twice");
      covered[static_cast<size_t>(idx)] = true;
      prev = idx;
    }
  }
  for (bool c : covered) check_arg(c, "InferencePlan: frame not covered");
}

InferencePlan plan_inference(int total_frames, int max_frames_per_pass) {
  check_arg(total_frames >= 1, "plan_inference: need at least one frame");
  check_arg(max_frames_per_pass >= 2, "plan_inference: max_frames_per_pass must be >= 2");
  InferencePlan plan;
  if (total_frames == 1) {
    plan.key_indices = {0};
    return plan;
  }
  // Uniform stride ceil((T-1)/(max-1)) keeps the key count within one pass.
  const int s = (total_frames - 1 + max_frames_per_pass - 2) / (max_frames_per_pass - 1);
  for (int k = 0; k < total_frames - 1; k += s) plan.key_indices.push_back(k);
  plan.key_indices.push_back(total_frames - 1);
  for (size_t i = 0; i + 1 < plan.key_indices.size(); ++i) {
    InferencePlan::Window win;
    win.start_key = plan.key_indices[i];
    win.end_key = plan.key_indices[i + 1];
    for (int idx = win.start_key + 1; idx < win.end_key; ++idx) win.interior.push_back(idx);
    plan.windows.push_back(std::move(win));
  }
  return plan;
}

namespace {

Tensor conditioning_latent(const Clip& video) {
  return encode_latent(rgb_to_luma(video.frames)).frames;  // (T,4,h,w)
}

Tensor gather_frames(const Tensor& t, const std::vector<int>& indices) {
  std::vector<Tensor> parts;
  parts.reserve(indices.size());
  for (int k : indices) parts.push_back(slice(t, 0, k, 1));
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

Tensor decode_to_affine_depth(const Tensor& latent) {
  LatentClip z;
  z.frames = latent;
  z.source_channels = 1;
  const Tensor decoded = decode_latent(z);  // roughly in [-1, 1]
  Tensor out = Tensor::zeros(decoded.shape());
  for (size_t i = 0; i < decoded.values().size(); ++i)
    out.mutable_values()[i] = decoded.values()[i] / 2.0 + 0.5;
  return out;
}

Tensor sample_latent(const Denoiser& base, const Tensor& z_c, const FramePositions& positions,
                     int steps, uint64_t seed) {
  const VelocityFn model = [&base](const Tensor& phi, const Tensor& cond, double t,
                                   const FramePositions& pos) {
    return base.forward(phi, cond, t, pos);
  };
  return sample(model, z_c, steps, seed, positions);
}

}  // namespace

Tensor infer_single_pass(const Clip& video, const Denoiser& base, int steps, uint64_t seed) {
  NoGradGuard no_grad;
  const Tensor z_c = conditioning_latent(video);
  const FramePositions positions = FramePositions::iota(video.frame_count());
  const Tensor z_hat = sample_latent(base, z_c, positions, steps, seed);
  return decode_to_affine_depth(z_hat);
}

Tensor infer_long(const Clip& video, const Denoiser& base, const Denoiser& interp,
                  const InferenceSettings& settings, uint64_t seed) {
  const int T = video.frame_count();
  if (T <= settings.max_frames_per_pass) return infer_single_pass(video, base, settings.steps, seed);

  NoGradGuard no_grad;
  const InferencePlan plan = plan_inference(T, settings.max_frames_per_pass);
  plan.validate(T, settings.max_frames_per_pass);
  check_arg(interp.config.is_interp(), "infer_long: interpolation model required for long videos");

  const Tensor z_c = conditioning_latent(video);
  const int h = z_c.dim(2), w = z_c.dim(3);

  // Globally consistent keyframe pass.
  const Tensor z_c_keys = gather_frames(z_c, plan.key_indices);
  const Tensor z_keys_hat = sample_latent(base, z_c_keys, FramePositions(plan.key_indices),
                                          settings.steps, derive_seed(seed, 1));

  // Assemble output latents; keys come straight from the keyframe pass.
  Tensor out_latent = Tensor::zeros({T, 4, h, w});
  const int64_t frame_sz = static_cast<int64_t>(4) * h * w;
  auto copy_frame = [&](const Tensor& src, int src_idx, int dst_idx) {
    const auto& sv = src.values();
    std::copy(sv.begin() + src_idx * frame_sz, sv.begin() + (src_idx + 1) * frame_sz,
              out_latent.mutable_values().begin() + dst_idx * frame_sz);
  };
  for (size_t i = 0; i < plan.key_indices.size(); ++i)
    copy_frame(z_keys_hat, static_cast<int>(i), plan.key_indices[i]);

  for (size_t wdx = 0; wdx < plan.windows.size(); ++wdx) {
    const InferencePlan::Window& win = plan.windows[wdx];
    if (win.interior.empty()) continue;
    const int len = win.end_key - win.start_key + 1;

    std::vector<int> window_indices(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) window_indices[static_cast<size_t>(i)] = win.start_key + i;

    const Tensor z_c_win = slice(z_c, 0, win.start_key, len);
    Tensor z_key_win = Tensor::zeros({len, 4, h, w});
    Tensor mask = Tensor::zeros({len, 4, h, w});
    const auto& keys_hat = z_keys_hat.values();
    auto put_key = [&](int key_pos_in_plan, int local) {
      std::copy(keys_hat.begin() + key_pos_in_plan * frame_sz,
                keys_hat.begin() + (key_pos_in_plan + 1) * frame_sz,
                z_key_win.mutable_values().begin() + local * frame_sz);
      auto& mv = mask.mutable_values();
      std::fill(mv.begin() + local * frame_sz, mv.begin() + (local + 1) * frame_sz, 1.0);
    };
    put_key(static_cast<int>(wdx), 0);
    put_key(static_cast<int>(wdx) + 1, len - 1);

    const VelocityFn model = [&interp, &z_key_win, &mask](const Tensor& phi, const Tensor& cond,
                                                          double t, const FramePositions& pos) {
      return interp.interp_forward(phi, cond, z_key_win, mask, t, pos);
    };
    const Tensor z_win = sample(model, z_c_win, settings.steps,
                                derive_seed(seed, 2 + static_cast<uint64_t>(wdx)),
                                FramePositions(window_indices));
    for (int idx : win.interior) copy_frame(z_win, idx - win.start_key, idx);
  }

  return decode_to_affine_depth(out_latent);
}

}  // namespace vdepth
