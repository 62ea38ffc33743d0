#include "vdepth/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vdepth/depthspace.hpp"
#include "vdepth/random.hpp"

namespace vdepth {

void Clip::validate() const {
  check_arg(frames.defined() && frames.ndim() == 4 && frames.dim(1) == 3,
            "Clip: frames must be (T,3,H,W)");
  check_arg(depth.defined() && depth.ndim() == 4 && depth.dim(1) == 1,
            "Clip: depth must be (T,1,H,W)");
  check_arg(depth.dim(0) == frames.dim(0) && depth.dim(2) == frames.dim(2) &&
                depth.dim(3) == frames.dim(3),
            "Clip: frame/depth shapes differ");
  check_arg(static_cast<int>(poses.size()) == frames.dim(0), "Clip: pose count mismatch");
  for (double v : frames.values())
    check_arg(v >= 0.0 && v <= 1.0, "Clip: frame values must lie in [0,1]");
  for (double v : depth.values()) check_arg(v > 0.0 && std::isfinite(v), "Clip: depth must be positive");
  check_arg(fps > 0.0, "Clip: fps must be positive");
}

void SceneConfig::validate() const {
  check_arg(object_count >= 0, "SceneConfig: object_count must be nonnegative");
  check_arg(near > 0.0 && near < far, "SceneConfig: need 0 < near < far");
  check_arg(frames >= 1, "SceneConfig: need at least one frame");
  check_arg(height >= 4 && width >= 4, "SceneConfig: resolution too small");
  check_arg(fps > 0.0, "SceneConfig: fps must be positive");
}

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;
constexpr double kAlbedoLuma = 0.75;

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

// Chroma sampled so that the Rec.601 luminance is exactly kAlbedoLuma and
// every component stays in [0,1]; the flat luminance makes shading the only
// brightness cue in the rendered frames.
std::array<double, 3> sample_albedo(Rng& rng) {
  for (int tries = 0; tries < 256; ++tries) {
    const double r = rng.uniform(0.3, 1.0);
    const double g = rng.uniform(0.3, 1.0);
    const double b = rng.uniform(0.3, 1.0);
    const double luma = kLumaR * r + kLumaG * g + kLumaB * b;
    const double s = kAlbedoLuma / luma;
    if (r * s <= 1.0 && g * s <= 1.0 && b * s <= 1.0) return {r * s, g * s, b * s};
  }
  return {kAlbedoLuma, kAlbedoLuma, kAlbedoLuma};
}

struct SceneObject {
  bool is_rect = false;
  Vec3 center;       // world position at t=0
  Vec3 velocity;     // world units per second
  double half_x = 0, half_y = 0;  // rectangle half-extent
  double ax = 0, ay = 0, az = 0;  // ellipsoid semi-axes
  std::array<double, 3> albedo_a{}, albedo_b{};
  double tex_freq_u = 0, tex_freq_v = 0, tex_phase = 0;

  Vec3 position(double seconds) const {
    return {center.x + velocity.x * seconds, center.y + velocity.y * seconds,
            center.z + velocity.z * seconds};
  }
};

// Tilted plane through (0, 0, z0) with normal (nx, ny, 1): the slant spreads
// background depth over a wide range instead of a single plateau.
struct Background {
  double z0 = 10.0;
  double nx = 0.0, ny = 0.0;
  std::array<double, 3> albedo_a{}, albedo_b{};
  double freq_x = 0, freq_y = 0, phase = 0;
};

struct Hit {
  double depth = std::numeric_limits<double>::infinity();
  std::array<double, 3> albedo{};
};

std::array<double, 3> mix_albedo(const std::array<double, 3>& a, const std::array<double, 3>& b,
                                 double w) {
  return {a[0] * w + b[0] * (1 - w), a[1] * w + b[1] * (1 - w), a[2] * w + b[2] * (1 - w)};
}

// Camera-to-world pose for frame k. Static scenes keep the exact identity
// so downstream warps stay rounding-free.
CameraPose camera_for_frame(const SceneConfig& cfg, int k, double fx, double fy, double cx,
                            double cy) {
  CameraPose pose = CameraPose::identity(fx, fy, cx, cy);
  const double seconds = static_cast<double>(k) / cfg.fps;
  switch (cfg.camera_motion) {
    case CameraMotion::kStatic:
      break;
    case CameraMotion::kTranslate: {
      pose.cam_to_world[3] = 0.03 * seconds;   // x drift
      pose.cam_to_world[7] = 0.012 * seconds;  // slight y drift
      break;
    }
    case CameraMotion::kOrbit: {
      // Arc through the initial camera position, centered on the look-at
      // point, so the camera never enters the object shell.
      const double target_z = 0.5 * (cfg.near + cfg.far);
      const double radius = target_z;
      const double a = 0.0018 * seconds * cfg.fps;  // ~0.1 deg per frame
      const double px = radius * std::sin(a);
      const double pz = target_z - radius * std::cos(a);
      // Look-at the scene center (0, 0, target_z).
      Vec3 fwd{-px, 0.0, target_z - pz};
      const double fn = std::sqrt(fwd.x * fwd.x + fwd.y * fwd.y + fwd.z * fwd.z);
      fwd = {fwd.x / fn, fwd.y / fn, fwd.z / fn};
      const Vec3 up{0, 1, 0};
      // right = up x fwd for a right-handed x-right/y-down-free frame
      Vec3 right{up.y * fwd.z - up.z * fwd.y, up.z * fwd.x - up.x * fwd.z,
                 up.x * fwd.y - up.y * fwd.x};
      const double rn = std::sqrt(right.x * right.x + right.y * right.y + right.z * right.z);
      right = {right.x / rn, right.y / rn, right.z / rn};
      const Vec3 dn{fwd.y * right.z - fwd.z * right.y, fwd.z * right.x - fwd.x * right.z,
                    fwd.x * right.y - fwd.y * right.x};
      pose.cam_to_world = {right.x, dn.x, fwd.x, px,
                           right.y, dn.y, fwd.y, 0.0,
                           right.z, dn.z, fwd.z, pz,
                           0.0,     0.0,  0.0,   1.0};
      break;
    }
  }
  return pose;
}

}  // namespace

Clip generate_clip(const SceneConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed ^ config.texture_seed, 0xC11F));

  const int T = config.frames, H = config.height, W = config.width;
  const double fx = 1.2 * W, fy = 1.2 * W;
  const double cx = W / 2.0, cy = H / 2.0;

  Background bg;
  bg.z0 = config.far;
  bg.nx = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.32, 0.55);
  bg.ny = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.18, 0.35);
  bg.albedo_a = sample_albedo(rng);
  bg.albedo_b = sample_albedo(rng);
  bg.freq_x = rng.uniform(0.5, 1.5);
  bg.freq_y = rng.uniform(0.5, 1.5);
  bg.phase = rng.uniform(0.0, 6.28);

  // Objects at distinct depth slots between near and far.
  std::vector<SceneObject> objects(static_cast<size_t>(config.object_count));
  const double span = config.far - config.near;
  for (int i = 0; i < config.object_count; ++i) {
    SceneObject& obj = objects[static_cast<size_t>(i)];
    // Slots stay in front of the slanted background's nearest extent.
    const double slot =
        config.near + span * (0.12 + 0.55 * (config.object_count == 1
                                                 ? 0.5
                                                 : static_cast<double>(i) / (config.object_count - 1)));
    const double z = slot + rng.uniform(-0.05, 0.05) * span;
    const double frustum_half = z * (W / 2.0) / fx;
    obj.is_rect = rng.uniform() < 0.5;
    obj.center = {rng.uniform(-0.55, 0.55) * frustum_half, rng.uniform(-0.55, 0.55) * frustum_half, z};
    obj.velocity = {rng.uniform(-0.025, 0.025), rng.uniform(-0.025, 0.025), 0.0};
    if (config.camera_motion == CameraMotion::kStatic) obj.velocity = {0.0, 0.0, 0.0};
    if (obj.is_rect) {
      obj.half_x = rng.uniform(0.2, 0.45) * frustum_half;
      obj.half_y = rng.uniform(0.2, 0.45) * frustum_half;
    } else {
      obj.ax = rng.uniform(0.2, 0.4) * frustum_half;
      obj.ay = rng.uniform(0.2, 0.4) * frustum_half;
      obj.az = rng.uniform(0.1, 0.3) * frustum_half;
    }
    obj.albedo_a = sample_albedo(rng);
    obj.albedo_b = sample_albedo(rng);
    obj.tex_freq_u = rng.uniform(1.0, 4.0);
    obj.tex_freq_v = rng.uniform(1.0, 4.0);
    obj.tex_phase = rng.uniform(0.0, 6.28);
  }

  std::vector<double> frames(static_cast<size_t>(T) * 3 * H * W, 0.0);
  std::vector<double> depth(static_cast<size_t>(T) * H * W, 0.0);
  std::vector<CameraPose> poses;
  poses.reserve(static_cast<size_t>(T));

  for (int k = 0; k < T; ++k) {
    const CameraPose pose = camera_for_frame(config, k, fx, fy, cx, cy);
    poses.push_back(pose);
    const double seconds = static_cast<double>(k) / config.fps;
    const auto& m = pose.cam_to_world;
    const Vec3 origin{m[3], m[7], m[11]};

    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        // Ray through the pixel center; the camera-frame direction has z=1,
        // so the ray parameter equals camera depth exactly.
        const double dxc = (u + 0.5 - cx) / fx;
        const double dyc = (v + 0.5 - cy) / fy;
        const Vec3 dir{m[0] * dxc + m[1] * dyc + m[2], m[4] * dxc + m[5] * dyc + m[6],
                       m[8] * dxc + m[9] * dyc + m[10]};

        Hit hit;
        // Background plane: (nx, ny, 1) . (X - (0,0,z0)) = 0.
        const double denom = bg.nx * dir.x + bg.ny * dir.y + dir.z;
        if (denom > 1e-9) {
          const double s =
              (bg.z0 - origin.z - bg.nx * origin.x - bg.ny * origin.y) / denom;
          if (s > 0.0) {
            const double wx = origin.x + s * dir.x;
            const double wy = origin.y + s * dir.y;
            const double mixw =
                0.5 + 0.5 * std::sin(bg.freq_x * wx + bg.freq_y * wy + bg.phase);
            hit.depth = s;
            hit.albedo = mix_albedo(bg.albedo_a, bg.albedo_b, mixw);
          }
        }
        for (const SceneObject& obj : objects) {
          const Vec3 c = obj.position(seconds);
          if (obj.is_rect) {
            if (std::abs(dir.z) < 1e-12) continue;
            const double s = (c.z - origin.z) / dir.z;
            if (s <= 0.0 || s >= hit.depth) continue;
            const double wx = origin.x + s * dir.x;
            const double wy = origin.y + s * dir.y;
            if (std::abs(wx - c.x) > obj.half_x || std::abs(wy - c.y) > obj.half_y) continue;
            const double tu = (wx - c.x) / obj.half_x;
            const double tv = (wy - c.y) / obj.half_y;
            const double mixw =
                0.5 + 0.5 * std::sin(obj.tex_freq_u * tu + obj.tex_freq_v * tv + obj.tex_phase);
            hit.depth = s;
            hit.albedo = mix_albedo(obj.albedo_a, obj.albedo_b, mixw);
          } else {
            // Axis-aligned ellipsoid: quadratic in the ray parameter.
            const double ox = (origin.x - c.x) / obj.ax, oy = (origin.y - c.y) / obj.ay,
                         oz = (origin.z - c.z) / obj.az;
            const double ddx = dir.x / obj.ax, ddy = dir.y / obj.ay, ddz = dir.z / obj.az;
            const double A = ddx * ddx + ddy * ddy + ddz * ddz;
            const double B = 2.0 * (ox * ddx + oy * ddy + oz * ddz);
            const double C = ox * ox + oy * oy + oz * oz - 1.0;
            const double disc = B * B - 4.0 * A * C;
            if (disc < 0.0) continue;
            const double sq = std::sqrt(disc);
            double s = (-B - sq) / (2.0 * A);
            if (s <= 0.0) s = (-B + sq) / (2.0 * A);
            if (s <= 0.0 || s >= hit.depth) continue;
            const double wx = origin.x + s * dir.x;
            const double wy = origin.y + s * dir.y;
            const double tu = (wx - c.x) / obj.ax;
            const double tv = (wy - c.y) / obj.ay;
            const double mixw =
                0.5 + 0.5 * std::sin(obj.tex_freq_u * tu + obj.tex_freq_v * tv + obj.tex_phase);
            hit.depth = s;
            hit.albedo = mix_albedo(obj.albedo_a, obj.albedo_b, mixw);
          }
        }

        double z = hit.depth;
        if (!std::isfinite(z)) {
          // Grazing rays past the plane: clamp to the far shell.
          z = config.far;
          hit.albedo = bg.albedo_a;
        }
        // Distance shading; luminance is kAlbedoLuma * near / z.
        const double shade = std::min(1.0, config.near / z);
        const int64_t pix = static_cast<int64_t>(v) * W + u;
        const int64_t fbase = static_cast<int64_t>(k) * 3 * H * W;
        frames[static_cast<size_t>(fbase + pix)] = hit.albedo[0] * shade;
        frames[static_cast<size_t>(fbase + static_cast<int64_t>(H) * W + pix)] = hit.albedo[1] * shade;
        frames[static_cast<size_t>(fbase + 2 * static_cast<int64_t>(H) * W + pix)] =
            hit.albedo[2] * shade;
        depth[static_cast<size_t>(static_cast<int64_t>(k) * H * W + pix)] = z;
      }
  }

  Clip clip;
  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "%016llx", static_cast<unsigned long long>(seed));
  clip.id = idbuf;
  clip.fps = config.fps;
  clip.frames = Tensor::from_vector({T, 3, H, W}, std::move(frames));
  clip.depth = Tensor::from_vector({T, 1, H, W}, std::move(depth));
  clip.poses = std::move(poses);
  clip.validate();
  return clip;
}

// ---------------------------------------------------------------------------
// scene cuts

namespace {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  v = mx;
  const double d = mx - mn;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = (b - r) / d + 2.0;
  else
    h = (r - g) / d + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

}  // namespace

std::vector<int> detect_scene_cuts(const Tensor& frames, double threshold) {
  check_arg(frames.ndim() == 4 && frames.dim(1) == 3, "detect_scene_cuts: expects (T,3,H,W)");
  check_arg(frames.dim(0) >= 2, "detect_scene_cuts: needs at least 2 frames");
  check_arg(threshold > 0.0, "detect_scene_cuts: threshold must be positive");
  const int T = frames.dim(0), H = frames.dim(2), W = frames.dim(3);
  const int64_t plane = static_cast<int64_t>(H) * W;
  const auto& fv = frames.values();

  std::vector<double> hsv(static_cast<size_t>(T) * 3 * plane);
  for (int k = 0; k < T; ++k)
    for (int64_t p = 0; p < plane; ++p) {
      const int64_t base = static_cast<int64_t>(k) * 3 * plane;
      double h, s, v;
      rgb_to_hsv(fv[static_cast<size_t>(base + p)], fv[static_cast<size_t>(base + plane + p)],
                 fv[static_cast<size_t>(base + 2 * plane + p)], h, s, v);
      hsv[static_cast<size_t>(base + p)] = h;
      hsv[static_cast<size_t>(base + plane + p)] = s;
      hsv[static_cast<size_t>(base + 2 * plane + p)] = v;
    }

  std::vector<int> cuts;
  for (int k = 1; k < T; ++k) {
    const int64_t a = static_cast<int64_t>(k - 1) * 3 * plane;
    const int64_t b = static_cast<int64_t>(k) * 3 * plane;
    double acc = 0.0;
    for (int64_t p = 0; p < plane; ++p) {
      double dh = std::abs(hsv[static_cast<size_t>(b + p)] - hsv[static_cast<size_t>(a + p)]);
      dh = std::min(dh, 1.0 - dh);  // hue is circular
      acc += dh + std::abs(hsv[static_cast<size_t>(b + plane + p)] - hsv[static_cast<size_t>(a + plane + p)]) +
             std::abs(hsv[static_cast<size_t>(b + 2 * plane + p)] -
                      hsv[static_cast<size_t>(a + 2 * plane + p)]);
    }
    if (acc / (3.0 * static_cast<double>(plane)) > threshold) cuts.push_back(k);
  }
  return cuts;
}

// ---------------------------------------------------------------------------
// similarity

double similarity_score(const Tensor& depth_a, const Tensor& depth_b) {
  check_arg(depth_a.shape() == depth_b.shape(), "similarity_score: shape mismatch");
  check_arg(depth_a.ndim() == 2, "similarity_score: expects (H,W)");

  auto features = [](const Tensor& d) {
    NormalizationParams params;
    params.d2 = percentile(d.values(), 2.0);
    params.d98 = percentile(d.values(), 98.0);
    if (params.d98 - params.d2 < 1e-8)
      throw std::runtime_error("similarity_score: zero-variance depth");
    const Tensor color = colorize_depth(d, params);
    const int H = d.dim(0), W = d.dim(1);
    constexpr int R = 16;
    std::vector<double> f(static_cast<size_t>(3) * R * R, 0.0);
    for (int c = 0; c < 3; ++c) {
      const double* plane = color.values().data() + static_cast<int64_t>(c) * H * W;
      for (int i = 0; i < R; ++i) {
        const int y0 = i * H / R;
        const int y1 = std::max(y0 + 1, (i + 1) * H / R);
        for (int j = 0; j < R; ++j) {
          const int x0 = j * W / R;
          const int x1 = std::max(x0 + 1, (j + 1) * W / R);
          double acc = 0.0;
          for (int y = y0; y < std::min(y1, H); ++y)
            for (int x = x0; x < std::min(x1, W); ++x) acc += plane[static_cast<int64_t>(y) * W + x];
          const int count = (std::min(y1, H) - y0) * (std::min(x1, W) - x0);
          f[static_cast<size_t>((c * R + i) * R + j)] = acc / std::max(1, count);
        }
      }
    }
    return f;
  };

  const std::vector<double> fa = features(depth_a);
  const std::vector<double> fb = features(depth_b);
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < fa.size(); ++i) {
    ma += fa[i];
    mb += fb[i];
  }
  ma /= static_cast<double>(fa.size());
  mb /= static_cast<double>(fb.size());
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < fa.size(); ++i) {
    const double xa = fa[i] - ma, xb = fb[i] - mb;
    dot += xa * xb;
    na += xa * xa;
    nb += xb * xb;
  }
  if (na < 1e-18 || nb < 1e-18)
    throw std::runtime_error("similarity_score: zero-variance features");
  return dot / std::sqrt(na * nb);
}

// ---------------------------------------------------------------------------
// filtering

namespace {

Clip slice_clip(const Clip& clip, int start, int length, int segment_index) {
  Clip out;
  out.id = clip.id + "_s" + std::to_string(segment_index);
  out.fps = clip.fps;
  out.frames = slice(clip.frames, 0, start, length);
  out.depth = slice(clip.depth, 0, start, length);
  out.poses.assign(clip.poses.begin() + start, clip.poses.begin() + start + length);
  return out;
}

std::vector<int> sample_frame_indices(int length, int want) {
  std::vector<int> idx;
  if (length <= want) {
    for (int i = 0; i < length; ++i) idx.push_back(i);
    return idx;
  }
  for (int k = 0; k < want; ++k)
    idx.push_back(static_cast<int>(std::lround(static_cast<double>(k) * (length - 1) / (want - 1))));
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

Tensor frame_at(const Tensor& t4, int k) {
  Tensor f = slice(t4, 0, k, 1);  // (1,C,H,W)
  const int C = f.dim(1), H = f.dim(2), W = f.dim(3);
  return C == 1 ? reshape(f, {H, W}) : reshape(f, {C, H, W});
}

}  // namespace

FilterResult filter_clips(const std::vector<Clip>& clips, const FrameDepthFn& depth_model,
                          double sim_threshold, double metric_threshold, uint64_t seed) {
  check_arg(sim_threshold >= -1.0 && sim_threshold <= 1.0,
            "filter_clips: sim_threshold out of range");
  check_arg(metric_threshold >= 0.0 && metric_threshold <= 1.0,
            "filter_clips: metric_threshold out of range");
  check_arg(depth_model != nullptr, "filter_clips: no depth model");

  FilterResult result;
  uint64_t frame_counter = 0;
  for (const Clip& clip : clips) {
    std::vector<int> cuts;
    if (clip.frame_count() >= 2)
      cuts = detect_scene_cuts(clip.frames, kDefaultSceneCutThreshold);
    std::vector<int> starts = {0};
    for (int c : cuts) starts.push_back(c);
    starts.push_back(clip.frame_count());

    for (size_t s = 0; s + 1 < starts.size(); ++s) {
      const int begin = starts[s], length = starts[s + 1] - starts[s];
      Clip segment = slice_clip(clip, begin, length, static_cast<int>(s));

      std::vector<double> d1_scores, sim_scores;
      for (int k : sample_frame_indices(length, 10)) {
        const Tensor rgb = frame_at(segment.frames, k);
        const Tensor stored = frame_at(segment.depth, k);
        Tensor predicted;
        try {
          predicted = depth_model(rgb, derive_seed(seed, frame_counter++));
        } catch (const std::exception&) {
          continue;  // model failure on this frame: skip and score the rest
        }
        try {
          const AlignmentResult a = align_scale_shift(predicted, stored, Tensor());
          Tensor aligned = apply_affine(predicted, a.scale, a.shift);
          // delta1 needs positive values; treat nonpositive aligned pixels
          // as misses by flooring them far below the ratio threshold.
          auto& av = aligned.mutable_values();
          const double floor_value = 1e-6 * std::max(1.0, percentile(stored.values(), 50.0));
          for (double& x : av) x = std::max(x, floor_value);
          d1_scores.push_back(delta1(aligned, stored, Tensor()));
          sim_scores.push_back(similarity_score(stored, predicted));
        } catch (const std::exception&) {
          // Degenerate prediction or zero-variance input: count as failing
          // both signals for this frame.
          d1_scores.push_back(0.0);
          sim_scores.push_back(-1.0);
        }
      }

      SegmentReport report;
      report.segment_id = segment.id;
      report.scored_frames = static_cast<int>(d1_scores.size());
      if (d1_scores.empty()) {
        report.kept = false;
        report.median_delta1 = 0.0;
        report.median_similarity = -1.0;
      } else {
        report.median_delta1 = percentile(d1_scores, 50.0);
        report.median_similarity = percentile(sim_scores, 50.0);
        const bool both_fail = report.median_delta1 < metric_threshold &&
                               report.median_similarity < sim_threshold;
        report.kept = !both_fail;
      }
      result.report.push_back(report);
      if (report.kept)
        result.kept.push_back(std::move(segment));
      else
        result.removed.push_back(std::move(segment));
    }
  }
  return result;
}

}  // namespace vdepth
