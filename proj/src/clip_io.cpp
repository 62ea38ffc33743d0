#include "vdepth/clip_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "vdepth/image_io.hpp"

namespace fs = std::filesystem;

namespace vdepth {

namespace {

std::string frame_name(int k, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d.%s", k, ext);
  return buf;
}

Tensor take_frame(const Tensor& t, int k) {
  const int C = t.dim(1), H = t.dim(2), W = t.dim(3);
  const auto& v = t.values();
  const int64_t sz = static_cast<int64_t>(C) * H * W;
  std::vector<double> out(v.begin() + k * sz, v.begin() + (k + 1) * sz);
  if (C == 1) return Tensor::from_vector({H, W}, std::move(out));
  return Tensor::from_vector({C, H, W}, std::move(out));
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return nlohmann::json::parse(is);
}

}  // namespace

std::string save_clip(const std::string& root, const Clip& clip) {
  clip.validate();
  const fs::path dir = fs::path(root) / ("clip_" + clip.id);
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "depth");
  const int T = clip.frame_count();
  for (int k = 0; k < T; ++k) {
    write_png_rgb8((dir / "frames" / frame_name(k, "png")).string(), take_frame(clip.frames, k));
    write_pfm((dir / "depth" / frame_name(k, "pfm")).string(), take_frame(clip.depth, k));
  }
  nlohmann::json meta;
  meta["fps"] = clip.fps;
  meta["intrinsics"] = {{"fx", clip.poses[0].fx},
                        {"fy", clip.poses[0].fy},
                        {"cx", clip.poses[0].cx},
                        {"cy", clip.poses[0].cy}};
  meta["poses"] = nlohmann::json::array();
  for (const auto& p : clip.poses) meta["poses"].push_back(p.cam_to_world);
  write_json((dir / "meta.json").string(), meta);
  return dir.string();
}

Clip load_clip(const std::string& clip_dir) {
  const fs::path dir(clip_dir);
  if (!fs::exists(dir / "meta.json"))
    throw std::runtime_error("malformed clip directory (no meta.json): " + clip_dir);
  const nlohmann::json meta = read_json((dir / "meta.json").string());

  Clip clip;
  const std::string name = dir.filename().string();
  clip.id = name.rfind("clip_", 0) == 0 ? name.substr(5) : name;
  clip.fps = meta.at("fps");
  const auto& intr = meta.at("intrinsics");

  std::vector<std::string> frame_files;
  for (const auto& e : fs::directory_iterator(dir / "frames"))
    if (e.path().extension() == ".png") frame_files.push_back(e.path().string());
  std::sort(frame_files.begin(), frame_files.end());
  if (frame_files.empty()) throw std::runtime_error("clip has no frames: " + clip_dir);

  std::vector<Tensor> frames, depths;
  for (size_t k = 0; k < frame_files.size(); ++k) {
    Tensor rgb = read_png_rgb8(frame_files[k]);
    frames.push_back(reshape(rgb, {1, rgb.dim(0), rgb.dim(1), rgb.dim(2)}));
    Tensor d = read_pfm((dir / "depth" / frame_name(static_cast<int>(k), "pfm")).string());
    depths.push_back(reshape(d, {1, 1, d.dim(0), d.dim(1)}));
  }
  clip.frames = frames.size() == 1 ? frames[0] : concat(frames, 0);
  clip.depth = depths.size() == 1 ? depths[0] : concat(depths, 0);

  for (const auto& pj : meta.at("poses")) {
    CameraPose pose;
    pose.fx = intr.at("fx");
    pose.fy = intr.at("fy");
    pose.cx = intr.at("cx");
    pose.cy = intr.at("cy");
    for (int i = 0; i < 16; ++i) pose.cam_to_world[static_cast<size_t>(i)] = pj.at(i);
    clip.poses.push_back(pose);
  }
  clip.validate();
  return clip;
}

void write_manifest(const std::string& path, const std::vector<Clip>& clips,
                    const std::vector<std::string>& clip_dirs) {
  check_arg(clips.size() == clip_dirs.size(), "write_manifest: size mismatch");
  nlohmann::json j;
  j["clips"] = nlohmann::json::array();
  for (size_t i = 0; i < clips.size(); ++i) {
    nlohmann::json e;
    e["id"] = clips[i].id;
    e["path"] = clip_dirs[i];
    e["frames"] = clips[i].frame_count();
    e["height"] = clips[i].height();
    e["width"] = clips[i].width();
    e["fps"] = clips[i].fps;
    j["clips"].push_back(e);
  }
  write_json(path, j);
}

std::vector<std::string> read_manifest_paths(const std::string& path) {
  const nlohmann::json j = read_json(path);
  std::vector<std::string> out;
  for (const auto& e : j.at("clips")) out.push_back(e.at("path"));
  return out;
}

void save_depth_sequence(const std::string& root, const std::string& clip_id, const Tensor& depth,
                         bool write_visualization) {
  check_arg(depth.ndim() == 4 && depth.dim(1) == 1, "save_depth_sequence: expects (T,1,H,W)");
  const fs::path dir = fs::path(root) / ("clip_" + clip_id);
  fs::create_directories(dir / "depth");
  if (write_visualization) fs::create_directories(dir / "vis");
  const int T = depth.dim(0);
  for (int k = 0; k < T; ++k) {
    const Tensor frame = take_frame(depth, k);
    write_pfm((dir / "depth" / frame_name(k, "pfm")).string(), frame);
    if (write_visualization) {
      // Per-frame min/max normalization for the 16-bit preview.
      double lo = frame.values()[0], hi = frame.values()[0];
      for (double v : frame.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double inv = hi > lo ? 1.0 / (hi - lo) : 0.0;
      Tensor vis = Tensor::zeros(frame.shape());
      for (size_t i = 0; i < frame.values().size(); ++i)
        vis.mutable_values()[i] = (frame.values()[i] - lo) * inv;
      write_png_gray16((dir / "vis" / frame_name(k, "png")).string(), vis);
    }
  }
  nlohmann::json meta;
  meta["frames"] = T;
  meta["space"] = "affine";  // predictions carry an arbitrary scale/shift
  write_json((dir / "meta.json").string(), meta);
}

Tensor load_depth_sequence(const std::string& clip_dir) {
  const fs::path dir(clip_dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir / "depth"))
    if (e.path().extension() == ".pfm") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no depth frames under " + clip_dir);
  std::vector<Tensor> frames;
  for (const auto& f : files) {
    Tensor d = read_pfm(f);
    frames.push_back(reshape(d, {1, 1, d.dim(0), d.dim(1)}));
  }
  return frames.size() == 1 ? frames[0] : concat(frames, 0);
}

}  // namespace vdepth
