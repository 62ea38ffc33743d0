#pragma once

#include <string>
#include <vector>

#include "vdepth/datapipe_types.hpp"

namespace vdepth {

// On-disk clip layout under <root>/clip_<id>/:
//   frames/%05d.png   8-bit RGB
//   depth/%05d.pfm    grayscale PFM, 32-bit little-endian floats, scale -1.0
//   meta.json         {fps, intrinsics{fx,fy,cx,cy}, poses:[16 doubles each,
//                      camera-to-world, row-major]}
std::string save_clip(const std::string& root, const Clip& clip);
Clip load_clip(const std::string& clip_dir);

// Dataset manifest: {"clips":[{"id","path","frames","height","width","fps"}]}
void write_manifest(const std::string& path, const std::vector<Clip>& clips,
                    const std::vector<std::string>& clip_dirs);
std::vector<std::string> read_manifest_paths(const std::string& path);

// Depth-only prediction directory: <root>/clip_<id>/depth/%05d.pfm plus a
// small meta.json describing the affine convention.
void save_depth_sequence(const std::string& root, const std::string& clip_id, const Tensor& depth,
                         bool write_visualization);
Tensor load_depth_sequence(const std::string& clip_dir);

}  // namespace vdepth
