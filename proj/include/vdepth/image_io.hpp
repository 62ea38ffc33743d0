#pragma once

#include <string>

#include "vdepth/tensor.hpp"

namespace vdepth {

// 8-bit RGB PNG. Values are clamped to [0,1] and quantized on write.
void write_png_rgb8(const std::string& path, const Tensor& image /* (3,H,W) in [0,1] */);
Tensor read_png_rgb8(const std::string& path);  // (3,H,W) in [0,1]

// 16-bit grayscale PNG, for depth visualizations.
void write_png_gray16(const std::string& path, const Tensor& image /* (H,W) in [0,1] */);

// Portable float map, grayscale ("Pf"), 32-bit floats, scale header -1.0
// (little-endian), rows stored bottom-up.
void write_pfm(const std::string& path, const Tensor& image /* (H,W) */);
Tensor read_pfm(const std::string& path);  // (H,W)

}  // namespace vdepth
