#include "vdepth/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

#include <png.h>

namespace vdepth {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& msg, const std::string& path) {
  throw std::runtime_error(msg + ": " + path);
}

uint16_t quantize16(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<uint16_t>(std::lround(c * 65535.0));
}

uint8_t quantize8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void write_png_rgb8(const std::string& path, const Tensor& image) {
  check_arg(image.ndim() == 3 && image.dim(0) == 3, "write_png_rgb8: expects (3,H,W)");
  const int H = image.dim(1), W = image.dim(2);
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("cannot open PNG for writing", path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("libpng write failure", path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const auto& v = image.values();
  const int64_t plane = static_cast<int64_t>(H) * W;
  std::vector<uint8_t> row(static_cast<size_t>(W) * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int64_t i = static_cast<int64_t>(y) * W + x;
      row[static_cast<size_t>(x) * 3 + 0] = quantize8(v[static_cast<size_t>(i)]);
      row[static_cast<size_t>(x) * 3 + 1] = quantize8(v[static_cast<size_t>(plane + i)]);
      row[static_cast<size_t>(x) * 3 + 2] = quantize8(v[static_cast<size_t>(2 * plane + i)]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor read_png_rgb8(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("cannot open PNG", path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("libpng read failure", path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const int W = static_cast<int>(png_get_image_width(png, info));
  const int H = static_cast<int>(png_get_image_height(png, info));
  // Normalize whatever we get to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<size_t>(W) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("unexpected PNG row layout", path);
  }

  std::vector<uint8_t> row(static_cast<size_t>(W) * 3);
  std::vector<double> out(static_cast<size_t>(3) * H * W);
  const int64_t plane = static_cast<int64_t>(H) * W;
  for (int y = 0; y < H; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < W; ++x) {
      const int64_t i = static_cast<int64_t>(y) * W + x;
      out[static_cast<size_t>(i)] = row[static_cast<size_t>(x) * 3 + 0] / 255.0;
      out[static_cast<size_t>(plane + i)] = row[static_cast<size_t>(x) * 3 + 1] / 255.0;
      out[static_cast<size_t>(2 * plane + i)] = row[static_cast<size_t>(x) * 3 + 2] / 255.0;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return Tensor::from_vector({3, H, W}, std::move(out));
}

void write_png_gray16(const std::string& path, const Tensor& image) {
  check_arg(image.ndim() == 2, "write_png_gray16: expects (H,W)");
  const int H = image.dim(0), W = image.dim(1);
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("cannot open PNG for writing", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("libpng write failure", path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const auto& v = image.values();
  std::vector<uint8_t> row(static_cast<size_t>(W) * 2);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const uint16_t q = quantize16(v[static_cast<size_t>(y) * W + x]);
      row[static_cast<size_t>(x) * 2 + 0] = static_cast<uint8_t>(q >> 8);  // PNG is big-endian
      row[static_cast<size_t>(x) * 2 + 1] = static_cast<uint8_t>(q & 0xFF);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pfm(const std::string& path, const Tensor& image) {
  check_arg(image.ndim() == 2, "write_pfm: expects (H,W)");
  const int H = image.dim(0), W = image.dim(1);
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open PFM for writing", path);
  os << "Pf\n" << W << " " << H << "\n-1.0\n";
  const auto& v = image.values();
  std::vector<float> row(static_cast<size_t>(W));
  for (int y = H - 1; y >= 0; --y) {  // bottom-up
    for (int x = 0; x < W; ++x) row[static_cast<size_t>(x)] = static_cast<float>(v[static_cast<size_t>(y) * W + x]);
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(W * sizeof(float)));
  }
  if (!os) fail("short write on PFM", path);
}

Tensor read_pfm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open PFM", path);
  std::string magic;
  is >> magic;
  if (magic != "Pf") fail("not a grayscale PFM", path);
  int W = 0, H = 0;
  double scl = 0.0;
  is >> W >> H >> scl;
  if (W <= 0 || H <= 0) fail("bad PFM header", path);
  if (scl >= 0.0) fail("big-endian PFM not supported", path);
  is.get();  // the single whitespace after the scale line
  std::vector<double> out(static_cast<size_t>(H) * W);
  std::vector<float> row(static_cast<size_t>(W));
  for (int y = H - 1; y >= 0; --y) {
    is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(W * sizeof(float)));
    if (!is) fail("truncated PFM", path);
    for (int x = 0; x < W; ++x) out[static_cast<size_t>(y) * W + x] = row[static_cast<size_t>(x)];
  }
  return Tensor::from_vector({H, W}, std::move(out));
}

}  // namespace vdepth
