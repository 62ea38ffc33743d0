#pragma once

#include <cstdint>
#include <string>

#include "vdepth/frame_positions.hpp"
#include "vdepth/param_store.hpp"
#include "vdepth/tensor.hpp"

namespace vdepth {

// How temporal attention encodes frame positions. Rotary encoding is the
// production path; the absolute sinusoidal variant exists as a negative
// control for the shift-invariance tests.
enum class PositionEncoding { kRotary, kAbsoluteSinusoidal };

struct DenoiserConfig {
  int base_channels = 32;
  int depth_levels = 2;       // number of spatial resolutions
  int temporal_heads = 2;
  int head_dim = 16;          // must be even
  double rope_theta = 10000.0;
  int latent_channels_in = 8;   // 4 noisy depth + 4 video; 16 for the interpolation variant
  int latent_channels_out = 4;
  int t_embed_dim = 32;
  PositionEncoding position_encoding = PositionEncoding::kRotary;

  void validate() const;
  bool is_interp() const { return latent_channels_in == 16; }

  std::string to_json() const;
  static DenoiserConfig from_json(const std::string& json);

  // Small configuration used by gradient-check style tests (< 50k params).
  static DenoiserConfig tiny();
};

// Rotates each coordinate pair (x_{2j}, x_{2j+1}) of the last axis by
// angle pos * theta^(-2j/head_dim), one position per frame (axis 0).
// Attention scores between rotated queries and keys then depend only on
// relative positions.
Tensor rope_rotate(const Tensor& vectors, const FramePositions& positions, double theta);

// Multi-head self-attention across the frame axis of (T, E, H, W) feature
// maps, independently at each spatial location, with the chosen position
// encoding applied to queries and keys. E = heads * head_dim. The raw
// position list is order-agnostic; sortedness is a contract of the
// FramePositions type above it.
Tensor temporal_attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                               const std::vector<int>& positions, int heads,
                               PositionEncoding encoding, double theta);

// Velocity network: per-frame spatial encoder/decoder with temporal
// attention blocks at every resolution. Both the base model (8 input
// channels) and the keyframe interpolation variant (16 input channels)
// share this structure.
struct Denoiser {
  DenoiserConfig config;
  ParamStore params;

  static Denoiser init(const DenoiserConfig& config, uint64_t seed);

  // phi_t, z_c: (T, 4, h, w). Output has phi_t's shape.
  Tensor forward(const Tensor& phi_t, const Tensor& z_c, double t,
                 const FramePositions& positions) const;

  // Interpolation variant: also conditioned on keyframe latents (zeros on
  // non-key frames) and a {0,1} mask replicated to 4 channels.
  Tensor interp_forward(const Tensor& phi_t, const Tensor& z_c, const Tensor& z_key,
                        const Tensor& m, double t, const FramePositions& positions) const;

  void save(const std::string& path) const;
  static Denoiser load(const std::string& path);
};

// Builds the interpolation variant from a trained base model: the input
// layer's weights are duplicated along the input-channel axis and halved,
// so the new model on duplicated inputs reproduces the base model exactly;
// all other parameters are copied.
Denoiser init_interp_from_base(const Denoiser& base);

// Per-frame temporal attention block (layer norm, qkv projections,
// attention core, output projection, residual). Exposed for direct tests.
Tensor temporal_attention(const Tensor& x, const FramePositions& positions,
                          const ParamStore& params, const std::string& prefix,
                          const DenoiserConfig& config);

}  // namespace vdepth
