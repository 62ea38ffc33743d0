#include "vdepth/denoiser.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "vdepth/autograd.hpp"
#include "vdepth/random.hpp"

namespace vdepth {

void DenoiserConfig::validate() const {
  check_arg(base_channels > 0, "DenoiserConfig: base_channels must be positive");
  check_arg(depth_levels >= 1 && depth_levels <= 4, "DenoiserConfig: depth_levels out of range");
  check_arg(temporal_heads > 0, "DenoiserConfig: temporal_heads must be positive");
  check_arg(head_dim > 0 && head_dim % 2 == 0, "DenoiserConfig: head_dim must be even and positive");
  check_arg(rope_theta > 0.0, "DenoiserConfig: rope_theta must be positive");
  check_arg(latent_channels_in == 8 || latent_channels_in == 16,
            "DenoiserConfig: latent_channels_in must be 8 (base) or 16 (interpolation)");
  check_arg(latent_channels_out == 4, "DenoiserConfig: latent_channels_out must be 4");
  check_arg(t_embed_dim >= 2 && t_embed_dim % 2 == 0, "DenoiserConfig: t_embed_dim must be even");
}

std::string DenoiserConfig::to_json() const {
  nlohmann::json j;
  j["base_channels"] = base_channels;
  j["depth_levels"] = depth_levels;
  j["temporal_heads"] = temporal_heads;
  j["head_dim"] = head_dim;
  j["rope_theta"] = rope_theta;
  j["latent_channels_in"] = latent_channels_in;
  j["latent_channels_out"] = latent_channels_out;
  j["t_embed_dim"] = t_embed_dim;
  j["position_encoding"] = position_encoding == PositionEncoding::kRotary ? "rotary" : "absolute";
  return j.dump();
}

DenoiserConfig DenoiserConfig::from_json(const std::string& json) {
  const nlohmann::json j = nlohmann::json::parse(json);
  DenoiserConfig c;
  c.base_channels = j.at("base_channels");
  c.depth_levels = j.at("depth_levels");
  c.temporal_heads = j.at("temporal_heads");
  c.head_dim = j.at("head_dim");
  c.rope_theta = j.at("rope_theta");
  c.latent_channels_in = j.at("latent_channels_in");
  c.latent_channels_out = j.at("latent_channels_out");
  c.t_embed_dim = j.at("t_embed_dim");
  c.position_encoding = j.value("position_encoding", "rotary") == std::string("absolute")
                            ? PositionEncoding::kAbsoluteSinusoidal
                            : PositionEncoding::kRotary;
  c.validate();
  return c;
}

DenoiserConfig DenoiserConfig::tiny() {
  DenoiserConfig c;
  c.base_channels = 8;
  c.depth_levels = 2;
  c.temporal_heads = 2;
  c.head_dim = 8;
  c.t_embed_dim = 16;
  return c;
}

// ---------------------------------------------------------------------------
// rotary encoding

namespace {

std::vector<double> inverse_frequencies(int head_dim, double theta) {
  std::vector<double> inv(static_cast<size_t>(head_dim / 2));
  for (int j = 0; j < head_dim / 2; ++j)
    inv[static_cast<size_t>(j)] = std::pow(theta, -2.0 * static_cast<double>(j) / head_dim);
  return inv;
}

// Sinusoidal embedding of a frame position, the absolute-encoding control.
void absolute_embedding(double pos, const std::vector<double>& inv_freq, double* out) {
  for (size_t j = 0; j < inv_freq.size(); ++j) {
    const double a = pos * inv_freq[j];
    out[2 * j] = std::sin(a);
    out[2 * j + 1] = std::cos(a);
  }
}

}  // namespace

Tensor rope_rotate(const Tensor& vectors, const FramePositions& positions, double theta) {
  check_arg(vectors.ndim() >= 2, "rope_rotate: expects (T, ..., head_dim)");
  const int T = vectors.dim(0);
  const int D = vectors.dim(vectors.ndim() - 1);
  check_arg(D % 2 == 0, "rope_rotate: head_dim must be even");
  check_arg(positions.size() == T, "rope_rotate: one position per frame");
  const int64_t rows_per_frame = vectors.numel() / T / D;
  const auto inv_freq = inverse_frequencies(D, theta);

  const auto& xv = vectors.values();
  std::vector<double> out(xv.size());
  for (int t = 0; t < T; ++t) {
    const double pos = static_cast<double>(positions.indices[static_cast<size_t>(t)]);
    for (int64_t r = 0; r < rows_per_frame; ++r) {
      const int64_t base = (static_cast<int64_t>(t) * rows_per_frame + r) * D;
      for (int j = 0; j < D / 2; ++j) {
        const double a = pos * inv_freq[static_cast<size_t>(j)];
        const double c = std::cos(a), s = std::sin(a);
        const double x0 = xv[static_cast<size_t>(base) + 2 * j];
        const double x1 = xv[static_cast<size_t>(base) + 2 * j + 1];
        out[static_cast<size_t>(base) + 2 * j] = x0 * c - x1 * s;
        out[static_cast<size_t>(base) + 2 * j + 1] = x0 * s + x1 * c;
      }
    }
  }
  return make_op(vectors.shape(), std::move(out), {vectors},
                 [vectors, positions, theta, T, D, rows_per_frame](const TensorImpl& o) {
    if (!vectors.requires_grad() || !vectors.impl().grad) return;
    double* gx = vectors.impl().grad->data();
    const double* g = o.grad->data();
    const auto inv_freq2 = inverse_frequencies(D, theta);
    for (int t = 0; t < T; ++t) {
      const double pos = static_cast<double>(positions.indices[static_cast<size_t>(t)]);
      for (int64_t r = 0; r < rows_per_frame; ++r) {
        const int64_t base = (static_cast<int64_t>(t) * rows_per_frame + r) * D;
        for (int j = 0; j < D / 2; ++j) {
          const double a = pos * inv_freq2[static_cast<size_t>(j)];
          const double c = std::cos(a), s = std::sin(a);
          const double g0 = g[base + 2 * j];
          const double g1 = g[base + 2 * j + 1];
          // Transpose of the rotation: rotate the gradient by -a.
          gx[base + 2 * j] += g0 * c + g1 * s;
          gx[base + 2 * j + 1] += -g0 * s + g1 * c;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// fused temporal attention

namespace {

struct AttentionDims {
  int T, E, H, W, heads, hd;
  int64_t plane;         // H*W
  int64_t frame_stride;  // E*H*W
};

// Gathers the (T, hd) block for one head at one pixel.
void gather_block(const double* src, const AttentionDims& d, int head, int64_t pixel,
                  std::vector<double>& dst) {
  for (int t = 0; t < d.T; ++t)
    for (int j = 0; j < d.hd; ++j)
      dst[static_cast<size_t>(t) * d.hd + j] =
          src[t * d.frame_stride + (static_cast<int64_t>(head) * d.hd + j) * d.plane + pixel];
}

void scatter_block_add(double* dst, const AttentionDims& d, int head, int64_t pixel,
                       const std::vector<double>& src) {
  for (int t = 0; t < d.T; ++t)
    for (int j = 0; j < d.hd; ++j)
      dst[t * d.frame_stride + (static_cast<int64_t>(head) * d.hd + j) * d.plane + pixel] +=
          src[static_cast<size_t>(t) * d.hd + j];
}

void encode_qk(std::vector<double>& q, std::vector<double>& k, const AttentionDims& d,
               const std::vector<int>& positions, const std::vector<double>& inv_freq,
               PositionEncoding enc) {
  if (enc == PositionEncoding::kRotary) {
    for (int t = 0; t < d.T; ++t) {
      const double pos = static_cast<double>(positions[static_cast<size_t>(t)]);
      for (int j = 0; j < d.hd / 2; ++j) {
        const double a = pos * inv_freq[static_cast<size_t>(j)];
        const double c = std::cos(a), s = std::sin(a);
        for (auto* vec : {&q, &k}) {
          double& x0 = (*vec)[static_cast<size_t>(t) * d.hd + 2 * j];
          double& x1 = (*vec)[static_cast<size_t>(t) * d.hd + 2 * j + 1];
          const double r0 = x0 * c - x1 * s;
          const double r1 = x0 * s + x1 * c;
          x0 = r0;
          x1 = r1;
        }
      }
    }
  } else {
    std::vector<double> emb(static_cast<size_t>(d.hd));
    for (int t = 0; t < d.T; ++t) {
      absolute_embedding(static_cast<double>(positions[static_cast<size_t>(t)]), inv_freq, emb.data());
      for (int j = 0; j < d.hd; ++j) {
        q[static_cast<size_t>(t) * d.hd + j] += emb[static_cast<size_t>(j)];
        k[static_cast<size_t>(t) * d.hd + j] += emb[static_cast<size_t>(j)];
      }
    }
  }
}

void attention_probs(const std::vector<double>& q, const std::vector<double>& k,
                     const AttentionDims& d, std::vector<double>& probs) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.hd));
  for (int t = 0; t < d.T; ++t) {
    double* row = probs.data() + static_cast<size_t>(t) * d.T;
    double mx = -1e300;
    for (int u = 0; u < d.T; ++u) {
      double dot = 0.0;
      for (int j = 0; j < d.hd; ++j)
        dot += q[static_cast<size_t>(t) * d.hd + j] * k[static_cast<size_t>(u) * d.hd + j];
      row[u] = dot * scale;
      mx = std::max(mx, row[u]);
    }
    double sum = 0.0;
    for (int u = 0; u < d.T; ++u) {
      row[u] = std::exp(row[u] - mx);
      sum += row[u];
    }
    for (int u = 0; u < d.T; ++u) row[u] /= sum;
  }
}

}  // namespace

Tensor temporal_attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                               const std::vector<int>& positions, int heads,
                               PositionEncoding encoding, double theta) {
  check_arg(q.ndim() == 4, "temporal_attention_core: expects (T,E,H,W)");
  check_arg(q.shape() == k.shape() && q.shape() == v.shape(),
            "temporal_attention_core: q/k/v shapes differ");
  AttentionDims d;
  d.T = q.dim(0);
  d.E = q.dim(1);
  d.H = q.dim(2);
  d.W = q.dim(3);
  check_arg(heads > 0 && d.E % heads == 0, "temporal_attention_core: E must divide by heads");
  d.heads = heads;
  d.hd = d.E / heads;
  check_arg(d.hd % 2 == 0, "temporal_attention_core: head_dim must be even");
  if (static_cast<int>(positions.size()) != d.T)
    throw std::invalid_argument("temporal_attention_core: position/frame count mismatch");
  d.plane = static_cast<int64_t>(d.H) * d.W;
  d.frame_stride = static_cast<int64_t>(d.E) * d.plane;

  const auto inv_freq = inverse_frequencies(d.hd, theta);
  const double* Q = q.values().data();
  const double* K = k.values().data();
  const double* V = v.values().data();
  std::vector<double> out(q.values().size(), 0.0);

  std::vector<double> qb(static_cast<size_t>(d.T) * d.hd), kb(qb.size()), vb(qb.size()), ob(qb.size());
  std::vector<double> probs(static_cast<size_t>(d.T) * d.T);
  for (int h = 0; h < heads; ++h)
    for (int64_t p = 0; p < d.plane; ++p) {
      gather_block(Q, d, h, p, qb);
      gather_block(K, d, h, p, kb);
      gather_block(V, d, h, p, vb);
      encode_qk(qb, kb, d, positions, inv_freq, encoding);
      attention_probs(qb, kb, d, probs);
      for (int t = 0; t < d.T; ++t)
        for (int j = 0; j < d.hd; ++j) {
          double acc = 0.0;
          for (int u = 0; u < d.T; ++u)
            acc += probs[static_cast<size_t>(t) * d.T + u] * vb[static_cast<size_t>(u) * d.hd + j];
          ob[static_cast<size_t>(t) * d.hd + j] = acc;
        }
      scatter_block_add(out.data(), d, h, p, ob);
    }

  return make_op(q.shape(), std::move(out), {q, k, v},
                 [q, k, v, positions, encoding, theta, d, heads](const TensorImpl& o) {
    const auto inv_freq2 = inverse_frequencies(d.hd, theta);
    const double* Q2 = q.values().data();
    const double* K2 = k.values().data();
    const double* V2 = v.values().data();
    const double* G = o.grad->data();
    double* gq = (q.requires_grad() && q.impl().grad) ? q.impl().grad->data() : nullptr;
    double* gk = (k.requires_grad() && k.impl().grad) ? k.impl().grad->data() : nullptr;
    double* gv = (v.requires_grad() && v.impl().grad) ? v.impl().grad->data() : nullptr;
    if (!gq && !gk && !gv) return;

    const double scale = 1.0 / std::sqrt(static_cast<double>(d.hd));
    std::vector<double> qb(static_cast<size_t>(d.T) * d.hd), kb(qb.size()), vb(qb.size()), gb(qb.size());
    std::vector<double> dqb(qb.size()), dkb(qb.size()), dvb(qb.size());
    std::vector<double> probs(static_cast<size_t>(d.T) * d.T), dprobs(probs.size());
    for (int h = 0; h < heads; ++h)
      for (int64_t p = 0; p < d.plane; ++p) {
        gather_block(Q2, d, h, p, qb);
        gather_block(K2, d, h, p, kb);
        gather_block(V2, d, h, p, vb);
        gather_block(G, d, h, p, gb);
        encode_qk(qb, kb, d, positions, inv_freq2, encoding);
        attention_probs(qb, kb, d, probs);

        std::fill(dqb.begin(), dqb.end(), 0.0);
        std::fill(dkb.begin(), dkb.end(), 0.0);
        std::fill(dvb.begin(), dvb.end(), 0.0);
        // dV = A^T dOut; dA = dOut V^T
        for (int t = 0; t < d.T; ++t)
          for (int u = 0; u < d.T; ++u) {
            const double a = probs[static_cast<size_t>(t) * d.T + u];
            double dot = 0.0;
            for (int j = 0; j < d.hd; ++j) {
              dvb[static_cast<size_t>(u) * d.hd + j] += a * gb[static_cast<size_t>(t) * d.hd + j];
              dot += gb[static_cast<size_t>(t) * d.hd + j] * vb[static_cast<size_t>(u) * d.hd + j];
            }
            dprobs[static_cast<size_t>(t) * d.T + u] = dot;
          }
        // softmax backward, then dQ = dS K, dK = dS^T Q (scaled)
        for (int t = 0; t < d.T; ++t) {
          double row_dot = 0.0;
          for (int u = 0; u < d.T; ++u)
            row_dot += dprobs[static_cast<size_t>(t) * d.T + u] * probs[static_cast<size_t>(t) * d.T + u];
          for (int u = 0; u < d.T; ++u) {
            const double ds =
                probs[static_cast<size_t>(t) * d.T + u] *
                (dprobs[static_cast<size_t>(t) * d.T + u] - row_dot) * scale;
            for (int j = 0; j < d.hd; ++j) {
              dqb[static_cast<size_t>(t) * d.hd + j] += ds * kb[static_cast<size_t>(u) * d.hd + j];
              dkb[static_cast<size_t>(u) * d.hd + j] += ds * qb[static_cast<size_t>(t) * d.hd + j];
            }
          }
        }
        // Undo the position encoding on the q/k gradients.
        if (encoding == PositionEncoding::kRotary) {
          for (int t = 0; t < d.T; ++t) {
            const double pos = static_cast<double>(positions[static_cast<size_t>(t)]);
            for (int j = 0; j < d.hd / 2; ++j) {
              const double a = pos * inv_freq2[static_cast<size_t>(j)];
              const double c = std::cos(a), s = std::sin(a);
              for (auto* vec : {&dqb, &dkb}) {
                double& g0 = (*vec)[static_cast<size_t>(t) * d.hd + 2 * j];
                double& g1 = (*vec)[static_cast<size_t>(t) * d.hd + 2 * j + 1];
                const double r0 = g0 * c + g1 * s;
                const double r1 = -g0 * s + g1 * c;
                g0 = r0;
                g1 = r1;
              }
            }
          }
        }
        if (gq) scatter_block_add(gq, d, h, p, dqb);
        if (gk) scatter_block_add(gk, d, h, p, dkb);
        if (gv) scatter_block_add(gv, d, h, p, dvb);
      }
  });
}

// ---------------------------------------------------------------------------
// network blocks

namespace {

Tensor t_embedding(double t, int dim) {
  const int half = dim / 2;
  std::vector<double> v(static_cast<size_t>(dim));
  for (int j = 0; j < half; ++j) {
    const double freq =
        (half == 1) ? 1.0 : std::pow(10000.0, static_cast<double>(j) / static_cast<double>(half - 1));
    v[static_cast<size_t>(2 * j)] = std::sin(t * freq);
    v[static_cast<size_t>(2 * j + 1)] = std::cos(t * freq);
  }
  return Tensor::from_vector({1, dim}, std::move(v));
}

Tensor res_block(const Tensor& x, const Tensor& temb_feat, const ParamStore& params,
                 const std::string& prefix) {
  const int C = x.dim(1);
  Tensor h = layer_norm_channels(x, params.get(prefix + ".ln1.g"), params.get(prefix + ".ln1.b"));
  h = conv2d(silu(h), params.get(prefix + ".conv1.w"), params.get(prefix + ".conv1.b"));
  Tensor tb = add(matmul(temb_feat, params.get(prefix + ".temb.w")), params.get(prefix + ".temb.b"));
  h = add_channel_bias(h, reshape(tb, {C}));
  h = layer_norm_channels(h, params.get(prefix + ".ln2.g"), params.get(prefix + ".ln2.b"));
  h = conv2d(silu(h), params.get(prefix + ".conv2.w"), params.get(prefix + ".conv2.b"));
  return add(x, h);
}

void create_conv(ParamStore& params, Rng& rng, const std::string& name, int out_ch, int in_ch,
                 int ksize, double gain = 1.0) {
  const double std_dev = gain * std::sqrt(2.0 / (static_cast<double>(in_ch) * ksize * ksize));
  Tensor w = Tensor::randn({out_ch, in_ch, ksize, ksize}, rng);
  for (auto& x : w.mutable_values()) x *= std_dev;
  params.create(name + ".w", std::move(w));
  params.create(name + ".b", Tensor::zeros({out_ch}));
}

void create_layer_norm(ParamStore& params, const std::string& name, int ch) {
  params.create(name + ".g", Tensor::full({ch}, 1.0));
  params.create(name + ".b", Tensor::zeros({ch}));
}

void create_res_block(ParamStore& params, Rng& rng, const std::string& prefix, int ch, int temb_dim) {
  create_layer_norm(params, prefix + ".ln1", ch);
  create_conv(params, rng, prefix + ".conv1", ch, ch, 3);
  Tensor tw = Tensor::randn({temb_dim, ch}, rng);
  for (auto& x : tw.mutable_values()) x *= std::sqrt(1.0 / temb_dim);
  params.create(prefix + ".temb.w", std::move(tw));
  params.create(prefix + ".temb.b", Tensor::zeros({1, ch}));
  create_layer_norm(params, prefix + ".ln2", ch);
  create_conv(params, rng, prefix + ".conv2", ch, ch, 3);
}

void create_attention(ParamStore& params, Rng& rng, const std::string& prefix, int ch, int embed) {
  create_layer_norm(params, prefix + ".ln", ch);
  create_conv(params, rng, prefix + ".q", embed, ch, 1);
  create_conv(params, rng, prefix + ".k", embed, ch, 1);
  create_conv(params, rng, prefix + ".v", embed, ch, 1);
  create_conv(params, rng, prefix + ".o", ch, embed, 1);
}

}  // namespace

Tensor temporal_attention(const Tensor& x, const FramePositions& positions,
                          const ParamStore& params, const std::string& prefix,
                          const DenoiserConfig& config) {
  check_arg(x.ndim() == 4, "temporal_attention: expects (T,C,H,W)");
  if (positions.size() != x.dim(0))
    throw std::invalid_argument("temporal_attention: position/frame count mismatch");
  Tensor h = layer_norm_channels(x, params.get(prefix + ".ln.g"), params.get(prefix + ".ln.b"));
  Tensor q = conv2d(h, params.get(prefix + ".q.w"), params.get(prefix + ".q.b"));
  Tensor k = conv2d(h, params.get(prefix + ".k.w"), params.get(prefix + ".k.b"));
  Tensor v = conv2d(h, params.get(prefix + ".v.w"), params.get(prefix + ".v.b"));
  Tensor core = temporal_attention_core(q, k, v, positions.indices, config.temporal_heads,
                                        config.position_encoding, config.rope_theta);
  Tensor o = conv2d(core, params.get(prefix + ".o.w"), params.get(prefix + ".o.b"));
  return add(x, o);
}

Denoiser Denoiser::init(const DenoiserConfig& config, uint64_t seed) {
  config.validate();
  Denoiser model;
  model.config = config;
  Rng rng(seed);
  ParamStore& p = model.params;
  const int F = config.base_channels;
  const int E = config.temporal_heads * config.head_dim;
  const int Et = config.t_embed_dim;
  const int L = config.depth_levels;

  create_conv(p, rng, "stem", F, config.latent_channels_in, 3);
  Tensor w1 = Tensor::randn({Et, Et}, rng);
  for (auto& x : w1.mutable_values()) x *= std::sqrt(1.0 / Et);
  p.create("temb.w1", std::move(w1));
  p.create("temb.b1", Tensor::zeros({1, Et}));

  for (int l = 0; l < L; ++l) {
    const int ch = F << l;
    create_res_block(p, rng, "enc" + std::to_string(l) + ".res", ch, Et);
    create_attention(p, rng, "enc" + std::to_string(l) + ".attn", ch, E);
    if (l < L - 1) create_conv(p, rng, "down" + std::to_string(l), F << (l + 1), ch, 3);
  }
  create_res_block(p, rng, "mid.res", F << (L - 1), Et);
  for (int l = L - 2; l >= 0; --l) {
    const int ch = F << l;
    create_conv(p, rng, "up" + std::to_string(l), ch, F << (l + 1), 3);
    create_conv(p, rng, "fuse" + std::to_string(l), ch, 2 * ch, 3);
    create_res_block(p, rng, "dec" + std::to_string(l) + ".res", ch, Et);
    create_attention(p, rng, "dec" + std::to_string(l) + ".attn", ch, E);
  }
  create_layer_norm(p, "head.ln", F);
  create_conv(p, rng, "head", config.latent_channels_out, F, 3, 0.05);
  return model;
}

namespace {

Tensor run_network(const Denoiser& model, const Tensor& x_in, double t,
                   const FramePositions& positions) {
  const DenoiserConfig& cfg = model.config;
  const ParamStore& p = model.params;
  const int L = cfg.depth_levels;
  const int down_factor = 1 << (L - 1);
  check_arg(x_in.dim(2) % down_factor == 0 && x_in.dim(3) % down_factor == 0,
            "denoiser: spatial size must divide by 2^(depth_levels-1)");

  Tensor temb = t_embedding(t, cfg.t_embed_dim);
  temb = silu(add(matmul(temb, p.get("temb.w1")), p.get("temb.b1")));

  Tensor x = conv2d(x_in, p.get("stem.w"), p.get("stem.b"));
  std::vector<Tensor> skips;
  for (int l = 0; l < L; ++l) {
    const std::string enc = "enc" + std::to_string(l);
    x = res_block(x, temb, p, enc + ".res");
    x = temporal_attention(x, positions, p, enc + ".attn", cfg);
    if (l < L - 1) {
      skips.push_back(x);
      x = avg_pool2(x);
      const std::string down = "down" + std::to_string(l);
      x = conv2d(x, p.get(down + ".w"), p.get(down + ".b"));
    }
  }
  x = res_block(x, temb, p, "mid.res");
  for (int l = L - 2; l >= 0; --l) {
    const std::string up = "up" + std::to_string(l);
    x = upsample_nearest2(x);
    x = conv2d(x, p.get(up + ".w"), p.get(up + ".b"));
    x = concat({x, skips[static_cast<size_t>(l)]}, 1);
    const std::string fuse = "fuse" + std::to_string(l);
    x = conv2d(x, p.get(fuse + ".w"), p.get(fuse + ".b"));
    const std::string dec = "dec" + std::to_string(l);
    x = res_block(x, temb, p, dec + ".res");
    x = temporal_attention(x, positions, p, dec + ".attn", cfg);
  }
  x = layer_norm_channels(x, p.get("head.ln.g"), p.get("head.ln.b"));
  x = silu(x);
  return conv2d(x, p.get("head.w"), p.get("head.b"));
}

void check_latents(const Tensor& a, const Tensor& b, const char* what) {
  check_arg(a.ndim() == 4 && b.ndim() == 4, std::string("denoiser: ") + what + " must be 4-D");
  check_arg(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
            std::string("denoiser: ") + what + " frame/spatial shape mismatch");
}

}  // namespace

Tensor Denoiser::forward(const Tensor& phi_t, const Tensor& z_c, double t,
                         const FramePositions& positions) const {
  check_arg(config.latent_channels_in == 8, "forward: model is the interpolation variant");
  check_latents(phi_t, z_c, "phi_t/z_c");
  check_arg(phi_t.dim(1) == 4 && z_c.dim(1) == 4, "forward: latents must have 4 channels");
  if (positions.size() != phi_t.dim(0))
    throw std::invalid_argument("forward: position/frame count mismatch");
  return run_network(*this, concat({phi_t, z_c}, 1), t, positions);
}

Tensor Denoiser::interp_forward(const Tensor& phi_t, const Tensor& z_c, const Tensor& z_key,
                                const Tensor& m, double t, const FramePositions& positions) const {
  check_arg(config.latent_channels_in == 16, "interp_forward: model is the base variant");
  check_latents(phi_t, z_c, "phi_t/z_c");
  check_latents(phi_t, z_key, "phi_t/z_key");
  check_latents(phi_t, m, "phi_t/mask");
  check_arg(m.dim(1) == 4, "interp_forward: mask must be replicated to 4 channels");
  for (double v : m.values())
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("interp_forward: mask values must be 0 or 1");
  if (positions.size() != phi_t.dim(0))
    throw std::invalid_argument("interp_forward: position/frame count mismatch");
  return run_network(*this, concat({phi_t, z_c, z_key, m}, 1), t, positions);
}

Denoiser init_interp_from_base(const Denoiser& base) {
  if (base.config.latent_channels_in != 8)
    throw std::invalid_argument("init_interp_from_base: base model must have 8 input channels");
  Denoiser interp;
  interp.config = base.config;
  interp.config.latent_channels_in = 16;

  for (const auto& [name, tensor] : base.params.all()) {
    if (name == "stem.w") {
      const int F = tensor.dim(0), Cin = tensor.dim(1), kh = tensor.dim(2), kw = tensor.dim(3);
      Tensor w = Tensor::zeros({F, 2 * Cin, kh, kw});
      const auto& src = tensor.values();
      auto& dst = w.mutable_values();
      const int64_t ksz = static_cast<int64_t>(kh) * kw;
      for (int co = 0; co < F; ++co)
        for (int c = 0; c < 2 * Cin; ++c) {
          const int64_t s = (static_cast<int64_t>(co) * Cin + (c % Cin)) * ksz;
          const int64_t dpos = (static_cast<int64_t>(co) * 2 * Cin + c) * ksz;
          for (int64_t i = 0; i < ksz; ++i)
            dst[static_cast<size_t>(dpos + i)] = 0.5 * src[static_cast<size_t>(s + i)];
        }
      interp.params.create(name, std::move(w));
    } else {
      interp.params.create(name, Tensor::from_vector(tensor.shape(), tensor.values()));
    }
  }
  return interp;
}

void Denoiser::save(const std::string& path) const { params.save(path, config.to_json()); }

Denoiser Denoiser::load(const std::string& path) {
  Denoiser model;
  std::string meta;
  model.params = ParamStore::load(path, &meta);
  if (meta.empty()) throw std::runtime_error("checkpoint has no model configuration: " + path);
  model.config = DenoiserConfig::from_json(meta);
  return model;
}

}  // namespace vdepth
