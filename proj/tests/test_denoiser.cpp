#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "vdepth/autograd.hpp"
#include "vdepth/denoiser.hpp"
#include "vdepth/flow.hpp"
#include "vdepth/random.hpp"

using namespace vdepth;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double worst = 0.0;
  for (size_t i = 0; i < a.values().size(); ++i)
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

Tensor bernoulli(const std::vector<int>& shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.mutable_values()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return t;
}

}  // namespace

TEST_CASE("rope_rotate: position zero is the identity") {
  Rng rng(2);
  const Tensor x = Tensor::randn({1, 3, 8}, rng);
  const Tensor y = rope_rotate(x, FramePositions({0}), 10000.0);
  CHECK(x.values() == y.values());
}

TEST_CASE("rope_rotate: preserves the norm of every coordinate pair") {
  Rng rng(3);
  const Tensor x = Tensor::randn({4, 2, 8}, rng);
  const Tensor y = rope_rotate(x, FramePositions({0, 3, 17, 40}), 10000.0);
  for (size_t base = 0; base < x.values().size(); base += 2) {
    const double n0 = std::hypot(x.values()[base], x.values()[base + 1]);
    const double n1 = std::hypot(y.values()[base], y.values()[base + 1]);
    CHECK(n1 == doctest::Approx(n0).epsilon(1e-12));
  }
}

TEST_CASE("rope_rotate: dot products depend only on relative position") {
  Rng rng(5);
  const int D = 16;
  for (int trial = 0; trial < 25; ++trial) {
    const Tensor q = Tensor::randn({1, D}, rng);
    const Tensor k = Tensor::randn({1, D}, rng);
    const int i = static_cast<int>(rng.uniform_int(0, 500));
    const int j = static_cast<int>(rng.uniform_int(0, 500));
    const int s = static_cast<int>(rng.uniform_int(0, 2000));
    auto dot_at = [&](int pi, int pj) {
      const Tensor qr = rope_rotate(q, FramePositions({pi}), 10000.0);
      const Tensor kr = rope_rotate(k, FramePositions({pj}), 10000.0);
      double acc = 0.0;
      for (int d = 0; d < D; ++d)
        acc += qr.values()[static_cast<size_t>(d)] * kr.values()[static_cast<size_t>(d)];
      return acc;
    };
    CHECK(std::abs(dot_at(i, j) - dot_at(i + s, j + s)) < 1e-9);
  }
}

TEST_CASE("rope_rotate: odd head_dim rejected; gradient matches finite differences") {
  CHECK_THROWS(rope_rotate(Tensor::zeros({1, 7}), FramePositions({0}), 10000.0));

  Rng rng(7);
  const Tensor x0 = Tensor::randn({3, 2, 8}, rng);
  const Tensor probe = Tensor::randn({3, 2, 8}, rng);
  const FramePositions pos({0, 4, 11});
  Tensor x = Tensor::from_vector(x0.shape(), x0.values());
  x.set_requires_grad(true);
  autograd_backward(sum_all(mul(rope_rotate(x, pos, 10000.0), probe)));
  const Tensor fd = finite_difference_gradient(
      [&](const Tensor& t) {
        NoGradGuard no_grad;
        return sum_all(mul(rope_rotate(t, pos, 10000.0), probe)).scalar_value();
      },
      x0, 1e-6);
  for (size_t i = 0; i < fd.values().size(); ++i)
    CHECK(x.grad_values()[i] == doctest::Approx(fd.values()[i]).epsilon(1e-5));
}

namespace {

struct AttnFixture {
  DenoiserConfig cfg = DenoiserConfig::tiny();
  ParamStore params;
  AttnFixture() {
    Denoiser model = Denoiser::init(cfg, 77);
    for (const auto& [name, t] : model.params.all())
      if (name.rfind("enc0.attn.", 0) == 0)
        params.create(name, Tensor::from_vector(t.shape(), t.values()));
  }
  Tensor run(const Tensor& x, const FramePositions& pos) const {
    return temporal_attention(x, pos, params, "enc0.attn", cfg);
  }
};

}  // namespace

TEST_CASE("temporal_attention: single frame reduces to value+output projection") {
  AttnFixture fix;
  Rng rng(7);
  const Tensor x = Tensor::randn({1, fix.cfg.base_channels, 4, 4}, rng);
  const Tensor got = fix.run(x, FramePositions({5}));

  // With T=1 the attention weight is exactly 1, so the block is
  // x + O(V(LN(x))) regardless of q and k.
  const Tensor h = layer_norm_channels(x, fix.params.get("enc0.attn.ln.g"),
                                       fix.params.get("enc0.attn.ln.b"));
  const Tensor v = conv2d(h, fix.params.get("enc0.attn.v.w"), fix.params.get("enc0.attn.v.b"));
  const Tensor want =
      add(x, conv2d(v, fix.params.get("enc0.attn.o.w"), fix.params.get("enc0.attn.o.b")));
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("attention core: permuting frames with their positions permutes the output") {
  const DenoiserConfig cfg = DenoiserConfig::tiny();
  Rng rng(9);
  const int T = 5, E = cfg.temporal_heads * cfg.head_dim;
  const Tensor q = Tensor::randn({T, E, 3, 3}, rng);
  const Tensor k = Tensor::randn({T, E, 3, 3}, rng);
  const Tensor v = Tensor::randn({T, E, 3, 3}, rng);
  const std::vector<int> pos = {1, 4, 6, 13, 20};
  const Tensor out =
      temporal_attention_core(q, k, v, pos, cfg.temporal_heads, PositionEncoding::kRotary, 1e4);

  const std::vector<int> perm = {3, 0, 4, 1, 2};
  auto permute_frames = [&](const Tensor& t) {
    std::vector<Tensor> parts;
    for (int p : perm) parts.push_back(slice(t, 0, p, 1));
    return concat(parts, 0);
  };
  std::vector<int> pos_perm;
  for (int p : perm) pos_perm.push_back(pos[static_cast<size_t>(p)]);
  const Tensor out_perm = temporal_attention_core(permute_frames(q), permute_frames(k),
                                                  permute_frames(v), pos_perm,
                                                  cfg.temporal_heads, PositionEncoding::kRotary, 1e4);
  CHECK(max_abs_diff(out_perm, permute_frames(out)) < 1e-12);
}

TEST_CASE("temporal_attention: invariant to a global position shift") {
  AttnFixture fix;
  Rng rng(11);
  const Tensor x = Tensor::randn({5, fix.cfg.base_channels, 4, 4}, rng);
  const FramePositions pos({0, 2, 7, 8, 20});
  const Tensor base = fix.run(x, pos);
  for (int s : {1, 13, 500}) {
    const Tensor shifted = fix.run(x, pos.shifted(s));
    CHECK(max_abs_diff(base, shifted) < 1e-9);
  }
}

TEST_CASE("temporal_attention: absolute encoding is shift-variant (negative control)") {
  AttnFixture fix;
  fix.cfg.position_encoding = PositionEncoding::kAbsoluteSinusoidal;
  Rng rng(13);
  const Tensor x = Tensor::randn({4, fix.cfg.base_channels, 4, 4}, rng);
  const FramePositions pos({0, 1, 5, 9});
  const Tensor a = fix.run(x, pos);
  const Tensor b = fix.run(x, pos.shifted(7));
  CHECK(max_abs_diff(a, b) > 1e-6);
}

TEST_CASE("temporal_attention: position/frame mismatch rejected") {
  AttnFixture fix;
  const Tensor x = Tensor::zeros({3, fix.cfg.base_channels, 4, 4});
  CHECK_THROWS(fix.run(x, FramePositions({0, 1})));
}

TEST_CASE("forward: output shape equals the noisy latent shape; deterministic") {
  const Denoiser model = Denoiser::init(DenoiserConfig::tiny(), 5);
  Rng rng(17);
  const Tensor phi = Tensor::randn({3, 4, 8, 8}, rng);
  const Tensor z_c = Tensor::randn({3, 4, 8, 8}, rng);
  const FramePositions pos({0, 4, 9});
  const Tensor a = model.forward(phi, z_c, 0.3, pos);
  CHECK(a.shape() == phi.shape());
  const Tensor b = model.forward(phi, z_c, 0.3, pos);
  CHECK(a.values() == b.values());
  CHECK_THROWS(model.forward(phi, Tensor::zeros({2, 4, 8, 8}), 0.3, pos));
}

TEST_CASE("forward: invariant to a global position shift") {
  const Denoiser model = Denoiser::init(DenoiserConfig::tiny(), 23);
  Rng rng(19);
  const Tensor phi = Tensor::randn({4, 4, 8, 8}, rng);
  const Tensor z_c = Tensor::randn({4, 4, 8, 8}, rng);
  const FramePositions pos({1, 2, 8, 15});
  const Tensor a = model.forward(phi, z_c, 0.6, pos);
  const Tensor b = model.forward(phi, z_c, 0.6, pos.shifted(37));
  CHECK(max_abs_diff(a, b) < 1e-9);
}

TEST_CASE("forward: accepts any strictly increasing position list") {
  const Denoiser model = Denoiser::init(DenoiserConfig::tiny(), 29);
  Rng rng(23);
  for (int t : {1, 2, 6}) {
    const Tensor phi = Tensor::randn({t, 4, 8, 8}, rng);
    const Tensor z_c = Tensor::randn({t, 4, 8, 8}, rng);
    std::vector<int> idx;
    int cur = 0;
    for (int i = 0; i < t; ++i) {
      cur += 1 + static_cast<int>(rng.uniform_int(0, 9));
      idx.push_back(cur);
    }
    CHECK(model.forward(phi, z_c, 0.5, FramePositions(idx)).shape() == phi.shape());
  }
}

TEST_CASE("forward: every parameter receives a nonzero gradient") {
  const Denoiser model = Denoiser::init(DenoiserConfig::tiny(), 31);
  Rng rng(29);
  const Tensor z_d = Tensor::randn({2, 4, 8, 8}, rng);
  const Tensor z_c = Tensor::randn({2, 4, 8, 8}, rng);
  const Tensor eps = Tensor::randn({2, 4, 8, 8}, rng);
  const VelocityFn fn = [&model](const Tensor& phi, const Tensor& cond, double t,
                                 const FramePositions& pos) {
    return model.forward(phi, cond, t, pos);
  };
  const Tensor loss = fm_loss(fn, z_d, z_c, 0.4, eps, FramePositions::iota(2));
  const auto grads = backward_gradients(loss, model.params);
  for (const auto& [name, g] : grads) {
    double mx = 0.0;
    for (double v : g.values()) mx = std::max(mx, std::abs(v));
    INFO("parameter ", name);
    CHECK(mx > 0.0);
  }
}

TEST_CASE("fm_loss gradient through forward matches finite differences (spot check)") {
  DenoiserConfig cfg = DenoiserConfig::tiny();
  cfg.base_channels = 6;
  cfg.head_dim = 4;
  cfg.t_embed_dim = 8;
  Denoiser model = Denoiser::init(cfg, 41);
  Rng rng(37);
  const Tensor z_d = Tensor::randn({2, 4, 4, 4}, rng);
  const Tensor z_c = Tensor::randn({2, 4, 4, 4}, rng);
  const Tensor eps = Tensor::randn({2, 4, 4, 4}, rng);
  const FramePositions pos({0, 3});
  const VelocityFn fn = [&model](const Tensor& phi, const Tensor& cond, double t,
                                 const FramePositions& p) {
    return model.forward(phi, cond, t, p);
  };
  const Tensor loss = fm_loss(fn, z_d, z_c, 0.35, eps, pos);
  const auto grads = backward_gradients(loss, model.params);

  Rng pick(43);
  const std::vector<std::string> names = {"stem.w", "enc1.attn.q.w", "mid.res.conv2.w",
                                          "head.w", "enc0.res.temb.w"};
  for (const std::string& name : names) {
    Tensor& param = model.params.get(name);
    for (int probe = 0; probe < 2; ++probe) {
      const int64_t i = pick.uniform_int(0, param.numel() - 1);
      const double original = param.values()[static_cast<size_t>(i)];
      const double h = 1e-5;
      auto eval = [&](double x) {
        NoGradGuard no_grad;
        param.mutable_values()[static_cast<size_t>(i)] = x;
        const double out = fm_loss(fn, z_d, z_c, 0.35, eps, pos).scalar_value();
        param.mutable_values()[static_cast<size_t>(i)] = original;
        return out;
      };
      const double fd = (eval(original + h) - eval(original - h)) / (2 * h);
      const double got = grads.at(name).values()[static_cast<size_t>(i)];
      const double denom = std::max({std::abs(fd), std::abs(got), 1e-8});
      INFO("param ", name, " coord ", i);
      CHECK(std::abs(fd - got) / denom < 1e-4);
    }
  }
}

TEST_CASE("init_interp_from_base: doubled input channels, halved weights") {
  const Denoiser base = Denoiser::init(DenoiserConfig::tiny(), 47);
  const Denoiser interp = init_interp_from_base(base);
  CHECK(interp.config.latent_channels_in == 16);
  const Tensor& bw = base.params.get("stem.w");
  const Tensor& iw = interp.params.get("stem.w");
  REQUIRE(iw.dim(1) == 2 * bw.dim(1));
  // Summing each duplicated channel pair recovers the base weights exactly.
  const int F = bw.dim(0), C = bw.dim(1);
  const int64_t k = static_cast<int64_t>(bw.dim(2)) * bw.dim(3);
  for (int co = 0; co < F; ++co)
    for (int c = 0; c < C; ++c)
      for (int64_t i = 0; i < k; ++i) {
        const double a =
            iw.values()[static_cast<size_t>((static_cast<int64_t>(co) * 2 * C + c) * k + i)];
        const double b =
            iw.values()[static_cast<size_t>((static_cast<int64_t>(co) * 2 * C + C + c) * k + i)];
        const double w =
            bw.values()[static_cast<size_t>((static_cast<int64_t>(co) * C + c) * k + i)];
        CHECK(a + b == w);  // 0.5w + 0.5w is exact
      }
  CHECK_THROWS(init_interp_from_base(interp));
}

TEST_CASE("init_interp_from_base: duplicated inputs reproduce the base model") {
  const Denoiser base = Denoiser::init(DenoiserConfig::tiny(), 53);
  const Denoiser interp = init_interp_from_base(base);
  Rng rng(59);
  const Tensor phi = Tensor::randn({3, 4, 8, 8}, rng);
  const Tensor z_c = bernoulli({3, 4, 8, 8}, rng);  // doubles as a valid mask
  const FramePositions pos({0, 2, 5});
  const Tensor want = base.forward(phi, z_c, 0.45, pos);
  const Tensor got = interp.interp_forward(phi, z_c, phi, z_c, 0.45, pos);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("interp_forward: zero keys and mask are plain extra channels; bad mask rejected") {
  const Denoiser base = Denoiser::init(DenoiserConfig::tiny(), 61);
  const Denoiser interp = init_interp_from_base(base);
  Rng rng(67);
  const Tensor phi = Tensor::randn({2, 4, 8, 8}, rng);
  const Tensor z_c = Tensor::randn({2, 4, 8, 8}, rng);
  const Tensor zeros = Tensor::zeros({2, 4, 8, 8});
  const FramePositions pos({0, 1});
  const Tensor out = interp.interp_forward(phi, z_c, zeros, zeros, 0.2, pos);
  CHECK(out.shape() == phi.shape());
  CHECK_THROWS(interp.interp_forward(phi, z_c, zeros, Tensor::full({2, 4, 8, 8}, 0.5), 0.2, pos));
  CHECK_THROWS(base.interp_forward(phi, z_c, zeros, zeros, 0.2, pos));
}

TEST_CASE("checkpoint: model save/load round-trips config and weights") {
  const Denoiser model = Denoiser::init(DenoiserConfig::tiny(), 71);
  const std::string path = "denoiser_ckpt_test.bin";
  model.save(path);
  const Denoiser loaded = Denoiser::load(path);
  CHECK(loaded.config.base_channels == model.config.base_channels);
  CHECK(loaded.config.latent_channels_in == model.config.latent_channels_in);
  for (const auto& [name, t] : model.params.all())
    CHECK(loaded.params.get(name).values() == t.values());
  std::remove(path.c_str());
}

TEST_CASE("tiny config stays under 50k parameters") {
  const Denoiser model = Denoiser::init(DenoiserConfig::tiny(), 73);
  CHECK(model.params.parameter_count() < 50000);
  CHECK(model.params.parameter_count() > 5000);
}
