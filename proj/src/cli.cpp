#include "vdepth/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "json.hpp"

#include "vdepth/clip_io.hpp"
#include "vdepth/datapipe.hpp"
#include "vdepth/denoiser.hpp"
#include "vdepth/depthspace.hpp"
#include "vdepth/flow.hpp"
#include "vdepth/image_io.hpp"
#include "vdepth/longvideo.hpp"
#include "vdepth/metrics.hpp"
#include "vdepth/packing.hpp"
#include "vdepth/param_store.hpp"
#include "vdepth/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vdepth {

namespace {

void log_error(const std::string& command, const std::string& message) {
  json j;
  j["level"] = "error";
  j["command"] = command;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

void log_warning(const std::string& command, const std::string& message) {
  json j;
  j["level"] = "warning";
  j["command"] = command;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

void echo_effective_config(const RunConfig& config) {
  fs::create_directories(config.out);
  write_text((fs::path(config.out) / "effective_config.json").string(), config.to_json() + "\n");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

// ---------------------------------------------------------------------------
// config

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["out"] = out;
  j["generate"] = {{"count", generate.count},   {"frames", generate.frames},
                   {"height", generate.height}, {"width", generate.width},
                   {"fps", generate.fps},       {"near", generate.near},
                   {"far", generate.far},       {"objects", generate.objects},
                   {"motion", generate.motion}};
  json buckets = json::array();
  for (const auto& [h, w] : train.buckets) buckets.push_back({h, w});
  j["train"] = {{"data", train.data},
                {"steps", train.steps},
                {"lr", train.lr},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"eps", train.eps},
                {"weight_decay", train.weight_decay},
                {"budget", train.budget},
                {"k_min", train.k_min},
                {"k_max", train.k_max},
                {"buckets", buckets},
                {"base_channels", train.base_channels},
                {"depth_levels", train.depth_levels},
                {"heads", train.heads},
                {"head_dim", train.head_dim},
                {"t_embed_dim", train.t_embed_dim},
                {"rope_theta", train.rope_theta},
                {"interp", train.interp},
                {"base_checkpoint", train.base_checkpoint},
                {"window_min", train.window_min},
                {"window_max", train.window_max},
                {"log_every", train.log_every}};
  j["infer"] = {{"checkpoint", infer.checkpoint},
                {"interp_checkpoint", infer.interp_checkpoint},
                {"input", infer.input},
                {"steps", infer.steps},
                {"ensemble", infer.ensemble},
                {"max_frames_per_pass", infer.max_frames_per_pass},
                {"vis", infer.vis}};
  j["eval"] = {{"pred", eval.pred}, {"data", eval.data}};
  j["filter"] = {{"data", filter.data},
                 {"checkpoint", filter.checkpoint},
                 {"sim_threshold", filter.sim_threshold},
                 {"metric_threshold", filter.metric_threshold},
                 {"steps", filter.steps}};
  return j.dump(2);
}

void RunConfig::merge_json(const std::string& text) {
  const json j = json::parse(text);
  maybe(j, "seed", seed);
  maybe(j, "out", out);
  if (j.contains("generate")) {
    const json& g = j["generate"];
    maybe(g, "count", generate.count);
    maybe(g, "frames", generate.frames);
    maybe(g, "height", generate.height);
    maybe(g, "width", generate.width);
    maybe(g, "fps", generate.fps);
    maybe(g, "near", generate.near);
    maybe(g, "far", generate.far);
    maybe(g, "objects", generate.objects);
    maybe(g, "motion", generate.motion);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    maybe(t, "data", train.data);
    maybe(t, "steps", train.steps);
    maybe(t, "lr", train.lr);
    maybe(t, "beta1", train.beta1);
    maybe(t, "beta2", train.beta2);
    maybe(t, "eps", train.eps);
    maybe(t, "weight_decay", train.weight_decay);
    maybe(t, "budget", train.budget);
    maybe(t, "k_min", train.k_min);
    maybe(t, "k_max", train.k_max);
    if (t.contains("buckets")) {
      train.buckets.clear();
      for (const auto& b : t["buckets"]) train.buckets.emplace_back(b.at(0), b.at(1));
    }
    maybe(t, "base_channels", train.base_channels);
    maybe(t, "depth_levels", train.depth_levels);
    maybe(t, "heads", train.heads);
    maybe(t, "head_dim", train.head_dim);
    maybe(t, "t_embed_dim", train.t_embed_dim);
    maybe(t, "rope_theta", train.rope_theta);
    maybe(t, "interp", train.interp);
    maybe(t, "base_checkpoint", train.base_checkpoint);
    maybe(t, "window_min", train.window_min);
    maybe(t, "window_max", train.window_max);
    maybe(t, "log_every", train.log_every);
  }
  if (j.contains("infer")) {
    const json& i = j["infer"];
    maybe(i, "checkpoint", infer.checkpoint);
    maybe(i, "interp_checkpoint", infer.interp_checkpoint);
    maybe(i, "input", infer.input);
    maybe(i, "steps", infer.steps);
    maybe(i, "ensemble", infer.ensemble);
    maybe(i, "max_frames_per_pass", infer.max_frames_per_pass);
    maybe(i, "vis", infer.vis);
  }
  if (j.contains("eval")) {
    maybe(j["eval"], "pred", eval.pred);
    maybe(j["eval"], "data", eval.data);
  }
  if (j.contains("filter")) {
    const json& f = j["filter"];
    maybe(f, "data", filter.data);
    maybe(f, "checkpoint", filter.checkpoint);
    maybe(f, "sim_threshold", filter.sim_threshold);
    maybe(f, "metric_threshold", filter.metric_threshold);
    maybe(f, "steps", filter.steps);
  }
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config file: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  RunConfig config;
  config.merge_json(text);
  return config;
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const RunConfig& config) {
  try {
    const GenerateOptions& g = config.generate;
    check_arg(g.count >= 0, "generate: count must be nonnegative");
    echo_effective_config(config);

    std::vector<Clip> clips;
    std::vector<std::string> dirs;
    for (int i = 0; i < g.count; ++i) {
      SceneConfig scene;
      scene.frames = g.frames;
      scene.height = g.height;
      scene.width = g.width;
      scene.fps = g.fps;
      scene.near = g.near;
      scene.far = g.far;
      scene.object_count = g.objects;
      if (g.motion == "static")
        scene.camera_motion = CameraMotion::kStatic;
      else if (g.motion == "translate")
        scene.camera_motion = CameraMotion::kTranslate;
      else if (g.motion == "orbit")
        scene.camera_motion = CameraMotion::kOrbit;
      else if (g.motion == "mixed")
        scene.camera_motion = static_cast<CameraMotion>(i % 3 == 0 ? 1 : (i % 3 == 1 ? 2 : 0));
      else
        throw std::invalid_argument("generate: unknown motion " + g.motion);

      Clip clip = generate_clip(scene, derive_seed(config.seed, static_cast<uint64_t>(i)));
      dirs.push_back(save_clip(config.out, clip));
      clips.push_back(std::move(clip));
    }
    write_manifest((fs::path(config.out) / "manifest.json").string(), clips, dirs);
    return 0;
  } catch (const std::exception& e) {
    log_error("generate", e.what());
    return 1;
  }
}

// ---------------------------------------------------------------------------
// train

namespace {

struct PreparedClip {
  Clip clip;
  NormalizationParams norm;
};

struct PreparedGroup {
  std::vector<Clip> clips;              // bucketed clips fed to pack_batch
  std::vector<NormalizationParams> norms;  // aligned with clips
};

std::map<std::pair<int, int>, PreparedGroup> prepare_dataset(const std::string& data_dir,
                                                             const TrainOptions& opt) {
  const std::string manifest = (fs::path(data_dir) / "manifest.json").string();
  if (!fs::exists(manifest)) throw std::runtime_error("no manifest at " + manifest);
  std::vector<Clip> clips;
  for (const std::string& path : read_manifest_paths(manifest)) clips.push_back(load_clip(path));
  if (clips.empty()) throw std::runtime_error("dataset is empty");

  auto groups = bucket_clips(clips, opt.buckets);
  std::map<std::pair<int, int>, PreparedGroup> prepared;
  for (auto& [res, group] : groups) {
    PreparedGroup pg;
    for (Clip& clip : group) {
      auto [normalized, params] = normalize_depth(clip.depth);
      (void)normalized;  // normalization is re-applied per fragment
      pg.norms.push_back(params);
      pg.clips.push_back(std::move(clip));
    }
    prepared.emplace(res, std::move(pg));
  }
  return prepared;
}

FragmentLatents fragment_latents(const PackedBatch::Fragment& frag,
                                 const NormalizationParams& norm) {
  FragmentLatents out;
  out.z_d = encode_latent(normalize_depth_with(frag.depth, norm)).frames;
  out.z_c = encode_latent(rgb_to_luma(frag.frames)).frames;
  out.positions = frag.positions;
  return out;
}

DenoiserConfig model_config_from(const TrainOptions& opt) {
  DenoiserConfig cfg;
  cfg.base_channels = opt.base_channels;
  cfg.depth_levels = opt.depth_levels;
  cfg.temporal_heads = opt.heads;
  cfg.head_dim = opt.head_dim;
  cfg.t_embed_dim = opt.t_embed_dim;
  cfg.rope_theta = opt.rope_theta;
  cfg.validate();
  return cfg;
}

}  // namespace

int cmd_train(const RunConfig& config) {
  try {
    const TrainOptions& opt = config.train;
    check_arg(!opt.data.empty(), "train: no dataset directory given");
    check_arg(opt.steps >= 1, "train: steps must be >= 1");
    check_arg(opt.lr > 0.0 && opt.beta1 >= 0.0 && opt.beta1 < 1.0 && opt.beta2 >= 0.0 &&
                  opt.beta2 < 1.0 && opt.eps > 0.0 && opt.weight_decay >= 0.0,
              "train: bad optimizer settings");
    check_arg(opt.budget > 0, "train: budget must be positive");
    check_arg(opt.k_min >= 1 && opt.k_min <= opt.k_max, "train: bad K range");
    check_arg(opt.window_min >= 2 && opt.window_min <= opt.window_max,
              "train: bad interpolation window range");
    if (opt.interp && opt.base_checkpoint.empty())
      throw std::invalid_argument("train: --interp requires a base checkpoint");
    echo_effective_config(config);

    auto groups = prepare_dataset(opt.data, opt);

    Denoiser model;
    if (opt.interp) {
      model = init_interp_from_base(Denoiser::load(opt.base_checkpoint));
    } else {
      model = Denoiser::init(model_config_from(opt), derive_seed(config.seed, 17));
    }

    std::vector<std::pair<int, int>> group_keys;
    std::vector<int64_t> group_sizes;
    for (const auto& [res, pg] : groups) {
      group_keys.push_back(res);
      group_sizes.push_back(static_cast<int64_t>(pg.clips.size()));
    }

    std::ofstream log_os((fs::path(config.out) / "train_log.jsonl").string());
    if (!log_os) throw std::runtime_error("cannot open training log for writing");

    double best_smoothed = 1e300, smoothed = 0.0;
    std::map<std::string, std::vector<double>> best_values;
    const std::string final_path = (fs::path(config.out) / "model_final.ckpt").string();
    const std::string best_path = (fs::path(config.out) / "model_best.ckpt").string();

    for (int step = 0; step < opt.steps; ++step) {
      Rng rng(derive_seed(config.seed, 1000 + static_cast<uint64_t>(step)));

      // Pick a bucket (weighted by clip count), then a shared K.
      int64_t total = 0;
      for (int64_t s : group_sizes) total += s;
      int64_t pick = rng.uniform_int(0, total - 1);
      size_t gi = 0;
      while (pick >= group_sizes[gi]) {
        pick -= group_sizes[gi];
        ++gi;
      }
      const PreparedGroup& group = groups.at(group_keys[gi]);

      int min_frames = group.clips.front().frame_count();
      for (const Clip& c : group.clips) min_frames = std::min(min_frames, c.frame_count());

      Tensor loss;
      int k_used = 0, batch_used = 0;
      if (!opt.interp) {
        const int k_hi = std::min(opt.k_max, min_frames);
        const int k_lo = std::min(opt.k_min, k_hi);
        k_used = static_cast<int>(rng.uniform_int(k_lo, k_hi));
        PackedBatch batch = pack_batch(group.clips, k_used, opt.budget,
                                       derive_seed(config.seed, 5000 + static_cast<uint64_t>(step)));
        batch_used = batch.batch_size;
        std::vector<FragmentLatents> fragments;
        std::vector<double> ts;
        std::vector<Tensor> noises;
        for (const auto& frag : batch.clips) {
          FragmentLatents fl =
              fragment_latents(frag, group.norms[static_cast<size_t>(frag.clip_index)]);
          ts.push_back(rng.uniform());
          noises.push_back(Tensor::randn(fl.z_d.shape(), rng));
          fragments.push_back(std::move(fl));
        }
        const VelocityFn fn = [&model](const Tensor& phi, const Tensor& z_c, double t,
                                       const FramePositions& pos) {
          return model.forward(phi, z_c, t, pos);
        };
        loss = batch_fm_loss(fn, fragments, ts, noises);
      } else {
        // Interpolation fine-tuning: contiguous windows with ground-truth
        // key latents at both ends and the 4-channel key mask.
        const int w_hi = std::min(opt.window_max, min_frames);
        const int w_lo = std::max(2, std::min(opt.window_min, w_hi));
        k_used = static_cast<int>(rng.uniform_int(w_lo, w_hi));
        const int64_t per = static_cast<int64_t>(k_used) * group.clips.front().height() *
                            group.clips.front().width();
        batch_used = static_cast<int>(std::max<int64_t>(1, opt.budget / per));
        Tensor total_loss;
        for (int b = 0; b < batch_used; ++b) {
          const int ci = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(group.clips.size()) - 1));
          const Clip& clip = group.clips[static_cast<size_t>(ci)];
          const int start = static_cast<int>(rng.uniform_int(0, clip.frame_count() - k_used));
          PackedBatch::Fragment frag;
          frag.frames = slice(clip.frames, 0, start, k_used);
          frag.depth = slice(clip.depth, 0, start, k_used);
          std::vector<int> idx(static_cast<size_t>(k_used));
          for (int i = 0; i < k_used; ++i) idx[static_cast<size_t>(i)] = start + i;
          frag.positions = FramePositions(idx);
          FragmentLatents fl = fragment_latents(frag, group.norms[static_cast<size_t>(ci)]);

          const int h = fl.z_d.dim(2), w = fl.z_d.dim(3);
          Tensor z_key = Tensor::zeros({k_used, 4, h, w});
          Tensor mask = Tensor::zeros({k_used, 4, h, w});
          const int64_t fsz = static_cast<int64_t>(4) * h * w;
          for (int end : {0, k_used - 1}) {
            std::copy(fl.z_d.values().begin() + end * fsz, fl.z_d.values().begin() + (end + 1) * fsz,
                      z_key.mutable_values().begin() + end * fsz);
            std::fill(mask.mutable_values().begin() + end * fsz,
                      mask.mutable_values().begin() + (end + 1) * fsz, 1.0);
          }
          const VelocityFn fn = [&model, &z_key, &mask](const Tensor& phi, const Tensor& z_c,
                                                        double t, const FramePositions& pos) {
            return model.interp_forward(phi, z_c, z_key, mask, t, pos);
          };
          const Tensor l =
              fm_loss(fn, fl.z_d, fl.z_c, rng.uniform(), Tensor::randn(fl.z_d.shape(), rng),
                      fl.positions);
          total_loss = (b == 0) ? l : add(total_loss, l);
        }
        loss = scale(total_loss, 1.0 / batch_used);
      }

      const auto grads = backward_gradients(loss, model.params);
      model.params.adamw_step(grads, opt.lr, opt.beta1, opt.beta2, opt.eps, opt.weight_decay);

      const double loss_value = loss.scalar_value();
      smoothed = (step == 0) ? loss_value : 0.9 * smoothed + 0.1 * loss_value;
      if (step >= 10 && smoothed < best_smoothed) {
        best_smoothed = smoothed;
        best_values.clear();
        for (const auto& [name, tensor] : model.params.all()) best_values[name] = tensor.values();
      }

      json line;
      line["step"] = step;
      line["loss"] = loss_value;
      line["lr"] = opt.lr;
      line["K"] = k_used;
      line["batch_size"] = batch_used;
      log_os << line.dump() << "\n";
      if (opt.log_every > 0 && step % opt.log_every == 0)
        std::cout << line.dump() << std::endl;
    }
    log_os.flush();

    model.save(final_path);
    if (!best_values.empty()) {
      Denoiser snapshot;
      snapshot.config = model.config;
      for (const auto& [name, values] : best_values)
        snapshot.params.create(name, Tensor::from_vector(model.params.get(name).shape(),
                                                         std::vector<double>(values)));
      snapshot.save(best_path);
    } else {
      model.save(best_path);
    }
    return 0;
  } catch (const std::exception& e) {
    log_error("train", e.what());
    return 1;
  }
}

// ---------------------------------------------------------------------------
// infer

namespace {

Clip load_inference_input(const std::string& input) {
  const fs::path p(input);
  if (fs::is_directory(p)) {
    if (fs::exists(p / "depth")) return load_clip(input);
    // Frames-only directory: synthesize unit depth and identity poses.
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(p / "frames"))
      if (e.path().extension() == ".png") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no frames under " + input);
    std::vector<Tensor> frames;
    for (const auto& f : files) {
      Tensor rgb = read_png_rgb8(f);
      frames.push_back(reshape(rgb, {1, 3, rgb.dim(1), rgb.dim(2)}));
    }
    Clip clip;
    clip.id = p.filename().string();
    clip.frames = frames.size() == 1 ? frames[0] : concat(frames, 0);
    clip.depth = Tensor::full({clip.frames.dim(0), 1, clip.frames.dim(2), clip.frames.dim(3)}, 1.0);
    clip.poses.assign(static_cast<size_t>(clip.frames.dim(0)),
                      CameraPose::identity(1.2 * clip.frames.dim(3), 1.2 * clip.frames.dim(3),
                                           clip.frames.dim(3) / 2.0, clip.frames.dim(2) / 2.0));
    return clip;
  }
  // Single image: a one-frame clip.
  Tensor rgb = read_png_rgb8(input);
  Clip clip;
  clip.id = p.stem().string();
  clip.frames = reshape(rgb, {1, 3, rgb.dim(1), rgb.dim(2)});
  clip.depth = Tensor::full({1, 1, rgb.dim(1), rgb.dim(2)}, 1.0);
  clip.poses = {CameraPose::identity(1.2 * rgb.dim(2), 1.2 * rgb.dim(2), rgb.dim(2) / 2.0,
                                     rgb.dim(1) / 2.0)};
  return clip;
}

}  // namespace

int cmd_infer(const RunConfig& config) {
  try {
    const InferOptions& opt = config.infer;
    check_arg(!opt.checkpoint.empty(), "infer: no checkpoint given");
    check_arg(!opt.input.empty(), "infer: no input given");
    check_arg(opt.steps >= 1, "infer: steps must be >= 1");
    check_arg(opt.ensemble >= 1, "infer: ensemble must be >= 1");
    if (!fs::exists(opt.checkpoint))
      throw std::runtime_error("missing checkpoint: " + opt.checkpoint);
    echo_effective_config(config);

    const Denoiser base = Denoiser::load(opt.checkpoint);
    Denoiser interp;
    const Clip clip = load_inference_input(opt.input);
    const bool needs_interp = clip.frame_count() > opt.max_frames_per_pass;
    if (needs_interp) {
      if (opt.interp_checkpoint.empty())
        throw std::runtime_error("infer: clip exceeds max_frames_per_pass and no interpolation checkpoint was given");
      interp = Denoiser::load(opt.interp_checkpoint);
    }

    InferenceSettings settings;
    settings.steps = opt.steps;
    settings.max_frames_per_pass = opt.max_frames_per_pass;

    std::vector<Tensor> members;
    for (int e = 0; e < opt.ensemble; ++e) {
      const uint64_t seed = derive_seed(config.seed, 7000 + static_cast<uint64_t>(e));
      members.push_back(needs_interp ? infer_long(clip, base, interp, settings, seed)
                                     : infer_single_pass(clip, base, settings.steps, seed));
    }
    const Tensor depth = ensemble_merge(members);
    save_depth_sequence(config.out, clip.id, depth, opt.vis);
    return 0;
  } catch (const std::exception& e) {
    log_error("infer", e.what());
    return 1;
  }
}

// ---------------------------------------------------------------------------
// eval

namespace {

struct PairMetrics {
  double absrel_value = 0.0;
  double delta1_value = 0.0;
  double tae_value = 0.0;
  double valid_fraction = 0.0;
};

PairMetrics evaluate_pair(const Tensor& pred_seq, const Clip& gt) {
  check_arg(pred_seq.shape() == gt.depth.shape(), "eval: prediction/ground-truth shape mismatch");
  const AlignmentResult a = align_scale_shift(pred_seq, gt.depth, Tensor());
  Tensor aligned = apply_affine(pred_seq, a.scale, a.shift);
  // delta1 is defined on positive depth; floor stray nonpositive pixels far
  // below the ratio threshold so they count as misses.
  const double floor_value = 1e-6 * percentile(gt.depth.values(), 50.0);
  for (double& v : aligned.mutable_values()) v = std::max(v, floor_value);

  PairMetrics m;
  m.absrel_value = absrel(aligned, gt.depth, Tensor());
  m.delta1_value = delta1(aligned, gt.depth, Tensor());
  m.tae_value = gt.frame_count() >= 2 ? tae(aligned, gt.poses) : 0.0;
  m.valid_fraction = 1.0;
  return m;
}

}  // namespace

int cmd_eval(const RunConfig& config) {
  try {
    const EvalOptions& opt = config.eval;
    check_arg(!opt.pred.empty() && !opt.data.empty(), "eval: need pred and data directories");
    echo_effective_config(config);

    std::map<std::string, std::string> gt_dirs, pred_dirs;
    for (const auto& e : fs::directory_iterator(opt.data))
      if (e.is_directory() && e.path().filename().string().rfind("clip_", 0) == 0)
        gt_dirs[e.path().filename().string().substr(5)] = e.path().string();
    for (const auto& e : fs::directory_iterator(opt.pred))
      if (e.is_directory() && e.path().filename().string().rfind("clip_", 0) == 0)
        pred_dirs[e.path().filename().string().substr(5)] = e.path().string();

    json out;
    out["clips"] = json::array();
    double sum_absrel = 0.0, sum_delta1 = 0.0, sum_tae = 0.0;
    int evaluated = 0;
    for (const auto& [id, pdir] : pred_dirs) {
      auto git = gt_dirs.find(id);
      if (git == gt_dirs.end()) {
        log_warning("eval", "prediction without ground truth, skipped: " + id);
        continue;
      }
      const Clip gt = load_clip(git->second);
      const Tensor pred = load_depth_sequence(pdir);
      PairMetrics m;
      try {
        m = evaluate_pair(pred, gt);
      } catch (const std::exception& ex) {
        log_warning("eval", "clip " + id + " skipped: " + ex.what());
        continue;
      }
      json e;
      e["clip_id"] = id;
      e["absrel"] = m.absrel_value;
      e["delta1"] = m.delta1_value;
      e["tae"] = m.tae_value;
      e["valid_fraction"] = m.valid_fraction;
      out["clips"].push_back(e);
      sum_absrel += m.absrel_value;
      sum_delta1 += m.delta1_value;
      sum_tae += m.tae_value;
      ++evaluated;
    }
    for (const auto& [id, gdir] : gt_dirs)
      if (!pred_dirs.count(id)) log_warning("eval", "ground truth without prediction: " + id);

    if (evaluated == 0) {
      log_error("eval", "no prediction/ground-truth pairs could be evaluated");
      return 1;
    }
    out["aggregate"] = {{"absrel", sum_absrel / evaluated},
                        {"delta1", sum_delta1 / evaluated},
                        {"tae", sum_tae / evaluated},
                        {"clips", evaluated}};
    write_text((fs::path(config.out) / "metrics.json").string(), out.dump(2) + "\n");
    std::cout << out["aggregate"].dump() << std::endl;
    return 0;
  } catch (const std::exception& e) {
    log_error("eval", e.what());
    return 1;
  }
}

// ---------------------------------------------------------------------------
// filter

int cmd_filter(const RunConfig& config) {
  try {
    const FilterOptions& opt = config.filter;
    check_arg(!opt.data.empty(), "filter: no dataset given");
    check_arg(!opt.checkpoint.empty(), "filter: no checkpoint given");
    echo_effective_config(config);

    const std::string manifest = (fs::path(opt.data) / "manifest.json").string();
    if (!fs::exists(manifest)) throw std::runtime_error("no manifest at " + manifest);
    std::vector<Clip> clips;
    for (const std::string& path : read_manifest_paths(manifest)) clips.push_back(load_clip(path));

    const Denoiser model = Denoiser::load(opt.checkpoint);
    const int steps = opt.steps;
    const FrameDepthFn depth_fn = [&model, steps](const Tensor& rgb, uint64_t seed) {
      Clip one;
      one.id = "frame";
      one.frames = reshape(rgb, {1, 3, rgb.dim(1), rgb.dim(2)});
      one.depth = Tensor::full({1, 1, rgb.dim(1), rgb.dim(2)}, 1.0);
      one.poses = {CameraPose::identity(1.0, 1.0, 0.0, 0.0)};
      const Tensor d = infer_single_pass(one, model, steps, seed);
      return reshape(d, {rgb.dim(1), rgb.dim(2)});
    };

    const FilterResult result =
        filter_clips(clips, depth_fn, opt.sim_threshold, opt.metric_threshold, config.seed);

    auto manifest_of = [](const std::vector<Clip>& segs) {
      json j = json::array();
      for (const Clip& c : segs)
        j.push_back({{"segment_id", c.id}, {"frames", c.frame_count()}});
      return j;
    };
    write_text((fs::path(config.out) / "kept.json").string(), manifest_of(result.kept).dump(2) + "\n");
    write_text((fs::path(config.out) / "removed.json").string(),
               manifest_of(result.removed).dump(2) + "\n");
    json report = json::array();
    for (const SegmentReport& r : result.report)
      report.push_back({{"segment_id", r.segment_id},
                        {"median_delta1", r.median_delta1},
                        {"median_similarity", r.median_similarity},
                        {"kept", r.kept},
                        {"scored_frames", r.scored_frames}});
    write_text((fs::path(config.out) / "filter_report.json").string(), report.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    log_error("filter", e.what());
    return 1;
  }
}

}  // namespace vdepth
