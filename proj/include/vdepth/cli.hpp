#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vdepth {

// Effective run configuration: defaults, overridden by a JSON config file,
// overridden by command-line flags. The effective config is echoed into
// every output directory.
struct GenerateOptions {
  int count = 8;
  int frames = 8;
  int height = 16;
  int width = 16;
  double fps = 8.0;
  double near = 2.0;
  double far = 10.0;
  int objects = 3;
  std::string motion = "mixed";  // static | translate | orbit | mixed
};

struct TrainOptions {
  std::string data;
  int steps = 400;
  double lr = 6.4e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  int64_t budget = 8192;  // elements (K*H*W) per batch
  int k_min = 1;
  int k_max = 6;
  std::vector<std::pair<int, int>> buckets = {{16, 16}};
  int base_channels = 16;
  int depth_levels = 2;
  int heads = 2;
  int head_dim = 16;
  int t_embed_dim = 32;
  double rope_theta = 10000.0;
  bool interp = false;
  std::string base_checkpoint;
  int window_min = 3;  // interpolation fine-tuning window lengths
  int window_max = 6;
  int log_every = 25;
};

struct InferOptions {
  std::string checkpoint;
  std::string interp_checkpoint;
  std::string input;  // clip directory or a single PNG image
  int steps = 3;
  int ensemble = 1;
  int max_frames_per_pass = 32;
  bool vis = true;
};

struct EvalOptions {
  std::string pred;
  std::string data;
};

struct FilterOptions {
  std::string data;
  std::string checkpoint;
  double sim_threshold = 0.5;
  double metric_threshold = 0.5;
  int steps = 1;
};

struct RunConfig {
  uint64_t seed = 0;
  std::string out = "out";
  GenerateOptions generate;
  TrainOptions train;
  InferOptions infer;
  EvalOptions eval;
  FilterOptions filter;

  std::string to_json() const;
  void merge_json(const std::string& json);      // overrides fields present in json
  static RunConfig from_json_file(const std::string& path);
};

// Subcommand entry points. Each validates its inputs, runs, writes outputs
// under config.out, and returns a process exit code; failures are reported
// as JSON lines on stderr.
int cmd_generate(const RunConfig& config);
int cmd_train(const RunConfig& config);
int cmd_infer(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_filter(const RunConfig& config);

}  // namespace vdepth
