#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "vdepth/cli.hpp"

using vdepth::RunConfig;

int main(int argc, char** argv) {
  CLI::App app{"vdepth: flow-matching video depth estimation on synthetic clips"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::string seed_override;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--out", out_override, "output directory");
    cmd->add_option("--seed", seed_override, "base seed (u64)");
  };

  CLI::App* generate = app.add_subcommand("generate", "render a synthetic clip dataset");
  CLI::App* train = app.add_subcommand("train", "train the velocity model");
  CLI::App* infer = app.add_subcommand("infer", "predict depth for a clip or image");
  CLI::App* eval = app.add_subcommand("eval", "score predictions against ground truth");
  CLI::App* filter = app.add_subcommand("filter", "run the dataset quality filter");

  int gen_count = -1;
  generate->add_option("--count", gen_count, "number of clips");
  std::string train_data, train_base_ckpt;
  int train_steps = -1;
  bool train_interp = false;
  train->add_option("--data", train_data, "dataset directory");
  train->add_option("--steps", train_steps, "optimizer steps");
  train->add_flag("--interp", train_interp, "fine-tune the keyframe interpolation variant");
  train->add_option("--base-checkpoint", train_base_ckpt, "base checkpoint for --interp");
  std::string infer_ckpt, infer_interp_ckpt, infer_input;
  int infer_steps = -1, infer_ensemble = -1;
  infer->add_option("--checkpoint", infer_ckpt, "model checkpoint");
  infer->add_option("--interp-checkpoint", infer_interp_ckpt, "interpolation checkpoint");
  infer->add_option("--input", infer_input, "clip directory or PNG image");
  infer->add_option("--steps", infer_steps, "denoising steps");
  infer->add_option("--ensemble", infer_ensemble, "ensemble size");
  std::string eval_pred, eval_data;
  eval->add_option("--pred", eval_pred, "prediction directory");
  eval->add_option("--data", eval_data, "ground-truth dataset directory");
  std::string filter_data, filter_ckpt;
  filter->add_option("--data", filter_data, "dataset directory");
  filter->add_option("--checkpoint", filter_ckpt, "model checkpoint");

  for (CLI::App* cmd : {generate, train, infer, eval, filter}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  RunConfig config;
  try {
    if (!config_path.empty()) config = RunConfig::from_json_file(config_path);
    if (!out_override.empty()) config.out = out_override;
    if (!seed_override.empty()) config.seed = std::stoull(seed_override);
    if (gen_count >= 0) config.generate.count = gen_count;
    if (!train_data.empty()) config.train.data = train_data;
    if (train_steps >= 0) config.train.steps = train_steps;
    if (train_interp) config.train.interp = true;
    if (!train_base_ckpt.empty()) config.train.base_checkpoint = train_base_ckpt;
    if (!infer_ckpt.empty()) config.infer.checkpoint = infer_ckpt;
    if (!infer_interp_ckpt.empty()) config.infer.interp_checkpoint = infer_interp_ckpt;
    if (!infer_input.empty()) config.infer.input = infer_input;
    if (infer_steps >= 0) config.infer.steps = infer_steps;
    if (infer_ensemble >= 0) config.infer.ensemble = infer_ensemble;
    if (!eval_pred.empty()) config.eval.pred = eval_pred;
    if (!eval_data.empty()) config.eval.data = eval_data;
    if (!filter_data.empty()) config.filter.data = filter_data;
    if (!filter_ckpt.empty()) config.filter.checkpoint = filter_ckpt;
  } catch (const std::exception& e) {
    std::cerr << R"({"level":"error","message":")" << e.what() << "\"}" << std::endl;
    return 1;
  }

  if (app.got_subcommand(generate)) return vdepth::cmd_generate(config);
  if (app.got_subcommand(train)) return vdepth::cmd_train(config);
  if (app.got_subcommand(infer)) return vdepth::cmd_infer(config);
  if (app.got_subcommand(eval)) return vdepth::cmd_eval(config);
  if (app.got_subcommand(filter)) return vdepth::cmd_filter(config);
  return 1;
}
