// Command-line front end: reproducible synth/train/eval/bench runs driven by
// a sectioned key=value config file. ARN_LOG={quiet,info,debug} controls
// stderr verbosity.

#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "arn/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "run config file")->required();
  cmd->add_option("--seed", args->seed, "override the training seed");
  cmd->add_option("--out", args->out, "output directory");
  cmd->add_option("--threads", args->threads, "worker threads (default 1)");
}

arn::RunConfig make_config(const CommonArgs& args) {
  arn::RunConfig cfg = arn::RunConfig::load(args.config_path);
  if (args.seed) cfg.train_cfg.seed = *args.seed;
  if (args.out) cfg.out_dir = *args.out;
  if (args.threads) cfg.threads = *args.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymmetric two-path residual networks for wearable activity recognition"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, eval_args, bench_args;
  std::string eval_checkpoint, eval_split = "test";

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
  add_common(synth, &synth_args);

  auto* train = app.add_subcommand("train", "train a model and write checkpoint/history/report");
  add_common(train, &train_args);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the config's dataset");
  add_common(eval, &eval_args);
  eval->add_option("--ckpt", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "test|train|all (default test)");

  auto* bench = app.add_subcommand("bench", "compare methods and sweep window combinations");
  add_common(bench, &bench_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      arn::cmd_synth(make_config(synth_args));
    } else if (train->parsed()) {
      const auto outcome = arn::cmd_train(make_config(train_args));
      std::cout << "checkpoint: " << outcome.checkpoint_path << '\n';
      std::cout << "history:    " << outcome.history_path << '\n';
      std::cout << "report:     " << outcome.report_path << '\n';
      std::cout << "test weighted_f1: " << outcome.test_report.weighted_f1 << '\n';
    } else if (eval->parsed()) {
      arn::cmd_eval(make_config(eval_args), eval_checkpoint, eval_split);
    } else if (bench->parsed()) {
      const auto outcome = arn::cmd_bench(make_config(bench_args));
      for (const auto& row : outcome.rows)
        if (row.failed) std::cerr << "bench row failed: " << row.method << ": " << row.error << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
