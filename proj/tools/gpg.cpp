#include "gpg/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Decentralized graph-filter policies for unlabeled multi-robot "
               "motion planning"};
  app.require_subcommand(1);

  gpg::CliOptions opts;
  std::uint64_t seed = 0;
  int threads = 0;

  auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
    sub->add_option("--config", opts.config_path, "Config (or trajectory) file")
        ->required();
    if (needs_checkpoint)
      sub->add_option("--checkpoint", opts.checkpoint_path, "Policy checkpoint");
    sub->add_option("--out", opts.out_dir, "Output directory");
    sub->add_option("--seed", seed, "Override the config seed")
        ->each([&](const std::string&) { opts.seed = seed; });
    sub->add_option("--threads", threads, "Worker thread cap")
        ->each([&](const std::string&) { opts.threads = threads; });
  };

  auto* train = app.add_subcommand("train", "Train a policy");
  add_common(train, false);
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its config");
  add_common(eval, true);
  auto* transfer =
      app.add_subcommand("transfer", "Run a checkpoint on a (larger) swarm");
  add_common(transfer, true);
  auto* compare =
      app.add_subcommand("compare", "CAPT vs GPG vs GPG+VO on formations");
  add_common(compare, true);
  auto* sweep = app.add_subcommand("sweep", "Train/eval over a K x M grid");
  add_common(sweep, false);
  auto* render =
      app.add_subcommand("render", "Convert a trajectory file to plot CSV");
  add_common(render, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (train->parsed()) return gpg::cmd_train(opts);
  if (eval->parsed()) return gpg::cmd_eval(opts);
  if (transfer->parsed()) return gpg::cmd_transfer(opts);
  if (compare->parsed()) return gpg::cmd_compare(opts);
  if (sweep->parsed()) return gpg::cmd_sweep(opts);
  if (render->parsed()) return gpg::cmd_render(opts);
  return 2;
}
