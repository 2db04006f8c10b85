// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// agat: train, evaluate and inspect attention-guided adversarial training runs.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "agat/run.hpp"

namespace {

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-guided adversarial training for vision transformers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "agat 0.1.0");

  std::string config;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config, "key = value config file");
    sub->add_option("--set", overrides, "override as dotted.key=value (repeatable)");
  };

  auto* train = app.add_subcommand("train", "run Fast AT with the configured drop policy");
  add_config(train);

  agat::EvalSpec eval;
  std::string checkpoint;
  auto* ev = app.add_subcommand("eval", "clean and robust accuracy of a checkpoint");
  ev->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--attack", eval.attack, "pgd, fgsm or none");
  ev->add_option("--steps", eval.steps, "PGD steps");
  ev->add_option("--eps", eval.epsilon, "L-inf radius");
  ev->add_option("--alpha", eval.alpha, "step size (default 2*eps/steps)");
  ev->add_option("--seed", eval.seed, "seed for the random start");
  add_config(ev);

  auto* flops = app.add_subcommand("flops", "per-block FLOPs report for a model and policy");
  add_config(flops);

  agat::GradcheckSpec grad;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every op");
  add_config(gc);
  gc->add_option("--seeds", grad.seeds, "random instances per op");
  gc->add_option("--corrupt", grad.corrupt, "break one op's backward (negative control)");

  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  auto* sweep = app.add_subcommand("sweep", "random vs attention-guided dropping across FLOPs reductions");
  add_config(sweep);
  sweep->add_option("--values", values, "reduction levels, e.g. 0,0.2,0.4,0.6")->delimiter(',');
  sweep->add_option("--seeds", seeds, "training seeds")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[config]: " << e.what() << std::endl;
    return agat::kExitConfig;
  }

  const agat::CommandIo io{std::cout, std::cerr};
  if (*train) return agat::cmd_train(opt_path(config), overrides, io);
  if (*ev) {
    eval.config = opt_path(config);
    eval.overrides = overrides;
    return agat::cmd_eval(checkpoint, eval, io);
  }
  if (*flops) return agat::cmd_flops(opt_path(config), overrides, io);
  if (*gc) {
    grad.config = opt_path(config);
    grad.overrides = overrides;
    return agat::cmd_gradcheck(grad, io);
  }
  return agat::cmd_sweep(opt_path(config), overrides, values, seeds, io);
}
