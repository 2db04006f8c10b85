// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment runs: the resolved run configuration, dataset selection, the
// training driver that writes metrics / checkpoints / manifests, and the
// subcommands behind the `agat` executable.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agat/config.hpp"
#include "agat/data.hpp"
#include "agat/train.hpp"
#include "agat/vit.hpp"

namespace agat {

struct DataConfig {
  std::string kind = "idx";  // idx | cifar | synthetic
  std::string train_images, train_labels, test_images, test_labels;
  std::vector<std::string> cifar_train, cifar_test;
  std::size_t train_limit = 0;  // 0: everything
  std::size_t test_limit = 0;
  std::size_t synthetic_train = 200;
  std::size_t synthetic_test = 200;
  double synthetic_noise = 0.1;
  std::uint64_t synthetic_seed = 0;

  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  /// Target FLOPs savings; when set, the policy's keep fraction or drop rate
  /// is calibrated to it.
  std::optional<double> reduction;
  std::string output_dir = "run";
  std::vector<std::size_t> final_pgd_steps{20, 100};
  std::size_t eval_batch = 250;

  /// Validates every field, including (with `check_data`) that dataset files
  /// exist. Unknown keys are rejected.
  static RunConfig from_key_values(const KeyValues& kv, bool check_data = true);
  KeyValues to_key_values() const;
};

/// Reads an optional config file, then applies `key=value` overrides in order.
KeyValues gather_config(const std::optional<std::filesystem::path>& path,
                        const std::vector<std::string>& overrides);

struct Datasets {
  Dataset train;
  Dataset test;
};

Datasets load_datasets(const DataConfig& data, const ModelConfig& model);

/// `AGAT_OUTPUT_ROOT` when set, otherwise the working directory.
std::filesystem::path output_root();

struct FinalEval {
  std::size_t steps = 0;
  EvalResult result;
};

struct RunResult {
  std::vector<MetricsRow> metrics;
  std::optional<EvalResult> last_eval;  // eval_attack after the last epoch
  std::vector<FinalEval> final_evals;
  TrainState state;
};

/// Trains from scratch. With a non-empty `out_dir` it writes metrics.csv,
/// plot.jsonl, resolved.cfg, manifest.json, checkpoints at every eval
/// interval and final.ckpt. Progress lines go to `log` when given.
RunResult run_training(const RunConfig& cfg, const Datasets& data,
                       const std::filesystem::path& out_dir, std::ostream* log = nullptr);

struct SweepRow {
  std::string policy;  // "random" or "agat"
  double reduction = 0.0;
  double achieved = 0.0;
  std::string setting;  // calibrated policy description
  double clean_acc = 0.0;
  double robust_acc = 0.0;
};

/// One training per (policy, reduction level, seed), rows averaged over
/// seeds. Runs with identical resolved configs are trained once.
std::vector<SweepRow> run_sweep(const RunConfig& base, const Datasets& data,
                                const std::vector<double>& reductions,
                                const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& out_dir, std::ostream* log = nullptr);

std::string sweep_table(const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------------------
// subcommands; each returns a process exit code

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitCheckpoint = 3, kExitData = 4 };

struct CommandIo {
  std::ostream& out;
  std::ostream& err;
};

int cmd_train(const std::optional<std::filesystem::path>& config,
              const std::vector<std::string>& overrides, CommandIo io);

struct EvalSpec {
  std::string attack = "pgd";  // pgd | fgsm | none
  std::size_t steps = 20;
  double epsilon = 0.1;
  std::optional<double> alpha;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> config;  // data selection
  std::vector<std::string> overrides;
};

int cmd_eval(const std::filesystem::path& checkpoint, const EvalSpec& spec, CommandIo io);
int cmd_flops(const std::optional<std::filesystem::path>& config,
              const std::vector<std::string>& overrides, CommandIo io);

struct GradcheckSpec {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;
  std::optional<std::size_t> seeds;
  std::string corrupt;
};

int cmd_gradcheck(const GradcheckSpec& spec, CommandIo io);
int cmd_sweep(const std::optional<std::filesystem::path>& config,
              const std::vector<std::string>& overrides, const std::vector<double>& values,
              const std::vector<std::uint64_t>& seeds, CommandIo io);

/// Maps an exception to its exit code and prints `error[kind]: message`.
int report_error(const std::exception& e, std::ostream& err);

}  // namespace agat
