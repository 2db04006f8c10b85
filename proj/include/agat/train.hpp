// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Fast adversarial training: each batch is attacked with one FGSM step from a
// random start, then the model takes an AdamW step on the attacked batch.
// Both forwards run in train mode under the configured drop policy.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agat/attacks.hpp"
#include "agat/data.hpp"
#include "agat/policy.hpp"
#include "agat/random.hpp"
#include "agat/vit.hpp"

namespace agat {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t warmup_epochs = 3;
  double base_lr = 1e-3;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  AttackConfig attack = AttackConfig::fast_at(0.1);
  DropPolicy policy;
  AttackConfig eval_attack = AttackConfig::pgd(0.1, 10);
  std::size_t eval_every = 1;
  std::size_t eval_samples = 0;  // 0: the whole test split
  /// When false, epoch_wall_seconds is reported as 0 so metrics files are
  /// byte-reproducible.
  bool wall_clock = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainState {
  Params params;
  std::vector<std::vector<double>> m;  // first moments, Params::named() order
  std::vector<std::vector<double>> v;  // second moments
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;  // completed epochs
  Rng rng;

  static TrainState fresh(const ModelConfig& cfg, std::uint64_t seed);
};

struct MetricsRow {
  std::uint64_t epoch = 0;  // 1-based
  double lr = 0.0;          // at the epoch's first step
  double train_loss = 0.0;  // mean adversarial loss over the epoch's examples
  std::optional<double> clean_acc;
  std::optional<double> robust_acc;
  double epoch_wall_seconds = 0.0;
  std::uint64_t train_forward_flops = 0;  // block forwards, attack included

  bool operator==(const MetricsRow&) const = default;
};

/// One AdamW update with decoupled weight decay. `grads` follows
/// Params::named() order. Throws TrainingError naming the first parameter with
/// a non-finite gradient, before touching any state.
void adamw_step(TrainState& state, const std::vector<std::vector<double>>& grads, double lr,
                double weight_decay, double beta1, double beta2, double eps);

/// Linear warmup from 0 to base_lr, then half-cosine down to 0. `progress` is
/// the fraction of training done, in [0, 1].
double lr_at(double progress, const TrainConfig& cfg);

/// Runs one epoch and advances `state.epoch`. Accuracy fields stay empty.
MetricsRow train_epoch(TrainState& state, const ModelConfig& model, const Dataset& data,
                       const TrainConfig& cfg);

struct EvalResult {
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  std::size_t count = 0;
};

/// Eval-mode accuracy on clean inputs and under `attack`. An example counts
/// as robust only if it is classified correctly both clean and attacked.
EvalResult evaluate(const ModelConfig& model, const Params& params, const Dataset& data,
                    const AttackConfig& attack, std::size_t batch_size, std::uint64_t seed);

inline constexpr const char* kMetricsHeader =
    "epoch,lr,train_loss,clean_acc,robust_acc,epoch_wall_seconds,train_forward_flops";

std::string to_csv(const MetricsRow& row);

}  // namespace agat
