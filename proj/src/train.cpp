// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "agat/config.hpp"
#include "agat/error.hpp"
#include "agat/flops.hpp"

namespace agat {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (warmup_epochs >= epochs) throw ConfigError("train.warmup_epochs must be below train.epochs");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (eval_every < 1) throw ConfigError("train.eval_every must be at least 1");
  if (!(base_lr >= 0.0)) throw ConfigError("train.base_lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
  if (attack.steps != 1) throw ConfigError("attack.steps must be 1 for fast adversarial training");
  attack.validate();
  eval_attack.validate();
  policy.validate();
}

TrainState TrainState::fresh(const ModelConfig& cfg, std::uint64_t seed) {
  TrainState s;
  s.params = Params::init(cfg, seed);
  for (const auto& [name, t] : s.params.named()) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 1u};
  s.rng.seed(seq);
  return s;
}

void adamw_step(TrainState& state, const std::vector<std::vector<double>>& grads, double lr,
                double weight_decay, double beta1, double beta2, double eps) {
  auto named = state.params.named();
  if (grads.size() != named.size() || state.m.size() != named.size() ||
      state.v.size() != named.size())
    throw ContractError("adamw_step: gradient or moment count does not match the parameters");
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (grads[i].size() != named[i].second.numel())
      throw ContractError("adamw_step: gradient size mismatch for '" + named[i].first + "'");
    for (double g : grads[i])
      if (!std::isfinite(g))
        throw TrainingError("non-finite gradient in parameter '" + named[i].first + "' at step " +
                            std::to_string(state.step + 1));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  const double decay = 1.0 - lr * weight_decay;
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto theta = named[i].second.mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      theta[j] *= decay;
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

double lr_at(double progress, const TrainConfig& cfg) {
  if (!(progress >= 0.0 && progress <= 1.0))
    throw ContractError("lr_at: progress must lie in [0, 1]");
  const double warm = static_cast<double>(cfg.warmup_epochs) / static_cast<double>(cfg.epochs);
  if (progress < warm) return cfg.base_lr * progress / warm;
  const double t = (progress - warm) / (1.0 - warm);
  return 0.5 * cfg.base_lr * (1.0 + std::cos(std::numbers::pi * t));
}

MetricsRow train_epoch(TrainState& state, const ModelConfig& model, const Dataset& data,
                       const TrainConfig& cfg) {
  if (state.epoch >= cfg.epochs)
    throw ContractError("train_epoch: all " + std::to_string(cfg.epochs) + " epochs already ran");
  if (data.size() == 0) throw DataError("training split is empty");
  const auto start = std::chrono::steady_clock::now();

  const auto order = batches(data.size(), cfg.batch_size, cfg.seed, state.epoch);
  const double num_batches = static_cast<double>(order.size());
  MetricsRow row;
  row.epoch = state.epoch + 1;
  double loss_sum = 0.0;
  std::uint64_t flops = 0;

  for (std::size_t b = 0; b < order.size(); ++b) {
    const double progress = std::min(
        1.0, (static_cast<double>(state.epoch) + static_cast<double>(b) / num_batches) /
                 static_cast<double>(cfg.epochs));
    const double lr = lr_at(progress, cfg);
    if (b == 0) row.lr = lr;

    const ad::Tensor x = data.images_at(order[b]);
    const auto y = data.labels_at(order[b]);

    const auto attack_model = vit_logits(model, state.params, cfg.policy, Mode::train, state.rng, &flops);
    const ad::Tensor x_adv = fgsm_random_init(attack_model, x, y, cfg.attack, state.rng);

    std::vector<std::vector<double>> grads;
    double loss_value = 0.0;
    {
      ad::Tape tape;
      const auto trace = forward(model, state.params, x_adv, cfg.policy, Mode::train, state.rng);
      flops += trace_flops(model, trace);
      const ad::Tensor loss = ad::cross_entropy_logits(trace.logits, y);
      loss_value = loss.item();
      const auto g = tape.backward(loss);
      for (const auto& [name, t] : state.params.named()) grads.push_back(g.of(t));
    }
    if (!std::isfinite(loss_value))
      throw TrainingError("non-finite training loss at step " + std::to_string(state.step + 1));
    adamw_step(state, grads, lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.adam_eps);
    loss_sum += loss_value * static_cast<double>(y.size());
  }

  ++state.epoch;
  row.train_loss = loss_sum / static_cast<double>(data.size());
  row.train_forward_flops = flops;
  if (cfg.wall_clock) {
    row.epoch_wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return row;
}

EvalResult evaluate(const ModelConfig& model, const Params& params, const Dataset& data,
                    const AttackConfig& attack, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ContractError("evaluate: batch_size must be at least 1");
  if (data.size() == 0) throw DataError("evaluation split is empty");
  attack.validate();
  Rng rng(seed);
  const Params frozen = params.detached();
  const auto logits_fn = vit_logits(model, frozen, DropPolicy::none(), Mode::eval, rng);
  const bool attacked = attack.epsilon > 0.0 && attack.steps > 0;

  std::size_t clean = 0;
  std::size_t robust = 0;
  std::vector<std::size_t> idx;
  for (std::size_t lo = 0; lo < data.size(); lo += batch_size) {
    const std::size_t hi = std::min(data.size(), lo + batch_size);
    idx.resize(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) idx[i - lo] = i;
    const ad::Tensor x = data.images_at(idx);
    const auto y = data.labels_at(idx);
    const auto clean_pred = argmax_rows(logits_fn(x));
    std::vector<std::size_t> adv_pred = clean_pred;
    if (attacked) adv_pred = argmax_rows(logits_fn(pgd(logits_fn, x, y, attack, rng)));
    for (std::size_t i = 0; i < y.size(); ++i) {
      const bool ok = clean_pred[i] == y[i];
      clean += ok;
      robust += ok && adv_pred[i] == y[i];
    }
  }
  EvalResult r;
  r.count = data.size();
  r.clean_acc = static_cast<double>(clean) / static_cast<double>(r.count);
  r.robust_acc = static_cast<double>(robust) / static_cast<double>(r.count);
  return r;
}

std::string to_csv(const MetricsRow& row) {
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  return std::to_string(row.epoch) + "," + format_double(row.lr) + "," +
         format_double(row.train_loss) + "," + opt(row.clean_acc) + "," + opt(row.robust_acc) +
         "," + format_double(row.epoch_wall_seconds) + "," + std::to_string(row.train_forward_flops);
}

}  // namespace agat
