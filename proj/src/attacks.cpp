// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/attacks.hpp"

#include <algorithm>
#include <sstream>

#include "agat/error.hpp"
#include "agat/flops.hpp"

namespace agat {

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack epsilon must be non-negative");
  if (!(alpha >= 0.0)) throw ConfigError("attack alpha must be non-negative");
  if (steps >= 1 && epsilon > 0.0 && !(alpha > 0.0)) throw ConfigError("attack alpha must be positive");
  if (!(pixel_min < pixel_max)) throw ConfigError("attack pixel_min must be below pixel_max");
}

std::string AttackConfig::describe() const {
  std::ostringstream os;
  os << "eps=" << epsilon << " alpha=" << alpha << " steps=" << steps
     << " random_init=" << (random_init ? "true" : "false");
  return os.str();
}

AttackConfig AttackConfig::fast_at(double epsilon) {
  AttackConfig c;
  c.epsilon = epsilon;
  c.alpha = 1.25 * epsilon;
  c.steps = 1;
  c.random_init = true;
  return c;
}

AttackConfig AttackConfig::pgd(double epsilon, std::size_t steps) {
  AttackConfig c;
  c.epsilon = epsilon;
  c.steps = steps;
  c.alpha = steps ? 2.0 * epsilon / static_cast<double>(steps) : 0.0;
  c.random_init = true;
  return c;
}

void project_linf(std::span<double> delta, double epsilon) {
  for (double& d : delta) d = std::clamp(d, -epsilon, epsilon);
}

std::vector<double> input_gradient(const LogitsFn& model, const ad::Tensor& images,
                                   std::span<const std::size_t> labels) {
  ad::Tape tape;
  const ad::Tensor x = ad::Tensor::parameter(images.shape(), {images.values().begin(), images.values().end()});
  const ad::Tensor loss = ad::cross_entropy_logits(model(x), labels);
  return tape.backward(loss).of(x);
}

namespace {

double sgn(double g) { return static_cast<double>((g > 0.0) - (g < 0.0)); }

std::vector<double> random_start(std::size_t n, const AttackConfig& cfg, Rng& rng) {
  std::vector<double> delta(n, 0.0);
  if (cfg.random_init && cfg.epsilon > 0.0)
    for (double& d : delta) d = uniform(rng, -cfg.epsilon, cfg.epsilon);
  return delta;
}

}  // namespace

ad::Tensor fgsm_random_init(const LogitsFn& model, const ad::Tensor& images,
                            std::span<const std::size_t> labels, const AttackConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.steps != 1) throw ConfigError("fgsm_random_init needs steps == 1");
  const auto x = images.values();
  std::vector<double> delta = random_start(x.size(), cfg, rng);

  std::vector<double> start(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) start[i] = x[i] + delta[i];
  const auto grad = input_gradient(model, ad::Tensor::constant(images.shape(), std::move(start)), labels);

  std::vector<double> adv(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::clamp(delta[i] + cfg.alpha * sgn(grad[i]), -cfg.epsilon, cfg.epsilon);
    adv[i] = std::clamp(x[i] + d, cfg.pixel_min, cfg.pixel_max);
  }
  return ad::Tensor::constant(images.shape(), std::move(adv));
}

ad::Tensor pgd(const LogitsFn& model, const ad::Tensor& images,
               std::span<const std::size_t> labels, const AttackConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.steps < 1) throw ConfigError("pgd needs at least one step");
  const auto x = images.values();
  std::vector<double> delta = random_start(x.size(), cfg, rng);
  std::vector<double> adv(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    adv[i] = std::clamp(x[i] + delta[i], cfg.pixel_min, cfg.pixel_max);
    delta[i] = adv[i] - x[i];
  }
  if (cfg.epsilon == 0.0) return ad::Tensor::constant(images.shape(), {x.begin(), x.end()});

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto grad = input_gradient(model, ad::Tensor::constant(images.shape(), adv), labels);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = std::clamp(delta[i] + cfg.alpha * sgn(grad[i]), -cfg.epsilon, cfg.epsilon);
      adv[i] = std::clamp(x[i] + d, cfg.pixel_min, cfg.pixel_max);
      delta[i] = adv[i] - x[i];
    }
  }
  return ad::Tensor::constant(images.shape(), std::move(adv));
}

LogitsFn vit_logits(const ModelConfig& cfg, const Params& params, const DropPolicy& policy,
                    Mode mode, Rng& rng, std::uint64_t* flops) {
  return [cfg, frozen = params.detached(), policy, mode, &rng, flops](const ad::Tensor& images) {
    auto trace = forward(cfg, frozen, images, policy, mode, rng);
    if (flops) *flops += trace_flops(cfg, trace);
    return trace.logits;
  };
}

}  // namespace agat
