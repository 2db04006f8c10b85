// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// L∞ adversarial examples: FGSM from a random start (the Fast-AT inner step)
// and multi-step PGD. Both maximize untargeted cross-entropy.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "agat/autodiff.hpp"
#include "agat/policy.hpp"
#include "agat/random.hpp"
#include "agat/vit.hpp"

namespace agat {

struct AttackConfig {
  double epsilon = 0.1;
  double alpha = 0.125;
  std::size_t steps = 1;
  bool random_init = true;
  double pixel_min = 0.0;
  double pixel_max = 1.0;

  void validate() const;
  std::string describe() const;

  /// Single step from a uniform start, α = 1.25ε.
  static AttackConfig fast_at(double epsilon);
  /// `steps` steps from a uniform start, α = 2ε/steps.
  static AttackConfig pgd(double epsilon, std::size_t steps);

  bool operator==(const AttackConfig&) const = default;
};

/// Maps an image batch to logits [B, classes]. Any differentiable model fits.
using LogitsFn = std::function<ad::Tensor(const ad::Tensor& images)>;

/// Elementwise clamp of `delta` to [−ε, ε], in place.
void project_linf(std::span<double> delta, double epsilon);

/// Gradient of the mean cross-entropy with respect to the images.
std::vector<double> input_gradient(const LogitsFn& model, const ad::Tensor& images,
                                   std::span<const std::size_t> labels);

/// x_adv = clamp(x + clamp(δ₀ + α·sign(∇ₓ loss(x + δ₀)), ±ε), box) with δ₀
/// uniform in the ε-ball (zero without random_init). Requires steps == 1.
ad::Tensor fgsm_random_init(const LogitsFn& model, const ad::Tensor& images,
                            std::span<const std::size_t> labels, const AttackConfig& cfg, Rng& rng);

/// Iterated signed-gradient ascent, projected onto the ε-ball and the pixel
/// box after every step. Returns the last iterate.
ad::Tensor pgd(const LogitsFn& model, const ad::Tensor& images,
               std::span<const std::size_t> labels, const AttackConfig& cfg, Rng& rng);

/// Wraps the transformer. Parameters are detached once so attacks only
/// differentiate with respect to the input. When `flops` is set, each call
/// adds the forward cost of the blocks it actually ran.
LogitsFn vit_logits(const ModelConfig& cfg, const Params& params, const DropPolicy& policy,
                    Mode mode, Rng& rng, std::uint64_t* flops = nullptr);

}  // namespace agat
