// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Analytical cost of the transformer blocks. Per block with sequence length p
// and width d:
//   MSA: 4pd² + 2p²d + pd     MLP: 8pd² + pd
// Patch embedding and the classifier head are not counted. Counts are exact
// 64-bit integers.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agat/policy.hpp"
#include "agat/vit.hpp"

namespace agat {

std::uint64_t msa_flops(std::uint64_t p, std::uint64_t d);
std::uint64_t mlp_flops(std::uint64_t p, std::uint64_t d);
inline std::uint64_t block_flops(std::uint64_t p, std::uint64_t d) {
  return msa_flops(p, d) + mlp_flops(p, d);
}

struct LayerFlops {
  std::uint64_t seq_len = 0;  // rows entering the block, class token included
  std::uint64_t kept = 0;     // rows leaving the block
  std::uint64_t msa = 0;
  std::uint64_t mlp = 0;
};

struct FlopsReport {
  std::vector<LayerFlops> layers;
  std::uint64_t total = 0;
  std::uint64_t baseline_total = 0;  // same model, no dropping
  double savings = 0.0;              // 1 − total / baseline_total
};

FlopsReport model_flops(const ModelConfig& cfg, const DropPolicy& policy);

/// Plain-text table: one line per block, then totals and savings.
std::string to_text(const FlopsReport& report, const ModelConfig& cfg, const DropPolicy& policy);

/// Forward cost of a pass that produced `trace`: the block formulas at each
/// block's measured input length, times the batch size.
std::uint64_t trace_flops(const ModelConfig& cfg, const ForwardTrace& trace);

struct CalibratedPolicy {
  DropPolicy policy;
  double savings = 0.0;  // what the policy actually achieves
};

/// Finds the keep fraction (attention_guided) or drop rate (random_input)
/// whose FLOPs savings is closest to `target` by bisection. A target of 0
/// yields DropPolicy::none().
CalibratedPolicy calibrate_policy(const ModelConfig& cfg, DropPolicy::Kind kind, double target);

}  // namespace agat
