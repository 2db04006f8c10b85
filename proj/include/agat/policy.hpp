// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Which embeddings survive each transformer block during training.
//
// AttentionGuided keeps, after every block's attention, the class token plus
// the patches whose attention column mass is largest. RandomInput drops a
// fixed share of input patches once, before the first block. Evaluation never
// applies a policy.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "agat/random.hpp"

namespace agat {

struct DropPolicy {
  enum class Kind { none, random_input, attention_guided };

  Kind kind = Kind::none;
  double rate = 0.0;  // RandomInput: share of input patches dropped, in [0, 1)
  double keep = 1.0;  // AttentionGuided: per-block keep fraction, in (0, 1]

  static DropPolicy none() { return {}; }
  static DropPolicy random_input(double rate);
  static DropPolicy attention_guided(double keep);

  void validate() const;
  std::string describe() const;
  bool operator==(const DropPolicy&) const = default;
};

/// Kept sequence lengths derived from a policy. `input_len[l]` is the number
/// of rows entering block l and `kept[l]` the number leaving it; both include
/// the class token.
struct DropSchedule {
  std::vector<std::size_t> input_len;
  std::vector<std::size_t> kept;
};

/// Column mass of the head-averaged attention of one example:
/// a[j] = (1/h) Σ_heads Σ_queries A[head][query][j]. `attention` holds
/// h·p·p values laid out [head][query][key].
std::vector<double> influence_scores(std::span<const double> attention, std::size_t heads,
                                     std::size_t p);

/// Index 0 plus the k−1 highest-scoring indices among 1..p−1, ties to the
/// lower index, sorted ascending. Requires 2 ≤ k ≤ p.
std::vector<std::size_t> select_kept(std::span<const double> scores, std::size_t k);

/// 1 + max(1, round(keep · (incoming − 1))), never more than `incoming`.
std::size_t layer_keep_count(std::size_t incoming_len, double keep_fraction);

/// Sorted sequence indices (0 = class token, patches 1..p₀) that survive
/// random input dropping: the class token plus ⌈(1 − rate)·p₀⌉ patches drawn
/// uniformly without replacement.
std::vector<std::size_t> random_input_drop(std::size_t num_patches, double rate, Rng& rng);

/// Patches kept by RandomInput: ⌈(1 − rate)·p₀⌉, at least one.
std::size_t random_kept_patches(std::size_t num_patches, double rate);

DropSchedule drop_schedule(std::size_t num_patches, std::size_t depth, const DropPolicy& policy);

}  // namespace agat
