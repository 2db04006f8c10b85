// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Vision transformer with pre-norm residual blocks and per-block hooks for
// dropping embeddings after the attention-weighted average.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agat/autodiff.hpp"
#include "agat/policy.hpp"
#include "agat/random.hpp"

namespace agat {

inline constexpr double kLayerNormEps = 1e-6;

struct ModelConfig {
  std::size_t image_size = 28;
  std::size_t patch_size = 4;
  std::size_t channels = 1;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t depth = 4;
  std::size_t mlp_ratio = 4;
  std::size_t num_classes = 10;
  bool use_attn_bias = false;
  double attn_dropout_rate = 0.0;

  void validate() const;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  /// Sequence length including the class token.
  std::size_t seq_len() const { return num_patches() + 1; }
  std::size_t head_dim() const { return dim / heads; }
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  std::size_t hidden_dim() const { return mlp_ratio * dim; }

  bool operator==(const ModelConfig&) const = default;
};

struct BlockParams {
  ad::Tensor norm1_gamma, norm1_beta;
  ad::Tensor qkv;        // [d, 3d]: query, key, value column blocks
  ad::Tensor attn_bias;  // [h, p₀+1, p₀+1] when enabled, undefined otherwise
  ad::Tensor proj;       // [d, d]
  ad::Tensor norm2_gamma, norm2_beta;
  ad::Tensor fc1;        // [d, 4d]
  ad::Tensor fc2;        // [4d, d]
};

using NamedTensor = std::pair<std::string, ad::Tensor>;

struct Params {
  ad::Tensor patch_embed;  // [C·s², d]
  ad::Tensor pos_embed;    // [p₀+1, d]
  ad::Tensor class_token;  // [d]
  std::vector<BlockParams> blocks;
  ad::Tensor norm_gamma, norm_beta;
  ad::Tensor head;  // [d, classes]

  /// Seeded initialization: linear weights from U(±1/√fan_in), class token
  /// and positions from N(0, 0.02²), LayerNorm at identity, bias at zero.
  static Params init(const ModelConfig& cfg, std::uint64_t seed);

  /// Assembles parameters from named tensors, checking every name and shape
  /// against `cfg`. Throws DimensionError naming the first mismatch.
  static Params from_named(const ModelConfig& cfg, const std::vector<NamedTensor>& tensors);

  /// Every learnable tensor in a fixed order. The handles alias the
  /// parameters, so updating their values updates the model.
  std::vector<NamedTensor> named() const;

  /// Constant copies, for forward passes that only need input gradients.
  Params detached() const;
};

/// Expected (name, shape) table for a config, in `Params::named()` order.
std::vector<std::pair<std::string, ad::Shape>> param_shapes(const ModelConfig& cfg);

enum class Mode { train, eval };

/// Chooses the rows an example keeps after a block's attention. Receives that
/// example's attention probabilities laid out [head][query][key].
using RowSelector = std::function<std::vector<std::size_t>(std::span<const double> attention)>;

struct AttentionDropout {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

struct MsaOutput {
  ad::Tensor out;        // [B, k, d]
  ad::Tensor attention;  // [B·h, p, p]
  std::vector<std::vector<std::size_t>> kept;  // per example, rows of the input
};

/// Patches [B, p₀, C·s²] → [B, p₀+1, d]; a single image's [p₀, C·s²] → [p₀+1, d].
/// Row 0 is the class token; positions are added to every row.
ad::Tensor embed(const ModelConfig& cfg, const Params& params, const ad::Tensor& patches);

/// Multi-head self-attention with a residual connection. `x` is [B, p, d];
/// `live` holds each example's original sequence positions (used to slice the
/// attention bias). When `select` is set, its rows are gathered from the
/// attention output before the output projection and from the residual.
MsaOutput msa_forward(const ModelConfig& cfg, const BlockParams& block, const ad::Tensor& x,
                      const std::vector<std::vector<std::size_t>>& live,
                      const RowSelector& select = {}, AttentionDropout dropout = {});

/// x + GELU(LayerNorm(x)·W³)·W⁴; row count is preserved.
ad::Tensor mlp_forward(const BlockParams& block, const ad::Tensor& x);

struct BlockTrace {
  std::size_t input_len = 0;
  ad::Tensor attention;  // [B·h, input_len, input_len]
  /// Original sequence positions each example keeps after this block;
  /// strictly increasing, always starting with 0.
  std::vector<std::vector<std::size_t>> kept;
};

struct ForwardTrace {
  ad::Tensor logits;  // [B, classes]
  std::vector<BlockTrace> blocks;
};

/// Full forward pass over images [B, C, H, W]. Eval mode ignores the policy
/// and attention dropout and draws nothing from `rng`.
ForwardTrace forward(const ModelConfig& cfg, const Params& params, const ad::Tensor& images,
                     const DropPolicy& policy, Mode mode, Rng& rng);

/// Index of the largest logit per row, lowest index on ties.
std::vector<std::size_t> argmax_rows(const ad::Tensor& logits);

}  // namespace agat
