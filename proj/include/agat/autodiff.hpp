// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode automatic differentiation over dense f64 tensors.
//
// A Tensor is a cheap handle to a node holding a row-major value buffer.
// While a Tape is alive on the current thread, every op whose inputs require
// gradients is recorded on it; Tape::backward() then walks the recording in
// reverse and returns the gradient of each leaf that took part. Without an
// active tape ops just compute values, which is what evaluation uses.
//
// The op set is what the vision transformer needs and no more: batch-leading
// matrix products, row-wise softmax / layer norm, GELU, row gathering and a
// handful of shape shuffles.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace agat::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;
using BackwardFn = std::function<void(Node& out)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  bool leaf = true;
  std::string_view op = "leaf";
  BackwardFn backward;

  /// Gradient storage, zero-filled on first access.
  std::span<double> grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  /// A leaf whose gradient is reported by Tape::backward().
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  std::span<const double> values() const;
  /// Only leaves may be modified in place (optimizer updates, perturbations).
  std::span<double> mutable_values();
  double item() const;
  bool requires_grad() const;
  bool is_leaf() const;
  std::string_view op() const;

  /// A constant copy that takes no part in differentiation.
  Tensor detach() const;

  const Node* id() const { return node_.get(); }
  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

/// Leaf gradients produced by one backward pass.
class Gradients {
 public:
  /// Gradient of `leaf`; all zeros when the leaf was not on a path to the loss.
  std::vector<double> of(const Tensor& leaf) const;
  std::span<const double> view(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const { return grads_.count(leaf.id()) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<const Node*, std::vector<double>> grads_;
};

/// Records ops on the current thread for the lifetime of the object. Tapes
/// nest; the innermost one is active. A tape can be differentiated once.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Gradients backward(const Tensor& loss);
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  static Tape* active();

 private:
  friend Tensor record(std::string_view, Shape, std::vector<double>,
                       std::initializer_list<const Tensor*>, BackwardFn);
  std::vector<std::shared_ptr<Node>> nodes_;
  std::vector<std::shared_ptr<Node>> leaves_;
  Tape* previous_ = nullptr;
  bool consumed_ = false;
};

/// Builds an op result. When a tape is active and any input requires a
/// gradient, the node is recorded with `backward`; otherwise the result is a
/// constant. `backward` receives the output node whose `grad` is populated and
/// must accumulate into the inputs' grad buffers.
Tensor record(std::string_view op, Shape shape, std::vector<double> value,
              std::initializer_list<const Tensor*> inputs, BackwardFn backward);

// ---------------------------------------------------------------------------
// ops

/// A[..., m, k] · B[k, n] → [..., m, n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// A[N, m, k] · B[N, k, n] (or B[N, n, k]ᵀ when transpose_b) → [N, m, n]
Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
/// b's shape must be a suffix of a's; b is repeated over the leading axes.
Tensor add_broadcast(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
/// Exact form x·Φ(x).
Tensor gelu(const Tensor& x);

/// X[p, d] → rows `indices` as [k, d]. Indices are constants.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
/// X[B, p, d] → [B, k, d] with a separate index list per batch entry.
Tensor gather_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& indices);
/// Concatenates along the second-to-last axis.
Tensor concat_rows(const Tensor& a, const Tensor& b);
/// A → [n, ...A]
Tensor repeat_batch(const Tensor& a, std::size_t n);
Tensor reshape(const Tensor& a, Shape shape);

/// Mean over the batch of −log softmax(logits)[label].
Tensor cross_entropy_logits(const Tensor& logits, std::span<const std::size_t> labels);

/// Elementwise sign; a constant (zero gradient everywhere).
Tensor sign(const Tensor& x);
/// Elementwise clamp; gradient passes where lo ≤ x ≤ hi and is zero elsewhere.
Tensor clamp(const Tensor& x, double lo, double hi);

/// Image [C, H, W] → [p₀, C·s²] or batch [B, C, H, W] → [B, p₀, C·s²].
/// Rows follow the patch grid in row-major order; each row is channel-major,
/// then row, then column within the patch.
Tensor patchify(const Tensor& images, std::size_t patch_size);

/// Columns [offset, offset + width) of X[B, p, ·] split into `heads` equal
/// parts → [B·heads, p, width/heads].
Tensor split_heads(const Tensor& x, std::size_t heads, std::size_t offset, std::size_t width);
/// Inverse of split_heads: [B·heads, p, w] → [B, p, heads·w].
Tensor merge_heads(const Tensor& x, std::size_t heads);

/// S[B·h, p, p] + bias[h, M, M] restricted to the live positions of each
/// batch entry: S[b·h + i][q][k] += bias[i][live[b][q]][live[b][k]].
Tensor add_attention_bias(const Tensor& scores, const Tensor& bias,
                          const std::vector<std::vector<std::size_t>>& live);

}  // namespace agat::ad
