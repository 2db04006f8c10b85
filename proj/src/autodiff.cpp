// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "agat/error.hpp"
#include "agat/kernels.hpp"

namespace agat::ad {

namespace kp = kernels::parallel;

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "×" : "") << shape[i];
  os << ']';
  return os.str();
}

std::span<double> Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

// ---------------------------------------------------------------------------
// Tensor

namespace {

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size())
    throw DimensionError("tensor of shape " + to_string(shape) + " given " +
                         std::to_string(values.size()) + " values");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return node;
}

const Node& checked(const std::shared_ptr<Node>& node) {
  if (!node) throw ContractError("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(make_node(std::move(shape), std::move(values)));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  auto node = make_node(std::move(shape), std::move(values));
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = ad::numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw IndexError("axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }

std::span<const double> Tensor::values() const { return checked(node_).value; }

std::span<double> Tensor::mutable_values() {
  if (!checked(node_).leaf) throw ContractError("only leaf tensors can be modified in place");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::is_leaf() const { return checked(node_).leaf; }
std::string_view Tensor::op() const { return checked(node_).op; }

Tensor Tensor::detach() const { return constant(shape(), checked(node_).value); }

// ---------------------------------------------------------------------------
// Gradients

std::vector<double> Gradients::of(const Tensor& leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) return std::vector<double>(leaf.numel(), 0.0);
  return it->second;
}

std::span<const double> Gradients::view(const Tensor& leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) throw ContractError("no gradient recorded for this tensor");
  return it->second;
}

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = previous_;
}

Tape* Tape::active() { return g_active_tape; }

Gradients Tape::backward(const Tensor& loss) {
  if (consumed_) throw ContractError("backward() already ran on this tape");
  if (loss.numel() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  consumed_ = true;

  Gradients out;
  const auto& root = loss.node();
  if (!root->requires_grad) return out;
  if (root->leaf) {
    out.grads_[root.get()] = {1.0};
    return out;
  }
  root->grad_buffer()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& node = **it;
    if (!node.grad.empty() && node.backward) node.backward(node);
    node.grad.clear();
    node.grad.shrink_to_fit();
    node.backward = nullptr;
  }
  for (const auto& leaf : leaves_) {
    if (leaf->grad.empty()) leaf->grad.assign(leaf->value.size(), 0.0);
    out.grads_[leaf.get()] = std::move(leaf->grad);
    leaf->grad.clear();
  }
  nodes_.clear();
  leaves_.clear();
  return out;
}

Tensor record(std::string_view op, Shape shape, std::vector<double> value,
              std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  auto node = make_node(std::move(shape), std::move(value));
  Tape* tape = Tape::active();
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
  if (tape != nullptr && needs_grad && !tape->consumed_) {
    node->requires_grad = true;
    node->leaf = false;
    node->op = op;
    node->backward = std::move(backward);
    tape->nodes_.push_back(node);
    for (const Tensor* t : inputs) {
      const auto& in = t->node();
      if (in->leaf && in->requires_grad &&
          std::none_of(tape->leaves_.begin(), tape->leaves_.end(),
                       [&](const auto& l) { return l.get() == in.get(); }))
        tape->leaves_.push_back(in);
    }
  } else {
    node->op = op;
  }
  return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// ops

namespace {

void require_rank_at_least(const Tensor& t, std::size_t r, std::string_view op) {
  if (t.rank() < r)
    throw DimensionError(std::string(op) + ": expected rank ≥ " + std::to_string(r) + ", got " +
                         to_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

// Gradient buffer of an input when it wants one; empty span otherwise.
std::span<double> grad_if(const std::shared_ptr<Node>& n) {
  return n->requires_grad ? n->grad_buffer() : std::span<double>{};
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank_at_least(a, 2, "matmul");
  if (b.rank() != 2 || a.shape().back() != b.dim(0))
    throw DimensionError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                         to_string(b.shape()));
  const std::size_t k = b.dim(0), n = b.dim(1), rows = a.numel() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<double> c(rows * n, 0.0);
  kp::gemm_nn(rows, k, n, a.values(), b.values(), c);
  return record("matmul", std::move(out_shape), std::move(c), {&a, &b},
                [an = a.node(), bn = b.node(), rows, k, n](Node& out) {
                  if (auto ga = grad_if(an); !ga.empty()) kp::gemm_nt(rows, n, k, out.grad, bn->value, ga);
                  if (auto gb = grad_if(bn); !gb.empty()) kp::gemm_tn(k, rows, n, an->value, out.grad, gb);
                });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1)))
    throw DimensionError(std::string("batched_matmul: cannot multiply ") + to_string(a.shape()) +
                         " by " + to_string(b.shape()) + (transpose_b ? "ᵀ" : ""));
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<double> c(batch * m * n, 0.0);
  if (transpose_b)
    kp::batched_gemm_nt(batch, m, k, n, a.values(), b.values(), c);
  else
    kp::batched_gemm_nn(batch, m, k, n, a.values(), b.values(), c);
  return record("batched_matmul", {batch, m, n}, std::move(c), {&a, &b},
                [an = a.node(), bn = b.node(), batch, m, k, n, transpose_b](Node& out) {
                  auto ga = grad_if(an);
                  auto gb = grad_if(bn);
                  if (transpose_b) {
                    if (!ga.empty()) kp::batched_gemm_nn(batch, m, n, k, out.grad, bn->value, ga);
                    if (!gb.empty()) kp::batched_gemm_tn(batch, n, m, k, out.grad, an->value, gb);
                  } else {
                    if (!ga.empty()) kp::batched_gemm_nt(batch, m, n, k, out.grad, bn->value, ga);
                    if (!gb.empty()) kp::batched_gemm_tn(batch, k, m, n, an->value, out.grad, gb);
                  }
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
  return record("add", a.shape(), std::move(v), {&a, &b},
                [an = a.node(), bn = b.node()](Node& out) {
                  for (const auto& in : {an, bn})
                    if (auto g = grad_if(in); !g.empty())
                      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
                });
}

Tensor add_broadcast(const Tensor& a, const Tensor& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.rbegin(), bs.rend(), as.rbegin()))
    throw DimensionError("add_broadcast: " + to_string(bs) + " is not a suffix of " +
                         to_string(as));
  const std::size_t inner = b.numel(), outer = a.numel() / std::max<std::size_t>(inner, 1);
  std::vector<double> v(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t r = 0; r < outer; ++r)
    for (std::size_t j = 0; j < inner; ++j) v[r * inner + j] = av[r * inner + j] + bv[j];
  return record("add_broadcast", as, std::move(v), {&a, &b},
                [an = a.node(), bn = b.node(), inner, outer](Node& out) {
                  if (auto ga = grad_if(an); !ga.empty())
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += out.grad[i];
                  if (auto gb = grad_if(bn); !gb.empty())
                    for (std::size_t r = 0; r < outer; ++r)
                      for (std::size_t j = 0; j < inner; ++j) gb[j] += out.grad[r * inner + j];
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
  return record("mul", a.shape(), std::move(v), {&a, &b},
                [an = a.node(), bn = b.node()](Node& out) {
                  if (auto ga = grad_if(an); !ga.empty())
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += out.grad[i] * bn->value[i];
                  if (auto gb = grad_if(bn); !gb.empty())
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += out.grad[i] * an->value[i];
                });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> v(a.values().begin(), a.values().end());
  for (double& x : v) x *= factor;
  return record("scale", a.shape(), std::move(v), {&a}, [an = a.node(), factor](Node& out) {
    auto g = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * factor;
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  return record("sum", {}, {s}, {&a}, [an = a.node()](Node& out) {
    auto g = an->grad_buffer();
    for (double& x : g) x += out.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean of an empty tensor");
  double s = 0.0;
  for (double x : a.values()) s += x;
  const double inv = 1.0 / static_cast<double>(a.numel());
  return record("mean", {}, {s * inv}, {&a}, [an = a.node(), inv](Node& out) {
    auto g = an->grad_buffer();
    for (double& x : g) x += out.grad[0] * inv;
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  require_rank_at_least(x, 1, "softmax_lastdim");
  const std::size_t n = x.shape().back();
  if (n == 0) throw DimensionError("softmax_lastdim: empty last axis");
  const std::size_t rows = x.numel() / n;
  std::vector<double> y(x.numel());
  kp::softmax_rows(rows, n, x.values(), y);
  return record("softmax_lastdim", x.shape(), std::move(y), {&x},
                [xn = x.node(), rows, n](Node& out) {
                  kp::softmax_backward_rows(rows, n, out.value, out.grad, xn->grad_buffer());
                });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank_at_least(x, 1, "layer_norm");
  const std::size_t d = x.shape().back();
  if (d == 0 || gamma.shape() != Shape{d} || beta.shape() != Shape{d})
    throw DimensionError("layer_norm: input " + to_string(x.shape()) + " with gamma " +
                         to_string(gamma.shape()) + " and beta " + to_string(beta.shape()));
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  std::vector<double> y(x.numel()), mu(rows), rstd(rows);
  kp::layer_norm_rows(rows, d, x.values(), gamma.values(), beta.values(), eps, y, mu, rstd);
  return record("layer_norm", x.shape(), std::move(y), {&x, &gamma, &beta},
                [xn = x.node(), gn = gamma.node(), bn = beta.node(), rows, d, mu = std::move(mu),
                 rstd = std::move(rstd)](Node& out) {
                  std::vector<double> scratch_x, scratch_g, scratch_b;
                  auto pick = [](const std::shared_ptr<Node>& n, std::vector<double>& scratch,
                                 std::size_t size) -> std::span<double> {
                    if (n->requires_grad) return n->grad_buffer();
                    scratch.assign(size, 0.0);
                    return scratch;
                  };
                  kp::layer_norm_backward_rows(rows, d, xn->value, gn->value, mu, rstd, out.grad,
                                               pick(xn, scratch_x, xn->value.size()),
                                               pick(gn, scratch_g, d), pick(bn, scratch_b, d));
                });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> y(x.numel());
  kp::gelu(x.values(), y);
  return record("gelu", x.shape(), std::move(y), {&x}, [xn = x.node()](Node& out) {
    kp::gelu_backward(xn->value, out.grad, xn->grad_buffer());
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  if (x.rank() != 2) throw DimensionError("gather_rows: expected a matrix, got " + to_string(x.shape()));
  const std::size_t p = x.dim(0), d = x.dim(1);
  for (std::size_t idx : indices)
    if (idx >= p)
      throw IndexError("gather_rows: row " + std::to_string(idx) + " out of range for " +
                       std::to_string(p) + " rows");
  std::vector<std::size_t> rows(indices.begin(), indices.end());
  std::vector<double> v(rows.size() * d);
  const auto xv = x.values();
  for (std::size_t t = 0; t < rows.size(); ++t)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[t] * d), d,
                v.begin() + static_cast<std::ptrdiff_t>(t * d));
  const std::size_t k = rows.size();
  return record("gather_rows", {k, d}, std::move(v), {&x},
                [xn = x.node(), rows = std::move(rows), d](Node& out) {
                  auto g = xn->grad_buffer();
                  for (std::size_t t = 0; t < rows.size(); ++t)
                    for (std::size_t j = 0; j < d; ++j) g[rows[t] * d + j] += out.grad[t * d + j];
                });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& indices) {
  if (x.rank() != 3)
    throw DimensionError("gather_rows: expected [B, p, d], got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), p = x.dim(1), d = x.dim(2);
  if (indices.size() != batch)
    throw DimensionError("gather_rows: " + std::to_string(indices.size()) +
                         " index lists for batch of " + std::to_string(batch));
  const std::size_t k = batch ? indices[0].size() : 0;
  for (const auto& list : indices) {
    if (list.size() != k) throw DimensionError("gather_rows: ragged index lists");
    for (std::size_t idx : list)
      if (idx >= p)
        throw IndexError("gather_rows: row " + std::to_string(idx) + " out of range for " +
                         std::to_string(p) + " rows");
  }
  std::vector<double> v(batch * k * d);
  const auto xv = x.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < k; ++t)
      std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((b * p + indices[b][t]) * d), d,
                  v.begin() + static_cast<std::ptrdiff_t>((b * k + t) * d));
  return record("gather_rows", {batch, k, d}, std::move(v), {&x},
                [xn = x.node(), indices, batch, p, k, d](Node& out) {
                  auto g = xn->grad_buffer();
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t t = 0; t < k; ++t) {
                      double* dst = g.data() + (b * p + indices[b][t]) * d;
                      const double* src = out.grad.data() + (b * k + t) * d;
                      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                    }
                });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_rank_at_least(a, 2, "concat_rows");
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != bs.size() || as.back() != bs.back() ||
      !std::equal(as.begin(), as.end() - 2, bs.begin()))
    throw DimensionError("concat_rows: cannot stack " + to_string(as) + " on " + to_string(bs));
  const std::size_t d = as.back(), m = as[as.size() - 2], n = bs[bs.size() - 2];
  const std::size_t outer = a.numel() / (m * d);
  Shape shape = as;
  shape[shape.size() - 2] = m + n;
  std::vector<double> v(outer * (m + n) * d);
  const auto av = a.values(), bv = b.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(o * m * d), m * d,
                v.begin() + static_cast<std::ptrdiff_t>(o * (m + n) * d));
    std::copy_n(bv.begin() + static_cast<std::ptrdiff_t>(o * n * d), n * d,
                v.begin() + static_cast<std::ptrdiff_t>((o * (m + n) + m) * d));
  }
  return record("concat_rows", std::move(shape), std::move(v), {&a, &b},
                [an = a.node(), bn = b.node(), outer, m, n, d](Node& out) {
                  if (auto ga = grad_if(an); !ga.empty())
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t i = 0; i < m * d; ++i)
                        ga[o * m * d + i] += out.grad[o * (m + n) * d + i];
                  if (auto gb = grad_if(bn); !gb.empty())
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t i = 0; i < n * d; ++i)
                        gb[o * n * d + i] += out.grad[(o * (m + n) + m) * d + i];
                });
}

Tensor repeat_batch(const Tensor& a, std::size_t n) {
  Shape shape{n};
  shape.insert(shape.end(), a.shape().begin(), a.shape().end());
  const std::size_t inner = a.numel();
  std::vector<double> v(n * inner);
  for (std::size_t r = 0; r < n; ++r)
    std::copy(a.values().begin(), a.values().end(), v.begin() + static_cast<std::ptrdiff_t>(r * inner));
  return record("repeat_batch", std::move(shape), std::move(v), {&a},
                [an = a.node(), n, inner](Node& out) {
                  auto g = an->grad_buffer();
                  for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t j = 0; j < inner; ++j) g[j] += out.grad[r * inner + j];
                });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (ad::numel(shape) != a.numel())
    throw DimensionError("reshape: " + to_string(a.shape()) + " to " + to_string(shape));
  std::vector<double> v(a.values().begin(), a.values().end());
  return record("reshape", std::move(shape), std::move(v), {&a}, [an = a.node()](Node& out) {
    auto g = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
  });
}

Tensor cross_entropy_logits(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || logits.dim(0) == 0)
    throw DimensionError("cross_entropy_logits: logits " + to_string(logits.shape()) + " with " +
                         std::to_string(labels.size()) + " labels");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::vector<double> probs(b * c);
  kp::softmax_rows(b, c, logits.values(), probs);
  const auto z = logits.values();
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= c)
      throw IndexError("cross_entropy_logits: label " + std::to_string(labels[i]) +
                       " out of range for " + std::to_string(c) + " classes");
    const double* row = z.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    total += mx + std::log(s) - row[labels[i]];
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return record("cross_entropy_logits", {}, {total * inv_b}, {&logits},
                [ln = logits.node(), probs = std::move(probs), lab = std::move(lab), b, c,
                 inv_b](Node& out) {
                  auto g = ln->grad_buffer();
                  const double scale_by = out.grad[0] * inv_b;
                  for (std::size_t i = 0; i < b; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                      g[i * c + j] +=
                          scale_by * (probs[i * c + j] - (j == lab[i] ? 1.0 : 0.0));
                });
}

Tensor sign(const Tensor& x) {
  std::vector<double> v(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((xv[i] > 0.0) - (xv[i] < 0.0));
  return Tensor::constant(x.shape(), std::move(v));
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lower bound above upper bound");
  std::vector<double> v(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(xv[i], lo, hi);
  return record("clamp", x.shape(), std::move(v), {&x}, [xn = x.node(), lo, hi](Node& out) {
    auto g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xn->value[i] >= lo && xn->value[i] <= hi) g[i] += out.grad[i];
  });
}

Tensor patchify(const Tensor& images, std::size_t patch_size) {
  const bool batched = images.rank() == 4;
  if (!batched && images.rank() != 3)
    throw DimensionError("patchify: expected [C, H, W] or [B, C, H, W], got " +
                         to_string(images.shape()));
  const std::size_t off = batched ? 1 : 0;
  const std::size_t batch = batched ? images.dim(0) : 1;
  const std::size_t ch = images.dim(off), h = images.dim(off + 1), w = images.dim(off + 2);
  if (patch_size == 0 || h != w || h % patch_size != 0)
    throw ConfigError("patchify: image " + to_string(images.shape()) +
                      " is not square or not divisible by patch size " + std::to_string(patch_size));
  const std::size_t grid = h / patch_size, patches = grid * grid;
  const std::size_t cols = ch * patch_size * patch_size, per_image = ch * h * w;
  // source offset (within one image) for each output element of one image
  std::vector<std::size_t> src(per_image);
  for (std::size_t gy = 0; gy < grid; ++gy)
    for (std::size_t gx = 0; gx < grid; ++gx)
      for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t ry = 0; ry < patch_size; ++ry)
          for (std::size_t rx = 0; rx < patch_size; ++rx) {
            const std::size_t row = gy * grid + gx;
            const std::size_t col = (c * patch_size + ry) * patch_size + rx;
            src[row * cols + col] = (c * h + gy * patch_size + ry) * w + gx * patch_size + rx;
          }
  std::vector<double> v(batch * per_image);
  const auto iv = images.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < per_image; ++i) v[b * per_image + i] = iv[b * per_image + src[i]];
  Shape shape = batched ? Shape{batch, patches, cols} : Shape{patches, cols};
  return record("patchify", std::move(shape), std::move(v), {&images},
                [in = images.node(), src = std::move(src), batch, per_image](Node& out) {
                  auto g = in->grad_buffer();
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t i = 0; i < per_image; ++i)
                      g[b * per_image + src[i]] += out.grad[b * per_image + i];
                });
}

Tensor split_heads(const Tensor& x, std::size_t heads, std::size_t offset, std::size_t width) {
  if (x.rank() != 3 || heads == 0 || width % heads != 0 || offset + width > x.dim(2))
    throw DimensionError("split_heads: cannot take columns [" + std::to_string(offset) + ", " +
                         std::to_string(offset + width) + ") as " + std::to_string(heads) +
                         " heads of " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), p = x.dim(1), total = x.dim(2), hd = width / heads;
  std::vector<double> v(batch * heads * p * hd);
  const auto xv = x.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < p; ++i)
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((b * p + i) * total + offset + h * hd),
                    hd, v.begin() + static_cast<std::ptrdiff_t>(((b * heads + h) * p + i) * hd));
  return record("split_heads", {batch * heads, p, hd}, std::move(v), {&x},
                [xn = x.node(), batch, heads, p, total, offset, hd](Node& out) {
                  auto g = xn->grad_buffer();
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t h = 0; h < heads; ++h)
                      for (std::size_t i = 0; i < p; ++i) {
                        double* dst = g.data() + (b * p + i) * total + offset + h * hd;
                        const double* src = out.grad.data() + ((b * heads + h) * p + i) * hd;
                        for (std::size_t j = 0; j < hd; ++j) dst[j] += src[j];
                      }
                });
}

Tensor merge_heads(const Tensor& x, std::size_t heads) {
  if (x.rank() != 3 || heads == 0 || x.dim(0) % heads != 0)
    throw DimensionError("merge_heads: " + to_string(x.shape()) + " with " +
                         std::to_string(heads) + " heads");
  const std::size_t batch = x.dim(0) / heads, p = x.dim(1), hd = x.dim(2), d = heads * hd;
  std::vector<double> v(batch * p * d);
  const auto xv = x.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < p; ++i)
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(((b * heads + h) * p + i) * hd), hd,
                    v.begin() + static_cast<std::ptrdiff_t>((b * p + i) * d + h * hd));
  return record("merge_heads", {batch, p, d}, std::move(v), {&x},
                [xn = x.node(), batch, heads, p, hd, d](Node& out) {
                  auto g = xn->grad_buffer();
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t h = 0; h < heads; ++h)
                      for (std::size_t i = 0; i < p; ++i) {
                        double* dst = g.data() + ((b * heads + h) * p + i) * hd;
                        const double* src = out.grad.data() + (b * p + i) * d + h * hd;
                        for (std::size_t j = 0; j < hd; ++j) dst[j] += src[j];
                      }
                });
}

Tensor add_attention_bias(const Tensor& scores, const Tensor& bias,
                          const std::vector<std::vector<std::size_t>>& live) {
  if (scores.rank() != 3 || bias.rank() != 3 || scores.dim(1) != scores.dim(2) ||
      bias.dim(1) != bias.dim(2) || live.empty() || scores.dim(0) != live.size() * bias.dim(0))
    throw DimensionError("add_attention_bias: scores " + to_string(scores.shape()) + " with bias " +
                         to_string(bias.shape()));
  const std::size_t heads = bias.dim(0), max_len = bias.dim(1), p = scores.dim(1);
  for (const auto& pos : live) {
    if (pos.size() != p) throw DimensionError("add_attention_bias: live list length mismatch");
    for (std::size_t q : pos)
      if (q >= max_len) throw IndexError("add_attention_bias: position out of range");
  }
  std::vector<double> v(scores.values().begin(), scores.values().end());
  const auto bv = bias.values();
  for (std::size_t b = 0; b < live.size(); ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t q = 0; q < p; ++q)
        for (std::size_t k = 0; k < p; ++k)
          v[((b * heads + h) * p + q) * p + k] +=
              bv[(h * max_len + live[b][q]) * max_len + live[b][k]];
  return record("add_attention_bias", scores.shape(), std::move(v), {&scores, &bias},
                [sn = scores.node(), bn = bias.node(), live, heads, max_len, p](Node& out) {
                  if (auto gs = grad_if(sn); !gs.empty())
                    for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += out.grad[i];
                  if (auto gb = grad_if(bn); !gb.empty())
                    for (std::size_t b = 0; b < live.size(); ++b)
                      for (std::size_t h = 0; h < heads; ++h)
                        for (std::size_t q = 0; q < p; ++q)
                          for (std::size_t k = 0; k < p; ++k)
                            gb[(h * max_len + live[b][q]) * max_len + live[b][k]] +=
                                out.grad[((b * heads + h) * p + q) * p + k];
                });
}

}  // namespace agat::ad
