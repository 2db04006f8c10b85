// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/vit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "agat/error.hpp"

namespace agat {

void ModelConfig::validate() const {
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0)
    throw ConfigError("image_size " + std::to_string(image_size) +
                      " is not divisible by patch_size " + std::to_string(patch_size));
  if (channels == 0) throw ConfigError("channels must be positive");
  if (dim == 0 || heads == 0 || dim % heads != 0)
    throw ConfigError("dim " + std::to_string(dim) + " is not divisible by heads " +
                      std::to_string(heads));
  if (depth == 0) throw ConfigError("depth must be at least 1");
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (!(attn_dropout_rate >= 0.0 && attn_dropout_rate < 1.0))
    throw ConfigError("attn_dropout_rate must lie in [0, 1)");
}

std::vector<std::pair<std::string, ad::Shape>> param_shapes(const ModelConfig& cfg) {
  const std::size_t d = cfg.dim, seq = cfg.seq_len();
  std::vector<std::pair<std::string, ad::Shape>> s{
      {"patch_embed", {cfg.patch_dim(), d}},
      {"pos_embed", {seq, d}},
      {"class_token", {d}},
  };
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const std::string p = "blocks." + std::to_string(l) + ".";
    s.push_back({p + "norm1.gamma", {d}});
    s.push_back({p + "norm1.beta", {d}});
    s.push_back({p + "qkv", {d, 3 * d}});
    if (cfg.use_attn_bias) s.push_back({p + "attn_bias", {cfg.heads, seq, seq}});
    s.push_back({p + "proj", {d, d}});
    s.push_back({p + "norm2.gamma", {d}});
    s.push_back({p + "norm2.beta", {d}});
    s.push_back({p + "fc1", {d, cfg.hidden_dim()}});
    s.push_back({p + "fc2", {cfg.hidden_dim(), d}});
  }
  s.push_back({"norm.gamma", {d}});
  s.push_back({"norm.beta", {d}});
  s.push_back({"head", {d, cfg.num_classes}});
  return s;
}

namespace {

std::vector<ad::Tensor*> slots(Params& p, bool with_bias) {
  std::vector<ad::Tensor*> out{&p.patch_embed, &p.pos_embed, &p.class_token};
  for (auto& b : p.blocks) {
    out.insert(out.end(), {&b.norm1_gamma, &b.norm1_beta, &b.qkv});
    if (with_bias) out.push_back(&b.attn_bias);
    out.insert(out.end(), {&b.proj, &b.norm2_gamma, &b.norm2_beta, &b.fc1, &b.fc2});
  }
  out.insert(out.end(), {&p.norm_gamma, &p.norm_beta, &p.head});
  return out;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Params Params::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Params p;
  p.blocks.resize(cfg.depth);
  const auto shapes = param_shapes(cfg);
  const auto targets = slots(p, cfg.use_attn_bias);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& [name, shape] = shapes[i];
    std::vector<double> v(ad::numel(shape));
    if (name == "class_token" || name == "pos_embed") {
      for (double& x : v) x = normal(rng, 0.0, 0.02);
    } else if (ends_with(name, ".gamma")) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (ends_with(name, ".beta") || ends_with(name, "attn_bias")) {
      // zeros
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      for (double& x : v) x = uniform(rng, -bound, bound);
    }
    *targets[i] = ad::Tensor::parameter(shape, std::move(v));
  }
  return p;
}

Params Params::from_named(const ModelConfig& cfg, const std::vector<NamedTensor>& tensors) {
  cfg.validate();
  const auto shapes = param_shapes(cfg);
  if (tensors.size() != shapes.size())
    throw DimensionError("expected " + std::to_string(shapes.size()) + " parameter tensors, got " +
                         std::to_string(tensors.size()));
  Params p;
  p.blocks.resize(cfg.depth);
  const auto targets = slots(p, cfg.use_attn_bias);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& [name, shape] = shapes[i];
    if (tensors[i].first != name)
      throw DimensionError("parameter " + std::to_string(i) + " is '" + tensors[i].first +
                           "', expected '" + name + "'");
    if (tensors[i].second.shape() != shape)
      throw DimensionError("parameter '" + name + "' has shape " +
                           ad::to_string(tensors[i].second.shape()) + ", expected " +
                           ad::to_string(shape));
    *targets[i] = tensors[i].second;
  }
  return p;
}

std::vector<NamedTensor> Params::named() const {
  std::vector<NamedTensor> out{
      {"patch_embed", patch_embed}, {"pos_embed", pos_embed}, {"class_token", class_token}};
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::string pre = "blocks." + std::to_string(l) + ".";
    const BlockParams& b = blocks[l];
    out.emplace_back(pre + "norm1.gamma", b.norm1_gamma);
    out.emplace_back(pre + "norm1.beta", b.norm1_beta);
    out.emplace_back(pre + "qkv", b.qkv);
    if (b.attn_bias.defined()) out.emplace_back(pre + "attn_bias", b.attn_bias);
    out.emplace_back(pre + "proj", b.proj);
    out.emplace_back(pre + "norm2.gamma", b.norm2_gamma);
    out.emplace_back(pre + "norm2.beta", b.norm2_beta);
    out.emplace_back(pre + "fc1", b.fc1);
    out.emplace_back(pre + "fc2", b.fc2);
  }
  out.emplace_back("norm.gamma", norm_gamma);
  out.emplace_back("norm.beta", norm_beta);
  out.emplace_back("head", head);
  return out;
}

Params Params::detached() const {
  Params copy = *this;
  const bool with_bias = !copy.blocks.empty() && copy.blocks.front().attn_bias.defined();
  for (ad::Tensor* t : slots(copy, with_bias)) *t = t->detach();
  return copy;
}

// ---------------------------------------------------------------------------

ad::Tensor embed(const ModelConfig& cfg, const Params& params, const ad::Tensor& patches) {
  const bool single = patches.rank() == 2;
  const ad::Tensor batched =
      single ? ad::reshape(patches, {1, patches.dim(0), patches.dim(1)}) : patches;
  if (batched.rank() != 3 || batched.dim(1) != cfg.num_patches() || batched.dim(2) != cfg.patch_dim())
    throw DimensionError("embed: patches " + ad::to_string(patches.shape()) + " do not match " +
                         std::to_string(cfg.num_patches()) + " patches of width " +
                         std::to_string(cfg.patch_dim()));
  const std::size_t batch = batched.dim(0);
  const ad::Tensor tokens = ad::matmul(batched, params.patch_embed);
  const ad::Tensor cls =
      ad::repeat_batch(ad::reshape(params.class_token, {1, cfg.dim}), batch);
  ad::Tensor x = ad::add_broadcast(ad::concat_rows(cls, tokens), params.pos_embed);
  return single ? ad::reshape(x, {cfg.seq_len(), cfg.dim}) : x;
}

MsaOutput msa_forward(const ModelConfig& cfg, const BlockParams& block, const ad::Tensor& x,
                      const std::vector<std::vector<std::size_t>>& live, const RowSelector& select,
                      AttentionDropout dropout) {
  if (x.rank() != 3 || x.dim(2) != cfg.dim)
    throw DimensionError("msa_forward: input " + ad::to_string(x.shape()) + " for dim " +
                         std::to_string(cfg.dim));
  const std::size_t batch = x.dim(0), p = x.dim(1), d = cfg.dim, h = cfg.heads;

  const ad::Tensor normed = ad::layer_norm(x, block.norm1_gamma, block.norm1_beta, kLayerNormEps);
  const ad::Tensor qkv = ad::matmul(normed, block.qkv);
  const ad::Tensor q = ad::split_heads(qkv, h, 0, d);
  const ad::Tensor k = ad::split_heads(qkv, h, d, d);
  const ad::Tensor v = ad::split_heads(qkv, h, 2 * d, d);

  ad::Tensor scores = ad::scale(ad::batched_matmul(q, k, /*transpose_b=*/true),
                                1.0 / std::sqrt(static_cast<double>(cfg.head_dim())));
  if (block.attn_bias.defined()) scores = ad::add_attention_bias(scores, block.attn_bias, live);
  ad::Tensor attn = ad::softmax_lastdim(scores);
  if (dropout.active()) {
    std::vector<double> mask(attn.numel());
    const double survive = 1.0 / (1.0 - dropout.rate);
    for (double& m : mask) m = uniform01(*dropout.rng) < dropout.rate ? 0.0 : survive;
    attn = ad::mul(attn, ad::Tensor::constant(attn.shape(), std::move(mask)));
  }

  ad::Tensor mixed = ad::merge_heads(ad::batched_matmul(attn, v), h);
  ad::Tensor residual = x;
  MsaOutput result;
  if (select) {
    const auto av = attn.values();
    result.kept.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      auto rows = select(av.subspan(b * h * p * p, h * p * p));
      if (rows.empty() || rows.front() != 0)
        throw IndexError("msa_forward: kept rows must start with the class token");
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i] >= p || (i > 0 && rows[i] <= rows[i - 1]))
          throw IndexError("msa_forward: kept rows must be strictly increasing and below " +
                           std::to_string(p));
      if (b > 0 && rows.size() != result.kept.front().size())
        throw IndexError("msa_forward: every example must keep the same number of rows");
      result.kept.push_back(std::move(rows));
    }
    mixed = ad::gather_rows(mixed, result.kept);
    residual = ad::gather_rows(x, result.kept);
  } else {
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), std::size_t{0});
    result.kept.assign(batch, all);
  }
  result.out = ad::add(residual, ad::matmul(mixed, block.proj));
  result.attention = std::move(attn);
  return result;
}

ad::Tensor mlp_forward(const BlockParams& block, const ad::Tensor& x) {
  const ad::Tensor normed = ad::layer_norm(x, block.norm2_gamma, block.norm2_beta, kLayerNormEps);
  const ad::Tensor hidden = ad::gelu(ad::matmul(normed, block.fc1));
  return ad::add(x, ad::matmul(hidden, block.fc2));
}

ForwardTrace forward(const ModelConfig& cfg, const Params& params, const ad::Tensor& images,
                     const DropPolicy& policy, Mode mode, Rng& rng) {
  if (images.rank() != 4 || images.dim(1) != cfg.channels || images.dim(2) != cfg.image_size ||
      images.dim(3) != cfg.image_size)
    throw DimensionError("forward: images " + ad::to_string(images.shape()) + " do not match [B, " +
                         std::to_string(cfg.channels) + ", " + std::to_string(cfg.image_size) +
                         ", " + std::to_string(cfg.image_size) + "]");
  const bool train = mode == Mode::train;
  const std::size_t batch = images.dim(0);

  ad::Tensor x = embed(cfg, params, ad::patchify(images, cfg.patch_size));

  std::vector<std::size_t> all(cfg.seq_len());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> live(batch, all);

  if (train && policy.kind == DropPolicy::Kind::random_input && policy.rate > 0.0) {
    for (auto& rows : live) rows = random_input_drop(cfg.num_patches(), policy.rate, rng);
    x = ad::gather_rows(x, live);
  }

  const bool guided = train && policy.kind == DropPolicy::Kind::attention_guided;
  const double keep = policy.keep;
  const std::size_t h = cfg.heads;
  AttentionDropout dropout;
  if (train && cfg.attn_dropout_rate > 0.0) dropout = {cfg.attn_dropout_rate, &rng};

  ForwardTrace trace;
  trace.blocks.reserve(cfg.depth);
  for (const BlockParams& block : params.blocks) {
    const std::size_t p = x.dim(1);
    RowSelector select;
    if (guided) {
      const std::size_t k = layer_keep_count(p, keep);
      select = [h, p, k](std::span<const double> attention) {
        return select_kept(influence_scores(attention, h, p), k);
      };
    }
    MsaOutput msa = msa_forward(cfg, block, x, live, select, dropout);
    for (std::size_t b = 0; b < batch; ++b) {
      std::vector<std::size_t> positions;
      positions.reserve(msa.kept[b].size());
      for (std::size_t row : msa.kept[b]) positions.push_back(live[b][row]);
      live[b] = std::move(positions);
    }
    x = mlp_forward(block, msa.out);
    trace.blocks.push_back({p, std::move(msa.attention), live});
  }

  const std::vector<std::vector<std::size_t>> cls_row(batch, std::vector<std::size_t>{0});
  const ad::Tensor cls = ad::reshape(ad::gather_rows(x, cls_row), {batch, cfg.dim});
  trace.logits =
      ad::matmul(ad::layer_norm(cls, params.norm_gamma, params.norm_beta, kLayerNormEps), params.head);
  return trace;
}

std::vector<std::size_t> argmax_rows(const ad::Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("argmax_rows: expected a matrix");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  std::vector<std::size_t> out(rows);
  const auto v = logits.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * cols;
    out[r] = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
  }
  return out;
}

}  // namespace agat
