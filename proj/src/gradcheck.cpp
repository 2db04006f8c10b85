// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "agat/autodiff.hpp"
#include "agat/error.hpp"
#include "agat/random.hpp"
#include "agat/vit.hpp"

namespace agat {
namespace {

using ad::Shape;
using ad::Tensor;
using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

struct Input {
  Shape shape;
  std::vector<double> values;
};

struct Instance {
  std::vector<Input> inputs;
  Fn fn;
};

using Builder = std::function<Instance(Rng&)>;

struct Case {
  std::string name;
  Builder build;
};

Input randn(Shape shape, Rng& rng, double sd = 1.0) {
  Input in{std::move(shape), {}};
  in.values.resize(ad::numel(in.shape));
  for (double& v : in.values) v = normal(rng, 0.0, sd);
  return in;
}

/// Values in [lo, hi] kept `margin` away from `a` and `b`, so kinks at those
/// points never fall between finite-difference probes.
Input away_from(Shape shape, Rng& rng, double lo, double hi, double a, double b, double margin) {
  Input in{std::move(shape), {}};
  in.values.resize(ad::numel(in.shape));
  for (double& v : in.values) {
    do {
      v = uniform(rng, lo, hi);
    } while (std::abs(v - a) < margin || std::abs(v - b) < margin);
  }
  return in;
}

std::vector<std::size_t> sorted_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  shuffle(std::span(all), rng);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

/// Identity forward whose backward scales the gradient: a broken rule.
Tensor corrupt_backward(const Tensor& x) {
  return ad::record("corrupt", x.shape(), {x.values().begin(), x.values().end()}, {&x},
                    [xn = x.node()](ad::Node& out) {
                      auto g = xn->grad_buffer();
                      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 1.1 * out.grad[i];
                    });
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.channels = 1;
  c.dim = 16;
  c.heads = 2;
  c.depth = 2;
  c.mlp_ratio = 4;
  c.num_classes = 3;
  c.use_attn_bias = true;
  return c;
}

Builder vit_case(DropPolicy policy, Mode mode) {
  return [policy, mode](Rng& rng) {
    const ModelConfig cfg = tiny_model();
    const Params init = Params::init(cfg, rng());
    Instance inst;
    std::vector<std::string> names;
    for (const auto& [name, t] : init.named()) {
      Input in{t.shape(), {t.values().begin(), t.values().end()}};
      // LayerNorm scales and the attention bias start at constants; spread them
      if (name.find("gamma") != std::string::npos || name.find("beta") != std::string::npos ||
          name.find("attn_bias") != std::string::npos)
        for (double& v : in.values) v += normal(rng, 0.0, 0.1);
      inst.inputs.push_back(std::move(in));
      names.push_back(name);
    }
    inst.inputs.push_back(away_from({2, 1, 8, 8}, rng, 0.0, 1.0, -1.0, -1.0, 0.0));
    const std::uint64_t stream = rng();
    inst.fn = [cfg, names, policy, mode, stream](const std::vector<Tensor>& xs) {
      std::vector<NamedTensor> named;
      for (std::size_t i = 0; i < names.size(); ++i) named.emplace_back(names[i], xs[i]);
      const Params p = Params::from_named(cfg, named);
      Rng local(stream);  // identical drop decisions on every evaluation
      return forward(cfg, p, xs.back(), policy, mode, local).logits;
    };
    return inst;
  };
}

std::vector<Case> build_cases() {
  std::vector<Case> cases;
  auto add = [&](std::string name, Builder b) { cases.push_back({std::move(name), std::move(b)}); };

  add("matmul", [](Rng& r) {
    return Instance{{randn({2, 3, 4}, r), randn({4, 5}, r)},
                    [](const std::vector<Tensor>& x) { return ad::matmul(x[0], x[1]); }};
  });
  add("batched_matmul", [](Rng& r) {
    return Instance{{randn({3, 2, 4}, r), randn({3, 4, 5}, r)},
                    [](const std::vector<Tensor>& x) { return ad::batched_matmul(x[0], x[1]); }};
  });
  add("batched_matmul_transposed", [](Rng& r) {
    return Instance{{randn({3, 2, 4}, r), randn({3, 5, 4}, r)}, [](const std::vector<Tensor>& x) {
                      return ad::batched_matmul(x[0], x[1], true);
                    }};
  });
  add("add", [](Rng& r) {
    return Instance{{randn({3, 4}, r), randn({3, 4}, r)},
                    [](const std::vector<Tensor>& x) { return ad::add(x[0], x[1]); }};
  });
  add("add_broadcast", [](Rng& r) {
    return Instance{{randn({2, 3, 4}, r), randn({4}, r)},
                    [](const std::vector<Tensor>& x) { return ad::add_broadcast(x[0], x[1]); }};
  });
  add("mul", [](Rng& r) {
    return Instance{{randn({3, 4}, r), randn({3, 4}, r)},
                    [](const std::vector<Tensor>& x) { return ad::mul(x[0], x[1]); }};
  });
  add("scale", [](Rng& r) {
    const double f = normal(r, 0.0, 2.0);
    return Instance{{randn({3, 4}, r)}, [f](const std::vector<Tensor>& x) { return ad::scale(x[0], f); }};
  });
  add("sum", [](Rng& r) {
    return Instance{{randn({3, 4}, r)}, [](const std::vector<Tensor>& x) { return ad::sum(x[0]); }};
  });
  add("mean", [](Rng& r) {
    return Instance{{randn({3, 4}, r)}, [](const std::vector<Tensor>& x) { return ad::mean(x[0]); }};
  });
  add("softmax_lastdim", [](Rng& r) {
    return Instance{{randn({2, 3, 5}, r, 2.0)},
                    [](const std::vector<Tensor>& x) { return ad::softmax_lastdim(x[0]); }};
  });
  add("layer_norm", [](Rng& r) {
    return Instance{{randn({4, 6}, r), randn({6}, r), randn({6}, r)}, [](const std::vector<Tensor>& x) {
                      return ad::layer_norm(x[0], x[1], x[2], kLayerNormEps);
                    }};
  });
  add("gelu", [](Rng& r) {
    return Instance{{randn({4, 5}, r, 2.0)}, [](const std::vector<Tensor>& x) { return ad::gelu(x[0]); }};
  });
  add("gather_rows", [](Rng& r) {
    auto rows = sorted_subset(6, 1 + uniform_index(r, 6), r);
    return Instance{{randn({6, 3}, r)},
                    [rows](const std::vector<Tensor>& x) { return ad::gather_rows(x[0], rows); }};
  });
  add("gather_rows_batched", [](Rng& r) {
    const std::size_t k = 1 + uniform_index(r, 5);
    std::vector<std::vector<std::size_t>> rows{sorted_subset(5, k, r), sorted_subset(5, k, r)};
    return Instance{{randn({2, 5, 3}, r)},
                    [rows](const std::vector<Tensor>& x) { return ad::gather_rows(x[0], rows); }};
  });
  add("concat_rows", [](Rng& r) {
    return Instance{{randn({2, 3, 4}, r), randn({2, 2, 4}, r)},
                    [](const std::vector<Tensor>& x) { return ad::concat_rows(x[0], x[1]); }};
  });
  add("repeat_batch", [](Rng& r) {
    return Instance{{randn({3, 4}, r)},
                    [](const std::vector<Tensor>& x) { return ad::repeat_batch(x[0], 3); }};
  });
  add("reshape", [](Rng& r) {
    return Instance{{randn({2, 6}, r)},
                    [](const std::vector<Tensor>& x) { return ad::reshape(x[0], {3, 4}); }};
  });
  add("cross_entropy_logits", [](Rng& r) {
    std::vector<std::size_t> labels(4);
    for (auto& l : labels) l = uniform_index(r, 5);
    return Instance{{randn({4, 5}, r, 2.0)}, [labels](const std::vector<Tensor>& x) {
                      return ad::cross_entropy_logits(x[0], labels);
                    }};
  });
  add("clamp", [](Rng& r) {
    return Instance{{away_from({4, 5}, r, -0.5, 1.5, 0.0, 1.0, 1e-3)},
                    [](const std::vector<Tensor>& x) { return ad::clamp(x[0], 0.0, 1.0); }};
  });
  add("sign", [](Rng& r) {
    // constant output: the reduction adds x so the checked gradient is all ones
    return Instance{{away_from({4, 5}, r, -1.0, 1.0, 0.0, 0.0, 1e-3)}, [](const std::vector<Tensor>& x) {
                      return ad::add(ad::sign(x[0]), x[0]);
                    }};
  });
  add("patchify", [](Rng& r) {
    return Instance{{randn({2, 3, 4, 4}, r)},
                    [](const std::vector<Tensor>& x) { return ad::patchify(x[0], 2); }};
  });
  add("split_heads", [](Rng& r) {
    return Instance{{randn({2, 3, 12}, r)},
                    [](const std::vector<Tensor>& x) { return ad::split_heads(x[0], 2, 4, 4); }};
  });
  add("merge_heads", [](Rng& r) {
    return Instance{{randn({4, 3, 2}, r)},
                    [](const std::vector<Tensor>& x) { return ad::merge_heads(x[0], 2); }};
  });
  add("add_attention_bias", [](Rng& r) {
    std::vector<std::vector<std::size_t>> live{sorted_subset(5, 3, r), sorted_subset(5, 3, r)};
    return Instance{{randn({4, 3, 3}, r), randn({2, 5, 5}, r)}, [live](const std::vector<Tensor>& x) {
                      return ad::add_attention_bias(x[0], x[1], live);
                    }};
  });
  add("vit_eval", vit_case(DropPolicy::none(), Mode::eval));
  add("vit_train_agat", vit_case(DropPolicy::attention_guided(0.7), Mode::train));
  add("vit_train_random", vit_case(DropPolicy::random_input(0.5), Mode::train));
  return cases;
}

Tensor reduce(const Tensor& out, const std::vector<double>& weights) {
  return ad::sum(ad::mul(out, Tensor::constant(out.shape(), weights)));
}

std::vector<Tensor> constants(const std::vector<Input>& inputs) {
  std::vector<Tensor> xs;
  for (const auto& in : inputs) xs.push_back(Tensor::constant(in.shape, in.values));
  return xs;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / denom;
}

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

std::string GradcheckReport::to_text() const {
  std::ostringstream os;
  os.setf(std::ios::scientific);
  os.precision(3);
  for (const auto& e : entries)
    os << "gradcheck " << e.op << " max_rel_error=" << e.max_rel_error << " probes=" << e.probes
       << (e.passed ? " ok" : " FAIL") << "\n";
  os << "gradcheck threshold=" << threshold << (passed() ? " all ok" : " FAILED") << "\n";
  return os.str();
}

std::vector<std::string> gradcheck_cases() {
  std::vector<std::string> names;
  for (const auto& c : build_cases()) names.push_back(c.name);
  return names;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.seeds < 1) throw ConfigError("gradcheck needs at least one seed");
  if (!(options.step > 0.0)) throw ConfigError("gradcheck step must be positive");
  const auto cases = build_cases();
  if (!options.corrupt.empty() &&
      std::none_of(cases.begin(), cases.end(), [&](const Case& c) { return c.name == options.corrupt; }))
    throw ConfigError("gradcheck: unknown case '" + options.corrupt + "'");

  GradcheckReport report;
  report.threshold = options.threshold;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Case& c = cases[ci];
    GradcheckEntry entry;
    entry.op = c.name;
    for (std::size_t s = 0; s < options.seeds; ++s) {
      std::seed_seq seq{static_cast<std::uint32_t>(options.first_seed + s), static_cast<std::uint32_t>(ci)};
      Rng rng(seq);
      Instance inst = c.build(rng);

      const Tensor probe_out = inst.fn(constants(inst.inputs));
      std::vector<double> weights(probe_out.numel());
      for (double& w : weights) w = normal(rng, 0.0, 1.0);

      std::vector<std::vector<double>> analytic;
      {
        ad::Tape tape;
        std::vector<Tensor> xs;
        for (const auto& in : inst.inputs) xs.push_back(Tensor::parameter(in.shape, in.values));
        Tensor out = inst.fn(xs);
        if (c.name == options.corrupt) out = corrupt_backward(out);
        const auto grads = tape.backward(reduce(out, weights));
        for (const auto& x : xs) analytic.push_back(grads.of(x));
      }

      std::vector<std::pair<std::size_t, std::size_t>> coords;
      for (std::size_t i = 0; i < inst.inputs.size(); ++i)
        for (std::size_t j = 0; j < inst.inputs[i].values.size(); ++j) coords.emplace_back(i, j);
      if (options.samples != 0 && coords.size() > options.samples) {
        shuffle(std::span(coords), rng);
        coords.resize(options.samples);
      }

      for (const auto& [i, j] : coords) {
        auto& v = inst.inputs[i].values[j];
        const double saved = v;
        v = saved + options.step;
        const double up = reduce(inst.fn(constants(inst.inputs)), weights).item();
        v = saved - options.step;
        const double down = reduce(inst.fn(constants(inst.inputs)), weights).item();
        v = saved;
        const double numeric = (up - down) / (2.0 * options.step);
        entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[i][j], numeric));
        ++entry.probes;
      }
    }
    entry.passed = entry.max_rel_error < options.threshold;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace agat
