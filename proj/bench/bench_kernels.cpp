// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP kernels at the shapes a training step uses.

#include <benchmark/benchmark.h>

#include <vector>

#include "agat/kernels.hpp"
#include "agat/random.hpp"

namespace {

namespace ks = agat::kernels::serial;
namespace kp = agat::kernels::parallel;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  agat::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = agat::uniform(rng, -1.0, 1.0);
  return v;
}

// Args: m, k, n. Defaults mirror a batch of 64 MNIST sequences (64·50 rows)
// through the width-64 QKV projection and MLP.
template <auto Gemm>
void BM_gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_vector(m * k, 1);
  const auto b = random_vector(k * n, 2);
  std::vector<double> c(m * n, 0.0);
  for (auto _ : state) {
    Gemm(m, k, n, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["MAC/s"] =
      benchmark::Counter(static_cast<double>(m * k * n), benchmark::Counter::kIsIterationInvariantRate);
}

void gemm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({3200, 64, 192})->Args({3200, 64, 256})->Args({3200, 256, 64})->Args({64, 3200, 192});
}

BENCHMARK(BM_gemm<ks::gemm_nn>)->Name("serial/gemm_nn")->Apply(gemm_shapes);
BENCHMARK(BM_gemm<kp::gemm_nn>)->Name("parallel/gemm_nn")->Apply(gemm_shapes);
BENCHMARK(BM_gemm<ks::gemm_tn>)->Name("serial/gemm_tn")->Apply(gemm_shapes);
BENCHMARK(BM_gemm<kp::gemm_tn>)->Name("parallel/gemm_tn")->Apply(gemm_shapes);
BENCHMARK(BM_gemm<ks::gemm_nt>)->Name("serial/gemm_nt")->Apply(gemm_shapes);
BENCHMARK(BM_gemm<kp::gemm_nt>)->Name("parallel/gemm_nt")->Apply(gemm_shapes);

// Attention scores: 64 sequences × 4 heads, 50×16 by 16×50.
template <auto Batched>
void BM_attention(benchmark::State& state) {
  const std::size_t batch = 256, p = 50, hd = 16;
  const auto q = random_vector(batch * p * hd, 3);
  const auto k = random_vector(batch * p * hd, 4);
  std::vector<double> s(batch * p * p, 0.0);
  for (auto _ : state) {
    Batched(batch, p, hd, p, q, k, s);
    benchmark::DoNotOptimize(s.data());
  }
}

BENCHMARK(BM_attention<ks::batched_gemm_nt>)->Name("serial/attention_scores");
BENCHMARK(BM_attention<kp::batched_gemm_nt>)->Name("parallel/attention_scores");

template <auto Softmax>
void BM_softmax(benchmark::State& state) {
  const std::size_t rows = 256 * 50, n = 50;
  const auto x = random_vector(rows * n, 5);
  std::vector<double> y(rows * n);
  for (auto _ : state) {
    Softmax(rows, n, x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_softmax<ks::softmax_rows>)->Name("serial/softmax");
BENCHMARK(BM_softmax<kp::softmax_rows>)->Name("parallel/softmax");

template <auto LayerNorm>
void BM_layer_norm(benchmark::State& state) {
  const std::size_t rows = 3200, d = 64;
  const auto x = random_vector(rows * d, 6);
  const std::vector<double> gamma(d, 1.0), beta(d, 0.0);
  std::vector<double> y(rows * d), mean(rows), rstd(rows);
  for (auto _ : state) {
    LayerNorm(rows, d, x, gamma, beta, 1e-6, y, mean, rstd);
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_layer_norm<ks::layer_norm_rows>)->Name("serial/layer_norm");
BENCHMARK(BM_layer_norm<kp::layer_norm_rows>)->Name("parallel/layer_norm");

template <auto Gelu>
void BM_gelu(benchmark::State& state) {
  const auto x = random_vector(3200 * 256, 7);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    Gelu(x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_gelu<ks::gelu>)->Name("serial/gelu");
BENCHMARK(BM_gelu<kp::gelu>)->Name("parallel/gelu");

}  // namespace

BENCHMARK_MAIN();
