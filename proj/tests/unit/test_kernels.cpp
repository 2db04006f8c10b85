// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "agat/kernels.hpp"
#include "agat/random.hpp"

namespace ks = agat::kernels::serial;
namespace kp = agat::kernels::parallel;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  agat::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = agat::uniform(rng, -2.0, 2.0);
  return v;
}

struct Dims {
  std::size_t m, k, n;
};

// Odd edges around the 4×16 tile and the 256-wide k block.
const Dims kShapes[] = {{1, 1, 1},   {3, 5, 7},     {4, 16, 16}, {5, 17, 33},
                        {13, 300, 9}, {64, 257, 31}, {70, 3, 130}, {2, 600, 2}};

}  // namespace

TEST_CASE("gemm variants agree with a naive triple loop") {
  for (const auto& s : kShapes) {
    const auto a = random_vector(s.m * s.k, 1);
    const auto b = random_vector(s.k * s.n, 2);
    const auto c0 = random_vector(s.m * s.n, 3);

    std::vector<double> expect = c0;
    for (std::size_t i = 0; i < s.m; ++i)
      for (std::size_t j = 0; j < s.n; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < s.k; ++t) acc += a[i * s.k + t] * b[t * s.n + j];
        expect[i * s.n + j] += acc;
      }
    std::vector<double> got = c0;
    ks::gemm_nn(s.m, s.k, s.n, a, b, got);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));

    // Aᵀ stored [k×m] and Bᵀ stored [n×k] describe the same product.
    std::vector<double> at(s.k * s.m), bt(s.n * s.k);
    for (std::size_t i = 0; i < s.m; ++i)
      for (std::size_t t = 0; t < s.k; ++t) at[t * s.m + i] = a[i * s.k + t];
    for (std::size_t t = 0; t < s.k; ++t)
      for (std::size_t j = 0; j < s.n; ++j) bt[j * s.k + t] = b[t * s.n + j];
    std::vector<double> tn = c0, nt = c0;
    ks::gemm_tn(s.m, s.k, s.n, at, b, tn);
    ks::gemm_nt(s.m, s.k, s.n, a, bt, nt);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(tn[i] == doctest::Approx(expect[i]).epsilon(1e-12));
      CHECK(nt[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("parallel gemm is bitwise equal to serial") {
  for (const auto& s : kShapes) {
    CAPTURE(s.m);
    CAPTURE(s.k);
    CAPTURE(s.n);
    const auto a = random_vector(s.m * s.k, 4);
    const auto b = random_vector(s.k * s.n, 5);
    const auto c0 = random_vector(s.m * s.n, 6);
    auto check = [&](auto serial_fn, auto parallel_fn) {
      std::vector<double> x = c0, y = c0;
      serial_fn(s.m, s.k, s.n, a, b, x);
      parallel_fn(s.m, s.k, s.n, a, b, y);
      CHECK(x == y);
    };
    check(ks::gemm_nn, kp::gemm_nn);
    check(ks::gemm_tn, kp::gemm_tn);
    check(ks::gemm_nt, kp::gemm_nt);
  }
}

TEST_CASE("parallel batched gemm is bitwise equal to serial") {
  const std::size_t batch = 7, m = 9, k = 21, n = 18;
  const auto a = random_vector(batch * m * k, 7);
  const auto b = random_vector(batch * k * n, 8);
  const auto c0 = random_vector(batch * m * n, 9);
  auto check = [&](auto serial_fn, auto parallel_fn) {
    std::vector<double> x = c0, y = c0;
    serial_fn(batch, m, k, n, a, b, x);
    parallel_fn(batch, m, k, n, a, b, y);
    CHECK(x == y);
  };
  check(ks::batched_gemm_nn, kp::batched_gemm_nn);
  check(ks::batched_gemm_tn, kp::batched_gemm_tn);
  check(ks::batched_gemm_nt, kp::batched_gemm_nt);
}

TEST_CASE("row kernels are bitwise equal to serial") {
  const std::size_t rows = 37, n = 23;
  const auto x = random_vector(rows * n, 10);
  const auto dy = random_vector(rows * n, 11);

  std::vector<double> ys(rows * n), yp(rows * n);
  ks::softmax_rows(rows, n, x, ys);
  kp::softmax_rows(rows, n, x, yp);
  CHECK(ys == yp);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += ys[r * n + j];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  std::vector<double> ds(rows * n, 0.5), dp(rows * n, 0.5);
  ks::softmax_backward_rows(rows, n, ys, dy, ds);
  kp::softmax_backward_rows(rows, n, ys, dy, dp);
  CHECK(ds == dp);

  const auto gamma = random_vector(n, 12);
  const auto beta = random_vector(n, 13);
  std::vector<double> ls(rows * n), lp(rows * n), ms(rows), mp(rows), rs(rows), rp(rows);
  ks::layer_norm_rows(rows, n, x, gamma, beta, 1e-6, ls, ms, rs);
  kp::layer_norm_rows(rows, n, x, gamma, beta, 1e-6, lp, mp, rp);
  CHECK(ls == lp);
  CHECK(ms == mp);
  CHECK(rs == rp);
  std::vector<double> dxs(rows * n, 0.0), dxp(rows * n, 0.0), dgs(n, 0.0), dgp(n, 0.0), dbs(n, 0.0),
      dbp(n, 0.0);
  ks::layer_norm_backward_rows(rows, n, x, gamma, ms, rs, dy, dxs, dgs, dbs);
  kp::layer_norm_backward_rows(rows, n, x, gamma, mp, rp, dy, dxp, dgp, dbp);
  CHECK(dxs == dxp);
  CHECK(dgs == dgp);
  CHECK(dbs == dbp);

  std::vector<double> gs(rows * n), gp(rows * n);
  ks::gelu(x, gs);
  kp::gelu(x, gp);
  CHECK(gs == gp);
  std::vector<double> gbs(rows * n, 0.0), gbp(rows * n, 0.0);
  ks::gelu_backward(x, dy, gbs);
  kp::gelu_backward(x, dy, gbp);
  CHECK(gbs == gbp);
}

TEST_CASE("gelu matches x times the normal cdf") {
  const std::vector<double> x{-3.0, -0.5, 0.0, 0.7, 4.0};
  std::vector<double> y(x.size());
  ks::gelu(x, y);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(y[i] == doctest::Approx(x[i] * 0.5 * std::erfc(-x[i] / std::sqrt(2.0))).epsilon(1e-14));
}
