// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace agat::kernels {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

inline double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// C tile [MR×NR] += A · B over the full k range. A(i, t) sits at
// a[i·ars + t·acs], which covers both A and Aᵀ layouts. Accumulators start
// from C and add products in ascending t, the same order as the serial loop.
template <std::size_t MR, std::size_t NR>
inline void gemm_tile(std::size_t k, const double* a, std::size_t ars, std::size_t acs,
                      const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  double acc[MR][NR];
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t q = 0; q < NR; ++q) acc[r][q] = c[r * ldc + q];
  for (std::size_t t = 0; t < k; ++t) {
    const double* bt = b + t * ldb;
    for (std::size_t r = 0; r < MR; ++r) {
      const double av = a[r * ars + t * acs];
#pragma omp simd
      for (std::size_t q = 0; q < NR; ++q) acc[r][q] += av * bt[q];
    }
  }
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t q = 0; q < NR; ++q) c[r * ldc + q] = acc[r][q];
}

// Leftover columns [j0, n) of rows [i0, i1), one element at a time.
inline void gemm_edge(std::size_t i0, std::size_t i1, std::size_t j0, std::size_t n, std::size_t k,
                      const double* a, std::size_t ars, std::size_t acs, const double* b,
                      double* c) {
  for (std::size_t i = i0; i < i1; ++i)
    for (std::size_t j = j0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t t = 0; t < k; ++t) acc += a[i * ars + t * acs] * b[t * n + j];
      c[i * n + j] = acc;
    }
}

constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 16;
// Depth of one pass over B; a KC×16 strip of B stays in L1 across a tile.
constexpr std::size_t kDepthBlock = 256;

// C rows [row_begin, row_end) += A · B with A(i, t) = a[i·ars + t·acs].
// Depth blocking stores partial sums back to C between passes, which keeps
// each element's additions in ascending t.
inline void gemm_rows(std::size_t row_begin, std::size_t row_end, std::size_t k, std::size_t n,
                      const double* a, std::size_t ars, std::size_t acs, const double* b,
                      double* c) {
  const std::size_t n_full = n - n % kTileCols;
  for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
    const std::size_t kc = std::min(kDepthBlock, k - k0);
    const double* ak = a + k0 * acs;
    const double* bk = b + k0 * n;
    std::size_t i = row_begin;
    for (; i + kTileRows <= row_end; i += kTileRows)
      for (std::size_t j = 0; j < n_full; j += kTileCols)
        gemm_tile<kTileRows, kTileCols>(kc, ak + i * ars, ars, acs, bk + j, n, c + i * n + j, n);
    for (; i < row_end; ++i)
      for (std::size_t j = 0; j < n_full; j += kTileCols)
        gemm_tile<1, kTileCols>(kc, ak + i * ars, ars, acs, bk + j, n, c + i * n + j, n);
  }
  if (n_full < n) gemm_edge(row_begin, row_end, n_full, n, k, a, ars, acs, b, c);
}

inline void gemm_nn_rows(std::size_t row_begin, std::size_t row_end, std::size_t k, std::size_t n,
                         const double* a, const double* b, double* c) {
  gemm_rows(row_begin, row_end, k, n, a, k, 1, b, c);
}

// C[m×n] += A[k×m]ᵀ · B[k×n] for C rows [row_begin, row_end).
inline void gemm_tn_rows(std::size_t row_begin, std::size_t row_end, std::size_t m, std::size_t k,
                         std::size_t n, const double* a, const double* b, double* c) {
  gemm_rows(row_begin, row_end, k, n, a, 1, m, b, c);
}

inline void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

inline void softmax_row(std::size_t n, const double* x, double* y) {
  double mx = x[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
}

inline void softmax_backward_row(std::size_t n, const double* y, const double* dy, double* dx) {
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
  for (std::size_t j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
}

inline void layer_norm_row(std::size_t d, const double* x, const double* gamma, const double* beta,
                           double eps, double* y, double* mean_out, double* rstd_out) {
  double mean = 0.0;
  for (std::size_t j = 0; j < d; ++j) mean += x[j];
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double c = x[j] - mean;
    var += c * c;
  }
  var /= static_cast<double>(d);
  const double rstd = 1.0 / std::sqrt(var + eps);
  for (std::size_t j = 0; j < d; ++j) y[j] = (x[j] - mean) * rstd * gamma[j] + beta[j];
  *mean_out = mean;
  *rstd_out = rstd;
}

inline void layer_norm_backward_row(std::size_t d, const double* x, const double* gamma,
                                    double mean, double rstd, const double* dy, double* dx) {
  double sum_g = 0.0;
  double sum_gx = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double g = dy[j] * gamma[j];
    const double xhat = (x[j] - mean) * rstd;
    sum_g += g;
    sum_gx += g * xhat;
  }
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double g = dy[j] * gamma[j];
    const double xhat = (x[j] - mean) * rstd;
    dx[j] += rstd * (g - sum_g * inv_d - xhat * sum_gx * inv_d);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference

namespace serial {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      c[i * n + j] = acc;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t t = 0; t < k; ++t) acc += a[t * m + i] * b[t * n + j];
      c[i * n + j] = acc;
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[j * k + t];
      c[i * n + j] = acc;
    }
  }
}

void batched_gemm_nn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c) {
  for (std::size_t s = 0; s < batch; ++s)
    gemm_nn(m, k, n, a.subspan(s * m * k, m * k), b.subspan(s * k * n, k * n),
            c.subspan(s * m * n, m * n));
}

void batched_gemm_tn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c) {
  for (std::size_t s = 0; s < batch; ++s)
    gemm_tn(m, k, n, a.subspan(s * k * m, k * m), b.subspan(s * k * n, k * n),
            c.subspan(s * m * n, m * n));
}

void batched_gemm_nt(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c) {
  for (std::size_t s = 0; s < batch; ++s)
    gemm_nt(m, k, n, a.subspan(s * m * k, m * k), b.subspan(s * n * k, n * k),
            c.subspan(s * m * n, m * n));
}

void softmax_rows(std::size_t rows, std::size_t n, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(n, x.data() + r * n, y.data() + r * n);
}

void softmax_backward_rows(std::size_t rows, std::size_t n, std::span<const double> y,
                           std::span<const double> dy, std::span<double> dx) {
  for (std::size_t r = 0; r < rows; ++r)
    softmax_backward_row(n, y.data() + r * n, dy.data() + r * n, dx.data() + r * n);
}

void layer_norm_rows(std::size_t rows, std::size_t d, std::span<const double> x,
                     std::span<const double> gamma, std::span<const double> beta, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd) {
  for (std::size_t r = 0; r < rows; ++r)
    layer_norm_row(d, x.data() + r * d, gamma.data(), beta.data(), eps, y.data() + r * d,
                   &mean[r], &rstd[r]);
}

void layer_norm_backward_rows(std::size_t rows, std::size_t d, std::span<const double> x,
                              std::span<const double> gamma, std::span<const double> mean,
                              std::span<const double> rstd, std::span<const double> dy,
                              std::span<double> dx, std::span<double> dgamma,
                              std::span<double> dbeta) {
  for (std::size_t r = 0; r < rows; ++r) {
    layer_norm_backward_row(d, x.data() + r * d, gamma.data(), mean[r], rstd[r],
                            dy.data() + r * d, dx.data() + r * d);
    for (std::size_t j = 0; j < d; ++j) {
      dgamma[j] += dy[r * d + j] * ((x[r * d + j] - mean[r]) * rstd[r]);
      dbeta[j] += dy[r * d + j];
    }
  }
}

void gelu(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gelu_value(x[i]);
}

void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] += dy[i] * gelu_derivative(x[i]);
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP

namespace parallel {

namespace {

// Below this many multiply-adds a GEMM runs on the calling thread.
constexpr std::size_t kParallelThreshold = 1 << 15;

// This thread's share of [0, m), in whole tiles where possible.
std::pair<std::size_t, std::size_t> thread_rows(std::size_t m) {
#ifdef _OPENMP
  const auto threads = static_cast<std::size_t>(omp_get_num_threads());
  const auto id = static_cast<std::size_t>(omp_get_thread_num());
#else
  const std::size_t threads = 1, id = 0;
#endif
  const std::size_t tiles = (m + kTileRows - 1) / kTileRows;
  const std::size_t begin = std::min(m, tiles * id / threads * kTileRows);
  const std::size_t end = std::min(m, tiles * (id + 1) / threads * kTileRows);
  return {begin, end};
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
#pragma omp parallel if (m * k * n >= kParallelThreshold)
  {
    const auto [begin, end] = thread_rows(m);
    gemm_nn_rows(begin, end, k, n, a.data(), b.data(), c.data());
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
#pragma omp parallel if (m * k * n >= kParallelThreshold)
  {
    const auto [begin, end] = thread_rows(m);
    gemm_tn_rows(begin, end, m, k, n, a.data(), b.data(), c.data());
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  std::vector<double> bt(k * n);
  transpose(n, k, b.data(), bt.data());
  gemm_nn(m, k, n, a, bt, c);
}

void batched_gemm_nn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c) {
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < batch; ++s)
    gemm_nn_rows(0, m, k, n, a.data() + s * m * k, b.data() + s * k * n, c.data() + s * m * n);
}

void batched_gemm_tn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c) {
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < batch; ++s)
    gemm_tn_rows(0, m, m, k, n, a.data() + s * k * m, b.data() + s * k * n, c.data() + s * m * n);
}

void batched_gemm_nt(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c) {
#pragma omp parallel
  {
    std::vector<double> bt(k * n);
#pragma omp for schedule(static)
    for (std::size_t s = 0; s < batch; ++s) {
      transpose(n, k, b.data() + s * n * k, bt.data());
      gemm_nn_rows(0, m, k, n, a.data() + s * m * k, bt.data(), c.data() + s * m * n);
    }
  }
}

void softmax_rows(std::size_t rows, std::size_t n, std::span<const double> x, std::span<double> y) {
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) softmax_row(n, x.data() + r * n, y.data() + r * n);
}

void softmax_backward_rows(std::size_t rows, std::size_t n, std::span<const double> y,
                           std::span<const double> dy, std::span<double> dx) {
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r)
    softmax_backward_row(n, y.data() + r * n, dy.data() + r * n, dx.data() + r * n);
}

void layer_norm_rows(std::size_t rows, std::size_t d, std::span<const double> x,
                     std::span<const double> gamma, std::span<const double> beta, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd) {
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r)
    layer_norm_row(d, x.data() + r * d, gamma.data(), beta.data(), eps, y.data() + r * d,
                   &mean[r], &rstd[r]);
}

void layer_norm_backward_rows(std::size_t rows, std::size_t d, std::span<const double> x,
                              std::span<const double> gamma, std::span<const double> mean,
                              std::span<const double> rstd, std::span<const double> dy,
                              std::span<double> dx, std::span<double> dgamma,
                              std::span<double> dbeta) {
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (std::size_t r = 0; r < rows; ++r)
      layer_norm_backward_row(d, x.data() + r * d, gamma.data(), mean[r], rstd[r],
                              dy.data() + r * d, dx.data() + r * d);
    // Parameter gradients reduce over rows in ascending order, one column per
    // iteration, to match the serial accumulation order.
#pragma omp for schedule(static)
    for (std::size_t j = 0; j < d; ++j) {
      double g = dgamma[j];
      double bsum = dbeta[j];
      for (std::size_t r = 0; r < rows; ++r) {
        g += dy[r * d + j] * ((x[r * d + j] - mean[r]) * rstd[r]);
        bsum += dy[r * d + j];
      }
      dgamma[j] = g;
      dbeta[j] = bsum;
    }
  }
}

void gelu(std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n >= 4096)
  for (std::size_t i = 0; i < n; ++i) y[i] = gelu_value(x[i]);
}

void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n >= 4096)
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * gelu_derivative(x[i]);
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace agat::kernels
