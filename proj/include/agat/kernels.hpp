// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Dense f64 kernels behind the autodiff ops.
//
// Every kernel exists twice: `serial` is the straightforward reference and
// `parallel` is the OpenMP version the library runs. Both accumulate each
// output element in the same order, so results are bitwise identical for any
// thread count. Matrices are row-major and contiguous.

#pragma once

#include <cstddef>
#include <span>

namespace agat::kernels {

namespace serial {

// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// C[m×n] += A[k×m]ᵀ · B[k×n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);

// Same as above over `batch` consecutive (A, B, C) triples.
void batched_gemm_nn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c);
void batched_gemm_tn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c);
void batched_gemm_nt(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c);

void softmax_rows(std::size_t rows, std::size_t n, std::span<const double> x, std::span<double> y);
// dx += y ∘ (dy − rowsum(dy ∘ y))
void softmax_backward_rows(std::size_t rows, std::size_t n, std::span<const double> y,
                           std::span<const double> dy, std::span<double> dx);

// Biased variance with eps inside the square root. Saves the row mean and 1/σ
// for the backward pass.
void layer_norm_rows(std::size_t rows, std::size_t d, std::span<const double> x,
                     std::span<const double> gamma, std::span<const double> beta, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd);
// Accumulates into dx, dgamma and dbeta.
void layer_norm_backward_rows(std::size_t rows, std::size_t d, std::span<const double> x,
                              std::span<const double> gamma, std::span<const double> mean,
                              std::span<const double> rstd, std::span<const double> dy,
                              std::span<double> dx, std::span<double> dgamma,
                              std::span<double> dbeta);

void gelu(std::span<const double> x, std::span<double> y);
// dx += dy · GELU'(x)
void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);

}  // namespace serial

namespace parallel {

// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// C[m×n] += A[k×m]ᵀ · B[k×n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);

// Same as above over `batch` consecutive (A, B, C) triples.
void batched_gemm_nn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c);
void batched_gemm_tn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c);
void batched_gemm_nt(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                     std::span<const double> a, std::span<const double> b, std::span<double> c);

void softmax_rows(std::size_t rows, std::size_t n, std::span<const double> x, std::span<double> y);
// dx += y ∘ (dy − rowsum(dy ∘ y))
void softmax_backward_rows(std::size_t rows, std::size_t n, std::span<const double> y,
                           std::span<const double> dy, std::span<double> dx);

// Biased variance with eps inside the square root. Saves the row mean and 1/σ
// for the backward pass.
void layer_norm_rows(std::size_t rows, std::size_t d, std::span<const double> x,
                     std::span<const double> gamma, std::span<const double> beta, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd);
// Accumulates into dx, dgamma and dbeta.
void layer_norm_backward_rows(std::size_t rows, std::size_t d, std::span<const double> x,
                              std::span<const double> gamma, std::span<const double> mean,
                              std::span<const double> rstd, std::span<const double> dy,
                              std::span<double> dx, std::span<double> dgamma,
                              std::span<double> dbeta);

void gelu(std::span<const double> x, std::span<double> y);
// dx += dy · GELU'(x)
void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);

}  // namespace parallel

/// Threads the parallel kernels will use (1 when built without OpenMP).
int max_threads();

}  // namespace agat::kernels
