// Copyright 2026 The dpasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DPASR_KERNELS_HPP_
#define DPASR_KERNELS_HPP_

// Dense numeric kernels. The default namespace holds the OpenMP versions used
// by the model; kernels::serial holds plain loop references that the tests
// compare against and the benchmark races. Parallel kernels split work over
// output rows only, so every output element is produced by the same serial
// instruction sequence regardless of thread count and results are bitwise
// reproducible.

#include <cstddef>
#include <span>

#include "dpasr/matrix.hpp"

namespace dpasr::kernels {

enum class Trans { kNo, kYes };

/// C = alpha * op(A) * op(B) + beta * C. C must already have the result shape.
void Gemm(Trans ta, Trans tb, double alpha, const Matrix &a, const Matrix &b, double beta,
          Matrix *c);

/// Convenience wrappers returning a fresh matrix.
Matrix MatMul(const Matrix &a, const Matrix &b);       // A * B
Matrix MatMulTA(const Matrix &a, const Matrix &b);     // A^T * B
Matrix MatMulTB(const Matrix &a, const Matrix &b);     // A * B^T

/// S = E^T E (D x D for a T x D input).
Matrix Gram(const Matrix &e);

/// Row-wise numerically stable softmax.
Matrix SoftmaxRows(const Matrix &x);

/// Row-wise log-softmax.
Matrix LogSoftmaxRows(const Matrix &x);

/// Magnitude of the one-sided DFT of every windowed frame of `wave`.
/// Output is num_frames x (frame/2 + 1).
Matrix FramedDftMagnitude(std::span<const float> wave, std::span<const double> window,
                          std::size_t frame, std::size_t hop);

/// Number of threads the parallel kernels will use.
int MaxThreads();
void SetNumThreads(int n);

namespace serial {

void Gemm(Trans ta, Trans tb, double alpha, const Matrix &a, const Matrix &b, double beta,
          Matrix *c);
Matrix Gram(const Matrix &e);
Matrix SoftmaxRows(const Matrix &x);
Matrix FramedDftMagnitude(std::span<const float> wave, std::span<const double> window,
                          std::size_t frame, std::size_t hop);

}  // namespace serial

}  // namespace dpasr::kernels

#endif  // DPASR_KERNELS_HPP_
