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

#include "dpasr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dpasr/error.hpp"

namespace dpasr::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

struct GemmShape {
  std::size_t m, n, k;
};

GemmShape CheckGemm(Trans ta, Trans tb, const Matrix &a, const Matrix &b, const Matrix &c) {
  const std::size_t m = ta == Trans::kNo ? a.rows() : a.cols();
  const std::size_t ka = ta == Trans::kNo ? a.cols() : a.rows();
  const std::size_t kb = tb == Trans::kNo ? b.rows() : b.cols();
  const std::size_t n = tb == Trans::kNo ? b.cols() : b.rows();
  DPASR_REQUIRE(ka == kb, "Gemm: inner dimension mismatch");
  DPASR_REQUIRE(c.rows() == m && c.cols() == n, "Gemm: output shape mismatch");
  return {m, n, ka};
}

// One output row of op(A) * op(B), accumulated into `out` (already scaled by beta).
// out += alpha * a_row * b for row-major b (k x n). Four rank-1 updates per
// pass keep the inner loop vectorizable and halve the traffic on `out`.
inline void GemmRow(double alpha, const double *a_row, const double *b, std::size_t n,
                    std::size_t k, double *out) {
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const double a0 = alpha * a_row[p], a1 = alpha * a_row[p + 1], a2 = alpha * a_row[p + 2],
                 a3 = alpha * a_row[p + 3];
    const double *b0 = b + p * n, *b1 = b0 + n, *b2 = b1 + n, *b3 = b2 + n;
    for (std::size_t j = 0; j < n; ++j) out[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
  }
  for (; p < k; ++p) {
    const double av = alpha * a_row[p];
    const double *brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
  }
}

}  // namespace

int MaxThreads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void SetNumThreads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

void Gemm(Trans ta, Trans tb, double alpha, const Matrix &a, const Matrix &b, double beta,
          Matrix *c) {
  const auto [m, n, k] = CheckGemm(ta, tb, a, b, *c);
  // Transposed operands are packed once so every row uses the same kernel.
  const Matrix at = ta == Trans::kYes ? a.Transpose() : Matrix();
  const Matrix bt = tb == Trans::kYes ? b.Transpose() : Matrix();
  const Matrix &aa = ta == Trans::kYes ? at : a;
  const Matrix &bb = tb == Trans::kYes ? bt : b;
  const bool par = m * n * k >= kParallelWork && m > 1;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double *out = c->data() + i * n;
    if (beta == 0.0) {
      std::fill(out, out + n, 0.0);
    } else if (beta != 1.0) {
      for (std::size_t j = 0; j < n; ++j) out[j] *= beta;
    }
    GemmRow(alpha, aa.data() + i * k, bb.data(), n, k, out);
  }
}

Matrix MatMul(const Matrix &a, const Matrix &b) {
  Matrix c(a.rows(), b.cols());
  Gemm(Trans::kNo, Trans::kNo, 1.0, a, b, 0.0, &c);
  return c;
}

Matrix MatMulTA(const Matrix &a, const Matrix &b) {
  Matrix c(a.cols(), b.cols());
  Gemm(Trans::kYes, Trans::kNo, 1.0, a, b, 0.0, &c);
  return c;
}

Matrix MatMulTB(const Matrix &a, const Matrix &b) {
  Matrix c(a.rows(), b.rows());
  Gemm(Trans::kNo, Trans::kYes, 1.0, a, b, 0.0, &c);
  return c;
}

Matrix Gram(const Matrix &e) {
  const std::size_t t = e.rows(), d = e.cols();
  Matrix s(d, d);
  const bool par = t * d * d >= kParallelWork;
  // Row i of S is sum_t e(t,i) * e(t,:); the upper triangle is mirrored after.
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(d); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double *out = s.data() + i * d;
    for (std::size_t r = 0; r < t; ++r) {
      const double *row = e.data() + r * d;
      const double v = row[i];
      for (std::size_t j = i; j < d; ++j) out[j] += v * row[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
  return s;
}

Matrix SoftmaxRows(const Matrix &x) {
  Matrix y(x.rows(), x.cols());
  const bool par = x.size() >= kParallelWork / 8;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(x.rows()); ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    auto in = x.Row(r);
    auto out = y.Row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) z += (out[j] = std::exp(in[j] - mx));
    for (double &v : out) v /= z;
  }
  return y;
}

Matrix LogSoftmaxRows(const Matrix &x) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.Row(r);
    auto out = y.Row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] - lz;
  }
  return y;
}

Matrix FramedDftMagnitude(std::span<const float> wave, std::span<const double> window,
                          std::size_t frame, std::size_t hop) {
  DPASR_REQUIRE(frame > 0 && hop > 0, "FramedDftMagnitude: frame and hop must be positive");
  DPASR_REQUIRE(window.size() == frame, "FramedDftMagnitude: window length != frame");
  DPASR_REQUIRE(wave.size() >= frame, "FramedDftMagnitude: wave shorter than one frame");
  const std::size_t num_frames = 1 + (wave.size() - frame) / hop;
  const std::size_t bins = frame / 2 + 1;

  // Twiddle tables indexed by (k * n) mod frame.
  std::vector<double> cos_t(frame), sin_t(frame);
  for (std::size_t i = 0; i < frame; ++i) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(frame);
    cos_t[i] = std::cos(ang);
    sin_t[i] = std::sin(ang);
  }

  Matrix mags(num_frames, bins);
  const bool par = num_frames * bins * frame >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ff = 0; ff < static_cast<std::ptrdiff_t>(num_frames); ++ff) {
    const auto f = static_cast<std::size_t>(ff);
    std::vector<double> buf(frame);
    for (std::size_t n = 0; n < frame; ++n) buf[n] = window[n] * wave[f * hop + n];
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      std::size_t idx = 0;
      for (std::size_t n = 0; n < frame; ++n) {
        re += buf[n] * cos_t[idx];
        im -= buf[n] * sin_t[idx];
        idx += k;
        if (idx >= frame) idx -= frame;
      }
      mags(f, k) = std::sqrt(re * re + im * im);
    }
  }
  return mags;
}

namespace serial {

void Gemm(Trans ta, Trans tb, double alpha, const Matrix &a, const Matrix &b, double beta,
          Matrix *c) {
  const auto [m, n, k] = CheckGemm(ta, tb, a, b, *c);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta == Trans::kNo ? a(i, p) : a(p, i);
        const double bv = tb == Trans::kNo ? b(p, j) : b(j, p);
        s += av * bv;
      }
      (*c)(i, j) = alpha * s + (beta == 0.0 ? 0.0 : beta * (*c)(i, j));
    }
  }
}

Matrix Gram(const Matrix &e) {
  Matrix s(e.cols(), e.cols());
  for (std::size_t i = 0; i < e.cols(); ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < e.rows(); ++t) acc += e(t, i) * e(t, j);
      s(i, j) = acc;
    }
  return s;
}

Matrix SoftmaxRows(const Matrix &x) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = x(r, 0);
    for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(r, j));
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) z += std::exp(x(r, j) - mx);
    for (std::size_t j = 0; j < x.cols(); ++j) y(r, j) = std::exp(x(r, j) - mx) / z;
  }
  return y;
}

Matrix FramedDftMagnitude(std::span<const float> wave, std::span<const double> window,
                          std::size_t frame, std::size_t hop) {
  DPASR_REQUIRE(window.size() == frame && wave.size() >= frame && hop > 0,
                "serial::FramedDftMagnitude: bad arguments");
  const std::size_t num_frames = 1 + (wave.size() - frame) / hop;
  const std::size_t bins = frame / 2 + 1;
  Matrix mags(num_frames, bins);
  for (std::size_t f = 0; f < num_frames; ++f)
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < frame; ++n) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k * n) /
                           static_cast<double>(frame);
        const double x = window[n] * wave[f * hop + n];
        re += x * std::cos(ang);
        im -= x * std::sin(ang);
      }
      mags(f, k) = std::hypot(re, im);
    }
  return mags;
}

}  // namespace serial

}  // namespace dpasr::kernels
