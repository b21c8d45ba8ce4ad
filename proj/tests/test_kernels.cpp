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

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dpasr/kernels.hpp"
#include "support/oracles.hpp"

using namespace dpasr;
using dpasr::testing::RandomMatrix;

namespace {

double MaxRelDiff(const Matrix &a, const Matrix &b) {
  REQUIRE(a.SameShape(b));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("gemm matches the serial reference for every transpose combination") {
    std::mt19937_64 rng(11);
    using kernels::Trans;
    for (auto [m, n, k] : {std::tuple{1, 1, 1}, {3, 5, 7}, {64, 48, 33}, {130, 70, 65}}) {
      for (Trans ta : {Trans::kNo, Trans::kYes})
        for (Trans tb : {Trans::kNo, Trans::kYes}) {
          const Matrix a = ta == Trans::kNo ? RandomMatrix(m, k, rng) : RandomMatrix(k, m, rng);
          const Matrix b = tb == Trans::kNo ? RandomMatrix(k, n, rng) : RandomMatrix(n, k, rng);
          Matrix c = RandomMatrix(m, n, rng), c_ref = c;
          kernels::Gemm(ta, tb, 0.7, a, b, 0.3, &c);
          kernels::serial::Gemm(ta, tb, 0.7, a, b, 0.3, &c_ref);
          CHECK(MaxRelDiff(c, c_ref) < 1e-12);
        }
    }
  }

  TEST_CASE("gemm rejects mismatched shapes") {
    Matrix a(2, 3), b(4, 2), c(2, 2);
    CHECK_THROWS(kernels::Gemm(kernels::Trans::kNo, kernels::Trans::kNo, 1.0, a, b, 0.0, &c));
  }

  TEST_CASE("gram matches serial and loop oracles") {
    std::mt19937_64 rng(12);
    for (auto [t, d] : {std::pair{1, 1}, {5, 3}, {40, 64}}) {
      const Matrix e = RandomMatrix(t, d, rng);
      CHECK(MaxRelDiff(kernels::Gram(e), kernels::serial::Gram(e)) < 1e-12);
      CHECK(MaxRelDiff(kernels::Gram(e), testing::GramOracle(e)) < 1e-12);
    }
  }

  TEST_CASE("row softmax matches serial and sums to one") {
    std::mt19937_64 rng(13);
    const Matrix x = RandomMatrix(17, 19, rng, -30.0, 30.0);
    const Matrix p = kernels::SoftmaxRows(x);
    CHECK(MaxRelDiff(p, kernels::serial::SoftmaxRows(x)) < 1e-12);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < p.cols(); ++c) s += p(r, c);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    const Matrix lp = kernels::LogSoftmaxRows(x);
    for (std::size_t i = 0; i < lp.size(); ++i) CHECK(std::exp(lp[i]) == doctest::Approx(p[i]));
  }

  TEST_CASE("framed DFT magnitude matches the direct-summation reference") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> wave(1000);
    for (float &v : wave) v = u(rng);
    std::vector<double> window(200);
    for (std::size_t i = 0; i < window.size(); ++i)
      window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / 200.0);
    const Matrix fast = kernels::FramedDftMagnitude(wave, window, 200, 80);
    const Matrix ref = kernels::serial::FramedDftMagnitude(wave, window, 200, 80);
    CHECK(fast.rows() == 1 + (1000 - 200) / 80);
    CHECK(fast.cols() == 101);
    CHECK(MaxRelDiff(fast, ref) < 1e-9);
  }

  TEST_CASE("results do not depend on the thread count") {
    std::mt19937_64 rng(15);
    const Matrix a = RandomMatrix(128, 96, rng), b = RandomMatrix(96, 80, rng);
    const Matrix many = kernels::MatMul(a, b);
    const int saved = kernels::MaxThreads();
    kernels::SetNumThreads(1);
    const Matrix one = kernels::MatMul(a, b);
    kernels::SetNumThreads(saved);
    CHECK(many == one);
  }
}
