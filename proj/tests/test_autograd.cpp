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

#include "dpasr/autograd.hpp"
#include "support/oracles.hpp"

using namespace dpasr;
using dpasr::testing::CheckGradients;
using dpasr::testing::RandomMatrix;
using dpasr::testing::RandomParam;

namespace {

// Random linear read-out so every output entry gets a distinct weight.
Var Readout(Tape &tape, Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ag::Sum(ag::Mul(y, tape.Constant(RandomMatrix(y.rows(), y.cols(), rng))));
}

void ExpectGradOk(std::vector<Parameter *> params, const std::function<Var(Tape &)> &f,
                  int samples = 24) {
  const auto r = CheckGradients(params, f, samples, 99);
  INFO(r.worst);
  CHECK(r.max_rel_error < 1e-5);
}

}  // namespace

TEST_SUITE("autograd") {
  TEST_CASE("binary and affine ops") {
    std::mt19937_64 rng(1);
    Parameter a = RandomParam("a", 4, 3, rng), b = RandomParam("b", 3, 5, rng),
              c = RandomParam("c", 4, 3, rng), row = RandomParam("row", 1, 3, rng),
              bt = RandomParam("bt", 5, 3, rng), bias = RandomParam("bias", 1, 5, rng);
    std::vector<Parameter *> ps = {&a, &b, &c, &row, &bt, &bias};
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::MatMul(t.Param(a), t.Param(b)), 1); });
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::MatMulTB(t.Param(a), t.Param(bt)), 2); });
    ExpectGradOk(ps, [&](Tape &t) {
      return Readout(t, ag::Linear(t.Param(a), t.Param(b), t.Param(bias)), 3);
    });
    ExpectGradOk(ps, [&](Tape &t) {
      Var x = ag::Sub(ag::Add(t.Param(a), t.Param(c)), ag::Mul(t.Param(a), t.Param(c)));
      return Readout(t, ag::AddScalar(ag::Scale(ag::AddRow(x, t.Param(row)), -1.7), 0.3), 4);
    });
  }

  TEST_CASE("pointwise nonlinearities") {
    std::mt19937_64 rng(2);
    Parameter x = RandomParam("x", 5, 4, rng, 2.0);
    Parameter pos{"pos", RandomMatrix(5, 4, rng, 0.2, 3.0)};
    std::vector<Parameter *> ps = {&x, &pos};
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::Sigmoid(t.Param(x)), 5); });
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::Tanh(t.Param(x)), 6); });
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::Silu(t.Param(x)), 7); });
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::Exp(t.Param(x)), 8); });
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::Log(t.Param(pos)), 9); });
    // Inputs stay away from the kink.
    ExpectGradOk(ps, [&](Tape &t) {
      return Readout(t, ag::Relu(ag::AddScalar(t.Param(pos), -1.5)), 10);
    });
  }

  TEST_CASE("normalizations") {
    std::mt19937_64 rng(3);
    Parameter x = RandomParam("x", 6, 8, rng, 3.0), g = RandomParam("g", 1, 8, rng),
              b = RandomParam("b", 1, 8, rng);
    std::vector<Parameter *> ps = {&x, &g, &b};
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::SoftmaxRows(t.Param(x)), 11); });
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::LogSoftmaxRows(t.Param(x)), 12); });
    ExpectGradOk(ps, [&](Tape &t) {
      return Readout(t, ag::LayerNorm(t.Param(x), t.Param(g), t.Param(b)), 13);
    });
  }

  TEST_CASE("shape ops") {
    std::mt19937_64 rng(4);
    Parameter x = RandomParam("x", 7, 5, rng), y = RandomParam("y", 7, 2, rng),
              w = RandomParam("w", 3, 5, rng), bias = RandomParam("bias", 1, 5, rng),
              table = RandomParam("table", 6, 4, rng), sq = RandomParam("sq", 5, 5, rng);
    std::vector<Parameter *> ps = {&x, &y, &w, &bias, &table, &sq};
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::SliceCols(t.Param(x), 1, 3), 14); });
    ExpectGradOk(ps, [&](Tape &t) {
      const Var parts[] = {t.Param(y), t.Param(x), t.Param(y)};
      return Readout(t, ag::ConcatCols(parts), 15);
    });
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::UnfoldTime(t.Param(x), 3, 2), 16); });
    ExpectGradOk(ps, [&](Tape &t) {
      return Readout(t, ag::DepthwiseConvTime(t.Param(x), t.Param(w), t.Param(bias)), 17);
    });
    ExpectGradOk(ps, [&](Tape &t) {
      const int ids[] = {0, 5, 2, 2, 4};
      return Readout(t, ag::GatherRows(t.Param(table), ids), 18);
    });
    ExpectGradOk(ps, [&](Tape &t) {
      return Readout(t, ag::SoftmaxRows(ag::CausalMask(t.Param(sq))), 19);
    });
  }

  TEST_CASE("reductions and losses") {
    std::mt19937_64 rng(5);
    Parameter e = RandomParam("e", 9, 4, rng), s = RandomParam("s", 4, 6, rng, 3.0);
    std::vector<Parameter *> ps = {&e, &s};
    ExpectGradOk(ps, [&](Tape &t) { return ag::SumSquares(t.Param(e)); });
    ExpectGradOk(ps, [&](Tape &t) { return Readout(t, ag::Gram(t.Param(e)), 20); });
    ExpectGradOk(ps, [&](Tape &t) {
      const int targets[] = {1, 5, 0, 3};
      return ag::CrossEntropySum(t.Param(s), targets);
    });
  }

  TEST_CASE("lstm in both directions") {
    std::mt19937_64 rng(6);
    const std::size_t in = 3, h = 4;
    Parameter x = RandomParam("x", 6, in, rng), wih = RandomParam("wih", in, 4 * h, rng, 0.5),
              whh = RandomParam("whh", h, 4 * h, rng, 0.5), b = RandomParam("b", 1, 4 * h, rng);
    std::vector<Parameter *> ps = {&x, &wih, &whh, &b};
    for (bool reverse : {false, true})
      ExpectGradOk(ps, [&](Tape &t) {
        return Readout(t, ag::Lstm(t.Param(x), t.Param(wih), t.Param(whh), t.Param(b), reverse),
                       21);
      }, 40);
  }

  TEST_CASE("lstm reverse equals forward on time-reversed input") {
    std::mt19937_64 rng(7);
    Parameter wih = RandomParam("wih", 2, 12, rng), whh = RandomParam("whh", 3, 12, rng),
              b = RandomParam("b", 1, 12, rng);
    const Matrix x = RandomMatrix(5, 2, rng);
    Matrix xr(5, 2);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 2; ++c) xr(t, c) = x(4 - t, c);
    Tape tape(false);
    const Matrix fwd =
        ag::Lstm(tape.Constant(xr), tape.Param(wih), tape.Param(whh), tape.Param(b), false).value();
    const Matrix bwd =
        ag::Lstm(tape.Constant(x), tape.Param(wih), tape.Param(whh), tape.Param(b), true).value();
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 3; ++c) CHECK(bwd(t, c) == doctest::Approx(fwd(4 - t, c)));
  }

  TEST_CASE("a parameter used twice accumulates both contributions") {
    Parameter p{"p", Matrix::FromRows({{2.0}})};
    Tape t;
    Var a = t.Param(p), b = t.Param(p);
    CHECK(a.id() == b.id());
    t.Backward(ag::Add(ag::Mul(a, a), ag::Scale(b, 3.0)));
    CHECK((*t.GradOf(p))(0, 0) == doctest::Approx(2.0 * 2.0 + 3.0));
  }

  TEST_CASE("detach and constants block gradients") {
    Parameter p{"p", Matrix::FromRows({{1.5, -0.5}})};
    Tape t;
    Var x = t.Param(p);
    t.Backward(ag::Sum(ag::Mul(ag::Detach(x), t.Constant(Matrix::FromRows({{1.0, 1.0}})))));
    const Matrix *g = t.GradOf(p);
    CHECK((g == nullptr || g->MaxAbs() == 0.0));
  }

  TEST_CASE("backward requires a scalar") {
    Parameter p{"p", Matrix(2, 2, 1.0)};
    Tape t;
    CHECK_THROWS(t.Backward(t.Param(p)));
  }
}
