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

#ifndef DPASR_TESTS_SUPPORT_ORACLES_HPP_
#define DPASR_TESTS_SUPPORT_ORACLES_HPP_

// Test-side helpers: random fixtures, a central finite-difference gradient
// checker and brute-force reference implementations that do not share code
// with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "dpasr/autograd.hpp"
#include "dpasr/matrix.hpp"

namespace dpasr::testing {

inline Matrix RandomMatrix(std::size_t rows, std::size_t cols, std::mt19937_64 &rng,
                           double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double &v : m.values()) v = u(rng);
  return m;
}

inline Parameter RandomParam(const std::string &name, std::size_t rows, std::size_t cols,
                             std::mt19937_64 &rng, double scale = 1.0) {
  return Parameter{name, RandomMatrix(rows, cols, rng, -scale, scale)};
}

struct GradCheckResult {
  int checked = 0;
  double max_rel_error = 0.0;
  std::string worst;
};

// Compares tape gradients of the scalar built by `loss` against central
// differences on `samples` randomly chosen entries of `params`. Entries where
// both gradients are below `abs_floor` count as agreeing.
inline GradCheckResult CheckGradients(const std::vector<Parameter *> &params,
                                      const std::function<Var(Tape &)> &loss, int samples,
                                      std::uint64_t seed, double h = 1e-6,
                                      double abs_floor = 1e-7) {
  Tape tape;
  Var l = loss(tape);
  tape.Backward(l);
  std::vector<Matrix> analytic;
  for (Parameter *p : params) {
    const Matrix *g = tape.GradOf(*p);
    analytic.push_back(g ? *g : Matrix(p->value.rows(), p->value.cols()));
  }
  auto eval = [&] {
    Tape t(false);
    return loss(t).value()(0, 0);
  };
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
  GradCheckResult r;
  for (int s = 0; s < samples; ++s) {
    const std::size_t k = pick_param(rng);
    Matrix &w = params[k]->value;
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, w.size() - 1)(rng);
    const double saved = w[i];
    w[i] = saved + h;
    const double up = eval();
    w[i] = saved - h;
    const double down = eval();
    w[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[k][i];
    double rel = 0.0;
    if (std::max(std::abs(a), std::abs(numeric)) > abs_floor)
      rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst = params[k]->name + "[" + std::to_string(i) + "] analytic " + std::to_string(a) +
                " numeric " + std::to_string(numeric);
    }
    ++r.checked;
  }
  return r;
}

// Plain triple loop E^T E.
inline Matrix GramOracle(const Matrix &e) {
  Matrix s(e.cols(), e.cols());
  for (std::size_t i = 0; i < e.cols(); ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < e.rows(); ++t) acc += e(t, i) * e(t, j);
      s(i, j) = acc;
    }
  return s;
}

// Mean over layers of the squared Frobenius distance, divided by D^2.
inline double StyleLossOracle(const std::vector<Matrix> &clean, const std::vector<Matrix> &fused,
                              const std::vector<int> &layers) {
  double total = 0.0;
  for (int l : layers) {
    const Matrix gc = GramOracle(clean[l - 1]);
    const Matrix gf = GramOracle(fused[l - 1]);
    const double d = static_cast<double>(gc.rows());
    double acc = 0.0;
    for (std::size_t i = 0; i < gc.rows(); ++i)
      for (std::size_t j = 0; j < gc.cols(); ++j)
        acc += (gc(i, j) - gf(i, j)) * (gc(i, j) - gf(i, j));
    total += acc / (d * d);
  }
  return total / static_cast<double>(layers.size());
}

// Row-averaged KL(P||Q) + KL(Q||P) written as two separate sums.
inline double SymmetricKlOracle(const Matrix &a, const Matrix &b) {
  double total = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::vector<double> p(a.cols()), q(a.cols());
    double za = 0.0, zb = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      p[c] = std::exp(a(r, c));
      q[c] = std::exp(b(r, c));
      za += p[c];
      zb += q[c];
    }
    double kl_pq = 0.0, kl_qp = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      p[c] /= za;
      q[c] /= zb;
    }
    for (std::size_t c = 0; c < a.cols(); ++c) {
      kl_pq += p[c] * std::log(p[c] / q[c]);
      kl_qp += q[c] * std::log(q[c] / p[c]);
    }
    total += kl_pq + kl_qp;
  }
  return total / static_cast<double>(a.rows());
}

// Levenshtein distance with unit costs, computed on the full table.
inline int EditDistanceOracle(const std::vector<int> &hyp, const std::vector<int> &ref) {
  std::vector<std::vector<int>> d(ref.size() + 1, std::vector<int>(hyp.size() + 1));
  for (std::size_t i = 0; i <= ref.size(); ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= hyp.size(); ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= ref.size(); ++i)
    for (std::size_t j = 1; j <= hyp.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
  return d[ref.size()][hyp.size()];
}

}  // namespace dpasr::testing

#endif  // DPASR_TESTS_SUPPORT_ORACLES_HPP_
