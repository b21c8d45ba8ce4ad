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

#include "dpasr/nn.hpp"

#include <cmath>

#include "dpasr/error.hpp"

namespace dpasr::nn {

Parameter MakeParam(const std::string &name, std::size_t rows, std::size_t cols) {
  return Parameter{name, Matrix(rows, cols)};
}

Parameter XavierParam(const std::string &name, std::size_t fan_in, std::size_t fan_out, Rng &rng) {
  Parameter p = MakeParam(name, fan_in, fan_out);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double &v : p.value.values()) v = u(rng);
  return p;
}

Linear::Linear(const std::string &name, std::size_t in, std::size_t out, Rng &rng)
    : weight(XavierParam(name + ".weight", in, out, rng)), bias(MakeParam(name + ".bias", 1, out)) {}

Var Linear::operator()(Tape &tape, Var x) {
  return ag::Linear(x, tape.Param(weight), tape.Param(bias));
}

void Linear::Collect(std::vector<Parameter *> &out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string &name, std::size_t dim)
    : gamma{name + ".gamma", Matrix(1, dim, 1.0)}, beta(MakeParam(name + ".beta", 1, dim)) {}

Var LayerNorm::operator()(Tape &tape, Var x) {
  return ag::LayerNorm(x, tape.Param(gamma), tape.Param(beta));
}

void LayerNorm::Collect(std::vector<Parameter *> &out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

FeedForward::FeedForward(const std::string &name, std::size_t dim, std::size_t hidden, Rng &rng)
    : in(name + ".in", dim, hidden, rng), out(name + ".out", hidden, dim, rng) {}

Var FeedForward::operator()(Tape &tape, Var x) { return out(tape, ag::Silu(in(tape, x))); }

void FeedForward::Collect(std::vector<Parameter *> &params) {
  in.Collect(params);
  out.Collect(params);
}

MultiHeadAttention::MultiHeadAttention(const std::string &name, std::size_t dim, std::size_t heads_,
                                       Rng &rng)
    : heads(heads_),
      q(name + ".q", dim, dim, rng),
      k(name + ".k", dim, dim, rng),
      v(name + ".v", dim, dim, rng),
      o(name + ".o", dim, dim, rng) {
  DPASR_REQUIRE(heads >= 1 && dim % heads == 0, "MultiHeadAttention: dim must divide by heads");
}

Var MultiHeadAttention::operator()(Tape &tape, Var query, Var memory, bool causal) {
  const std::size_t dim = query.cols();
  const std::size_t dk = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Var qs = q(tape, query), ks = k(tape, memory), vs = v(tape, memory);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = ag::SliceCols(qs, h * dk, dk);
    Var kh = ag::SliceCols(ks, h * dk, dk);
    Var vh = ag::SliceCols(vs, h * dk, dk);
    Var scores = ag::Scale(ag::MatMulTB(qh, kh), scale);
    if (causal) scores = ag::CausalMask(scores);
    outs.push_back(ag::MatMul(ag::SoftmaxRows(scores), vh));
  }
  Var cat = heads == 1 ? outs[0] : ag::ConcatCols(outs);
  return o(tape, cat);
}

void MultiHeadAttention::Collect(std::vector<Parameter *> &out) {
  q.Collect(out);
  k.Collect(out);
  v.Collect(out);
  o.Collect(out);
}

Matrix SinusoidalPositions(std::size_t rows, std::size_t dim) {
  Matrix pe(rows, dim);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      pe(t, i) = std::sin(static_cast<double>(t) * freq);
      if (i + 1 < dim) pe(t, i + 1) = std::cos(static_cast<double>(t) * freq);
    }
  return pe;
}

}  // namespace dpasr::nn
