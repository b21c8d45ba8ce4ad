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

#ifndef DPASR_NN_HPP_
#define DPASR_NN_HPP_

// Small layer library on top of the autograd tape. Layers own their
// Parameters by value, so models are copyable snapshots.

#include <random>
#include <string>
#include <vector>

#include "dpasr/autograd.hpp"

namespace dpasr::nn {

using Rng = std::mt19937_64;

Parameter MakeParam(const std::string &name, std::size_t rows, std::size_t cols);
/// Glorot-uniform initialized matrix.
Parameter XavierParam(const std::string &name, std::size_t fan_in, std::size_t fan_out, Rng &rng);

struct Linear {
  Linear() = default;
  Linear(const std::string &name, std::size_t in, std::size_t out, Rng &rng);
  Var operator()(Tape &tape, Var x);
  void Collect(std::vector<Parameter *> &out);
  Parameter weight, bias;
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(const std::string &name, std::size_t dim);
  Var operator()(Tape &tape, Var x);
  void Collect(std::vector<Parameter *> &out);
  Parameter gamma, beta;
};

/// Position-wise feed-forward: Linear -> SiLU -> Linear.
struct FeedForward {
  FeedForward() = default;
  FeedForward(const std::string &name, std::size_t dim, std::size_t hidden, Rng &rng);
  Var operator()(Tape &tape, Var x);
  void Collect(std::vector<Parameter *> &out);
  Linear in, out;
};

/// Multi-head scaled dot-product attention with separate query and
/// key/value inputs; `causal` masks future key positions.
struct MultiHeadAttention {
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string &name, std::size_t dim, std::size_t heads, Rng &rng);
  Var operator()(Tape &tape, Var query, Var memory, bool causal);
  void Collect(std::vector<Parameter *> &out);
  std::size_t heads = 1;
  Linear q, k, v, o;
};

/// Fixed sinusoidal position table, rows x dim.
Matrix SinusoidalPositions(std::size_t rows, std::size_t dim);

}  // namespace dpasr::nn

#endif  // DPASR_NN_HPP_
