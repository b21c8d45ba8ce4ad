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

#include "dpasr/fusion.hpp"

#include <string>

#include "dpasr/error.hpp"

namespace dpasr {

namespace {
constexpr std::size_t kKernel = 3;
}

FusionNet::FusionNet(const FusionConfig &config, nn::Rng &rng) : config_(config) {
  DPASR_REQUIRE(config.feat_dim >= 1 && config.channels >= 1, "FusionNet: sizes must be positive");
  const std::size_t c = config.channels;
  input_ = nn::Linear("fusion.input", kKernel * 2 * config.feat_dim, c, rng);
  input_norm_ = nn::LayerNorm("fusion.input_norm", c);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string prefix = "fusion.block" + std::to_string(b);
    blocks_.push_back({nn::Linear(prefix + ".conv1", kKernel * c, c, rng),
                       nn::Linear(prefix + ".conv2", kKernel * c, c, rng),
                       nn::Linear(prefix + ".attention", c, c, rng)});
  }
  gate_ = nn::Linear("fusion.gate", c, config.feat_dim, rng);
  residual_ = nn::Linear("fusion.residual", c, config.feat_dim, rng);
  gate_.weight.value.SetZero();
  residual_.weight.value.SetZero();
}

FusionOutput FusionNet::Forward(Tape &tape, Var x_e, Var x_n) {
  DPASR_REQUIRE(x_e.value().SameShape(x_n.value()), "Fuse: x_e and x_n differ in shape");
  DPASR_REQUIRE(x_e.cols() == config_.feat_dim, "Fuse: feature width does not match model");
  const Var both[] = {x_e, x_n};
  Var h = input_norm_(tape, input_(tape, ag::UnfoldTime(ag::ConcatCols(both), kKernel, 1)));
  for (Block &b : blocks_) {
    Var inner = ag::Silu(b.conv1(tape, ag::UnfoldTime(h, kKernel, 1)));
    Var conv = b.conv2(tape, ag::UnfoldTime(inner, kKernel, 1));
    Var att = ag::Sigmoid(b.attention(tape, h));
    h = ag::Add(h, ag::Mul(att, conv));
  }
  FusionOutput out;
  out.gate = ag::Sigmoid(gate_(tape, h));
  out.residual = residual_(tape, h);
  // g * x_e + (1 - g) * x_n == x_n + g * (x_e - x_n)
  out.fused = ag::Add(ag::Add(x_n, ag::Mul(out.gate, ag::Sub(x_e, x_n))), out.residual);
  return out;
}

std::vector<Parameter *> FusionNet::Parameters() {
  std::vector<Parameter *> out;
  input_.Collect(out);
  input_norm_.Collect(out);
  for (Block &b : blocks_) {
    b.conv1.Collect(out);
    b.conv2.Collect(out);
    b.attention.Collect(out);
  }
  gate_.Collect(out);
  residual_.Collect(out);
  return out;
}

FeatureMatrix Fuse(const FeatureMatrix &x_e, const FeatureMatrix &x_n, FusionNet &model) {
  DPASR_REQUIRE(x_e.values.SameShape(x_n.values), "Fuse: x_e and x_n differ in shape");
  Tape tape(false);
  return {model.Fuse(tape, tape.Constant(x_e.values), tape.Constant(x_n.values)).value()};
}

}  // namespace dpasr
