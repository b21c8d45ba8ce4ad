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

#ifndef DPASR_FUSION_HPP_
#define DPASR_FUSION_HPP_

// Fusion of enhanced and noisy filterbank features. A small trunk of
// residual attention blocks (time convolutions with a sigmoid channel
// attention on the residual) reads both inputs; two heads turn the trunk
// output into a per-entry merge gate g and a residual correction r:
//
//   x_f = g * x_e + (1 - g) * x_n + r
//
// Both heads start at zero, so an untrained net averages its inputs.

#include <vector>

#include "dpasr/audio_synth.hpp"
#include "dpasr/autograd.hpp"
#include "dpasr/nn.hpp"

namespace dpasr {

struct FusionConfig {
  std::size_t feat_dim = 40;
  std::size_t blocks = 4;
  std::size_t channels = 64;
};

struct FusionOutput {
  Var fused;
  Var gate;
  Var residual;
};

class FusionNet {
 public:
  FusionNet() = default;
  FusionNet(const FusionConfig &config, nn::Rng &rng);

  FusionOutput Forward(Tape &tape, Var x_e, Var x_n);
  Var Fuse(Tape &tape, Var x_e, Var x_n) { return Forward(tape, x_e, x_n).fused; }

  std::vector<Parameter *> Parameters();
  const FusionConfig &config() const { return config_; }

  nn::Linear &gate_head() { return gate_; }
  nn::Linear &residual_head() { return residual_; }

 private:
  struct Block {
    nn::Linear conv1, conv2, attention;
  };
  FusionConfig config_;
  nn::Linear input_;
  nn::LayerNorm input_norm_;
  std::vector<Block> blocks_;
  nn::Linear gate_, residual_;
};

FeatureMatrix Fuse(const FeatureMatrix &x_e, const FeatureMatrix &x_n, FusionNet &model);

}  // namespace dpasr

#endif  // DPASR_FUSION_HPP_
