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

#include "dpasr/enhancement.hpp"

#include <cmath>
#include <string>

#include "dpasr/error.hpp"

namespace dpasr {

MaskEstimator::MaskEstimator(const MaskEstimatorConfig &config, nn::Rng &rng) : config_(config) {
  DPASR_REQUIRE(config.num_bins >= 1 && config.hidden >= 1 && config.layers >= 1,
                "MaskEstimator: sizes must be positive");
  const std::size_t h = config.hidden;
  const double limit = 1.0 / std::sqrt(static_cast<double>(h));
  std::uniform_real_distribution<double> u(-limit, limit);
  auto init = [&](const std::string &name, std::size_t rows, std::size_t cols) {
    Parameter p = nn::MakeParam(name, rows, cols);
    for (double &v : p.value.values()) v = u(rng);
    return p;
  };
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? config.num_bins : 2 * h;
    std::array<Direction, 2> dirs;
    for (int d = 0; d < 2; ++d) {
      const std::string prefix =
          "se.lstm" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      dirs[d].w_ih = init(prefix + ".w_ih", in, 4 * h);
      dirs[d].w_hh = init(prefix + ".w_hh", h, 4 * h);
      dirs[d].bias = nn::MakeParam(prefix + ".bias", 1, 4 * h);
      for (std::size_t k = h; k < 2 * h; ++k) dirs[d].bias.value(0, k) = 1.0;  // forget gate
    }
    layers_.push_back(std::move(dirs));
  }
  // Start close to a pass-through mask so the recognizer sees intact
  // features while the enhancer is still untrained.
  proj_ = nn::Linear("se.proj", 2 * h, config.num_bins, rng);
  proj_.weight.value.Scale(0.1);
  for (double &b : proj_.bias.value.values()) b = 1.0;
}

Var MaskEstimator::EstimateMask(Tape &tape, const Matrix &noisy) {
  DPASR_REQUIRE(noisy.cols() == config_.num_bins, "EstimateMask: bin count does not match model");
  DPASR_REQUIRE(noisy.rows() >= 1, "EstimateMask: empty input");
  DPASR_REQUIRE(noisy.AllFinite(), "EstimateMask: non-finite input");
  Matrix compressed = noisy;
  for (double &v : compressed.values()) v = std::log1p(v);
  Var h = tape.Constant(std::move(compressed));
  for (auto &dirs : layers_) {
    Var fwd = ag::Lstm(h, tape.Param(dirs[0].w_ih), tape.Param(dirs[0].w_hh),
                       tape.Param(dirs[0].bias), false);
    Var bwd = ag::Lstm(h, tape.Param(dirs[1].w_ih), tape.Param(dirs[1].w_hh),
                       tape.Param(dirs[1].bias), true);
    const Var parts[] = {fwd, bwd};
    h = ag::ConcatCols(parts);
  }
  return ag::Relu(proj_(tape, h));
}

std::vector<Parameter *> MaskEstimator::Parameters() {
  std::vector<Parameter *> out;
  for (auto &dirs : layers_)
    for (auto &d : dirs) {
      out.push_back(&d.w_ih);
      out.push_back(&d.w_hh);
      out.push_back(&d.bias);
    }
  proj_.Collect(out);
  return out;
}

std::size_t MaskEstimator::NumParameters() {
  std::size_t n = 0;
  for (Parameter *p : Parameters()) n += p->value.size();
  return n;
}

Matrix EstimateMask(const Spectrogram &noisy, MaskEstimator &model) {
  Tape tape(false);
  return model.EstimateMask(tape, noisy.mags).value();
}

Var ApplyMask(Var noisy, Var mask) {
  DPASR_REQUIRE(noisy.value().SameShape(mask.value()), "ApplyMask: shape mismatch");
  return ag::Mul(noisy, mask);
}

Spectrogram ApplyMask(const Spectrogram &noisy, const Matrix &mask) {
  DPASR_REQUIRE(noisy.mags.SameShape(mask), "ApplyMask: shape mismatch");
  Spectrogram out = noisy;
  for (std::size_t i = 0; i < mask.size(); ++i) out.mags[i] *= mask[i];
  return out;
}

Var EnhancementSquaredError(Var enhanced, Var clean) {
  DPASR_REQUIRE(enhanced.value().SameShape(clean.value()), "EnhancementLoss: shape mismatch");
  return ag::SumSquares(ag::Sub(enhanced, clean));
}

Var EnhancementLoss(Var enhanced, Var clean) {
  const double n = static_cast<double>(enhanced.value().size());
  DPASR_REQUIRE(n > 0, "EnhancementLoss: empty input");
  return ag::Scale(EnhancementSquaredError(enhanced, clean), 1.0 / n);
}

double EnhancementLoss(const Spectrogram &enhanced, const Spectrogram &clean) {
  Tape tape(false);
  return EnhancementLoss(tape.Constant(enhanced.mags), tape.Constant(clean.mags)).value()(0, 0);
}

}  // namespace dpasr
