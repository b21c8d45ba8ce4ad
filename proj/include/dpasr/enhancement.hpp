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

#ifndef DPASR_ENHANCEMENT_HPP_
#define DPASR_ENHANCEMENT_HPP_

// Mask-based enhancement front end: a bidirectional LSTM stack over the
// noisy magnitudes followed by a rectified linear projection to one mask
// value per frequency bin.

#include <array>
#include <vector>

#include "dpasr/audio_synth.hpp"
#include "dpasr/autograd.hpp"
#include "dpasr/nn.hpp"

namespace dpasr {

struct MaskEstimatorConfig {
  std::size_t num_bins = 101;
  std::size_t hidden = 64;  // per direction
  std::size_t layers = 2;
};

class MaskEstimator {
 public:
  MaskEstimator() = default;
  MaskEstimator(const MaskEstimatorConfig &config, nn::Rng &rng);

  /// T x K rectified mask for `noisy` (T x K magnitudes). The recurrent stack
  /// sees log(1 + magnitude).
  Var EstimateMask(Tape &tape, const Matrix &noisy);

  std::vector<Parameter *> Parameters();
  std::size_t NumParameters();
  const MaskEstimatorConfig &config() const { return config_; }

  /// Output projection; exposed so tests can pin it.
  nn::Linear &projection() { return proj_; }

 private:
  struct Direction {
    Parameter w_ih, w_hh, bias;
  };
  MaskEstimatorConfig config_;
  std::vector<std::array<Direction, 2>> layers_;
  nn::Linear proj_;
};

/// Evaluates the mask without recording gradients.
Matrix EstimateMask(const Spectrogram &noisy, MaskEstimator &model);

/// enhanced = noisy * mask (elementwise).
Var ApplyMask(Var noisy, Var mask);
Spectrogram ApplyMask(const Spectrogram &noisy, const Matrix &mask);

/// Sum of squared magnitude differences. Batched training divides by the
/// number of unpadded entries in the batch.
Var EnhancementSquaredError(Var enhanced, Var clean);
/// Mean over all T x K entries of the squared difference.
Var EnhancementLoss(Var enhanced, Var clean);
double EnhancementLoss(const Spectrogram &enhanced, const Spectrogram &clean);

}  // namespace dpasr

#endif  // DPASR_ENHANCEMENT_HPP_
