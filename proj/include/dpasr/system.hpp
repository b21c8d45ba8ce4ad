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

#ifndef DPASR_SYSTEM_HPP_
#define DPASR_SYSTEM_HPP_

// The full enhancement -> fusion -> recognizer stack and its per-utterance
// forward pass. During training the recognizer runs twice (fused path and,
// when enabled, clean path) on one tape, so shared parameters accumulate
// gradients from both paths. Inference reads only the noisy input.

#include <cstdint>
#include <string>
#include <vector>

#include "dpasr/audio_synth.hpp"
#include "dpasr/dual_path_asr.hpp"
#include "dpasr/enhancement.hpp"
#include "dpasr/fusion.hpp"
#include "dpasr/style_consistency.hpp"

namespace dpasr {

struct ModelConfig {
  MaskEstimatorConfig se;
  FusionConfig fusion;
  AsrConfig asr;
};

struct SystemModel {
  SystemModel() = default;
  SystemModel(const ModelConfig &config, std::uint64_t seed);

  /// Enhancement, fusion, then recognizer parameters.
  std::vector<Parameter *> Parameters();
  std::size_t NumParameters();

  ModelConfig config;
  MaskEstimator se;
  FusionNet fusion;
  AsrModel asr;
};

struct PreparedUtterance {
  std::string id;
  TokenSequence tokens;
  UtteranceFeatures feats;
};

std::vector<PreparedUtterance> PrepareUtterances(const std::vector<Utterance> &utts,
                                                 const FeatureConfig &config,
                                                 const MelFilterbank &bank);

struct ForwardOptions {
  bool dual_path = true;
  bool use_sl = true;
  bool use_cl = true;
  bool block_clean_grad = true;
  LayerSelection sl_layers;
};

struct PathOutput {
  std::vector<Var> layers;
  Var posterior;
};

/// Everything the training objective and the embedding dumps need. Loss
/// entries are unnormalized sums (enh_sse, ce_*) or per-utterance values
/// (style, consistency); invalid Vars mark disabled terms.
struct SystemForward {
  Var mask, enhanced, x_e, x_f;
  PathOutput fused, clean;
  Var enh_sse, ce_fused, ce_clean, style, consistency;
};

SystemForward ForwardSystem(Tape &tape, SystemModel &model, const PreparedUtterance &utt,
                            const ForwardOptions &options, const MelFilterbank &bank);

/// Differentiable log-mel of an enhanced magnitude Var.
Var LogMelFbank(Tape &tape, Var mags, const MelFilterbank &bank);

/// Inference: noisy magnitudes -> mask -> enhanced -> X_E; fuse with X_N;
/// greedy decode the fused features.
TokenSequence Recognize(SystemModel &model, const Spectrogram &noisy, const FeatureMatrix &x_noisy,
                        const MelFilterbank &bank, int max_len);
/// Same, reading only the noisy fields of a prepared utterance.
TokenSequence Recognize(SystemModel &model, const PreparedUtterance &utt, const MelFilterbank &bank,
                        int max_len);

/// Fused-path corpus TER over prepared utterances.
double EvaluateTer(SystemModel &model, const std::vector<PreparedUtterance> &utts,
                   const MelFilterbank &bank, int max_len,
                   std::vector<TokenSequence> *hyps = nullptr);

}  // namespace dpasr

#endif  // DPASR_SYSTEM_HPP_
