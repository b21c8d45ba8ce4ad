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

#include "dpasr/system.hpp"

#include <random>

#include "dpasr/error.hpp"
#include "dpasr/scoring.hpp"

namespace dpasr {

SystemModel::SystemModel(const ModelConfig &cfg, std::uint64_t seed) : config(cfg) {
  nn::Rng rng(seed);
  se = MaskEstimator(cfg.se, rng);
  fusion = FusionNet(cfg.fusion, rng);
  asr = AsrModel(cfg.asr, rng);
}

std::vector<Parameter *> SystemModel::Parameters() {
  std::vector<Parameter *> out = se.Parameters();
  for (Parameter *p : fusion.Parameters()) out.push_back(p);
  for (Parameter *p : asr.Parameters()) out.push_back(p);
  return out;
}

std::size_t SystemModel::NumParameters() {
  std::size_t n = 0;
  for (Parameter *p : Parameters()) n += p->value.size();
  return n;
}

std::vector<PreparedUtterance> PrepareUtterances(const std::vector<Utterance> &utts,
                                                 const FeatureConfig &config,
                                                 const MelFilterbank &bank) {
  std::vector<PreparedUtterance> out(utts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(utts.size()); ++i) {
    const auto &u = utts[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = {u.id, u.tokens, ExtractFeatures(u, config, bank)};
  }
  return out;
}

Var LogMelFbank(Tape &tape, Var mags, const MelFilterbank &bank) {
  DPASR_REQUIRE(mags.cols() == bank.num_bins(), "LogMelFbank: bin count mismatch");
  Var power = ag::Mul(mags, mags);
  Var mel = ag::MatMulTB(power, tape.Constant(bank.weights()));
  return ag::Log(ag::AddScalar(mel, kLogFloor));
}

namespace {

PathOutput RunPath(Tape &tape, AsrModel &asr, Var x, const TokenSequence &tokens) {
  PathOutput out;
  out.layers = asr.Encode(tape, x);
  out.posterior = asr.Decode(tape, out.layers.back(), FrameDecoderInput(tokens));
  return out;
}

}  // namespace

SystemForward ForwardSystem(Tape &tape, SystemModel &model, const PreparedUtterance &utt,
                            const ForwardOptions &options, const MelFilterbank &bank) {
  SystemForward f;
  const auto &feats = utt.feats;
  Var noisy = tape.Constant(feats.noisy.mags);
  f.mask = model.se.EstimateMask(tape, feats.noisy.mags);
  f.enhanced = ApplyMask(noisy, f.mask);
  f.enh_sse = EnhancementSquaredError(f.enhanced, tape.Constant(feats.clean.mags));
  f.x_e = LogMelFbank(tape, f.enhanced, bank);
  f.x_f = model.fusion.Fuse(tape, f.x_e, tape.Constant(feats.x_noisy.values));

  f.fused = RunPath(tape, model.asr, f.x_f, utt.tokens);
  f.ce_fused = AsrLossSum(f.fused.posterior, utt.tokens);
  if (!options.dual_path) return f;

  f.clean = RunPath(tape, model.asr, tape.Constant(feats.x_clean.values), utt.tokens);
  f.ce_clean = AsrLossSum(f.clean.posterior, utt.tokens);
  if (options.use_sl)
    f.style = StyleLoss(f.clean.layers, f.fused.layers, options.sl_layers, options.block_clean_grad);
  if (options.use_cl)
    f.consistency =
        ConsistencyLoss(f.clean.posterior, f.fused.posterior, options.block_clean_grad);
  return f;
}

TokenSequence Recognize(SystemModel &model, const Spectrogram &noisy, const FeatureMatrix &x_noisy,
                        const MelFilterbank &bank, int max_len) {
  DPASR_REQUIRE(noisy.mags.rows() == x_noisy.values.rows(),
                "Recognize: spectrogram and features differ in frame count");
  FeatureMatrix x_f;
  {
    Tape tape(false);
    Var mask = model.se.EstimateMask(tape, noisy.mags);
    Var enhanced = ApplyMask(tape.Constant(noisy.mags), mask);
    Var x_e = LogMelFbank(tape, enhanced, bank);
    x_f.values = model.fusion.Fuse(tape, x_e, tape.Constant(x_noisy.values)).value();
  }
  return GreedyDecode(x_f, model.asr, max_len);
}

TokenSequence Recognize(SystemModel &model, const PreparedUtterance &utt, const MelFilterbank &bank,
                        int max_len) {
  return Recognize(model, utt.feats.noisy, utt.feats.x_noisy, bank, max_len);
}

double EvaluateTer(SystemModel &model, const std::vector<PreparedUtterance> &utts,
                   const MelFilterbank &bank, int max_len, std::vector<TokenSequence> *hyps_out) {
  DPASR_REQUIRE(!utts.empty(), "EvaluateTer: no utterances");
  std::vector<TokenSequence> hyps(utts.size()), refs(utts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(utts.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    hyps[k] = Recognize(model, utts[k], bank, max_len);
    refs[k] = utts[k].tokens;
  }
  const double ter = CorpusTokenErrorRate(hyps, refs);
  if (hyps_out) *hyps_out = std::move(hyps);
  return ter;
}

}  // namespace dpasr
