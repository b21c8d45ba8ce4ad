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

#ifndef DPASR_DUAL_PATH_ASR_HPP_
#define DPASR_DUAL_PATH_ASR_HPP_

// Attention encoder-decoder recognizer. One AsrModel instance is run on both
// the clean and the fused features during training; both runs read the same
// Parameter storage, so there is exactly one parameter set.
//
// Encoder: stride-2 convolutional front (kernel 3) -> L conformer-style
// layers (half FF, self-attention, convolution module, half FF, norm).
// Decoder: L_dec transformer layers (causal self-attention, cross-attention,
// FF) and an output projection to vocabulary scores.

#include <span>
#include <vector>

#include "dpasr/audio_synth.hpp"
#include "dpasr/autograd.hpp"
#include "dpasr/nn.hpp"

namespace dpasr {

struct AsrConfig {
  std::size_t feat_dim = 40;
  std::size_t d_model = 64;
  std::size_t heads = 2;
  std::size_t ff_dim = 256;
  std::size_t enc_layers = 4;
  std::size_t dec_layers = 2;
  std::size_t conv_kernel = 7;
  std::size_t vocab = kVocabSize;
};

struct LayerEmbedding {
  Matrix values;  // T' x D
  int layer = 0;  // 1-based
};

struct DecoderPosterior {
  Matrix scores;  // U x V, before softmax
};

class AsrModel {
 public:
  AsrModel() = default;
  AsrModel(const AsrConfig &config, nn::Rng &rng);

  /// Outputs of every encoder layer, first layer first.
  std::vector<Var> Encode(Tape &tape, Var x);
  /// Teacher-forced decoder scores; `framed` starts with kStartToken.
  Var Decode(Tape &tape, Var enc_top, std::span<const int> framed);

  std::vector<Parameter *> Parameters();
  std::size_t NumParameters();
  const AsrConfig &config() const { return config_; }

  nn::Linear &output_projection() { return output_; }

 private:
  struct EncoderLayer {
    nn::LayerNorm ff1_norm, att_norm, conv_norm, ff2_norm, out_norm, dw_norm;
    nn::FeedForward ff1, ff2;
    nn::MultiHeadAttention attention;
    nn::Linear pointwise_in, pointwise_out;
    Parameter depthwise, depthwise_bias;
  };
  struct DecoderLayer {
    nn::LayerNorm self_norm, cross_norm, ff_norm;
    nn::MultiHeadAttention self_attention, cross_attention;
    nn::FeedForward ff;
  };

  Var EncoderLayerForward(Tape &tape, EncoderLayer &layer, Var x);

  AsrConfig config_;
  nn::Linear front_;
  nn::LayerNorm front_norm_;
  std::vector<EncoderLayer> encoder_;
  Parameter embedding_;
  std::vector<DecoderLayer> decoder_;
  nn::LayerNorm final_norm_;
  nn::Linear output_;
};

/// Frames a content transcript for teacher forcing: [start, t1..tn].
std::vector<int> FrameDecoderInput(const TokenSequence &tokens);
/// Next-token targets aligned with FrameDecoderInput: [t1..tn, end].
std::vector<int> FrameDecoderTargets(const TokenSequence &tokens);

std::vector<LayerEmbedding> Encode(const FeatureMatrix &x, AsrModel &model);
/// `framed` must be non-empty and start with kStartToken.
DecoderPosterior Decode(const LayerEmbedding &enc_top, std::span<const int> framed,
                        AsrModel &model);

/// Summed cross-entropy of the next-token targets of `tokens`; the posterior
/// must have tokens.size() + 1 rows.
Var AsrLossSum(Var posterior, const TokenSequence &tokens);
/// Mean cross-entropy per target position.
double AsrLoss(const DecoderPosterior &posterior, const TokenSequence &tokens);

/// Autoregressive argmax decoding of a fused feature matrix. Returns content
/// tokens only; stops at kEndToken or after max_len tokens.
TokenSequence GreedyDecode(const FeatureMatrix &x_f, AsrModel &model, int max_len);

}  // namespace dpasr

#endif  // DPASR_DUAL_PATH_ASR_HPP_
