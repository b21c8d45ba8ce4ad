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

#include "dpasr/dual_path_asr.hpp"

#include <cmath>
#include <string>

#include "dpasr/error.hpp"

namespace dpasr {

namespace {
constexpr std::size_t kFrontKernel = 3;
constexpr std::size_t kFrontStride = 2;
}  // namespace

AsrModel::AsrModel(const AsrConfig &config, nn::Rng &rng) : config_(config) {
  const std::size_t d = config.d_model;
  DPASR_REQUIRE(d >= 2 && config.heads >= 1 && d % config.heads == 0,
                "AsrModel: d_model must be divisible by heads");
  DPASR_REQUIRE(config.enc_layers >= 1 && config.dec_layers >= 1,
                "AsrModel: need at least one encoder and decoder layer");
  DPASR_REQUIRE(config.conv_kernel % 2 == 1, "AsrModel: conv kernel must be odd");
  front_ = nn::Linear("asr.front", kFrontKernel * config.feat_dim, d, rng);
  front_norm_ = nn::LayerNorm("asr.front_norm", d);
  for (std::size_t l = 0; l < config.enc_layers; ++l) {
    const std::string p = "asr.enc" + std::to_string(l);
    EncoderLayer layer;
    layer.ff1_norm = nn::LayerNorm(p + ".ff1_norm", d);
    layer.ff1 = nn::FeedForward(p + ".ff1", d, config.ff_dim, rng);
    layer.att_norm = nn::LayerNorm(p + ".att_norm", d);
    layer.attention = nn::MultiHeadAttention(p + ".att", d, config.heads, rng);
    layer.conv_norm = nn::LayerNorm(p + ".conv_norm", d);
    layer.pointwise_in = nn::Linear(p + ".pw_in", d, 2 * d, rng);
    layer.depthwise = nn::XavierParam(p + ".dw", config.conv_kernel, d, rng);
    layer.depthwise_bias = nn::MakeParam(p + ".dw_bias", 1, d);
    layer.dw_norm = nn::LayerNorm(p + ".dw_norm", d);
    layer.pointwise_out = nn::Linear(p + ".pw_out", d, d, rng);
    layer.ff2_norm = nn::LayerNorm(p + ".ff2_norm", d);
    layer.ff2 = nn::FeedForward(p + ".ff2", d, config.ff_dim, rng);
    layer.out_norm = nn::LayerNorm(p + ".out_norm", d);
    encoder_.push_back(std::move(layer));
  }
  embedding_ = nn::XavierParam("asr.embedding", config.vocab, d, rng);
  for (std::size_t l = 0; l < config.dec_layers; ++l) {
    const std::string p = "asr.dec" + std::to_string(l);
    DecoderLayer layer;
    layer.self_norm = nn::LayerNorm(p + ".self_norm", d);
    layer.self_attention = nn::MultiHeadAttention(p + ".self_att", d, config.heads, rng);
    layer.cross_norm = nn::LayerNorm(p + ".cross_norm", d);
    layer.cross_attention = nn::MultiHeadAttention(p + ".cross_att", d, config.heads, rng);
    layer.ff_norm = nn::LayerNorm(p + ".ff_norm", d);
    layer.ff = nn::FeedForward(p + ".ff", d, config.ff_dim, rng);
    decoder_.push_back(std::move(layer));
  }
  final_norm_ = nn::LayerNorm("asr.final_norm", d);
  output_ = nn::Linear("asr.output", d, config.vocab, rng);
}

Var AsrModel::EncoderLayerForward(Tape &tape, EncoderLayer &layer, Var x) {
  x = ag::Add(x, ag::Scale(layer.ff1(tape, layer.ff1_norm(tape, x)), 0.5));
  Var a = layer.att_norm(tape, x);
  x = ag::Add(x, layer.attention(tape, a, a, false));
  // Convolution module: pointwise -> GLU -> depthwise -> norm -> SiLU -> pointwise.
  Var c = layer.pointwise_in(tape, layer.conv_norm(tape, x));
  const std::size_t d = config_.d_model;
  c = ag::Mul(ag::SliceCols(c, 0, d), ag::Sigmoid(ag::SliceCols(c, d, d)));
  c = ag::DepthwiseConvTime(c, tape.Param(layer.depthwise), tape.Param(layer.depthwise_bias));
  c = layer.pointwise_out(tape, ag::Silu(layer.dw_norm(tape, c)));
  x = ag::Add(x, c);
  x = ag::Add(x, ag::Scale(layer.ff2(tape, layer.ff2_norm(tape, x)), 0.5));
  return layer.out_norm(tape, x);
}

std::vector<Var> AsrModel::Encode(Tape &tape, Var x) {
  DPASR_REQUIRE(x.cols() == config_.feat_dim, "Encode: feature width does not match model");
  DPASR_REQUIRE(x.rows() >= 1, "Encode: empty input");
  DPASR_REQUIRE(x.value().AllFinite(), "Encode: non-finite input");
  Var h = front_norm_(tape, front_(tape, ag::UnfoldTime(x, kFrontKernel, kFrontStride)));
  h = ag::Add(h, tape.Constant(nn::SinusoidalPositions(h.rows(), config_.d_model)));
  std::vector<Var> outs;
  outs.reserve(encoder_.size());
  for (EncoderLayer &layer : encoder_) {
    h = EncoderLayerForward(tape, layer, h);
    outs.push_back(h);
  }
  return outs;
}

Var AsrModel::Decode(Tape &tape, Var enc_top, std::span<const int> framed) {
  DPASR_REQUIRE(!framed.empty(), "Decode: empty target sequence");
  DPASR_REQUIRE(framed[0] == kStartToken, "Decode: targets must start with the start symbol");
  DPASR_REQUIRE(enc_top.cols() == config_.d_model, "Decode: encoder width mismatch");
  const double emb_scale = std::sqrt(static_cast<double>(config_.d_model));
  Var h = ag::Scale(ag::GatherRows(tape.Param(embedding_), framed), emb_scale);
  h = ag::Add(h, tape.Constant(nn::SinusoidalPositions(framed.size(), config_.d_model)));
  for (DecoderLayer &layer : decoder_) {
    Var s = layer.self_norm(tape, h);
    h = ag::Add(h, layer.self_attention(tape, s, s, true));
    h = ag::Add(h, layer.cross_attention(tape, layer.cross_norm(tape, h), enc_top, false));
    h = ag::Add(h, layer.ff(tape, layer.ff_norm(tape, h)));
  }
  return output_(tape, final_norm_(tape, h));
}

std::vector<Parameter *> AsrModel::Parameters() {
  std::vector<Parameter *> out;
  front_.Collect(out);
  front_norm_.Collect(out);
  for (EncoderLayer &l : encoder_) {
    l.ff1_norm.Collect(out);
    l.ff1.Collect(out);
    l.att_norm.Collect(out);
    l.attention.Collect(out);
    l.conv_norm.Collect(out);
    l.pointwise_in.Collect(out);
    out.push_back(&l.depthwise);
    out.push_back(&l.depthwise_bias);
    l.dw_norm.Collect(out);
    l.pointwise_out.Collect(out);
    l.ff2_norm.Collect(out);
    l.ff2.Collect(out);
    l.out_norm.Collect(out);
  }
  out.push_back(&embedding_);
  for (DecoderLayer &l : decoder_) {
    l.self_norm.Collect(out);
    l.self_attention.Collect(out);
    l.cross_norm.Collect(out);
    l.cross_attention.Collect(out);
    l.ff_norm.Collect(out);
    l.ff.Collect(out);
  }
  final_norm_.Collect(out);
  output_.Collect(out);
  return out;
}

std::size_t AsrModel::NumParameters() {
  std::size_t n = 0;
  for (Parameter *p : Parameters()) n += p->value.size();
  return n;
}

std::vector<int> FrameDecoderInput(const TokenSequence &tokens) {
  std::vector<int> framed{kStartToken};
  framed.insert(framed.end(), tokens.begin(), tokens.end());
  return framed;
}

std::vector<int> FrameDecoderTargets(const TokenSequence &tokens) {
  std::vector<int> framed(tokens.begin(), tokens.end());
  framed.push_back(kEndToken);
  return framed;
}

std::vector<LayerEmbedding> Encode(const FeatureMatrix &x, AsrModel &model) {
  Tape tape(false);
  std::vector<LayerEmbedding> out;
  int l = 1;
  for (Var v : model.Encode(tape, tape.Constant(x.values))) out.push_back({v.value(), l++});
  return out;
}

DecoderPosterior Decode(const LayerEmbedding &enc_top, std::span<const int> framed,
                        AsrModel &model) {
  Tape tape(false);
  return {model.Decode(tape, tape.Constant(enc_top.values), framed).value()};
}

Var AsrLossSum(Var posterior, const TokenSequence &tokens) {
  DPASR_REQUIRE(posterior.rows() == tokens.size() + 1,
                "AsrLoss: posterior rows must equal target length + 1");
  const auto targets = FrameDecoderTargets(tokens);
  return ag::CrossEntropySum(posterior, targets);
}

double AsrLoss(const DecoderPosterior &posterior, const TokenSequence &tokens) {
  Tape tape(false);
  const double sum = AsrLossSum(tape.Constant(posterior.scores), tokens).value()(0, 0);
  return sum / static_cast<double>(tokens.size() + 1);
}

TokenSequence GreedyDecode(const FeatureMatrix &x_f, AsrModel &model, int max_len) {
  DPASR_REQUIRE(max_len > 0, "GreedyDecode: max_len must be positive");
  Tape tape(false);
  Var enc_top = model.Encode(tape, tape.Constant(x_f.values)).back();
  std::vector<int> framed{kStartToken};
  TokenSequence hyp;
  for (int step = 0; step < max_len; ++step) {
    const Matrix scores = model.Decode(tape, enc_top, framed).value();
    const auto last = scores.Row(scores.rows() - 1);
    int best = 0;
    for (std::size_t v = 1; v < last.size(); ++v)
      if (last[v] > last[static_cast<std::size_t>(best)]) best = static_cast<int>(v);
    if (best == kEndToken) break;
    framed.push_back(best);
    if (IsContentToken(best)) hyp.push_back(best);
  }
  return hyp;
}

}  // namespace dpasr
