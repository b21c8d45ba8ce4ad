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

#include <doctest.h>

#include <cmath>
#include <set>

#include "dpasr/dual_path_asr.hpp"
#include "dpasr/error.hpp"
#include "dpasr/system.hpp"
#include "support/oracles.hpp"

using namespace dpasr;
using testing::RandomMatrix;

namespace {

AsrConfig SmallAsr() {
  AsrConfig c;
  c.feat_dim = 6;
  c.d_model = 8;
  c.heads = 2;
  c.ff_dim = 12;
  c.enc_layers = 2;
  c.dec_layers = 1;
  c.conv_kernel = 3;
  return c;
}

AsrModel MakeAsr(std::uint64_t seed, const AsrConfig &c = SmallAsr()) {
  nn::Rng rng(seed);
  return AsrModel(c, rng);
}

double MeanAbsDiff(const Matrix &a, const Matrix &b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

// Per-row log-sum-exp and negative log-likelihood, averaged over rows.
double CrossEntropyOracle(const Matrix &s, const std::vector<int> &targets) {
  double total = 0.0;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < s.cols(); ++c) z += std::exp(s(r, c));
    total += std::log(z) - s(r, static_cast<std::size_t>(targets[r]));
  }
  return total / static_cast<double>(s.rows());
}

}  // namespace

TEST_SUITE("dual_path_asr") {
  TEST_CASE("encoder returns one T' x D embedding per layer") {
    AsrModel model = MakeAsr(1);
    std::mt19937_64 rng(2);
    for (std::size_t t : {1u, 5u, 17u}) {
      const auto layers = Encode({RandomMatrix(t, 6, rng)}, model);
      REQUIRE(layers.size() == 2);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        CHECK(layers[l].layer == static_cast<int>(l + 1));
        CHECK(layers[l].values.rows() == (t + 1) / 2);  // stride-2 front end
        CHECK(layers[l].values.cols() == 8);
        CHECK(layers[l].values.AllFinite());
      }
    }
    CHECK_THROWS_AS(Encode({Matrix(3, 5)}, model), InvalidInput);
  }

  TEST_CASE("evaluation is deterministic and the two paths differ") {
    AsrModel model = MakeAsr(3);
    std::mt19937_64 rng(4);
    const Matrix x_c = RandomMatrix(9, 6, rng), x_f = RandomMatrix(9, 6, rng);
    const auto a = Encode({x_c}, model), b = Encode({x_c}, model), f = Encode({x_f}, model);
    for (std::size_t l = 0; l < a.size(); ++l) {
      CHECK(a[l].values == b[l].values);
      CHECK(MeanAbsDiff(a[l].values, f[l].values) > 0.0);
    }
    const std::vector<int> framed = FrameDecoderInput({1, 2});
    CHECK(MeanAbsDiff(Decode(a.back(), framed, model).scores,
                      Decode(f.back(), framed, model).scores) > 0.0);
  }

  TEST_CASE("one parameter set serves both paths") {
    AsrModel model = MakeAsr(5);
    std::vector<Parameter *> params = model.Parameters();
    std::set<const Parameter *> unique(params.begin(), params.end());
    CHECK(unique.size() == params.size());
    std::mt19937_64 rng(6);
    const Matrix x = RandomMatrix(4, 6, rng);
    const Matrix before = Encode({x}, model).back().values;
    params.front()->value.Scale(2.0);
    const Matrix clean_after = Encode({x}, model).back().values;
    const Matrix fused_after = Encode({x}, model).back().values;
    CHECK(MeanAbsDiff(before, clean_after) > 0.0);
    CHECK(clean_after == fused_after);
  }

  TEST_CASE("decoder shape and causality") {
    AsrModel model = MakeAsr(7);
    std::mt19937_64 rng(8);
    const auto enc = Encode({RandomMatrix(6, 6, rng)}, model).back();
    CHECK(Decode(enc, std::vector<int>{kStartToken}, model).scores.rows() == 1);
    CHECK_THROWS_AS(Decode(enc, std::vector<int>{}, model), InvalidInput);
    const std::vector<int> framed{kStartToken, 3, 9, 12, 0};
    const Matrix base = Decode(enc, framed, model).scores;
    CHECK(base.rows() == framed.size());
    CHECK(base.cols() == static_cast<std::size_t>(kVocabSize));
    for (std::size_t p = 1; p < framed.size(); ++p) {
      std::vector<int> changed = framed;
      changed[p] = (changed[p] + 5) % kNumContentTokens;
      const Matrix s = Decode(enc, changed, model).scores;
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < s.cols(); ++c) CHECK(s(r, c) == base(r, c));
      double diff = 0.0;
      for (std::size_t c = 0; c < s.cols(); ++c) diff += std::abs(s(p, c) - base(p, c));
      CHECK(diff > 0.0);
    }
  }

  TEST_CASE("asr loss reference values") {
    const TokenSequence tokens{4, 11};
    CHECK(AsrLoss({Matrix(3, kVocabSize)}, tokens) == doctest::Approx(std::log(19.0)).epsilon(1e-12));
    Matrix rigged(3, kVocabSize);
    const auto targets = FrameDecoderTargets(tokens);
    for (std::size_t u = 0; u < 3; ++u) rigged(u, static_cast<std::size_t>(targets[u])) = 30.0;
    CHECK(AsrLoss({rigged}, tokens) < 1e-8);
    CHECK_THROWS_AS(AsrLoss({Matrix(2, kVocabSize)}, tokens), InvalidInput);
  }

  TEST_CASE("cross-entropy matches a loop oracle on random 3x5 scores") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix s = RandomMatrix(3, 5, rng, -4.0, 4.0);
      std::vector<int> targets(3);
      for (int &t : targets) t = static_cast<int>(rng() % 5);
      Tape tape(false);
      const double got = ag::CrossEntropySum(tape.Constant(s), targets).value()(0, 0) / 3.0;
      CHECK(std::abs(got - CrossEntropyOracle(s, targets)) < 1e-6);
    }
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix s = RandomMatrix(3, kVocabSize, rng, -4.0, 4.0);
      const TokenSequence tokens{static_cast<int>(rng() % 16), static_cast<int>(rng() % 16)};
      CHECK(std::abs(AsrLoss({s}, tokens) - CrossEntropyOracle(s, FrameDecoderTargets(tokens))) <
            1e-6);
    }
  }

  TEST_CASE("asr loss gradient matches central differences") {
    AsrModel model = MakeAsr(10);
    std::mt19937_64 rng(11);
    const Matrix x = RandomMatrix(5, 6, rng);
    const TokenSequence tokens{2, 14, 7};
    const auto framed = FrameDecoderInput(tokens);
    const auto r = testing::CheckGradients(
        model.Parameters(),
        [&](Tape &t) {
          Var enc = model.Encode(t, t.Constant(x)).back();
          return AsrLossSum(model.Decode(t, enc, framed), tokens);
        },
        60, 12);
    INFO(r.worst);
    CHECK(r.checked >= 20);
    CHECK(r.max_rel_error < 1e-4);
  }

  TEST_CASE("greedy decoding stops on a rigged end token") {
    AsrModel model = MakeAsr(13);
    model.output_projection().weight.value.SetZero();
    model.output_projection().bias.value.SetZero();
    model.output_projection().bias.value(0, kEndToken) = 5.0;
    std::mt19937_64 rng(14);
    CHECK(GreedyDecode({RandomMatrix(7, 6, rng)}, model, 10).empty());
    CHECK_THROWS_AS(GreedyDecode({RandomMatrix(7, 6, rng)}, model, 0), InvalidInput);
  }

  TEST_CASE("greedy decoding is a pure function of its inputs") {
    AsrModel model = MakeAsr(15);
    std::mt19937_64 rng(16);
    const Matrix x = RandomMatrix(8, 6, rng);
    const TokenSequence a = GreedyDecode({x}, model, 6);
    CHECK(a.size() <= 6);
    CHECK(GreedyDecode({x}, model, 6) == a);
  }

  TEST_CASE("recognition ignores clean features") {
    ModelConfig mc;
    mc.se = {101, 8, 2};
    mc.fusion = {40, 1, 4};
    mc.asr = SmallAsr();
    mc.asr.feat_dim = 40;
    SystemModel model(mc, 17);
    const FeatureConfig cfg;
    const auto bank = MelFilterbank::Create(cfg.num_bins(), cfg.n_mels, cfg.sample_rate);
    auto prepared = PrepareUtterances({SynthUtterance({5, 6}, 3.0, 18)}, cfg, bank);
    const TokenSequence a = Recognize(model, prepared[0], bank, 8);
    for (double &v : prepared[0].feats.x_clean.values.values()) v = -v;
    for (double &v : prepared[0].feats.clean.mags.values()) v = 0.0;
    CHECK(Recognize(model, prepared[0], bank, 8) == a);
  }
}
