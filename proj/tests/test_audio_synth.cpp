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
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "dpasr/audio_synth.hpp"
#include "dpasr/error.hpp"
#include "support/oracles.hpp"

using namespace dpasr;

namespace {

double PowerRatioDb(const Utterance &u) {
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < u.clean_wave.size(); ++i) {
    const double c = u.clean_wave[i];
    const double r = static_cast<double>(u.noisy_wave[i]) - c;
    s += c * c;
    n += r * r;
  }
  return 10.0 * std::log10(s / n);
}

// |sum_n w[n] x[n] e^{-2 pi i k n / N}| evaluated term by term.
double DftMagnitudeOracle(const std::vector<float> &x, std::size_t k) {
  const std::size_t n = x.size();
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(k * i) / n;
    re += w * x[i] * std::cos(ang);
    im -= w * x[i] * std::sin(ang);
  }
  return std::hypot(re, im);
}

double MelOracle(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double HzOracle(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

TEST_SUITE("audio_synth") {
  TEST_CASE("synthesis preconditions") {
    CHECK_THROWS_AS(SynthUtterance({}, 0.0, 1), InvalidInput);
    CHECK_THROWS_AS(SynthUtterance({3}, std::numeric_limits<double>::infinity(), 1), InvalidInput);
    CHECK_THROWS_AS(SynthUtterance({3}, std::nan(""), 1), InvalidInput);
    CHECK_THROWS_AS(SynthUtterance({kEndToken}, 0.0, 1), InvalidInput);
    CHECK_THROWS_AS(SynthUtterance({-1}, 0.0, 1), InvalidInput);
  }

  TEST_CASE("synthesis is deterministic in its arguments") {
    const Utterance a = SynthUtterance({4, 9, 15}, 3.0, 42);
    const Utterance b = SynthUtterance({4, 9, 15}, 3.0, 42);
    CHECK(a.clean_wave == b.clean_wave);
    CHECK(a.noisy_wave == b.noisy_wave);
    const Utterance c = SynthUtterance({4, 9, 15}, 3.0, 43);
    CHECK(a.noisy_wave != c.noisy_wave);
  }

  TEST_CASE("realized SNR for tokens [1,2] at 0 dB, seed 7") {
    const Utterance u = SynthUtterance({1, 2}, 0.0, 7);
    CHECK(u.clean_wave.size() == u.noisy_wave.size());
    const double snr = PowerRatioDb(u);
    CHECK(snr >= -0.1);
    CHECK(snr <= 0.1);
    CHECK(RealizedSnrDb(u) == doctest::Approx(snr).epsilon(1e-9));
  }

  TEST_CASE("token frequencies form a unique grid inside the band") {
    std::set<std::pair<double, double>> seen;
    for (int t = 0; t < kNumContentTokens; ++t) {
      const auto f = TokenFrequencies(t);
      CHECK(f.first < f.second);
      CHECK(f.second < 4000.0);
      seen.insert(f);
    }
    CHECK(seen.size() == static_cast<std::size_t>(kNumContentTokens));
  }

  TEST_CASE("stft boundaries") {
    const FeatureConfig cfg;
    const Spectrogram z = StftMagnitude(std::vector<float>(cfg.frame + cfg.hop, 0.0f), cfg);
    CHECK(z.mags.rows() == 2);
    CHECK(z.mags.MaxAbs() == 0.0);
    const Spectrogram one = StftMagnitude(std::vector<float>(cfg.frame, 0.5f), cfg);
    CHECK(one.mags.rows() == 1);
    CHECK(one.mags.cols() == cfg.num_bins());
    CHECK_THROWS_AS(StftMagnitude(std::vector<float>(cfg.frame - 1, 0.0f), cfg), InvalidInput);
  }

  TEST_CASE("bin-centred sinusoid peaks at its bin in every frame") {
    const FeatureConfig cfg;
    for (std::size_t bin : {5u, 37u, 80u}) {
      const double f = static_cast<double>(bin) * cfg.sample_rate / static_cast<double>(cfg.frame);
      std::vector<float> wave(1200);
      for (std::size_t n = 0; n < wave.size(); ++n)
        wave[n] = static_cast<float>(std::sin(2.0 * std::numbers::pi * f * n / cfg.sample_rate));
      const Spectrogram s = StftMagnitude(wave, cfg);
      for (std::size_t t = 0; t < s.mags.rows(); ++t) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < s.mags.cols(); ++k)
          if (s.mags(t, k) > s.mags(t, best)) best = k;
        CHECK(best == bin);
      }
    }
  }

  TEST_CASE("stft matches direct Fourier summation on random single frames") {
    const FeatureConfig cfg;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<float> x(cfg.frame);
      for (float &v : x) v = u(rng);
      const Spectrogram s = StftMagnitude(x, cfg);
      for (std::size_t k = 0; k < cfg.num_bins(); ++k) {
        const double ref = DftMagnitudeOracle(x, k);
        worst = std::max(worst, std::abs(s.mags(0, k) - ref) / std::max(ref, 1e-3));
      }
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("log-mel of silence is log(eps)") {
    Spectrogram s{Matrix(3, 101), 200, 80, 8000};
    const FeatureMatrix f = LogMelFbank(s, 40);
    CHECK(f.values.rows() == 3);
    CHECK(f.values.cols() == 40);
    for (double v : f.values.values()) CHECK(v == doctest::Approx(std::log(kLogFloor)));
  }

  TEST_CASE("identity filterbank gives log(mag^2 + eps)") {
    std::mt19937_64 rng(4);
    Spectrogram s{testing::RandomMatrix(4, 9, rng, 0.0, 2.0), 16, 8, 8000};
    const FeatureMatrix f = LogMelFbank(s, MelFilterbank::Identity(9));
    for (std::size_t i = 0; i < s.mags.size(); ++i)
      CHECK(f.values[i] == doctest::Approx(std::log(s.mags[i] * s.mags[i] + kLogFloor)));
  }

  TEST_CASE("random 5x129 spectrogram matches a loop-based mel oracle") {
    std::mt19937_64 rng(5);
    const int sr = 8000;
    const std::size_t k_bins = 129, n_mels = 40;
    Spectrogram s{testing::RandomMatrix(5, k_bins, rng, 0.0, 3.0), 256, 128, sr};
    const FeatureMatrix f = LogMelFbank(s, MelFilterbank::Create(k_bins, n_mels, sr));
    const double top = MelOracle(sr / 2.0);
    double worst = 0.0;
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t m = 0; m < n_mels; ++m) {
        const double lo = HzOracle(top * m / (n_mels + 1.0));
        const double mid = HzOracle(top * (m + 1) / (n_mels + 1.0));
        const double hi = HzOracle(top * (m + 2) / (n_mels + 1.0));
        double e = 0.0;
        for (std::size_t k = 0; k < k_bins; ++k) {
          const double hz = (sr / 2.0) * k / (k_bins - 1.0);
          double w = 0.0;
          if (hz > lo && hz <= mid) w = (hz - lo) / (mid - lo);
          if (hz > mid && hz < hi) w = (hi - hz) / (hi - mid);
          e += w * s.mags(t, k) * s.mags(t, k);
        }
        worst = std::max(worst, std::abs(f.values(t, m) - std::log(e + kLogFloor)));
      }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("filterbank rejects more mels than bins") {
    CHECK_THROWS_AS(MelFilterbank::Create(10, 11, 8000), InvalidInput);
    CHECK_THROWS_AS(MelFilterbank::Create(10, 0, 8000), InvalidInput);
  }

  TEST_CASE("feature shape chain keeps T") {
    const Utterance u = SynthUtterance({0, 5, 10}, 5.0, 9);
    const FeatureConfig cfg;
    const auto bank = MelFilterbank::Create(cfg.num_bins(), cfg.n_mels, cfg.sample_rate);
    const UtteranceFeatures f = ExtractFeatures(u, cfg, bank);
    const std::size_t t = 1 + (u.noisy_wave.size() - cfg.frame) / cfg.hop;
    CHECK(f.noisy.mags.rows() == t);
    CHECK(f.noisy.mags.cols() == cfg.num_bins());
    CHECK(f.x_noisy.values.rows() == t);
    CHECK(f.x_noisy.values.cols() == cfg.n_mels);
    CHECK(f.x_clean.values.rows() == t);
  }

  TEST_CASE("corpus counts, ids, determinism and SNR") {
    CorpusConfig cfg;
    const Corpus a = MakeCorpus(cfg);
    CHECK(a.train.size() == 200);
    CHECK(a.valid.size() == 40);
    CHECK(a.test.size() == 40);
    std::set<std::string> ids;
    for (Split s : {Split::kTrain, Split::kValid, Split::kTest})
      for (const auto &u : a.Get(s)) {
        ids.insert(u.id);
        CHECK(std::abs(PowerRatioDb(u) - u.snr_db) <= 0.1);
        CHECK(u.snr_db >= cfg.snr_min_db);
        CHECK(u.snr_db <= cfg.snr_max_db);
        CHECK(u.tokens.size() >= static_cast<std::size_t>(cfg.min_tokens));
        CHECK(u.tokens.size() <= static_cast<std::size_t>(cfg.max_tokens));
      }
    CHECK(ids.size() == 280);
    const Corpus b = MakeCorpus(cfg);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
      CHECK(a.train[i].tokens == b.train[i].tokens);
      CHECK(a.train[i].noisy_wave == b.train[i].noisy_wave);
    }
    CorpusConfig bad = cfg;
    bad.train = 0;
    CHECK_THROWS_AS(MakeCorpus(bad), InvalidInput);
  }

  TEST_CASE("corpus round-trips through disk") {
    CorpusConfig cfg;
    cfg.train = 5;
    cfg.valid = 2;
    cfg.test = 3;
    const Corpus a = MakeCorpus(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "dpasr_corpus_roundtrip";
    std::filesystem::remove_all(dir);
    WriteCorpus(a, dir);
    const Corpus b = ReadCorpus(dir);
    REQUIRE(b.test.size() == 3);
    for (std::size_t i = 0; i < a.test.size(); ++i) {
      CHECK(a.test[i].id == b.test[i].id);
      CHECK(a.test[i].tokens == b.test[i].tokens);
      CHECK(a.test[i].clean_wave == b.test[i].clean_wave);
      CHECK(a.test[i].noisy_wave == b.test[i].noisy_wave);
    }
    CHECK(a.Find("valid-00001") != nullptr);
    CHECK(a.Find("valid-00009") == nullptr);
    {
      std::ofstream m(dir / "manifest.jsonl", std::ios::app);
      m << "{not json\n";
    }
    CHECK_THROWS_AS(ReadCorpus(dir), ParseError);
    std::filesystem::remove_all(dir);
  }
}
