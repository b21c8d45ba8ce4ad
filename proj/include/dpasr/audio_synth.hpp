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

#ifndef DPASR_AUDIO_SYNTH_HPP_
#define DPASR_AUDIO_SYNTH_HPP_

// Synthetic parallel (clean, noisy) corpus and the STFT / log-mel feature
// front end. Each content token is rendered as a pair of sinusoids taken
// from a 4x4 dual-tone grid, so transcripts stay recoverable while white
// noise at a controlled SNR makes recognition non-trivial.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dpasr/matrix.hpp"

namespace dpasr {

// Vocabulary layout: content tokens first, then the reserved symbols.
inline constexpr int kNumContentTokens = 16;
inline constexpr int kStartToken = 16;
inline constexpr int kEndToken = 17;
inline constexpr int kPadToken = 18;
inline constexpr int kVocabSize = 19;

using TokenSequence = std::vector<int>;

bool IsContentToken(int id);

struct SynthConfig {
  int sample_rate = 8000;
  int min_token_samples = 560;
  int max_token_samples = 880;
  int min_gap_samples = 120;
  int max_gap_samples = 240;
  double tone_amplitude = 0.02;
};

struct Utterance {
  std::string id;
  TokenSequence tokens;
  std::vector<float> clean_wave;
  std::vector<float> noisy_wave;
  double snr_db = 0.0;
};

/// Frequencies (Hz) of the two sinusoids that render `token`.
std::pair<double, double> TokenFrequencies(int token);

/// Renders `tokens` and corrupts the result with white noise at `snr_db`.
/// Deterministic in (tokens, snr_db, seed, config).
Utterance SynthUtterance(const TokenSequence &tokens, double snr_db, std::uint64_t seed,
                         const SynthConfig &config = {});

/// 10 log10(P_clean / P_(noisy - clean)).
double RealizedSnrDb(const Utterance &utt);

struct FeatureConfig {
  int sample_rate = 8000;
  std::size_t frame = 200;
  std::size_t hop = 80;
  std::size_t n_mels = 40;
  std::size_t num_bins() const { return frame / 2 + 1; }
};

/// Floor inside the log of the filterbank energies.
inline constexpr double kLogFloor = 1e-10;

struct Spectrogram {
  Matrix mags;  // T x K, non-negative
  std::size_t frame = 0;
  std::size_t hop = 0;
  int sample_rate = 0;
};

struct FeatureMatrix {
  Matrix values;  // T x F
};

/// Periodic Hann window.
std::vector<double> HannWindow(std::size_t length);

Spectrogram StftMagnitude(std::span<const float> wave, const FeatureConfig &config = {});

/// Triangular mel filters, n_mels x K.
class MelFilterbank {
 public:
  static MelFilterbank Create(std::size_t num_bins, std::size_t n_mels, int sample_rate);
  /// Degenerate bank with one filter per bin.
  static MelFilterbank Identity(std::size_t num_bins);

  const Matrix &weights() const { return weights_; }
  std::size_t num_mels() const { return weights_.rows(); }
  std::size_t num_bins() const { return weights_.cols(); }

 private:
  explicit MelFilterbank(Matrix w) : weights_(std::move(w)) {}
  Matrix weights_;
};

double HzToMel(double hz);
double MelToHz(double mel);

/// log(filterbank(mags^2) + kLogFloor).
FeatureMatrix LogMelFbank(const Spectrogram &spec, const MelFilterbank &bank);
FeatureMatrix LogMelFbank(const Spectrogram &spec, std::size_t n_mels);

struct CorpusConfig {
  int train = 200;
  int valid = 40;
  int test = 40;
  int vocab = kNumContentTokens;
  int min_tokens = 2;
  int max_tokens = 5;
  double snr_min_db = -5.0;
  double snr_max_db = 10.0;
  std::uint64_t seed = 1;
  SynthConfig synth;
};

enum class Split { kTrain, kValid, kTest };
const char *SplitName(Split s);
Split ParseSplit(const std::string &name);

struct Corpus {
  std::vector<Utterance> train, valid, test;

  const std::vector<Utterance> &Get(Split s) const;
  const Utterance *Find(const std::string &id) const;
  /// Per-token occurrence counts for one split.
  std::map<int, int> TokenCounts(Split s) const;
};

Corpus MakeCorpus(const CorpusConfig &config);

/// Corpus directory layout: manifest.jsonl, waves.bin, stats.json.
void WriteCorpus(const Corpus &corpus, const std::filesystem::path &dir);
Corpus ReadCorpus(const std::filesystem::path &dir);

/// Features used by training and inference.
struct UtteranceFeatures {
  Spectrogram noisy;
  Spectrogram clean;
  FeatureMatrix x_noisy;
  FeatureMatrix x_clean;
};

UtteranceFeatures ExtractFeatures(const Utterance &utt, const FeatureConfig &config,
                                  const MelFilterbank &bank);

}  // namespace dpasr

#endif  // DPASR_AUDIO_SYNTH_HPP_
