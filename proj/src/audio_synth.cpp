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

#include "dpasr/audio_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dpasr/binary_io.hpp"
#include "dpasr/error.hpp"
#include "dpasr/kernels.hpp"

namespace dpasr {

namespace {

// Dual-tone grid: low group selects the row, high group the column.
constexpr std::array<double, 4> kLowTones = {697.0, 770.0, 852.0, 941.0};
constexpr std::array<double, 4> kHighTones = {1209.0, 1336.0, 1477.0, 1633.0};

double Power(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

std::uint64_t UtteranceSeed(std::uint64_t master, int split, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

bool IsContentToken(int id) { return id >= 0 && id < kNumContentTokens; }

std::pair<double, double> TokenFrequencies(int token) {
  DPASR_REQUIRE(IsContentToken(token), "TokenFrequencies: not a content token");
  return {kLowTones[static_cast<std::size_t>(token / 4)],
          kHighTones[static_cast<std::size_t>(token % 4)]};
}

Utterance SynthUtterance(const TokenSequence &tokens, double snr_db, std::uint64_t seed,
                         const SynthConfig &config) {
  DPASR_REQUIRE(!tokens.empty(), "SynthUtterance: empty token sequence");
  DPASR_REQUIRE(std::isfinite(snr_db), "SynthUtterance: non-finite SNR");
  for (int t : tokens) DPASR_REQUIRE(IsContentToken(t), "SynthUtterance: invalid content token");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dur(config.min_token_samples, config.max_token_samples);
  std::uniform_int_distribution<int> gap(config.min_gap_samples, config.max_gap_samples);
  std::uniform_real_distribution<double> amp(0.6, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  const double sr = config.sample_rate;
  std::vector<double> clean(static_cast<std::size_t>(gap(rng)), 0.0);
  constexpr int kRamp = 40;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto [f_lo, f_hi] = TokenFrequencies(tokens[i]);
    const int n = dur(rng);
    const double a_lo = config.tone_amplitude * amp(rng);
    const double a_hi = config.tone_amplitude * amp(rng);
    const double p_lo = phase(rng), p_hi = phase(rng);
    for (int s = 0; s < n; ++s) {
      const double env = std::min({1.0, s / static_cast<double>(kRamp),
                                   (n - 1 - s) / static_cast<double>(kRamp)});
      const double t = s / sr;
      clean.push_back(env * (a_lo * std::sin(2.0 * std::numbers::pi * f_lo * t + p_lo) +
                             a_hi * std::sin(2.0 * std::numbers::pi * f_hi * t + p_hi)));
    }
    clean.insert(clean.end(), static_cast<std::size_t>(gap(rng)), 0.0);
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(clean.size());
  for (double &v : noise) v = gauss(rng);
  const double target = Power(clean) / std::pow(10.0, snr_db / 10.0);
  const double scale = std::sqrt(target / Power(noise));

  Utterance utt;
  utt.tokens = tokens;
  utt.snr_db = snr_db;
  utt.clean_wave.resize(clean.size());
  utt.noisy_wave.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    utt.clean_wave[i] = static_cast<float>(clean[i]);
    utt.noisy_wave[i] = static_cast<float>(clean[i] + scale * noise[i]);
  }
  return utt;
}

double RealizedSnrDb(const Utterance &utt) {
  DPASR_REQUIRE(utt.clean_wave.size() == utt.noisy_wave.size(), "RealizedSnrDb: length mismatch");
  double pc = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < utt.clean_wave.size(); ++i) {
    const double c = utt.clean_wave[i];
    const double n = static_cast<double>(utt.noisy_wave[i]) - c;
    pc += c * c;
    pn += n * n;
  }
  return 10.0 * std::log10(pc / pn);
}

std::vector<double> HannWindow(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(length));
  return w;
}

Spectrogram StftMagnitude(std::span<const float> wave, const FeatureConfig &config) {
  DPASR_REQUIRE(config.frame >= 2 && config.hop >= 1, "StftMagnitude: bad frame/hop");
  DPASR_REQUIRE(wave.size() >= config.frame, "StftMagnitude: wave shorter than one frame");
  const auto window = HannWindow(config.frame);
  Spectrogram spec;
  spec.mags = kernels::FramedDftMagnitude(wave, window, config.frame, config.hop);
  spec.frame = config.frame;
  spec.hop = config.hop;
  spec.sample_rate = config.sample_rate;
  return spec;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank MelFilterbank::Create(std::size_t num_bins, std::size_t n_mels, int sample_rate) {
  DPASR_REQUIRE(n_mels >= 1 && n_mels <= num_bins, "MelFilterbank: n_mels must be in [1, K]");
  DPASR_REQUIRE(num_bins >= 2 && sample_rate > 0, "MelFilterbank: bad bin count or rate");
  const double nyquist = sample_rate / 2.0;
  const double mel_hi = HzToMel(nyquist);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = MelToHz(mel_hi * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  Matrix w(n_mels, num_bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < num_bins; ++k) {
      const double f = nyquist * static_cast<double>(k) / static_cast<double>(num_bins - 1);
      if (f > lo && f <= mid)
        w(m, k) = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        w(m, k) = (hi - f) / (hi - mid);
    }
  }
  return MelFilterbank(std::move(w));
}

MelFilterbank MelFilterbank::Identity(std::size_t num_bins) {
  Matrix w(num_bins, num_bins);
  for (std::size_t k = 0; k < num_bins; ++k) w(k, k) = 1.0;
  return MelFilterbank(std::move(w));
}

FeatureMatrix LogMelFbank(const Spectrogram &spec, const MelFilterbank &bank) {
  DPASR_REQUIRE(spec.mags.cols() == bank.num_bins(), "LogMelFbank: bin count mismatch");
  Matrix power = spec.mags;
  for (double &v : power.values()) v *= v;
  FeatureMatrix out{kernels::MatMulTB(power, bank.weights())};
  for (double &v : out.values.values()) v = std::log(v + kLogFloor);
  return out;
}

FeatureMatrix LogMelFbank(const Spectrogram &spec, std::size_t n_mels) {
  DPASR_REQUIRE(n_mels >= 1 && n_mels <= spec.mags.cols(), "LogMelFbank: n_mels out of range");
  return LogMelFbank(spec, MelFilterbank::Create(spec.mags.cols(), n_mels, spec.sample_rate));
}

const char *SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split ParseSplit(const std::string &name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw InvalidInput("unknown split '" + name + "'");
}

const std::vector<Utterance> &Corpus::Get(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kValid: return valid;
    case Split::kTest: return test;
  }
  return train;
}

const Utterance *Corpus::Find(const std::string &id) const {
  for (const auto *split : {&train, &valid, &test})
    for (const auto &u : *split)
      if (u.id == id) return &u;
  return nullptr;
}

std::map<int, int> Corpus::TokenCounts(Split s) const {
  std::map<int, int> counts;
  for (const auto &u : Get(s))
    for (int t : u.tokens) ++counts[t];
  return counts;
}

Corpus MakeCorpus(const CorpusConfig &config) {
  DPASR_REQUIRE(config.train > 0 && config.valid > 0 && config.test > 0,
                "MakeCorpus: split counts must be positive");
  DPASR_REQUIRE(config.vocab >= 1 && config.vocab <= kNumContentTokens,
                "MakeCorpus: vocab must be in [1, 16]");
  DPASR_REQUIRE(config.min_tokens >= 1 && config.min_tokens <= config.max_tokens,
                "MakeCorpus: bad token length range");
  DPASR_REQUIRE(std::isfinite(config.snr_min_db) && std::isfinite(config.snr_max_db) &&
                    config.snr_min_db <= config.snr_max_db,
                "MakeCorpus: bad SNR range");
  Corpus corpus;
  const std::array<std::pair<Split, int>, 3> plan = {
      {{Split::kTrain, config.train}, {Split::kValid, config.valid}, {Split::kTest, config.test}}};
  for (const auto &[split, count] : plan) {
    auto &out = split == Split::kTrain ? corpus.train
                : split == Split::kValid ? corpus.valid : corpus.test;
    out.resize(static_cast<std::size_t>(count));
    // Each utterance owns its RNG stream, so generation order does not matter.
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) {
      const std::uint64_t seed = UtteranceSeed(config.seed, static_cast<int>(split), i);
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> len(config.min_tokens, config.max_tokens);
      std::uniform_int_distribution<int> tok(0, config.vocab - 1);
      std::uniform_real_distribution<double> snr(config.snr_min_db, config.snr_max_db);
      TokenSequence tokens(static_cast<std::size_t>(len(rng)));
      for (int &t : tokens) t = tok(rng);
      const double snr_db = config.snr_min_db == config.snr_max_db ? config.snr_min_db : snr(rng);
      Utterance u = SynthUtterance(tokens, snr_db, rng(), config.synth);
      char id[32];
      std::snprintf(id, sizeof(id), "%s-%05d", SplitName(split), i);
      u.id = id;
      out[static_cast<std::size_t>(i)] = std::move(u);
    }
  }
  return corpus;
}

void WriteCorpus(const Corpus &corpus, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<Split, const Utterance *>> all;
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest})
    for (const auto &u : corpus.Get(s)) all.emplace_back(s, &u);

  const std::uint64_t count = all.size() * 2;
  const std::uint64_t header = 4 + 4 + 8 + count * 16;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> index;
  std::uint64_t off = header;
  for (const auto &[s, u] : all) {
    for (int k = 0; k < 2; ++k) {
      index.emplace_back(off, u->clean_wave.size());
      off += u->clean_wave.size() * sizeof(float);
    }
  }

  std::ofstream waves(dir / "waves.bin", std::ios::binary);
  if (!waves) throw InvalidInput("cannot write " + (dir / "waves.bin").string());
  waves.write("DPWV", 4);
  io::WritePod<std::uint32_t>(waves, 1);
  io::WritePod<std::uint64_t>(waves, count);
  for (const auto &[o, n] : index) {
    io::WritePod(waves, o);
    io::WritePod(waves, n);
  }
  std::ofstream manifest(dir / "manifest.jsonl");
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto &[s, u] = all[i];
    io::WriteArray(waves, u->clean_wave.data(), u->clean_wave.size());
    io::WriteArray(waves, u->noisy_wave.data(), u->noisy_wave.size());
    nlohmann::json rec = {{"id", u->id},
                          {"split", SplitName(s)},
                          {"tokens", u->tokens},
                          {"snr_db", u->snr_db},
                          {"clean_offset", index[2 * i].first},
                          {"noisy_offset", index[2 * i + 1].first},
                          {"num_samples", u->clean_wave.size()}};
    manifest << rec.dump() << '\n';
  }

  nlohmann::json stats;
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto &[tok, n] : corpus.TokenCounts(s)) counts[std::to_string(tok)] = n;
    stats[SplitName(s)] = {{"utterances", corpus.Get(s).size()}, {"token_counts", counts}};
  }
  std::ofstream(dir / "stats.json") << stats.dump(2) << '\n';
}

Corpus ReadCorpus(const std::filesystem::path &dir) {
  std::ifstream waves(dir / "waves.bin", std::ios::binary);
  if (!waves) throw InvalidInput("cannot open " + (dir / "waves.bin").string());
  io::ExpectMagic(waves, "DPWV", (dir / "waves.bin").string());
  if (io::ReadPod<std::uint32_t>(waves) != 1) throw ParseError("waves.bin: unsupported version");
  const auto count = io::ReadPod<std::uint64_t>(waves);
  std::map<std::uint64_t, std::uint64_t> index;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto o = io::ReadPod<std::uint64_t>(waves);
    index[o] = io::ReadPod<std::uint64_t>(waves);
  }
  auto read_at = [&](std::uint64_t off, std::uint64_t n) {
    auto it = index.find(off);
    if (it == index.end() || it->second != n) throw ParseError("waves.bin: offset not in index");
    waves.seekg(static_cast<std::streamoff>(off));
    return io::ReadArray<float>(waves, n);
  };

  std::ifstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw InvalidInput("cannot open " + (dir / "manifest.jsonl").string());
  Corpus corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      Utterance u;
      u.id = rec.at("id").get<std::string>();
      u.tokens = rec.at("tokens").get<TokenSequence>();
      u.snr_db = rec.at("snr_db").get<double>();
      const auto n = rec.at("num_samples").get<std::uint64_t>();
      u.clean_wave = read_at(rec.at("clean_offset").get<std::uint64_t>(), n);
      u.noisy_wave = read_at(rec.at("noisy_offset").get<std::uint64_t>(), n);
      const Split s = ParseSplit(rec.at("split").get<std::string>());
      (s == Split::kTrain ? corpus.train : s == Split::kValid ? corpus.valid : corpus.test)
          .push_back(std::move(u));
    } catch (const nlohmann::json::exception &e) {
      throw ParseError("manifest.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

UtteranceFeatures ExtractFeatures(const Utterance &utt, const FeatureConfig &config,
                                  const MelFilterbank &bank) {
  UtteranceFeatures f;
  f.noisy = StftMagnitude(utt.noisy_wave, config);
  f.clean = StftMagnitude(utt.clean_wave, config);
  f.x_noisy = LogMelFbank(f.noisy, bank);
  f.x_clean = LogMelFbank(f.clean, bank);
  return f;
}

}  // namespace dpasr
