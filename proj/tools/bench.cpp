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

// OpenMP kernels against their serial references, plus one batched gradient
// computation at different thread counts.

#include <benchmark/benchmark.h>

#include <random>

#include "dpasr/kernels.hpp"
#include "dpasr/training.hpp"

namespace dpasr {
namespace {

using kernels::Trans;

Matrix Random(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (double &v : m.values()) v = n(rng);
  return m;
}

std::vector<float> Wave(std::size_t n) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> w(n);
  for (float &v : w) v = u(rng);
  return w;
}

template <bool kParallel>
void BM_Gemm(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = Random(n, n, 1), b = Random(n, n, 2);
  Matrix c(n, n);
  for (auto _ : state) {
    if (kParallel) kernels::Gemm(Trans::kNo, Trans::kYes, 1.0, a, b, 0.0, &c);
    else kernels::serial::Gemm(Trans::kNo, Trans::kYes, 1.0, a, b, 0.0, &c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm<true>)->Name("Gemm/parallel")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<false>)->Name("Gemm/serial")->Arg(64)->Arg(128)->Arg(256);

template <bool kParallel>
void BM_Gram(benchmark::State &state) {
  const Matrix e = Random(static_cast<std::size_t>(state.range(0)), 64, 4);
  for (auto _ : state) {
    Matrix g = kParallel ? kernels::Gram(e) : kernels::serial::Gram(e);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_Gram<true>)->Name("Gram/parallel")->Arg(64)->Arg(512);
BENCHMARK(BM_Gram<false>)->Name("Gram/serial")->Arg(64)->Arg(512);

template <bool kParallel>
void BM_Softmax(benchmark::State &state) {
  const Matrix x = Random(static_cast<std::size_t>(state.range(0)), kVocabSize, 5);
  for (auto _ : state) {
    Matrix y = kParallel ? kernels::SoftmaxRows(x) : kernels::serial::SoftmaxRows(x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Softmax<true>)->Name("Softmax/parallel")->Arg(1024);
BENCHMARK(BM_Softmax<false>)->Name("Softmax/serial")->Arg(1024);

template <bool kParallel>
void BM_Stft(benchmark::State &state) {
  const FeatureConfig cfg;
  const auto wave = Wave(static_cast<std::size_t>(state.range(0)));
  const auto window = HannWindow(cfg.frame);
  for (auto _ : state) {
    Matrix m = kParallel ? kernels::FramedDftMagnitude(wave, window, cfg.frame, cfg.hop)
                         : kernels::serial::FramedDftMagnitude(wave, window, cfg.frame, cfg.hop);
    benchmark::DoNotOptimize(m.data());
  }
}
BENCHMARK(BM_Stft<true>)->Name("Stft/parallel")->Arg(8000);
BENCHMARK(BM_Stft<false>)->Name("Stft/serial")->Arg(8000);

// One batch of 8 utterances through the full dual-path objective.
void BM_BatchGradients(benchmark::State &state) {
  const int threads = kernels::MaxThreads();
  kernels::SetNumThreads(static_cast<int>(state.range(0)));
  TrainingConfig config = DeskConfig();
  config.corpus.train = 8;
  const Corpus corpus = MakeCorpus(config.corpus);
  const auto prepared = PrepareUtterances(corpus.train, config.features, config.MakeFilterbank());
  std::vector<const PreparedUtterance *> batch;
  for (const auto &u : prepared) batch.push_back(&u);
  Trainer trainer(config, SystemModel(config.model, 1));
  for (auto _ : state) {
    BatchGradients g = trainer.ComputeGradients(batch);
    benchmark::DoNotOptimize(g.metrics.loss_total);
  }
  kernels::SetNumThreads(threads);
}
BENCHMARK(BM_BatchGradients)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dpasr

BENCHMARK_MAIN();
