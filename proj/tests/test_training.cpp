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
#include <sstream>

#include "dpasr/error.hpp"
#include "dpasr/training.hpp"
#include "support/oracles.hpp"

using namespace dpasr;
namespace fs = std::filesystem;

namespace {

TrainingConfig TinyConfig() {
  TrainingConfig c = DeskConfig();
  c.corpus.train = 8;
  c.corpus.valid = 4;
  c.corpus.test = 4;
  c.model.se.hidden = 8;
  c.model.fusion.blocks = 1;
  c.model.fusion.channels = 4;
  c.model.asr.d_model = 16;
  c.model.asr.ff_dim = 32;
  c.model.asr.enc_layers = 2;
  c.model.asr.dec_layers = 1;
  c.batch_size = 4;
  c.epochs = 1;
  c.max_decode_len = 6;
  return c;
}

struct Fixture {
  explicit Fixture(const TrainingConfig &c)
      : config(c), corpus(MakeCorpus(c.corpus)),
        prepared(PrepareUtterances(corpus.train, c.features, c.MakeFilterbank())) {
    for (const auto &u : prepared) batch.push_back(&u);
  }
  Trainer MakeTrainer(std::uint64_t seed) const {
    return Trainer(config, SystemModel(config.model, seed));
  }
  TrainingConfig config;
  Corpus corpus;
  std::vector<PreparedUtterance> prepared;
  std::vector<const PreparedUtterance *> batch;
};

fs::path TempDir(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("dpasr_" + name);
  fs::remove_all(p);
  return p;
}

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool SameMetrics(const StepMetrics &a, const StepMetrics &b) {
  return a.loss_enh == b.loss_enh && a.loss_asr_c == b.loss_asr_c && a.loss_asr_f == b.loss_asr_f &&
         a.loss_sl == b.loss_sl && a.loss_cl == b.loss_cl && a.loss_total == b.loss_total;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("total loss reference values") {
    const LossWeights w;
    CHECK(TotalLoss(0, 0, 0, 0, 0, w) == 0.0);
    CHECK(TotalLoss(1, 2, 4, 10, 0.5, w) == doctest::Approx(2.42).epsilon(1e-12));
    const LossWeights joint{0.7, 0.0, 0.0, 1.0};
    CHECK(TotalLoss(1.5, 9.0, 2.5, 7.0, 3.0, joint) ==
          doctest::Approx(0.3 * 1.5 + 0.7 * 2.5).epsilon(1e-12));
    CHECK_THROWS_AS(TotalLoss(-1, 0, 0, 0, 0, w), InvalidInput);
    CHECK_THROWS_AS(TotalLoss(std::nan(""), 0, 0, 0, 0, w), InvalidInput);
    CHECK_THROWS_AS(TotalLoss(0, 0, 0, 0, 0, LossWeights{1.5, 0, 0, 0}), InvalidInput);
  }

  TEST_CASE("total loss matches a term-by-term expansion on random tuples") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0), big(0.0, 10.0);
    for (int i = 0; i < 100; ++i) {
      const LossWeights w{u(rng), u(rng), u(rng), u(rng)};
      const double e = big(rng), c = big(rng), f = big(rng), s = big(rng), k = big(rng);
      const double want = e - w.asr * e + w.asr * c - w.asr * w.fused * c + w.asr * w.fused * f +
                          w.sl * s + w.cl * k;
      CHECK(std::abs(TotalLoss(e, c, f, s, k, w) - want) <= 1e-12 * std::max(1.0, want));
    }
  }

  TEST_CASE("learning rate schedule") {
    CHECK(LearningRate(25000, 0.002, 25000) == doctest::Approx(0.002).epsilon(1e-12));
    CHECK(LearningRate(12500, 0.002, 25000) == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(LearningRate(100000, 0.002, 25000) == doctest::Approx(0.001).epsilon(1e-12));
    CHECK_THROWS_AS(LearningRate(0, 0.002, 25000), InvalidInput);
    for (long warmup : {1L, 7L, 500L, 25000L}) {
      const double a = LearningRate(warmup, 1e-3, warmup);
      const double b = LearningRate(warmup + 1, 1e-3, warmup);
      CHECK(std::abs(a - b) <= 1e-3 * (1.0 - std::sqrt(warmup / (warmup + 1.0))) + 1e-15);
      double prev = a;
      for (long s = warmup + 1; s < warmup + 2000; s += 37) {
        const double lr = LearningRate(s, 1e-3, warmup);
        CHECK(lr < prev);
        prev = lr;
      }
      for (long s = 1; s < warmup; ++s) CHECK(LearningRate(s, 1e-3, warmup) < LearningRate(s + 1, 1e-3, warmup));
    }
  }

  TEST_CASE("config validation and JSON round trip") {
    const TrainingConfig desk = DeskConfig();
    CHECK_NOTHROW(desk.Validate());
    CHECK(desk.model.asr.enc_layers == 4);
    CHECK(desk.model.asr.dec_layers == 2);
    CHECK(desk.model.fusion.blocks == 2);
    CHECK(desk.model.fusion.channels == 16);
    CHECK(desk.model.se.layers == 2);
    CHECK(desk.model.se.hidden == 64);
    CHECK(desk.model.se.num_bins == 101);
    nlohmann::json j = TinyConfig();
    const TrainingConfig back = j.get<TrainingConfig>();
    CHECK(nlohmann::json(back) == j);
    TrainingConfig bad = TinyConfig();
    bad.model.asr.enc_layers = 3;
    CHECK_THROWS_AS(bad.Validate(), InvalidInput);
    bad = TinyConfig();
    bad.frozen = {"decoder"};
    CHECK_THROWS_AS(bad.Validate(), InvalidInput);
    bad = TinyConfig();
    bad.sl_layers = "none";
    CHECK_THROWS_AS(bad.Validate(), InvalidInput);
    const fs::path dir = TempDir("config");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << "{\"epochs\": ";
    CHECK_THROWS_AS(LoadTrainingConfig(dir / "bad.json"), ParseError);
    std::ofstream(dir / "small.json") << R"({"epochs": 3, "weights": {"lambda_cl": 0.2}})";
    const TrainingConfig small = LoadTrainingConfig(dir / "small.json");
    CHECK(small.epochs == 3);
    CHECK(small.weights.cl == 0.2);
    CHECK(small.weights.sl == DeskConfig().weights.sl);
    fs::remove_all(dir);
  }

  TEST_CASE("zero learning rate leaves metrics unchanged") {
    Fixture fx(TinyConfig());
    Trainer tr = fx.MakeTrainer(1);
    const StepMetrics a = tr.Step(fx.batch, 0.0);
    const StepMetrics b = tr.Step(fx.batch, 0.0);
    CHECK(SameMetrics(a, b));
    CHECK(a.loss_total > 0.0);
    CHECK(a.loss_total == doctest::Approx(TotalLoss(a.loss_enh, a.loss_asr_c, a.loss_asr_f,
                                                    a.loss_sl, a.loss_cl, fx.config.weights))
                             .epsilon(1e-12));
  }

  TEST_CASE("a single step lowers the batch loss") {
    Fixture fx(TinyConfig());
    int lowered = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Trainer tr = fx.MakeTrainer(seed);
      const double before = tr.Step(fx.batch, 1e-4).loss_total;
      const double after = tr.ComputeGradients(fx.batch).metrics.loss_total;
      if (after < before) ++lowered;
    }
    CHECK(lowered >= 9);
  }

  TEST_CASE("disabling SL removes its loss and gradient") {
    TrainingConfig c = TinyConfig();
    c.use_sl = false;
    Fixture fx(c);
    const BatchGradients a = fx.MakeTrainer(3).ComputeGradients(fx.batch);
    CHECK(a.metrics.loss_sl == 0.0);
    fx.config.weights.sl = 0.5;
    const BatchGradients b = fx.MakeTrainer(3).ComputeGradients(fx.batch);
    CHECK(a.grads == b.grads);
    fx.config.use_sl = true;
    const BatchGradients on = fx.MakeTrainer(3).ComputeGradients(fx.batch);
    CHECK(on.metrics.loss_sl > 0.0);
    CHECK(on.grads != b.grads);
  }

  TEST_CASE("fused-only training has no clean-path terms") {
    TrainingConfig c = TinyConfig();
    c.dual_path = false;
    c.use_sl = false;
    c.use_cl = false;
    Fixture fx(c);
    const StepMetrics m = fx.MakeTrainer(4).ComputeGradients(fx.batch).metrics;
    CHECK(m.loss_asr_c == 0.0);
    CHECK(m.loss_cl == 0.0);
    CHECK(m.loss_total == doctest::Approx(0.3 * m.loss_enh + 0.7 * m.loss_asr_f).epsilon(1e-12));
  }

  TEST_CASE("frozen modules keep their parameters") {
    TrainingConfig c = TinyConfig();
    c.frozen = {"se"};
    Fixture fx(c);
    Trainer tr = fx.MakeTrainer(5);
    std::vector<Matrix> before;
    for (Parameter *p : tr.model().Parameters()) before.push_back(p->value);
    tr.Step(fx.batch, 1e-3);
    const auto params = tr.model().Parameters();
    int moved = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const bool se = params[i]->name.rfind("se.", 0) == 0;
      if (se) CHECK(params[i]->value == before[i]);
      if (!se && params[i]->value != before[i]) ++moved;
    }
    CHECK(moved > 0);
  }

  TEST_CASE("checkpoint round trip") {
    Fixture fx(TinyConfig());
    Trainer tr = fx.MakeTrainer(6);
    tr.Step(fx.batch, 1e-3);
    const fs::path dir = TempDir("ckpt");
    fs::create_directories(dir);
    SaveCheckpoint(dir / "a.bin", tr.config(), tr.model(), tr.optimizer());
    Checkpoint ck = LoadCheckpoint(dir / "a.bin");
    CHECK(nlohmann::json(ck.config) == nlohmann::json(tr.config()));
    CHECK(ck.adam.steps() == 1);
    const auto orig = tr.model().Parameters(), loaded = ck.model.Parameters();
    REQUIRE(orig.size() == loaded.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
      CHECK(orig[i]->name == loaded[i]->name);
      for (std::size_t k = 0; k < orig[i]->value.size(); ++k)
        CHECK(loaded[i]->value[k] == static_cast<double>(static_cast<float>(orig[i]->value[k])));
    }
    SaveCheckpoint(dir / "b.bin", ck.config, ck.model, ck.adam);
    CHECK(Slurp(dir / "a.bin") == Slurp(dir / "b.bin"));
    std::ofstream(dir / "c.bin") << "DPCKjunk";
    CHECK_THROWS(LoadCheckpoint(dir / "c.bin"));
    fs::remove_all(dir);
  }

  TEST_CASE("zero epochs writes an initial checkpoint and an empty log") {
    TrainingConfig c = TinyConfig();
    c.epochs = 0;
    const fs::path dir = TempDir("epochs0");
    const TrainingResult r = RunTraining(c, MakeCorpus(c.corpus), dir);
    CHECK(fs::exists(r.checkpoint));
    CHECK(fs::file_size(dir / "metrics.jsonl") == 0);
    CHECK(LoadCheckpoint(r.checkpoint).adam.steps() == 0);
    fs::remove_all(dir);
  }

  TEST_CASE("identical configs give identical metrics logs") {
    TrainingConfig c = TinyConfig();
    c.epochs = 2;
    const Corpus corpus = MakeCorpus(c.corpus);
    const fs::path a = TempDir("det_a"), b = TempDir("det_b");
    const TrainingResult ra = RunTraining(c, corpus, a);
    const TrainingResult rb = RunTraining(c, corpus, b);
    const std::string log = Slurp(a / "metrics.jsonl");
    CHECK(!log.empty());
    CHECK(log == Slurp(b / "metrics.jsonl"));
    CHECK(ra.valid_ters == rb.valid_ters);
    CHECK(ra.valid_ters.size() == 2);
    std::istringstream lines(log);
    std::string line;
    int records = 0, with_ter = 0;
    while (std::getline(lines, line)) {
      const auto j = nlohmann::json::parse(line);
      for (const char *k : {"loss_enh", "loss_asr_c", "loss_asr_f", "loss_sl", "loss_cl", "loss_total"})
        CHECK(j.contains(k));
      ++records;
      if (!j.at("valid_ter").is_null()) ++with_ter;
    }
    CHECK(records == 4);
    CHECK(with_ter == 2);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}
