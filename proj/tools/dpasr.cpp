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

// dpasr: corpus generation, training, evaluation, ablation sweeps,
// embedding dumps and plotting.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpasr/error.hpp"
#include "dpasr/evaluation.hpp"
#include "dpasr/scoring.hpp"
#include "dpasr/training.hpp"

namespace {

using namespace dpasr;
using nlohmann::json;

json ReadJsonFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string FormatTokens(const TokenSequence &t) {
  std::string s;
  for (int v : t) s += (s.empty() ? "" : " ") + std::to_string(v);
  return s;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Dual-path noise-robust recognizer on a synthetic tone corpus"};
  app.require_subcommand(1);

  std::string config_path, out, spec_path, checkpoint, split = "test", utt, layers = "all", in;
  std::optional<std::uint64_t> seed;
  bool show_hyps = false;

  auto *corpus_cmd = app.add_subcommand("corpus", "Corpus utilities");
  auto *corpus_make = corpus_cmd->add_subcommand("make", "Generate and write a corpus");
  corpus_cmd->require_subcommand(1);
  corpus_make->add_option("--config", config_path, "Corpus or training config (JSON)");
  corpus_make->add_option("--out", out, "Output directory")->required();

  auto *train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config_path, "Training config (JSON)")->required();
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--seed", seed, "Override the config seed");

  auto *eval = app.add_subcommand("eval", "Score a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--split", split, "train, valid or test")->capture_default_str();
  eval->add_flag("--hyps", show_hyps, "Print every hypothesis");

  auto *ablate = app.add_subcommand("ablate", "Run an ablation sweep");
  ablate->add_option("--spec", spec_path, "Ablation spec (JSON)")->required();
  ablate->add_option("--out", out, "Output directory")->required();

  auto *dump = app.add_subcommand("dump-embeddings", "Dump encoder and decoder embeddings");
  dump->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  dump->add_option("--utt", utt, "Utterance id, e.g. test-00003")->required();
  dump->add_option("--layers", layers, "all, low, high, 1-3, 1,4 ...")->capture_default_str();
  dump->add_option("--out", out, "Output file (default embeddings-<utt>.bin)");

  auto *plot = app.add_subcommand("plot", "Render SVG plots");
  plot->add_option("--in", in, "metrics.jsonl, results.jsonl or an embedding dump")->required();
  plot->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (corpus_make->parsed()) {
      CorpusConfig cc = DeskConfig().corpus;
      if (!config_path.empty()) {
        const json j = ReadJsonFile(config_path);
        from_json(j.contains("corpus") ? j.at("corpus") : j, cc);
      }
      const Corpus corpus = MakeCorpus(cc);
      WriteCorpus(corpus, out);
      std::cout << "wrote " << corpus.train.size() << "/" << corpus.valid.size() << "/"
                << corpus.test.size() << " utterances to " << out << "\n";
    } else if (train->parsed()) {
      TrainingConfig config = LoadTrainingConfig(config_path);
      if (seed) config.seed = *seed;
      const TrainingResult r = RunTraining(config, LoadCorpusFor(config), out, &std::cout);
      std::cout << "best valid TER " << r.best_valid_ter << " (epoch " << r.best_epoch
                << "), checkpoint " << r.checkpoint.string() << "\n";
    } else if (eval->parsed()) {
      Checkpoint ck = LoadCheckpoint(checkpoint);
      const Corpus corpus = LoadCorpusFor(ck.config);
      const Split s = ParseSplit(split);
      std::vector<TokenSequence> hyps;
      const double ter = EvaluateCheckpoint(ck, corpus, s, &hyps);
      if (show_hyps) {
        const auto &utts = corpus.Get(s);
        for (std::size_t i = 0; i < utts.size(); ++i)
          std::cout << utts[i].id << "\tref: " << FormatTokens(utts[i].tokens)
                    << "\thyp: " << FormatTokens(hyps[i]) << "\n";
      }
      std::cout << SplitName(s) << " TER " << ter << "\n";
    } else if (ablate->parsed()) {
      const AblationSpec spec = LoadAblationSpec(spec_path);
      const AblationResult r = RunAblation(spec, LoadCorpusFor(spec.base), out, &std::cout);
      std::cout << r.table;
    } else if (dump->parsed()) {
      Checkpoint ck = LoadCheckpoint(checkpoint);
      const auto sel = LayerSelection::Parse(layers, ck.config.model.asr.enc_layers);
      const EmbeddingDump d = DumpEmbeddings(ck, LoadCorpusFor(ck.config), utt, sel);
      if (out.empty()) out = "embeddings-" + utt + ".bin";
      WriteEmbeddingDump(out, d);
      for (const auto &a : d.arrays)
        std::cout << a.label << " " << a.values.rows() << "x" << a.values.cols() << "\n";
      for (int l : sel.layers())
        std::cout << "style distance L" << l << " " << StyleDistance(d, l) << "\n";
      std::cout << "wrote " << out << "\n";
    } else if (plot->parsed()) {
      for (const auto &p : RenderPlots(in, out, &std::cerr)) std::cout << p.string() << "\n";
    }
  } catch (const InvalidInput &e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const ParseError &e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
