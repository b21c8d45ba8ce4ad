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

#ifndef DPASR_EVALUATION_HPP_
#define DPASR_EVALUATION_HPP_

// Test-set scoring of checkpoints, the seeded ablation sweep, embedding dumps
// for heat-map inspection and SVG rendering of logs, tables and dumps.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dpasr/training.hpp"

namespace dpasr {

/// Corpus TER of a checkpoint's fused path on one split.
double EvaluateCheckpoint(Checkpoint &ck, const Corpus &corpus, Split split,
                          std::vector<TokenSequence> *hyps = nullptr);

struct AblationVariant {
  std::string name;
  bool dual_path = true;
  bool use_sl = true;
  bool use_cl = true;
  std::string layers = "all";
};

struct AblationSpec {
  TrainingConfig base;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationVariant> variants;  // the first one is the sign-count reference
  void Validate() const;
};

AblationSpec ParseAblationSpec(const nlohmann::json &j);
AblationSpec LoadAblationSpec(const std::filesystem::path &path);

/// Base config with the variant switches and the seed applied.
TrainingConfig VariantConfig(const AblationSpec &spec, const AblationVariant &v, std::uint64_t seed);

struct AblationCell {
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<double> test_ter;  // empty when the run failed
  std::string error;
  double seconds = 0.0;  // wall time of training plus test scoring
};

struct AblationRow {
  std::string variant;
  int runs = 0;
  int failed = 0;
  double mean = 0.0;
  double stddev = 0.0;
  // Per-seed comparison against the reference variant.
  int better = 0, tied = 0, worse = 0;
};

struct AblationResult {
  std::vector<AblationCell> cells;
  std::vector<AblationRow> rows;
  std::string table;
};

/// Mean, sample standard deviation and sign counts per variant.
std::vector<AblationRow> SummarizeAblation(const AblationSpec &spec,
                                           const std::vector<AblationCell> &cells);
std::string RenderAblationTable(const AblationSpec &spec, const std::vector<AblationRow> &rows);

/// Trains every (variant, seed) pair under <out>/<variant>/seed-<N>/ and
/// scores the best checkpoint on the test split. Writes <out>/results.jsonl
/// and <out>/table.txt.
AblationResult RunAblation(const AblationSpec &spec, const Corpus &corpus,
                           const std::filesystem::path &out_dir, std::ostream *progress = nullptr);

struct LabeledArray {
  std::string label;  // "encoder.clean.L3", "decoder.fused", ...
  Matrix values;
};

struct EmbeddingDump {
  std::string utterance_id;
  std::vector<LabeledArray> arrays;
  const Matrix *Find(const std::string &label) const;
};

/// Encoder outputs of both paths at the selected layers, then the decoder
/// output scores of both paths under teacher forcing.
EmbeddingDump DumpEmbeddings(Checkpoint &ck, const Utterance &utt, const LayerSelection &layers);
EmbeddingDump DumpEmbeddings(Checkpoint &ck, const Corpus &corpus, const std::string &utt_id,
                             const LayerSelection &layers);

void WriteEmbeddingDump(const std::filesystem::path &path, const EmbeddingDump &dump);
EmbeddingDump ReadEmbeddingDump(const std::filesystem::path &path);

/// ||Gram(clean) - Gram(fused)||_F at encoder layer `layer`.
double StyleDistance(const EmbeddingDump &dump, int layer);

/// Renders a metrics log (one curve per loss component), an ablation
/// results file (bar chart) or an embedding dump (one heat map per array).
/// Returns the written files.
std::vector<std::filesystem::path> RenderPlots(const std::filesystem::path &in,
                                               const std::filesystem::path &out_dir,
                                               std::ostream *warnings = nullptr);

}  // namespace dpasr

#endif  // DPASR_EVALUATION_HPP_
