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

#ifndef DPASR_TRAINING_HPP_
#define DPASR_TRAINING_HPP_

// Multi-task objective, learning-rate schedule, optimizer, training loop and
// checkpoints.
//
// Objective per batch:
//   L_asr   = (1 - w.fused) * L_asr_clean + w.fused * L_asr_fused
//   L_total = (1 - w.asr) * L_enh + w.asr * L_asr + w.sl * L_sl + w.cl * L_cl
// One optimizer updates enhancement, fusion and recognizer parameters
// together. With dual_path off the clean path, L_sl and L_cl are skipped and
// L_asr = L_asr_fused.

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpasr/system.hpp"

namespace dpasr {

struct LossWeights {
  double asr = 0.7;
  double sl = 0.01;
  double cl = 0.4;
  double fused = 0.3;
  void Validate() const;
};

double TotalLoss(double loss_enh, double loss_asr_clean, double loss_asr_fused, double loss_sl,
                 double loss_cl, const LossWeights &w);

/// Linear warmup to `peak` over `warmup` steps, then peak * sqrt(warmup / step).
double LearningRate(long step, double peak, long warmup);

struct TrainingConfig {
  CorpusConfig corpus;
  std::string corpus_dir;  // when set, read the corpus from disk instead of generating it
  FeatureConfig features;
  ModelConfig model;
  LossWeights weights;

  double peak_lr = 1e-3;
  long warmup_steps = 500;
  int batch_size = 8;
  int epochs = 20;
  std::uint64_t seed = 1;

  bool dual_path = true;
  bool use_sl = true;
  bool use_cl = true;
  std::string sl_layers = "all";
  bool block_clean_grad = true;
  double grad_clip = 5.0;
  std::vector<std::string> frozen;  // any of "se", "fusion", "asr"
  int max_decode_len = 12;

  void Validate() const;
  ForwardOptions MakeForwardOptions() const;
  MelFilterbank MakeFilterbank() const;
};

/// Desk-scale defaults (model sizes, low-SNR corpus, tuned SL weight) used by the ablation suite.
TrainingConfig DeskConfig();

void to_json(nlohmann::json &j, const TrainingConfig &c);
void from_json(const nlohmann::json &j, TrainingConfig &c);
TrainingConfig LoadTrainingConfig(const std::filesystem::path &path);
void to_json(nlohmann::json &j, const CorpusConfig &c);
void from_json(const nlohmann::json &j, CorpusConfig &c);

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.98;
  static constexpr double kEps = 1e-9;

  Adam() = default;
  explicit Adam(const std::vector<Parameter *> &params);

  /// One update; entries of `frozen` set to true are skipped.
  void Step(const std::vector<Parameter *> &params, const std::vector<Matrix> &grads, double lr,
            const std::vector<bool> &frozen);

  long steps() const { return steps_; }
  std::vector<Matrix> &first_moment() { return m_; }
  std::vector<Matrix> &second_moment() { return v_; }
  void set_steps(long s) { steps_ = s; }

 private:
  long steps_ = 0;
  std::vector<Matrix> m_, v_;
};

struct StepMetrics {
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss_enh = 0.0;
  double loss_asr_c = 0.0;
  double loss_asr_f = 0.0;
  double loss_sl = 0.0;
  double loss_cl = 0.0;
  double loss_total = 0.0;
};

struct BatchGradients {
  StepMetrics metrics;
  std::vector<Matrix> grads;  // aligned with SystemModel::Parameters()
};

using Batch = std::span<const PreparedUtterance *const>;

class Trainer {
 public:
  Trainer(TrainingConfig config, SystemModel model);

  /// Loss components and gradients of the batch objective, no update.
  BatchGradients ComputeGradients(Batch batch);
  /// One optimizer step at the scheduled learning rate.
  StepMetrics Step(Batch batch);
  StepMetrics Step(Batch batch, double lr);

  SystemModel &model() { return model_; }
  Adam &optimizer() { return adam_; }
  const TrainingConfig &config() const { return config_; }
  const MelFilterbank &filterbank() const { return bank_; }
  long step() const { return adam_.steps(); }

 private:
  TrainingConfig config_;
  SystemModel model_;
  Adam adam_;
  MelFilterbank bank_;
  ForwardOptions options_;
  std::vector<bool> frozen_;
};

struct TrainingResult {
  double initial_valid_ter = 1.0;
  double best_valid_ter = 1.0;
  int best_epoch = 0;
  std::vector<double> valid_ters;
  std::filesystem::path checkpoint;
};

/// Trains on corpus.train, validates on corpus.valid each epoch and keeps the
/// best-by-valid-TER checkpoint. Writes <out>/metrics.jsonl,
/// <out>/checkpoint.bin and <out>/summary.json.
TrainingResult RunTraining(const TrainingConfig &config, const Corpus &corpus,
                           const std::filesystem::path &out_dir, std::ostream *progress = nullptr);

/// Generates or reads the corpus a config points at.
Corpus LoadCorpusFor(const TrainingConfig &config);

void SaveCheckpoint(const std::filesystem::path &path, const TrainingConfig &config,
                    SystemModel &model, Adam &adam);

struct Checkpoint {
  TrainingConfig config;
  SystemModel model;
  Adam adam;
};
Checkpoint LoadCheckpoint(const std::filesystem::path &path);

nlohmann::json MetricsRecord(const StepMetrics &m, std::optional<double> valid_ter);

}  // namespace dpasr

#endif  // DPASR_TRAINING_HPP_
