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

#ifndef DPASR_STYLE_CONSISTENCY_HPP_
#define DPASR_STYLE_CONSISTENCY_HPP_

// Regularizers coupling the clean and fused recognizer paths.
//
// Style loss: for every selected encoder layer l, the Gram ("style") matrix
// S = E^T E of the T' x D embedding is computed on both paths and
//
//   loss = 1 / (|sel| * D^2) * sum_l || S_clean^l - S_fused^l ||_F^2
//
// Consistency loss: rows of both decoder score matrices are softmax
// normalized and the symmetric KL divergence KL(P||Q) + KL(Q||P) is averaged
// over the U rows. Using sum_v (p - q)(log p - log q) keeps it symmetric by
// construction.

#include <span>
#include <string>
#include <vector>

#include "dpasr/autograd.hpp"
#include "dpasr/dual_path_asr.hpp"

namespace dpasr {

struct StyleMatrix {
  Matrix values;  // D x D
  int layer = 0;
};

/// Ordered, duplicate-free set of 1-based encoder layer indices.
class LayerSelection {
 public:
  LayerSelection() = default;
  explicit LayerSelection(std::vector<int> layers);

  static LayerSelection All(int num_layers);
  /// Lower half (1..L/2) or upper half (L/2+1..L).
  static LayerSelection LowHalf(int num_layers);
  static LayerSelection HighHalf(int num_layers);
  /// Accepts "all", "low", "high", "none", ranges like "1-3" and lists like "1,3,4".
  static LayerSelection Parse(const std::string &text, int num_layers);

  const std::vector<int> &layers() const { return layers_; }
  bool empty() const { return layers_.empty(); }
  std::size_t size() const { return layers_.size(); }
  void Validate(int num_layers) const;
  std::string ToString() const;

  bool operator==(const LayerSelection &) const = default;

 private:
  std::vector<int> layers_;
};

StyleMatrix ComputeStyleMatrix(const LayerEmbedding &e);

/// Differentiable style loss over per-layer embeddings (index 0 = layer 1).
/// With `block_clean`, no gradient reaches the clean embeddings.
Var StyleLoss(std::span<const Var> clean, std::span<const Var> fused, const LayerSelection &sel,
              bool block_clean);
double StyleLoss(std::span<const LayerEmbedding> clean, std::span<const LayerEmbedding> fused,
                 const LayerSelection &sel);

/// Row-averaged symmetric KL between softmax-normalized score rows.
Var ConsistencyLoss(Var clean, Var fused, bool block_clean);
double ConsistencyLoss(const DecoderPosterior &clean, const DecoderPosterior &fused);

}  // namespace dpasr

#endif  // DPASR_STYLE_CONSISTENCY_HPP_
