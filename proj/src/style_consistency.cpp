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

#include "dpasr/style_consistency.hpp"

#include <algorithm>
#include <sstream>

#include "dpasr/error.hpp"
#include "dpasr/kernels.hpp"

namespace dpasr {

LayerSelection::LayerSelection(std::vector<int> layers) : layers_(std::move(layers)) {
  std::sort(layers_.begin(), layers_.end());
  layers_.erase(std::unique(layers_.begin(), layers_.end()), layers_.end());
  DPASR_REQUIRE(layers_.empty() || layers_.front() >= 1, "LayerSelection: indices are 1-based");
}

LayerSelection LayerSelection::All(int num_layers) {
  std::vector<int> v;
  for (int l = 1; l <= num_layers; ++l) v.push_back(l);
  return LayerSelection(std::move(v));
}

LayerSelection LayerSelection::LowHalf(int num_layers) {
  std::vector<int> v;
  for (int l = 1; l <= num_layers / 2; ++l) v.push_back(l);
  return LayerSelection(std::move(v));
}

LayerSelection LayerSelection::HighHalf(int num_layers) {
  std::vector<int> v;
  for (int l = num_layers / 2 + 1; l <= num_layers; ++l) v.push_back(l);
  return LayerSelection(std::move(v));
}

LayerSelection LayerSelection::Parse(const std::string &text, int num_layers) {
  if (text == "all") return All(num_layers);
  if (text == "low") return LowHalf(num_layers);
  if (text == "high") return HighHalf(num_layers);
  if (text == "none" || text == "0" || text.empty()) return LayerSelection();
  std::vector<int> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        v.push_back(std::stoi(item));
      } else {
        const int lo = std::stoi(item.substr(0, dash)), hi = std::stoi(item.substr(dash + 1));
        DPASR_REQUIRE(lo <= hi, "LayerSelection: empty range '" + item + "'");
        for (int l = lo; l <= hi; ++l) v.push_back(l);
      }
    } catch (const std::logic_error &) {
      throw InvalidInput("LayerSelection: cannot parse '" + text + "'");
    }
  }
  LayerSelection sel(std::move(v));
  sel.Validate(num_layers);
  return sel;
}

void LayerSelection::Validate(int num_layers) const {
  for (int l : layers_)
    DPASR_REQUIRE(l >= 1 && l <= num_layers,
                  "LayerSelection: layer " + std::to_string(l) + " outside [1, " +
                      std::to_string(num_layers) + "]");
}

std::string LayerSelection::ToString() const {
  if (layers_.empty()) return "none";
  bool contiguous = true;
  for (std::size_t i = 1; i < layers_.size(); ++i) contiguous &= layers_[i] == layers_[i - 1] + 1;
  if (contiguous && layers_.size() > 1)
    return std::to_string(layers_.front()) + "-" + std::to_string(layers_.back());
  std::string s;
  for (std::size_t i = 0; i < layers_.size(); ++i) s += (i ? "," : "") + std::to_string(layers_[i]);
  return s;
}

StyleMatrix ComputeStyleMatrix(const LayerEmbedding &e) {
  DPASR_REQUIRE(e.values.AllFinite(), "style_matrix: non-finite embedding");
  return {kernels::Gram(e.values), e.layer};
}

Var StyleLoss(std::span<const Var> clean, std::span<const Var> fused, const LayerSelection &sel,
              bool block_clean) {
  DPASR_REQUIRE(!sel.empty(), "StyleLoss: empty layer selection");
  DPASR_REQUIRE(clean.size() == fused.size(), "StyleLoss: layer count mismatch");
  sel.Validate(static_cast<int>(clean.size()));
  Var total;
  std::size_t d = 0;
  for (int l : sel.layers()) {
    Var c = clean[static_cast<std::size_t>(l - 1)];
    Var f = fused[static_cast<std::size_t>(l - 1)];
    DPASR_REQUIRE(c.cols() == f.cols(), "StyleLoss: embedding width mismatch");
    d = c.cols();
    if (block_clean) c = ag::Detach(c);
    Var term = ag::SumSquares(ag::Sub(ag::Gram(c), ag::Gram(f)));
    total = total.valid() ? ag::Add(total, term) : term;
  }
  const double norm = static_cast<double>(sel.size()) * static_cast<double>(d * d);
  return ag::Scale(total, 1.0 / norm);
}

double StyleLoss(std::span<const LayerEmbedding> clean, std::span<const LayerEmbedding> fused,
                 const LayerSelection &sel) {
  Tape tape(false);
  std::vector<Var> c, f;
  for (const auto &e : clean) c.push_back(tape.Constant(e.values));
  for (const auto &e : fused) f.push_back(tape.Constant(e.values));
  return StyleLoss(c, f, sel, true).value()(0, 0);
}

Var ConsistencyLoss(Var clean, Var fused, bool block_clean) {
  DPASR_REQUIRE(clean.value().SameShape(fused.value()), "ConsistencyLoss: shape mismatch");
  DPASR_REQUIRE(clean.rows() >= 1, "ConsistencyLoss: empty posterior");
  if (block_clean) clean = ag::Detach(clean);
  Var p = ag::SoftmaxRows(clean), q = ag::SoftmaxRows(fused);
  Var lp = ag::LogSoftmaxRows(clean), lq = ag::LogSoftmaxRows(fused);
  Var sym = ag::Sum(ag::Mul(ag::Sub(p, q), ag::Sub(lp, lq)));
  return ag::Scale(sym, 1.0 / static_cast<double>(clean.rows()));
}

double ConsistencyLoss(const DecoderPosterior &clean, const DecoderPosterior &fused) {
  Tape tape(false);
  return ConsistencyLoss(tape.Constant(clean.scores), tape.Constant(fused.scores), true)
      .value()(0, 0);
}

}  // namespace dpasr
