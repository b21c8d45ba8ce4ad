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

#ifndef DPASR_AUTOGRAD_HPP_
#define DPASR_AUTOGRAD_HPP_

// Reverse-mode automatic differentiation over Matrix values. A Tape records
// one forward computation (in this project: one utterance through the whole
// enhancement -> fusion -> recognizer stack); Backward() then walks the
// records in reverse. Parameters enter a tape once, so every use of a shared
// parameter accumulates into the same gradient slot.

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpasr/matrix.hpp"

namespace dpasr {

struct Parameter {
  std::string name;
  Matrix value;
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  const Matrix &value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape *tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape *tape, int id) : tape_(tape), id_(id) {}
  Tape *tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape &)>;

  /// With `grad_enabled` false parameters enter as constants and no
  /// backward records are kept (inference).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Value that never receives a gradient.
  Var Constant(Matrix value);
  /// Input that receives a gradient (used by gradient checks).
  Var Leaf(Matrix value);
  /// Parameter leaf. Repeated calls for the same parameter return the same Var.
  Var Param(Parameter &p);

  /// Records an op result. `backward` is dropped when no input needs a gradient.
  Var Record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return Record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }
  Var Record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  const Matrix &Value(int id) const;
  bool NeedsGrad(int id) const { return nodes_[id].needs_grad; }
  /// Gradient slot, zero-allocated on first access.
  Matrix &Grad(int id);

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss and runs all backward records.
  void Backward(Var loss);

  /// Accumulated gradient, or nullptr if the value did not influence the loss.
  const Matrix *GradOf(Var v) const;
  const Matrix *GradOf(const Parameter &p) const;

  /// Parameters that entered this tape, in first-use order.
  const std::vector<Parameter *> &params() const { return param_order_; }

 private:
  struct Node {
    Matrix owned;
    const Matrix *external = nullptr;
    Matrix grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  Var Push(Node node);

  bool grad_enabled_ = true;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter *, int> param_ids_;
  std::vector<Parameter *> param_order_;
};

/// Differentiable operations. All take and return Vars on the same tape.
namespace ag {

Var MatMul(Var a, Var b);        // a * b
Var MatMulTB(Var a, Var b);      // a * b^T
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);           // elementwise
Var Scale(Var a, double s);
Var AddScalar(Var a, double s);
/// Adds a 1xC row to every row of a.
Var AddRow(Var a, Var row);
/// y = a * w + bias, with w (in x out) and bias (1 x out).
Var Linear(Var a, Var w, Var bias);

Var Relu(Var a);
Var Sigmoid(Var a);
Var Tanh(Var a);
Var Silu(Var a);
Var Log(Var a);
Var Exp(Var a);

Var SoftmaxRows(Var a);
Var LogSoftmaxRows(Var a);
Var LayerNorm(Var x, Var gamma, Var beta, double eps = 1e-5);

Var SliceCols(Var a, std::size_t begin, std::size_t count);
Var ConcatCols(std::span<const Var> parts);

/// Time-convolution unfold: row t of the output concatenates input rows
/// t*stride - pad + j for j in [0, kernel) (zeros outside), pad = (kernel-1)/2.
Var UnfoldTime(Var x, std::size_t kernel, std::size_t stride);
/// Per-channel convolution over time ("same" padding). w is kernel x C.
Var DepthwiseConvTime(Var x, Var w, Var bias);
/// Sets entries above the diagonal to a large negative constant.
Var CausalMask(Var scores);
/// Rows of `table` selected by `ids`.
Var GatherRows(Var table, std::span<const int> ids);

Var Sum(Var a);                  // 1x1
Var SumSquares(Var a);           // 1x1
/// E^T E.
Var Gram(Var e);
/// Same value, no gradient flows to the input.
Var Detach(Var a);

/// Sum over rows of -log softmax(scores)[row, targets[row]].
Var CrossEntropySum(Var scores, std::span<const int> targets);

/// Single-direction LSTM over the rows of x (T x I). w_ih: I x 4H,
/// w_hh: H x 4H, bias: 1 x 4H, gate order (input, forget, cell, output).
/// When `reverse` is set the sequence is processed from the last row and
/// output row t still corresponds to input row t.
Var Lstm(Var x, Var w_ih, Var w_hh, Var bias, bool reverse);

}  // namespace ag

}  // namespace dpasr

#endif  // DPASR_AUTOGRAD_HPP_
