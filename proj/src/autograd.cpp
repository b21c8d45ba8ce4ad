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

#include "dpasr/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dpasr/error.hpp"
#include "dpasr/kernels.hpp"

namespace dpasr {

using kernels::Trans;

const Matrix &Var::value() const { return tape_->Value(id_); }

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  return Push(std::move(n));
}

Var Tape::Leaf(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.needs_grad = true;
  return Push(std::move(n));
}

Var Tape::Param(Parameter &p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.needs_grad = grad_enabled_;
  Var v = Push(std::move(n));
  param_ids_.emplace(&p, v.id());
  param_order_.push_back(&p);
  return v;
}

Var Tape::Record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (const Var &v : inputs) {
    DPASR_REQUIRE(v.tape() == this, "Tape::Record: input from another tape");
    n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  return Push(std::move(n));
}

const Matrix &Tape::Value(int id) const {
  const Node &n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Matrix &Tape::Grad(int id) {
  Node &n = nodes_[id];
  if (n.grad.empty()) {
    const Matrix &v = Value(id);
    n.grad.Resize(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::Backward(Var loss) {
  DPASR_REQUIRE(loss.tape() == this, "Backward: loss from another tape");
  DPASR_REQUIRE(loss.rows() == 1 && loss.cols() == 1, "Backward: loss must be 1x1");
  if (!nodes_[loss.id()].needs_grad) return;
  Grad(loss.id())(0, 0) += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node &n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this);
  }
}

const Matrix *Tape::GradOf(Var v) const {
  const Node &n = nodes_[v.id()];
  return n.grad.empty() ? nullptr : &n.grad;
}

const Matrix *Tape::GradOf(const Parameter &p) const {
  auto it = param_ids_.find(&p);
  if (it == param_ids_.end()) return nullptr;
  const Node &n = nodes_[it->second];
  return n.grad.empty() ? nullptr : &n.grad;
}

namespace ag {

namespace {

void RequireSameShape(const Var &a, const Var &b, const char *op) {
  if (!a.value().SameShape(b.value()))
    throw InvalidInput(std::string(op) + ": shape mismatch");
}

// Elementwise unary op; `deriv(x, y)` returns dy/dx.
template <typename F, typename D>
Var Unary(Var a, F f, D deriv) {
  const Matrix &x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const int ia = a.id();
  Tape *tape = a.tape();
  auto holder = std::make_shared<int>(-1);
  Var out = tape->Record(std::move(y), {a}, [ia, holder, deriv](Tape &t) {
    const Matrix &xv = t.Value(ia);
    const Matrix &yv = t.Value(*holder);
    const Matrix &g = t.Grad(*holder);
    Matrix &ga = t.Grad(ia);
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
  });
  *holder = out.id();
  return out;
}

// Records an op whose backward needs its own output id.
template <typename Fn>
Var RecordSelf(Tape *tape, Matrix value, std::initializer_list<Var> inputs, Fn fn) {
  auto holder = std::make_shared<int>(-1);
  Var out = tape->Record(std::move(value), inputs,
                         [holder, fn](Tape &t) { fn(t, *holder); });
  *holder = out.id();
  return out;
}

}  // namespace

Var MatMul(Var a, Var b) {
  Matrix y = kernels::MatMul(a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return RecordSelf(a.tape(), std::move(y), {a, b}, [ia, ib](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    if (t.NeedsGrad(ia)) kernels::Gemm(Trans::kNo, Trans::kYes, 1.0, g, t.Value(ib), 1.0, &t.Grad(ia));
    if (t.NeedsGrad(ib)) kernels::Gemm(Trans::kYes, Trans::kNo, 1.0, t.Value(ia), g, 1.0, &t.Grad(ib));
  });
}

Var MatMulTB(Var a, Var b) {
  Matrix y = kernels::MatMulTB(a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return RecordSelf(a.tape(), std::move(y), {a, b}, [ia, ib](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    if (t.NeedsGrad(ia)) kernels::Gemm(Trans::kNo, Trans::kNo, 1.0, g, t.Value(ib), 1.0, &t.Grad(ia));
    if (t.NeedsGrad(ib)) kernels::Gemm(Trans::kYes, Trans::kNo, 1.0, g, t.Value(ia), 1.0, &t.Grad(ib));
  });
}

Var Add(Var a, Var b) {
  RequireSameShape(a, b, "Add");
  Matrix y = a.value();
  y.AddScaled(b.value());
  const int ia = a.id(), ib = b.id();
  return RecordSelf(a.tape(), std::move(y), {a, b}, [ia, ib](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    if (t.NeedsGrad(ia)) t.Grad(ia).AddScaled(g);
    if (t.NeedsGrad(ib)) t.Grad(ib).AddScaled(g);
  });
}

Var Sub(Var a, Var b) {
  RequireSameShape(a, b, "Sub");
  Matrix y = a.value();
  y.AddScaled(b.value(), -1.0);
  const int ia = a.id(), ib = b.id();
  return RecordSelf(a.tape(), std::move(y), {a, b}, [ia, ib](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    if (t.NeedsGrad(ia)) t.Grad(ia).AddScaled(g);
    if (t.NeedsGrad(ib)) t.Grad(ib).AddScaled(g, -1.0);
  });
}

Var Mul(Var a, Var b) {
  RequireSameShape(a, b, "Mul");
  const Matrix &av = a.value(), &bv = b.value();
  Matrix y(av.rows(), av.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  return RecordSelf(a.tape(), std::move(y), {a, b}, [ia, ib](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    if (t.NeedsGrad(ia)) {
      Matrix &ga = t.Grad(ia);
      const Matrix &bv = t.Value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.NeedsGrad(ib)) {
      Matrix &gb = t.Grad(ib);
      const Matrix &av = t.Value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var Scale(Var a, double s) {
  Matrix y = a.value();
  y.Scale(s);
  const int ia = a.id();
  return RecordSelf(a.tape(), std::move(y), {a},
                    [ia, s](Tape &t, int self) { t.Grad(ia).AddScaled(t.Grad(self), s); });
}

Var AddScalar(Var a, double s) {
  Matrix y = a.value();
  for (double &v : y.values()) v += s;
  const int ia = a.id();
  return RecordSelf(a.tape(), std::move(y), {a},
                    [ia](Tape &t, int self) { t.Grad(ia).AddScaled(t.Grad(self)); });
}

Var AddRow(Var a, Var row) {
  const Matrix &av = a.value(), &rv = row.value();
  DPASR_REQUIRE(rv.rows() == 1 && rv.cols() == av.cols(), "AddRow: row shape mismatch");
  Matrix y = av;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += rv(0, c);
  const int ia = a.id(), ir = row.id();
  return RecordSelf(a.tape(), std::move(y), {a, row}, [ia, ir](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    if (t.NeedsGrad(ia)) t.Grad(ia).AddScaled(g);
    if (t.NeedsGrad(ir)) {
      Matrix &gr = t.Grad(ir);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
    }
  });
}

Var Linear(Var a, Var w, Var bias) { return AddRow(MatMul(a, w), bias); }

Var Relu(Var a) {
  return Unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Sigmoid(Var a) {
  return Unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(Var a) {
  return Unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var Silu(Var a) {
  return Unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Var Log(Var a) {
  return Unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var Exp(Var a) {
  return Unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var SoftmaxRows(Var a) {
  Matrix y = kernels::SoftmaxRows(a.value());
  const int ia = a.id();
  return RecordSelf(a.tape(), std::move(y), {a}, [ia](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    const Matrix &y = t.Value(self);
    Matrix &ga = t.Grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var LogSoftmaxRows(Var a) {
  Matrix y = kernels::LogSoftmaxRows(a.value());
  const int ia = a.id();
  return RecordSelf(a.tape(), std::move(y), {a}, [ia](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    const Matrix &y = t.Value(self);
    Matrix &ga = t.Grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) gs += g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
    }
  });
}

Var LayerNorm(Var x, Var gamma, Var beta, double eps) {
  const Matrix &xv = x.value();
  const std::size_t n = xv.rows(), c = xv.cols();
  DPASR_REQUIRE(gamma.rows() == 1 && gamma.cols() == c && beta.rows() == 1 && beta.cols() == c,
                "LayerNorm: affine shape mismatch");
  auto xhat = std::make_shared<Matrix>(n, c);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  const Matrix &gv = gamma.value(), &bv = beta.value();
  Matrix y(n, c);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xv(r, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xv(r, j) - mean) * (xv(r, j) - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xv(r, j) - mean) * is;
      (*xhat)(r, j) = h;
      y(r, j) = gv(0, j) * h + bv(0, j);
    }
  }
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return RecordSelf(x.tape(), std::move(y), {x, gamma, beta},
                    [ix, ig, ib, xhat, inv_std](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    const Matrix &gv = t.Value(ig);
    const std::size_t n = g.rows(), c = g.cols();
    if (t.NeedsGrad(ig)) {
      Matrix &gg = t.Grad(ig);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) gg(0, j) += g(r, j) * (*xhat)(r, j);
    }
    if (t.NeedsGrad(ib)) {
      Matrix &gb = t.Grad(ib);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) gb(0, j) += g(r, j);
    }
    if (t.NeedsGrad(ix)) {
      Matrix &gx = t.Grad(ix);
      for (std::size_t r = 0; r < n; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = g(r, j) * gv(0, j);
          m1 += dh;
          m2 += dh * (*xhat)(r, j);
        }
        m1 /= static_cast<double>(c);
        m2 /= static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = g(r, j) * gv(0, j);
          gx(r, j) += (*inv_std)[r] * (dh - m1 - (*xhat)(r, j) * m2);
        }
      }
    }
  });
}

Var SliceCols(Var a, std::size_t begin, std::size_t count) {
  const Matrix &av = a.value();
  DPASR_REQUIRE(begin + count <= av.cols(), "SliceCols: range out of bounds");
  Matrix y(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) y(r, c) = av(r, begin + c);
  const int ia = a.id();
  return RecordSelf(a.tape(), std::move(y), {a}, [ia, begin](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    Matrix &ga = t.Grad(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, begin + c) += g(r, c);
  });
}

Var ConcatCols(std::span<const Var> parts) {
  DPASR_REQUIRE(!parts.empty(), "ConcatCols: no inputs");
  Tape *tape = parts[0].tape();
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var &p : parts) {
    DPASR_REQUIRE(p.rows() == rows, "ConcatCols: row count mismatch");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var &p : parts) {
    const Matrix &pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) y(r, off + c) = pv(r, c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += pv.cols();
  }
  auto holder = std::make_shared<int>(-1);
  Var out = tape->Record(std::move(y), parts, [holder, ids, offsets](Tape &t) {
    const Matrix &g = t.Grad(*holder);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.NeedsGrad(ids[k])) continue;
      Matrix &gp = t.Grad(ids[k]);
      for (std::size_t r = 0; r < gp.rows(); ++r)
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offsets[k] + c);
    }
  });
  *holder = out.id();
  return out;
}

Var UnfoldTime(Var x, std::size_t kernel, std::size_t stride) {
  const Matrix &xv = x.value();
  DPASR_REQUIRE(kernel >= 1 && stride >= 1, "UnfoldTime: kernel and stride must be >= 1");
  const std::size_t t_in = xv.rows(), c = xv.cols();
  const std::size_t t_out = (t_in + stride - 1) / stride;
  const auto pad = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
  Matrix y(t_out, kernel * c);
  for (std::size_t t = 0; t < t_out; ++t)
    for (std::size_t j = 0; j < kernel; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + j) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
      for (std::size_t k = 0; k < c; ++k) y(t, j * c + k) = xv(static_cast<std::size_t>(src), k);
    }
  const int ix = x.id();
  return RecordSelf(x.tape(), std::move(y), {x}, [ix, kernel, stride, pad](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    Matrix &gx = t.Grad(ix);
    const std::size_t c = gx.cols();
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t j = 0; j < kernel; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(r * stride + j) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(gx.rows())) continue;
        for (std::size_t k = 0; k < c; ++k) gx(static_cast<std::size_t>(src), k) += g(r, j * c + k);
      }
  });
}

Var DepthwiseConvTime(Var x, Var w, Var bias) {
  const Matrix &xv = x.value(), &wv = w.value(), &bv = bias.value();
  const std::size_t t_len = xv.rows(), c = xv.cols(), kernel = wv.rows();
  DPASR_REQUIRE(wv.cols() == c && bv.rows() == 1 && bv.cols() == c,
                "DepthwiseConvTime: weight shape mismatch");
  const auto pad = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
  Matrix y(t_len, c);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t k = 0; k < c; ++k) y(t, k) = bv(0, k);
    for (std::size_t j = 0; j < kernel; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
      for (std::size_t k = 0; k < c; ++k) y(t, k) += wv(j, k) * xv(static_cast<std::size_t>(src), k);
    }
  }
  const int ix = x.id(), iw = w.id(), ib = bias.id();
  return RecordSelf(x.tape(), std::move(y), {x, w, bias}, [ix, iw, ib, pad](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    const Matrix &xv = t.Value(ix), &wv = t.Value(iw);
    const std::size_t t_len = g.rows(), c = g.cols(), kernel = wv.rows();
    if (t.NeedsGrad(ib)) {
      Matrix &gb = t.Grad(ib);
      for (std::size_t r = 0; r < t_len; ++r)
        for (std::size_t k = 0; k < c; ++k) gb(0, k) += g(r, k);
    }
    const bool gx_on = t.NeedsGrad(ix), gw_on = t.NeedsGrad(iw);
    Matrix *gx = gx_on ? &t.Grad(ix) : nullptr;
    Matrix *gw = gw_on ? &t.Grad(iw) : nullptr;
    for (std::size_t r = 0; r < t_len; ++r)
      for (std::size_t j = 0; j < kernel; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(r + j) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
        const auto s = static_cast<std::size_t>(src);
        for (std::size_t k = 0; k < c; ++k) {
          if (gx) (*gx)(s, k) += g(r, k) * wv(j, k);
          if (gw) (*gw)(j, k) += g(r, k) * xv(s, k);
        }
      }
  });
}

Var CausalMask(Var scores) {
  constexpr double kMasked = -1e9;
  Matrix y = scores.value();
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = r + 1; c < y.cols(); ++c) y(r, c) = kMasked;
  const int is = scores.id();
  return RecordSelf(scores.tape(), std::move(y), {scores}, [is](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    Matrix &gs = t.Grad(is);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c <= r && c < g.cols(); ++c) gs(r, c) += g(r, c);
  });
}

Var GatherRows(Var table, std::span<const int> ids) {
  const Matrix &tv = table.value();
  Matrix y(ids.size(), tv.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    DPASR_REQUIRE(ids[r] >= 0 && static_cast<std::size_t>(ids[r]) < tv.rows(),
                  "GatherRows: index out of range");
    for (std::size_t c = 0; c < tv.cols(); ++c) y(r, c) = tv(static_cast<std::size_t>(ids[r]), c);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  const int it = table.id();
  return RecordSelf(table.tape(), std::move(y), {table}, [it, idx](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    Matrix &gt = t.Grad(it);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gt(static_cast<std::size_t>(idx[r]), c) += g(r, c);
  });
}

Var Sum(Var a) {
  Matrix y(1, 1, a.value().Sum());
  const int ia = a.id();
  return RecordSelf(a.tape(), std::move(y), {a}, [ia](Tape &t, int self) {
    const double g = t.Grad(self)(0, 0);
    for (double &v : t.Grad(ia).values()) v += g;
  });
}

Var SumSquares(Var a) {
  Matrix y(1, 1, a.value().SquaredNorm());
  const int ia = a.id();
  return RecordSelf(a.tape(), std::move(y), {a}, [ia](Tape &t, int self) {
    const double g = t.Grad(self)(0, 0);
    t.Grad(ia).AddScaled(t.Value(ia), 2.0 * g);
  });
}

Var Gram(Var e) {
  Matrix y = kernels::Gram(e.value());
  const int ie = e.id();
  return RecordSelf(e.tape(), std::move(y), {e}, [ie](Tape &t, int self) {
    // dL/dE = E (G + G^T)
    Matrix gs = t.Grad(self);
    gs.AddScaled(gs.Transpose());
    kernels::Gemm(Trans::kNo, Trans::kNo, 1.0, t.Value(ie), gs, 1.0, &t.Grad(ie));
  });
}

Var Detach(Var a) { return a.tape()->Constant(a.value()); }

Var CrossEntropySum(Var scores, std::span<const int> targets) {
  const Matrix &sv = scores.value();
  DPASR_REQUIRE(sv.rows() == targets.size(), "CrossEntropySum: rows != number of targets");
  Matrix logp = kernels::LogSoftmaxRows(sv);
  double loss = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    DPASR_REQUIRE(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < sv.cols(),
                  "CrossEntropySum: target out of range");
    loss -= logp(r, static_cast<std::size_t>(targets[r]));
  }
  std::vector<int> tg(targets.begin(), targets.end());
  auto lp = std::make_shared<Matrix>(std::move(logp));
  const int is = scores.id();
  return RecordSelf(scores.tape(), Matrix(1, 1, loss), {scores}, [is, tg, lp](Tape &t, int self) {
    const double g = t.Grad(self)(0, 0);
    Matrix &gs = t.Grad(is);
    for (std::size_t r = 0; r < tg.size(); ++r) {
      for (std::size_t c = 0; c < gs.cols(); ++c) gs(r, c) += g * std::exp((*lp)(r, c));
      gs(r, static_cast<std::size_t>(tg[r])) -= g;
    }
  });
}

namespace {

struct LstmCache {
  std::size_t hidden = 0;
  bool reverse = false;
  Matrix gates;   // T x 4H post-activation (i, f, g, o)
  Matrix cell;    // T x H
  Matrix cell_tanh;
};

inline double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var Lstm(Var x, Var w_ih, Var w_hh, Var bias, bool reverse) {
  const Matrix &xv = x.value(), &wih = w_ih.value(), &whh = w_hh.value(), &bv = bias.value();
  const std::size_t t_len = xv.rows();
  const std::size_t h = whh.rows();
  DPASR_REQUIRE(wih.rows() == xv.cols() && wih.cols() == 4 * h && whh.cols() == 4 * h &&
                    bv.rows() == 1 && bv.cols() == 4 * h,
                "Lstm: weight shape mismatch");
  Matrix pre = kernels::MatMul(xv, wih);
  auto cache = std::make_shared<LstmCache>();
  cache->hidden = h;
  cache->reverse = reverse;
  cache->gates.Resize(t_len, 4 * h);
  cache->cell.Resize(t_len, h);
  cache->cell_tanh.Resize(t_len, h);
  Matrix out(t_len, h);
  std::vector<double> a(4 * h);
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? t_len - 1 - step : step;
    const bool first = step == 0;
    const std::size_t prev = reverse ? t + 1 : t - 1;
    for (std::size_t j = 0; j < 4 * h; ++j) a[j] = pre(t, j) + bv(0, j);
    if (!first) {
      for (std::size_t k = 0; k < h; ++k) {
        const double hv = out(prev, k);
        if (hv == 0.0) continue;
        const double *wrow = whh.data() + k * 4 * h;
        for (std::size_t j = 0; j < 4 * h; ++j) a[j] += hv * wrow[j];
      }
    }
    for (std::size_t k = 0; k < h; ++k) {
      const double ig = Sig(a[k]);
      const double fg = Sig(a[h + k]);
      const double gg = std::tanh(a[2 * h + k]);
      const double og = Sig(a[3 * h + k]);
      const double c_prev = first ? 0.0 : cache->cell(prev, k);
      const double c = fg * c_prev + ig * gg;
      const double tc = std::tanh(c);
      cache->gates(t, k) = ig;
      cache->gates(t, h + k) = fg;
      cache->gates(t, 2 * h + k) = gg;
      cache->gates(t, 3 * h + k) = og;
      cache->cell(t, k) = c;
      cache->cell_tanh(t, k) = tc;
      out(t, k) = og * tc;
    }
  }
  const int ix = x.id(), iih = w_ih.id(), ihh = w_hh.id(), ib = bias.id();
  return RecordSelf(x.tape(), std::move(out), {x, w_ih, w_hh, bias},
                    [ix, iih, ihh, ib, cache](Tape &t, int self) {
    const Matrix &g = t.Grad(self);
    const Matrix &out = t.Value(self);
    const Matrix &whh = t.Value(ihh);
    const std::size_t t_len = g.rows(), h = cache->hidden;
    const bool rev = cache->reverse;
    Matrix da(t_len, 4 * h);
    std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0);
    for (std::size_t step = t_len; step-- > 0;) {
      const std::size_t t_idx = rev ? t_len - 1 - step : step;
      const bool first = step == 0;
      const std::size_t prev = rev ? t_idx + 1 : t_idx - 1;
      for (std::size_t k = 0; k < h; ++k) {
        const double ig = cache->gates(t_idx, k), fg = cache->gates(t_idx, h + k);
        const double gg = cache->gates(t_idx, 2 * h + k), og = cache->gates(t_idx, 3 * h + k);
        const double tc = cache->cell_tanh(t_idx, k);
        const double c_prev = first ? 0.0 : cache->cell(prev, k);
        const double dh = g(t_idx, k) + dh_next[k];
        const double d_o = dh * tc;
        const double dc = dh * og * (1.0 - tc * tc) + dc_next[k];
        const double di = dc * gg;
        const double dg = dc * ig;
        const double df = dc * c_prev;
        dc_next[k] = dc * fg;
        da(t_idx, k) = di * ig * (1.0 - ig);
        da(t_idx, h + k) = df * fg * (1.0 - fg);
        da(t_idx, 2 * h + k) = dg * (1.0 - gg * gg);
        da(t_idx, 3 * h + k) = d_o * og * (1.0 - og);
      }
      // dh_prev = da_t * W_hh^T
      for (std::size_t k = 0; k < h; ++k) {
        const double *wrow = whh.data() + k * 4 * h;
        double s = 0.0;
        for (std::size_t j = 0; j < 4 * h; ++j) s += da(t_idx, j) * wrow[j];
        dh_next[k] = s;
      }
    }
    if (t.NeedsGrad(ihh)) {
      // dW_hh = sum_t h_{t-1}^T da_t, with h_{t-1} the previous step's output.
      Matrix &gw = t.Grad(ihh);
      for (std::size_t step = 1; step < t_len; ++step) {
        const std::size_t t_idx = rev ? t_len - 1 - step : step;
        const std::size_t prev = rev ? t_idx + 1 : t_idx - 1;
        for (std::size_t k = 0; k < h; ++k) {
          const double hv = out(prev, k);
          if (hv == 0.0) continue;
          double *grow = gw.data() + k * 4 * h;
          for (std::size_t j = 0; j < 4 * h; ++j) grow[j] += hv * da(t_idx, j);
        }
      }
    }
    if (t.NeedsGrad(ib)) {
      Matrix &gb = t.Grad(ib);
      for (std::size_t r = 0; r < t_len; ++r)
        for (std::size_t j = 0; j < 4 * h; ++j) gb(0, j) += da(r, j);
    }
    if (t.NeedsGrad(iih)) kernels::Gemm(Trans::kYes, Trans::kNo, 1.0, t.Value(ix), da, 1.0, &t.Grad(iih));
    if (t.NeedsGrad(ix)) kernels::Gemm(Trans::kNo, Trans::kYes, 1.0, da, t.Value(iih), 1.0, &t.Grad(ix));
  });
}

}  // namespace ag

}  // namespace dpasr
