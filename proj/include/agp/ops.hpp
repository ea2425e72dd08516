/*
 * Copyright 2026 The AGP Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef AGP_OPS_HPP
#define AGP_OPS_HPP

#include <cmath>
#include <span>
#include <vector>

#include "agp/tape.hpp"

/// Differentiable ops recorded on a Tape.
namespace agp::ad {

namespace detail {

inline Tape &same_tape(Var a, Var b, const char *op) {
  if (!a.valid() || a.tape() != b.tape())
    throw Error(std::string(op) + ": operands live on different tapes");
  return *a.tape();
}

inline bool any_grad(Tape &t, Var a) { return t.needs_grad(a); }
inline bool any_grad(Tape &t, Var a, Var b) { return t.needs_grad(a) || t.needs_grad(b); }

} // namespace detail

inline Var matmul(Var a, Var b) {
  Tape &t = detail::same_tape(a, b, "matmul");
  return t.record(agp::matmul(a.value(), b.value()), detail::any_grad(t, a, b),
                  [a, b](Tape &t, const Matrix &g) {
                    if (t.needs_grad(a))
                      t.accumulate(a, g * b.value().transpose());
                    if (t.needs_grad(b))
                      t.accumulate(b, a.value().transpose() * g);
                  },
                  "matmul");
}

inline Var add(Var a, Var b) {
  Tape &t = detail::same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  return t.record(a.value() + b.value(), detail::any_grad(t, a, b),
                  [a, b](Tape &t, const Matrix &g) {
                    t.accumulate(a, g);
                    t.accumulate(b, g);
                  },
                  "add");
}

inline Var sub(Var a, Var b) {
  Tape &t = detail::same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  return t.record(a.value() - b.value(), detail::any_grad(t, a, b),
                  [a, b](Tape &t, const Matrix &g) {
                    t.accumulate(a, g);
                    if (t.needs_grad(b))
                      t.accumulate(b, -g);
                  },
                  "sub");
}

inline Var hadamard(Var a, Var b) {
  Tape &t = detail::same_tape(a, b, "hadamard");
  require_same_shape(a.value(), b.value(), "hadamard");
  return t.record(a.value().cwiseProduct(b.value()), detail::any_grad(t, a, b),
                  [a, b](Tape &t, const Matrix &g) {
                    if (t.needs_grad(a))
                      t.accumulate(a, g.cwiseProduct(b.value()));
                    if (t.needs_grad(b))
                      t.accumulate(b, g.cwiseProduct(a.value()));
                  },
                  "hadamard");
}

inline Var scale(Var a, double s) {
  Tape &t = *a.tape();
  return t.record(a.value() * s, t.needs_grad(a),
                  [a, s](Tape &t, const Matrix &g) { t.accumulate(a, g * s); }, "scale");
}

/// Subgradient 0 at the kink.
inline Var relu(Var a) {
  Tape &t = *a.tape();
  return t.record(a.value().cwiseMax(0.0), t.needs_grad(a),
                  [a](Tape &t, const Matrix &g) {
                    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(
                                        [](double v) { return v > 0.0 ? 1.0 : 0.0; })));
                  },
                  "relu");
}

inline Var sigmoid(Var a) {
  Tape &t = *a.tape();
  Matrix s = elementwise(ElementwiseOp::sigmoid, a.value());
  return t.record(s, t.needs_grad(a),
                  [a](Tape &t, const Matrix &g) {
                    const Matrix s = elementwise(ElementwiseOp::sigmoid, a.value());
                    t.accumulate(a, g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
                  },
                  "sigmoid");
}

/// Gradient passes through entries strictly inside (lo, hi).
inline Var clamp(Var a, double lo, double hi) {
  Tape &t = *a.tape();
  return t.record(agp::clamp(a.value(), lo, hi), t.needs_grad(a),
                  [a, lo, hi](Tape &t, const Matrix &g) {
                    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr([lo, hi](double v) {
                      return (v > lo && v < hi) ? 1.0 : 0.0;
                    })));
                  },
                  "clamp");
}

/// a (N x C) + row (1 x C) broadcast over rows.
inline Var add_row(Var a, Var row) {
  Tape &t = detail::same_tape(a, row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw DimensionError("add_row: " + shape_str(a.value()) + " + " + shape_str(row.value()));
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), detail::any_grad(t, a, row),
                  [a, row](Tape &t, const Matrix &g) {
                    t.accumulate(a, g);
                    if (t.needs_grad(row))
                      t.accumulate(row, g.colwise().sum());
                  },
                  "add_row");
}

inline Var sum(Var a) {
  Tape &t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), t.needs_grad(a),
                  [a](Tape &t, const Matrix &g) {
                    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                  },
                  "sum");
}

/// Column means: N x C -> 1 x C.
inline Var mean_rows(Var a) {
  Tape &t = *a.tape();
  if (a.rows() == 0)
    throw DimensionError("mean_rows: empty matrix");
  Matrix out = a.value().colwise().mean();
  return t.record(std::move(out), t.needs_grad(a),
                  [a](Tape &t, const Matrix &g) {
                    const double inv = 1.0 / static_cast<double>(a.rows());
                    Matrix ga = g.replicate(a.rows(), 1) * inv;
                    t.accumulate(a, ga);
                  },
                  "mean_rows");
}

/// Row offsets [o_0 = 0, o_1, ..., o_S = N] delimiting S consecutive row
/// segments of a stacked matrix.
using Segments = std::vector<Index>;

inline void check_segments(const Segments &seg, Index rows, const char *op) {
  if (seg.size() < 2 || seg.front() != 0 || seg.back() != rows)
    throw DimensionError(std::string(op) + ": segments do not cover the rows");
  for (std::size_t s = 1; s < seg.size(); ++s)
    if (seg[s] <= seg[s - 1])
      throw DimensionError(std::string(op) + ": empty or unordered segment");
}

/// Per-segment column means: N x C -> S x C.
inline Var segment_mean(Var a, const Segments &seg) {
  Tape &t = *a.tape();
  check_segments(seg, a.rows(), "segment_mean");
  const Index s_count = static_cast<Index>(seg.size()) - 1;
  Matrix out(s_count, a.cols());
  for (Index s = 0; s < s_count; ++s)
    out.row(s) = a.value().middleRows(seg[s], seg[s + 1] - seg[s]).colwise().mean();
  return t.record(std::move(out), t.needs_grad(a),
                  [a, seg, s_count](Tape &t, const Matrix &g) {
                    Matrix ga(a.rows(), a.cols());
                    for (Index s = 0; s < s_count; ++s) {
                      const Index n = seg[s + 1] - seg[s];
                      ga.middleRows(seg[s], n) = g.row(s).replicate(n, 1) / static_cast<double>(n);
                    }
                    t.accumulate(a, ga);
                  },
                  "segment_mean");
}

/// Block-diagonal product: segment s of the result is blocks[s] * h[segment s].
inline Var segment_matmul(std::span<const Var> blocks, Var h, const Segments &seg) {
  Tape &t = *h.tape();
  check_segments(seg, h.rows(), "segment_matmul");
  if (blocks.size() + 1 != seg.size())
    throw DimensionError("segment_matmul: block count does not match segments");
  bool needs = t.needs_grad(h);
  Matrix out(h.rows(), h.cols());
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    const Var &blk = blocks[s];
    detail::same_tape(blk, h, "segment_matmul");
    const Index n = seg[s + 1] - seg[s];
    if (blk.rows() != n || blk.cols() != n)
      throw DimensionError("segment_matmul: block " + std::to_string(s) + " is " +
                           shape_str(blk.value()) + ", segment has " + std::to_string(n) +
                           " rows");
    out.middleRows(seg[s], n).noalias() = blk.value() * h.value().middleRows(seg[s], n);
    needs = needs || t.needs_grad(blk);
  }
  std::vector<Var> bl(blocks.begin(), blocks.end());
  return t.record(std::move(out), needs,
                  [bl, h, seg](Tape &t, const Matrix &g) {
                    const bool need_h = t.needs_grad(h);
                    Matrix gh = need_h ? Matrix(h.rows(), h.cols()) : Matrix();
                    for (std::size_t s = 0; s < bl.size(); ++s) {
                      const Index n = seg[s + 1] - seg[s];
                      const auto gs = g.middleRows(seg[s], n);
                      if (t.needs_grad(bl[s]))
                        t.accumulate(bl[s], gs * h.value().middleRows(seg[s], n).transpose());
                      if (need_h)
                        gh.middleRows(seg[s], n).noalias() = bl[s].value().transpose() * gs;
                    }
                    if (need_h)
                      t.accumulate(h, gh);
                  },
                  "segment_matmul");
}

inline Var vstack(std::span<const Var> parts) {
  if (parts.empty())
    throw DimensionError("vstack: no parts");
  Tape &t = *parts.front().tape();
  Index rows = 0;
  bool needs = false;
  for (const auto &p : parts) {
    detail::same_tape(parts.front(), p, "vstack");
    if (p.cols() != parts.front().cols())
      throw DimensionError("vstack: column mismatch");
    rows += p.rows();
    needs = needs || t.needs_grad(p);
  }
  Matrix out(rows, parts.front().cols());
  Index r = 0;
  for (const auto &p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out), needs,
                  [ps](Tape &t, const Matrix &g) {
                    Index r = 0;
                    for (const auto &p : ps) {
                      if (t.needs_grad(p))
                        t.accumulate(p, g.middleRows(r, p.rows()));
                      r += p.rows();
                    }
                  },
                  "vstack");
}

inline Var slice_rows(Var a, Index begin, Index count) {
  Tape &t = *a.tape();
  if (begin < 0 || count < 0 || begin + count > a.rows())
    throw DimensionError("slice_rows: range out of bounds");
  return t.record(a.value().middleRows(begin, count), t.needs_grad(a),
                  [a, begin, count](Tape &t, const Matrix &g) {
                    Matrix ga = Matrix::Zero(a.rows(), a.cols());
                    ga.middleRows(begin, count) = g;
                    t.accumulate(a, ga);
                  },
                  "slice_rows");
}

/// Numerically stable binary cross-entropy with logits, averaged over the
/// entries where `mask` is nonzero. `targets` may hold soft probabilities.
inline Var bce_with_logits(Var logits, const Matrix &targets, const Matrix &mask) {
  Tape &t = *logits.tape();
  require_same_shape(logits.value(), targets, "bce_with_logits");
  require_same_shape(logits.value(), mask, "bce_with_logits");
  const double count = (mask.array() != 0.0).count();
  if (count == 0)
    throw DataError("bce_with_logits: every label is missing");
  double total = 0.0;
  const Matrix &z = logits.value();
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.cols(); ++j) {
      if (mask(i, j) == 0.0)
        continue;
      const double v = z(i, j);
      total += std::max(v, 0.0) - v * targets(i, j) + std::log1p(std::exp(-std::abs(v)));
    }
  Matrix out(1, 1);
  out(0, 0) = total / count;
  return t.record(std::move(out), t.needs_grad(logits),
                  [logits, targets, mask, count](Tape &t, const Matrix &g) {
                    const Matrix &z = logits.value();
                    Matrix gz(z.rows(), z.cols());
                    for (Index i = 0; i < z.rows(); ++i)
                      for (Index j = 0; j < z.cols(); ++j)
                        gz(i, j) = mask(i, j) == 0.0
                                       ? 0.0
                                       : (agp::sigmoid(z(i, j)) - targets(i, j)) / count;
                    t.accumulate(logits, gz * g(0, 0));
                  },
                  "bce_with_logits");
}

} // namespace agp::ad

#endif
