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


#ifndef AGP_TAPE_HPP
#define AGP_TAPE_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agp/matrix.hpp"

namespace agp {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
public:
  Var() = default;

  Tape *tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Matrix &value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

private:
  friend class Tape;
  Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape over matrix values.
///
/// Every op appends a node holding its forward value and a closure that
/// pushes the node's adjoint to its parents. `backward` walks the nodes in
/// reverse recording order, which is a valid topological order. Nodes that
/// do not depend on any leaf carry no adjoint and are skipped.
class Tape {
public:
  using Backward = std::function<void(Tape &, const Matrix &grad)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Differentiable input.
  Var leaf(Matrix value) { return push(std::move(value), true, {}, "leaf"); }

  /// Input that never receives a gradient.
  Var constant(Matrix value) { return push(std::move(value), false, {}, "constant"); }

  const Matrix &value(Var v) const { return node(v).value; }
  bool needs_grad(Var v) const { return node(v).needs_grad; }

  /// Adjoint of `v` after `backward`; zeros of v's shape if nothing flowed in.
  Matrix grad(Var v) const {
    const Node &n = node(v);
    if (n.grad.size() == 0 && n.value.size() != 0)
      return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Records an op result. `needs_grad` should be the OR over the parents.
  Var record(Matrix value, bool needs_grad, Backward backward, const char *op) {
    return push(std::move(value), needs_grad, std::move(backward), op);
  }

  /// Adds `g` into the adjoint of `v` (no-op for constants).
  void accumulate(Var v, const Matrix &g) {
    Node &n = node(v);
    if (!n.needs_grad)
      return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  void backward(Var root) {
    const Node &r = node(root);
    if (r.value.rows() != 1 || r.value.cols() != 1)
      throw DimensionError("backward: target must be scalar (1x1), got " + shape_str(r.value));
    for (auto &n : nodes_)
      n.grad.resize(0, 0);
    nodes_[root.id()].grad = Matrix::Ones(1, 1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node &n = nodes_[i];
      if (!n.needs_grad || !n.backward || n.grad.size() == 0)
        continue;
      require_finite(n.grad, n.op);
      // Intermediate adjoints are consumed; only leaves keep theirs.
      const Matrix g = std::move(n.grad);
      n.grad.resize(0, 0);
      n.backward(*this, g);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
    const char *op = "";
  };

  Var push(Matrix value, bool needs_grad, Backward backward, const char *op) {
    require_finite(value, op);
    nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, std::move(backward), op});
    return Var(this, nodes_.size() - 1);
  }

  const Node &node(Var v) const {
    if (v.tape() != this || v.id() >= nodes_.size())
      throw Error("tape: variable does not belong to this tape");
    return nodes_[v.id()];
  }
  Node &node(Var v) {
    if (v.tape() != this || v.id() >= nodes_.size())
      throw Error("tape: variable does not belong to this tape");
    return nodes_[v.id()];
  }

  std::vector<Node> nodes_;
};

inline const Matrix &Var::value() const { return tape_->value(*this); }

struct GradientResult {
  double value = 0.0;
  std::vector<Matrix> grads;
};

/// Binds `leaves` on a fresh tape, builds the scalar expression with
/// `expr(tape, leaf_vars)`, and returns its value with one gradient per leaf.
/// Leaves that the expression ignores get zero gradients.
template <class Expr>
GradientResult evaluate_with_gradients(Expr &&expr, std::span<const Matrix> leaves) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(leaves.size());
  for (const auto &m : leaves)
    vars.push_back(tape.leaf(m));
  Var out = expr(tape, std::span<const Var>(vars));
  if (!out.valid() || out.tape() != &tape)
    throw Error("evaluate_with_gradients: expression result is not bound to the tape");
  tape.backward(out);
  GradientResult res;
  res.value = out.value()(0, 0);
  for (const auto &v : vars)
    res.grads.push_back(tape.grad(v));
  return res;
}

} // namespace agp

#endif
