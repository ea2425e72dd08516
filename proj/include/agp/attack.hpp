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


#ifndef AGP_ATTACK_HPP
#define AGP_ATTACK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "agp/model.hpp"

namespace agp {

enum class AttackMode { node, topology, hybrid };

inline const char *to_string(AttackMode m) {
  switch (m) {
  case AttackMode::node:
    return "node";
  case AttackMode::topology:
    return "topology";
  case AttackMode::hybrid:
    return "hybrid";
  }
  return "?";
}

inline AttackMode parse_attack_mode(const std::string &s) {
  if (s == "node")
    return AttackMode::node;
  if (s == "topology")
    return AttackMode::topology;
  if (s == "hybrid")
    return AttackMode::hybrid;
  throw ConfigError("unknown attack mode '" + s + "' (node, topology, hybrid)");
}

/// Attack strength. Node mode ignores `ratio`, topology mode ignores `epsilon`.
struct PerturbationBudget {
  double epsilon = 0.8; // l_inf radius of E_x
  double ratio = 0.4;   // edge budget as a fraction of ||A||_0
  int steps = 10;
  double alpha = 0.01;  // feature step
  double beta = 100.0;  // topology step
  AttackMode mode = AttackMode::hybrid;

  double effective_epsilon() const { return mode == AttackMode::topology ? 0.0 : epsilon; }
  double effective_ratio() const { return mode == AttackMode::node ? 0.0 : ratio; }
};

inline void validate(const PerturbationBudget &b) {
  if (!(b.epsilon >= 0.0) || !(b.ratio >= 0.0 && b.ratio <= 1.0) || b.steps < 0 ||
      !(b.alpha > 0.0) || !(b.beta > 0.0))
    throw ConfigError("budget: need epsilon >= 0, ratio in [0,1], steps >= 0, alpha > 0, beta > 0");
}

/// q = floor(r ||A||_0), counted in directed adjacency entries.
inline Index edge_budget(const Graph &g, double ratio) {
  return static_cast<Index>(std::floor(ratio * static_cast<double>(adjacency_nnz(g))));
}

/// 11^T - I - 2A: +1 where an edge may be inserted, -1 where one may be
/// removed, 0 on the diagonal.
inline Matrix flip_mask(const Matrix &a) {
  if (a.rows() != a.cols())
    throw DimensionError("flip_mask: adjacency must be square");
  const Index n = a.rows();
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double v = a(i, j);
      if (v != 0.0 && v != 1.0)
        throw DataError("flip_mask: adjacency entry is not binary");
      m(i, j) = i == j ? 0.0 : 1.0 - 2.0 * v;
    }
  return m;
}

/// Nearest point of the l_inf ball of radius epsilon.
inline Matrix proj_x(const Matrix &e_x, double epsilon) {
  if (epsilon < 0.0)
    throw ConfigError("proj_x: epsilon must be >= 0");
  return clamp(e_x, -epsilon, epsilon);
}

/// Upper-triangle positions kept by proj_a: the floor(q/2) largest values
/// of b, ties broken towards the smaller (i, j).
inline std::vector<std::pair<Index, Index>> proj_a_kept(const Matrix &b, Index q) {
  if (q < 0)
    throw ConfigError("proj_a: negative budget");
  const Index n = b.rows();
  std::vector<std::pair<Index, Index>> pos;
  pos.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      pos.emplace_back(i, j);
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(q / 2), pos.size());
  // pos is in lexicographic order; a stable sort preserves it among ties.
  std::stable_sort(pos.begin(), pos.end(), [&](const auto &l, const auto &r) {
    return b(l.first, l.second) > b(r.first, r.second);
  });
  pos.resize(keep);
  std::sort(pos.begin(), pos.end());
  return pos;
}

/// l_0 projection of the relaxed flip indicator: keeps the largest entries
/// within the budget q (directed entries), clamps them into [0, 1], and
/// returns a symmetric matrix with zero diagonal.
inline Matrix proj_a(const Matrix &b, Index q) {
  if (b.rows() != b.cols())
    throw DimensionError("proj_a: indicator must be square");
  Matrix out = Matrix::Zero(b.rows(), b.cols());
  for (auto [i, j] : proj_a_kept(b, q)) {
    const double v = std::clamp(b(i, j), 0.0, 1.0);
    out(i, j) = v;
    out(j, i) = v;
  }
  return out;
}

/// Samples B* ~ Bernoulli(b) on the upper triangle, mirrors it, and returns
/// E_a = B* (.) flip_mask(a).
inline Matrix bernoulli_discretize(const Matrix &b, const Matrix &a, Rng &rng) {
  require_same_shape(b, a, "bernoulli_discretize");
  const Matrix mask = flip_mask(a);
  const Index n = b.rows();
  Matrix e_a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double p = b(i, j);
      if (!(p >= 0.0 && p <= 1.0))
        throw NumericError("bernoulli_discretize: probability " + std::to_string(p) +
                           " outside [0,1]");
      if (rng.bernoulli(p)) {
        e_a(i, j) = mask(i, j);
        e_a(j, i) = mask(j, i);
      }
    }
  return e_a;
}

struct AdversarialSample {
  Matrix e_x; // N x D, continuous
  Matrix b;   // N x N relaxed indicator after the last step
  Matrix e_a; // N x N discrete topology noise
  Index edge_budget = 0;

  Noise noise() const { return {e_x, e_a}; }
};

/// Observer for intermediate iterates (k = 1..K) of E_x and B.
using IterateObserver = std::function<void(int step, const Matrix &e_x, const Matrix &b)>;

/// Masked task loss and its gradients at (E_x, B) under the relaxed
/// topology A + B (.) flip_mask(A). Norms run in evaluation mode.
struct AttackGradient {
  double loss = 0.0;
  Matrix d_ex;
  Matrix d_b;
};

inline AttackGradient attack_gradient(const Graph &g, const Model &m, const Matrix &mask,
                                      const Matrix &e_x, const Matrix &b, bool want_features,
                                      bool want_topology) {
  Tape t;
  const ModelVars v = bind(t, m, {});
  const Var ex = want_features ? t.leaf(e_x) : t.constant(e_x);
  const Var bv = want_topology ? t.leaf(b) : t.constant(b);
  const Var x = ad::add(t.constant(g.x), ex);
  const Var adj = ad::add(t.constant(g.a), ad::hadamard(bv, t.constant(mask)));
  const GraphInput in{x, adj};
  const ForwardOutput f = forward(m, v, std::span(&in, 1), {});
  const Var loss = ad::bce_with_logits(f.logits, g.y, g.mask);
  t.backward(loss);
  return {loss.value()(0, 0), t.grad(ex), t.grad(bv)};
}

/// Masked task loss of the model on g perturbed by `noise`.
inline double perturbed_loss(const Graph &g, const Model &m, const Noise *noise = nullptr) {
  Tape t;
  const Matrix logits = encode(g, m, noise).logits;
  return ad::bce_with_logits(t.constant(logits), g.y, g.mask).value()(0, 0);
}

/// Joint projected-gradient attack on node features and topology.
///
/// E_x starts uniform in [-eps, eps] and B at zero. Every step takes a
/// signed-gradient ascent step on E_x and a plain gradient step on B
/// (gradient symmetrized), then projects both back onto their budgets.
/// The final relaxed B is discretized by Bernoulli sampling.
inline AdversarialSample joint_pgd(const Graph &g, const Model &m, const PerturbationBudget &budget,
                                   Rng &rng, const IterateObserver &observe = {}) {
  validate(budget);
  const double eps = budget.effective_epsilon();
  const Index q = edge_budget(g, budget.effective_ratio());
  const Index n = g.num_nodes();
  const Matrix mask = flip_mask(g.a);

  AdversarialSample s;
  s.edge_budget = q;
  s.e_x.resize(n, g.feature_dim());
  for (Index i = 0; i < s.e_x.rows(); ++i)
    for (Index j = 0; j < s.e_x.cols(); ++j)
      s.e_x(i, j) = rng.uniform(-eps, eps);
  s.e_x = proj_x(s.e_x, eps);
  s.b = Matrix::Zero(n, n);

  const bool attack_features = eps > 0.0;
  const bool attack_topology = q >= 2;
  for (int k = 1; k <= budget.steps; ++k) {
    AttackGradient grad;
    try {
      grad = attack_gradient(g, m, mask, s.e_x, s.b, attack_features, attack_topology);
    } catch (const NumericError &e) {
      throw NumericError("attack step " + std::to_string(k) + ": " + e.what());
    }
    if (!std::isfinite(grad.loss))
      throw NumericError("attack step " + std::to_string(k) + ": non-finite loss");
    if (attack_features)
      s.e_x = proj_x(s.e_x + budget.alpha * sign(grad.d_ex), eps);
    if (attack_topology) {
      const Matrix sym = 0.5 * (grad.d_b + grad.d_b.transpose());
      s.b = proj_a(s.b + budget.beta * sym, q);
    }
    if (observe)
      observe(k, s.e_x, s.b);
  }
  s.e_a = bernoulli_discretize(s.b, g.a, rng);
  return s;
}

/// Single-channel PGD: node mode (features only) or topology mode
/// (discrete edge flips only).
inline AdversarialSample restricted_pgd(const Graph &g, const Model &m,
                                        const PerturbationBudget &budget, Rng &rng,
                                        const IterateObserver &observe = {}) {
  if (budget.mode == AttackMode::hybrid)
    throw ConfigError("restricted_pgd: mode must be node or topology");
  return joint_pgd(g, m, budget, rng, observe);
}

/// Dispatches on budget.mode.
inline AdversarialSample run_attack(const Graph &g, const Model &m, const PerturbationBudget &budget,
                                    Rng &rng) {
  return budget.mode == AttackMode::hybrid ? joint_pgd(g, m, budget, rng)
                                           : restricted_pgd(g, m, budget, rng);
}

/// Attack stream for graph `index` under base seed `seed`.
inline Rng attack_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
  return Rng(derive_seed(seed, 0xa77ac, index, salt));
}

} // namespace agp

#endif
