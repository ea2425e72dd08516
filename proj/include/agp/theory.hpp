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


#ifndef AGP_THEORY_HPP
#define AGP_THEORY_HPP

#include <array>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "agp/attack.hpp"

namespace agp {

/// A graph observed under noise: the corrupted graph (x_hat, a_hat) and the
/// noise (e_x, e_a) such that (x_hat - e_x, a_hat - e_a) is the clean graph.
struct NoiseScenario {
  Matrix x_hat;
  Matrix a_hat;
  Matrix e_x;
  Matrix e_a;
};

/// Ratio of extreme singular values; infinity for a singular matrix.
inline double condition_number(const Matrix &m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw DimensionError("condition_number: need a non-empty square matrix");
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto &s = svd.singularValues();
  const double lo = s(s.size() - 1);
  return lo == 0.0 ? std::numeric_limits<double>::infinity() : s(0) / lo;
}

inline constexpr double kMaxPromptCondition = 1e12;

namespace detail {

/// Solves a_tilde * Z = rhs, refusing ill-conditioned systems.
inline Matrix solve_augmented(const Matrix &a_tilde, const Matrix &rhs, const char *op) {
  if (a_tilde.rows() != a_tilde.cols() || a_tilde.rows() != rhs.rows())
    throw DimensionError(std::string(op) + ": A~ is " + shape_str(a_tilde) + ", rhs is " +
                         shape_str(rhs));
  const double cond = condition_number(a_tilde);
  if (!(cond <= kMaxPromptCondition))
    throw NumericError(std::string(op) + ": A~ is singular or ill-conditioned (cond " +
                       std::to_string(cond) + ")");
  return a_tilde.fullPivLu().solve(rhs);
}

} // namespace detail

/// Input-layer prompt that cancels both noises in one GIN layer:
/// P0 = A~^{-1} E_a (E_x - X_hat) - E_x.
inline Matrix optimal_input_prompt(const Matrix &a_tilde, const Matrix &e_a, const Matrix &e_x,
                                   const Matrix &x_hat) {
  require_same_shape(e_x, x_hat, "optimal_input_prompt");
  const Matrix rhs = matmul(e_a, e_x - x_hat);
  return detail::solve_augmented(a_tilde, rhs, "optimal_input_prompt") - e_x;
}

/// Hidden-layer prompt that cancels topology noise: P = -A~^{-1} E_a X_hat_l.
inline Matrix optimal_hidden_prompt(const Matrix &a_tilde, const Matrix &e_a,
                                    const Matrix &x_hat_l) {
  return -detail::solve_augmented(a_tilde, matmul(e_a, x_hat_l), "optimal_hidden_prompt");
}

struct TheoremCheck {
  double deviation = 0.0;           // max |prompted corrupted - clean| over final node features
  std::vector<double> conditions;   // cond(A~_l) per layer
  std::vector<Matrix> prompts;      // constructed P^(l)
};

namespace detail {

inline Matrix linear_forward(const BackboneParams &p, const Matrix &x, const Matrix &a,
                             const PromptHook &hook = {}) {
  Tape t;
  const BackboneVars v = bind(t, p, false, false);
  const Var adj = t.constant(a);
  const ad::Segments seg{0, x.rows()};
  return encode_stack(t.constant(x), std::span(&adj, 1), seg, p, v, NormMode::eval, hook)
      .nodes.value();
}

} // namespace detail

/// Builds the closed-form prompt stack layer by layer on the prompted
/// corrupted forward pass (each P^(l) uses that pass's own layer-l input)
/// and compares the result with the clean forward pass of the same
/// linear backbone. `input_only` applies the single input-layer prompt
/// -E_x and no hidden prompts.
inline TheoremCheck verify_theorem1(const NoiseScenario &s, const BackboneParams &backbone,
                                    bool input_only = false) {
  if (backbone.config.mode != BackboneMode::linear)
    throw ConfigError("verify_theorem1: the closed-form prompts need a linear backbone");
  require_same_shape(s.x_hat, s.e_x, "verify_theorem1");
  require_same_shape(s.a_hat, s.e_a, "verify_theorem1");
  TheoremCheck out;
  const Index L = backbone.config.num_layers;
  for (Index l = 0; l < L; ++l)
    out.conditions.push_back(
        condition_number(aug_adjacency(s.a_hat, backbone.config.epsilon(static_cast<std::size_t>(l)))));

  Tape scratch;
  PromptHook hook = [&](std::size_t l, Var h) -> std::optional<Var> {
    const Matrix a_tilde = aug_adjacency(s.a_hat, backbone.config.epsilon(l));
    Matrix p;
    if (input_only)
      p = l == 0 ? Matrix(-s.e_x) : Matrix::Zero(h.rows(), h.cols());
    else if (l == 0)
      p = optimal_input_prompt(a_tilde, s.e_a, s.e_x, h.value());
    else
      p = optimal_hidden_prompt(a_tilde, s.e_a, h.value());
    out.prompts.push_back(p);
    return h.tape()->constant(std::move(p));
  };
  const Matrix prompted = detail::linear_forward(backbone, s.x_hat, s.a_hat, hook);
  const Matrix clean = detail::linear_forward(backbone, s.x_hat - s.e_x, s.a_hat - s.e_a);
  out.deviation = max_abs(prompted - clean);
  return out;
}

struct ScenarioOptions {
  Index min_nodes = 3;
  Index max_nodes = 12;
  Index feature_dim = 4;
  Index hidden_dim = 6;
  Index min_layers = 1;
  Index max_layers = 5;
  double edge_prob = 0.3;
  double flip_prob = 0.2;
  double feature_noise = 0.5;
  bool topology_noise = true;
  double max_condition = 1e6;
};

struct TheoremInstance {
  NoiseScenario scenario;
  BackboneParams backbone;
  int rejections = 0; // draws discarded for cond(A~) > max_condition
};

/// Random linear-backbone instance with well-conditioned A~ at every layer.
inline TheoremInstance sample_theorem_instance(Rng &rng, const ScenarioOptions &o) {
  TheoremInstance inst;
  for (;;) {
    const Index n =
        o.min_nodes + static_cast<Index>(rng.below(static_cast<std::uint64_t>(o.max_nodes - o.min_nodes + 1)));
    const Index layers =
        o.min_layers + static_cast<Index>(rng.below(static_cast<std::uint64_t>(o.max_layers - o.min_layers + 1)));
    Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        a(i, j) = a(j, i) = rng.bernoulli(o.edge_prob) ? 1.0 : 0.0;
        b(i, j) = b(j, i) = (o.topology_noise && rng.bernoulli(o.flip_prob)) ? 1.0 : 0.0;
      }
    const Matrix e_a = b.cwiseProduct(flip_mask(a));
    Matrix x(n, o.feature_dim), e_x(n, o.feature_dim);
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < o.feature_dim; ++k) {
        x(i, k) = rng.uniform(-1.0, 1.0);
        e_x(i, k) = rng.uniform(-o.feature_noise, o.feature_noise);
      }
    BackboneConfig cfg;
    cfg.input_dim = o.feature_dim;
    cfg.hidden_dim = o.hidden_dim;
    cfg.num_layers = layers;
    cfg.mode = BackboneMode::linear;
    for (Index l = 0; l < layers; ++l)
      cfg.epsilon_gin.push_back(rng.uniform(-0.5, 0.5));
    BackboneParams p = init_backbone(cfg, rng.next_u64());
    // Keep activations O(1) through the layers: scale Theta by the
    // inverse of the largest augmented row sum.
    const Matrix a_hat = a + e_a;
    bool ok = true;
    for (Index l = 0; l < layers; ++l) {
      const Matrix at = aug_adjacency(a_hat, cfg.epsilon(static_cast<std::size_t>(l)));
      if (!(condition_number(at) <= o.max_condition)) {
        ok = false;
        break;
      }
      p.layers[static_cast<std::size_t>(l)].w1 /= std::max(1.0, at.cwiseAbs().rowwise().sum().maxCoeff());
    }
    if (!ok) {
      ++inst.rejections;
      continue;
    }
    inst.scenario = NoiseScenario{x + e_x, a_hat, e_x, e_a};
    inst.backbone = std::move(p);
    return inst;
  }
}

/// One panel of the four-node aggregation illustration.
struct AggregationCase {
  std::string name;
  Matrix prompt;        // 1 x D prompt on the target node
  Matrix clean;         // aggregate at the target on the clean graph
  Matrix corrupted;     // aggregate under noise, no prompt
  Matrix restored;      // aggregate under noise with the prompt
  double deviation = 0.0;
};

/// Sum aggregation of (A + I)(X + P) at node `target`.
inline Matrix aggregate_at(const Matrix &a, const Matrix &x, const Matrix &prompts, Index target) {
  return matmul(aug_adjacency(a, 0.0), x + prompts).row(target);
}

/// Target node 4 (index 3) with neighbours 1, 2, 3. Features and noise are
/// small dyadic values, so cancellation is exact in floating point.
inline std::array<AggregationCase, 3> figure4_cases() {
  const Index target = 3;
  Matrix a = Matrix::Zero(4, 4);
  for (Index j = 0; j < 3; ++j)
    a(target, j) = a(j, target) = 1.0;
  const Matrix x = make_matrix({{1.0, -2.0}, {0.5, 3.0}, {-1.5, 0.25}, {2.0, 1.0}});
  const Matrix e_x1 = make_matrix({{0.75, -1.25}});
  const Matrix x3 = x.row(2);

  Matrix noisy_x = x;
  noisy_x.row(0) += e_x1.row(0);
  Matrix cut_a = a;
  cut_a(target, 2) = cut_a(2, target) = 0.0;

  auto run = [&](std::string name, const Matrix &ca, const Matrix &cx, const Matrix &p4) {
    AggregationCase c;
    c.name = std::move(name);
    c.prompt = p4;
    Matrix prompts = Matrix::Zero(4, 2);
    prompts.row(target) = p4.row(0);
    const Matrix none = Matrix::Zero(4, 2);
    c.clean = aggregate_at(a, x, none, target);
    c.corrupted = aggregate_at(ca, cx, none, target);
    c.restored = aggregate_at(ca, cx, prompts, target);
    c.deviation = max_abs(c.restored - c.clean);
    return c;
  };
  return {run("node_noise", a, noisy_x, -e_x1), run("edge_cut", cut_a, x, x3),
          run("hybrid", cut_a, noisy_x, Matrix(x3 - e_x1))};
}

} // namespace agp

#endif
