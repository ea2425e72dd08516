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


#ifndef AGP_TESTS_HELPERS_HPP
#define AGP_TESTS_HELPERS_HPP

#include "agp/model.hpp"
#include "agp/prompt.hpp"
#include "agp/rng.hpp"
#include "agp/synthetic.hpp"

namespace agp::testing {

inline Matrix random_matrix(Index r, Index c, Rng &rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Matrix random_adjacency(Index n, double p, Rng &rng) {
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.bernoulli(p))
        a(i, j) = a(j, i) = 1.0;
  return a;
}

inline Graph random_graph(Index n, Index d, Index tasks, Rng &rng, double p = 0.4) {
  Matrix y(1, tasks);
  for (Index t = 0; t < tasks; ++t)
    y(0, t) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return Graph{random_matrix(n, d, rng), random_adjacency(n, p, rng), y,
               Matrix::Ones(1, tasks)};
}

/// Small full-mode model with an agp prompt stack whose up-projection is
/// randomized, so prompts are active.
inline Model small_model(Index d, Index hidden, Index layers, Index tasks, std::uint64_t seed,
                         PromptScheme scheme = PromptScheme::agp, Index bottleneck = 3,
                         BackboneMode mode = BackboneMode::full) {
  BackboneConfig c;
  c.input_dim = d;
  c.hidden_dim = hidden;
  c.num_layers = layers;
  c.task_count = tasks;
  c.mode = mode;
  Model m;
  m.backbone = init_backbone(c, seed);
  m.prompts = init_prompt_stack({scheme, bottleneck}, m.backbone.config, seed + 1);
  Rng rng(seed + 2);
  for (auto &p : m.prompts.layers) {
    p.w_up = random_matrix(p.w_up.rows(), p.w_up.cols(), rng, -0.5, 0.5);
    p.norm.running_mean = random_matrix(1, p.norm.running_mean.cols(), rng, -0.2, 0.2);
    p.norm.running_var = random_matrix(1, p.norm.running_var.cols(), rng, 0.5, 1.5);
  }
  for (auto &l : m.backbone.layers)
    if (mode == BackboneMode::full) {
      l.norm.running_mean = random_matrix(1, hidden, rng, -0.2, 0.2);
      l.norm.running_var = random_matrix(1, hidden, rng, 0.5, 1.5);
    }
  if (scheme == PromptScheme::gpf)
    m.prompts.gpf = random_matrix(1, d, rng, -0.3, 0.3);
  return m;
}

inline SyntheticSpec tiny_spec(std::size_t graphs = 60, LabelRule rule = LabelRule::joint) {
  SyntheticSpec s;
  s.num_graphs = graphs;
  s.nodes_min = 5;
  s.nodes_max = 9;
  s.feature_dim = 4;
  s.edge_prob = 0.25;
  s.feature_signal = 1.0;
  s.label_rule = rule;
  return s;
}

} // namespace agp::testing

#endif
