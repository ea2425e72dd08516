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


#ifndef AGP_SYNTHETIC_HPP
#define AGP_SYNTHETIC_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "agp/graph.hpp"
#include "agp/rng.hpp"

namespace agp {

enum class TopologySignal { triangle_motif, two_community };

/// How labels relate to the two latent signals of a generated graph: the
/// sign of the feature-mean offset and the presence of the motif.
enum class LabelRule {
  feature_only,
  topology_only,
  joint,     // label = positive offset AND motif present
  multitask, // two tasks: [positive offset, motif present]
};

struct SyntheticSpec {
  std::size_t num_graphs = 500;
  Index nodes_min = 8;
  Index nodes_max = 16;
  Index feature_dim = 8;
  double edge_prob = 0.15;
  double feature_signal = 0.5; // per-entry class-mean offset
  double feature_noise = 1.0;  // per-entry standard deviation
  TopologySignal topology_signal = TopologySignal::triangle_motif;
  LabelRule label_rule = LabelRule::joint;
  Index motif_copies = 1; // triangles planted in motif graphs
  std::string name = "synthetic";
};

inline Index motif_min_nodes(TopologySignal s) {
  return s == TopologySignal::triangle_motif ? 3 : 4;
}

inline void validate(const SyntheticSpec &s) {
  if (s.nodes_min < 3 || s.nodes_max < s.nodes_min)
    throw ConfigError("synthetic: need 3 <= nodes_min <= nodes_max");
  if (!(s.edge_prob > 0.0 && s.edge_prob < 1.0))
    throw ConfigError("synthetic: edge_prob must lie in (0, 1)");
  if (s.feature_dim < 1)
    throw ConfigError("synthetic: feature_dim must be >= 1");
  if (s.feature_noise < 0.0 || s.motif_copies < 1)
    throw ConfigError("synthetic: bad noise or motif count");
  if (s.nodes_max < motif_min_nodes(s.topology_signal))
    throw ConfigError("synthetic: motif needs " +
                      std::to_string(motif_min_nodes(s.topology_signal)) +
                      " nodes but nodes_max is " + std::to_string(s.nodes_max));
}

namespace detail {

inline bool share_neighbor(const Matrix &a, Index i, Index j) {
  return (a.row(i).array() * a.row(j).array()).maxCoeff() > 0.0;
}

inline void connect(Matrix &a, Index i, Index j) {
  a(i, j) = 1.0;
  a(j, i) = 1.0;
}

/// Random recursive tree plus extra edges that never close a triangle.
inline Matrix triangle_free_graph(Index n, double p, Rng &rng) {
  Matrix a = Matrix::Zero(n, n);
  for (Index k = 1; k < n; ++k)
    connect(a, k, static_cast<Index>(rng.below(static_cast<std::uint64_t>(k))));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const bool draw = rng.bernoulli(p);
      if (draw && a(i, j) == 0.0 && !share_neighbor(a, i, j))
        connect(a, i, j);
    }
  return a;
}

inline void plant_triangle(Matrix &a, Rng &rng) {
  const Index n = a.rows();
  std::vector<Index> nodes(static_cast<std::size_t>(n));
  std::iota(nodes.begin(), nodes.end(), 0);
  rng.shuffle(nodes.begin(), nodes.end());
  connect(a, nodes[0], nodes[1]);
  connect(a, nodes[1], nodes[2]);
  connect(a, nodes[0], nodes[2]);
}

/// Connected graph; with `split` it is two dense halves joined by one bridge.
inline Matrix community_graph(Index n, double p, bool split, Rng &rng) {
  if (!split)
    return triangle_free_graph(n, p, rng);
  Matrix a = Matrix::Zero(n, n);
  const Index half = n / 2;
  const double p_in = std::min(0.9, 4.0 * p);
  auto fill = [&](Index lo, Index hi) {
    for (Index k = lo + 1; k < hi; ++k)
      connect(a, k, lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(k - lo))));
    for (Index i = lo; i < hi; ++i)
      for (Index j = i + 1; j < hi; ++j)
        if (rng.bernoulli(p_in))
          connect(a, i, j);
  };
  fill(0, half);
  fill(half, n);
  connect(a, static_cast<Index>(rng.below(static_cast<std::uint64_t>(half))),
          half + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - half))));
  return a;
}

/// Exactly balanced 0/1 assignment in random order.
inline std::vector<int> balanced_bits(std::size_t n, Rng &rng) {
  std::vector<int> bits(n, 0);
  std::fill(bits.begin(), bits.begin() + static_cast<std::ptrdiff_t>(n / 2), 1);
  rng.shuffle(bits.begin(), bits.end());
  return bits;
}

} // namespace detail

/// Deterministic synthetic graph-classification dataset.
inline Dataset generate_synthetic(const SyntheticSpec &spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(derive_seed(seed, 0x51a7));
  const bool multi = spec.label_rule == LabelRule::multitask;
  Dataset d{{}, spec.feature_dim, multi ? 2 : 1, spec.name};
  const std::size_t n = spec.num_graphs;
  const auto labels = detail::balanced_bits(n, rng);
  const auto second = detail::balanced_bits(n, rng);
  d.graphs.reserve(n);
  for (std::size_t gi = 0; gi < n; ++gi) {
    bool positive = false, motif = false;
    switch (spec.label_rule) {
    case LabelRule::feature_only:
      positive = labels[gi];
      motif = second[gi];
      break;
    case LabelRule::topology_only:
      motif = labels[gi];
      positive = second[gi];
      break;
    case LabelRule::joint:
      if (labels[gi]) {
        positive = motif = true;
      } else {
        const auto c = rng.below(3);
        positive = c == 0;
        motif = c == 1;
      }
      break;
    case LabelRule::multitask:
      positive = labels[gi];
      motif = second[gi];
      break;
    }
    const Index nodes =
        spec.nodes_min +
        static_cast<Index>(rng.below(static_cast<std::uint64_t>(spec.nodes_max - spec.nodes_min + 1)));
    Matrix a;
    if (spec.topology_signal == TopologySignal::triangle_motif) {
      a = detail::triangle_free_graph(nodes, spec.edge_prob, rng);
      if (motif)
        for (Index c = 0; c < spec.motif_copies; ++c)
          detail::plant_triangle(a, rng);
    } else {
      a = detail::community_graph(std::max<Index>(nodes, 4), spec.edge_prob, motif, rng);
    }
    const Index nn = a.rows();
    Matrix x(nn, spec.feature_dim);
    const double offset = positive ? spec.feature_signal : -spec.feature_signal;
    for (Index i = 0; i < nn; ++i)
      for (Index k = 0; k < spec.feature_dim; ++k)
        x(i, k) = offset + spec.feature_noise * rng.normal();
    Matrix y(1, d.task_count);
    if (multi) {
      y(0, 0) = positive ? 1.0 : 0.0;
      y(0, 1) = motif ? 1.0 : 0.0;
    } else {
      y(0, 0) = labels[gi];
    }
    d.graphs.push_back(Graph{std::move(x), std::move(a), std::move(y),
                             Matrix::Ones(1, d.task_count)});
  }
  return d;
}

} // namespace agp

#endif
