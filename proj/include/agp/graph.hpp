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


#ifndef AGP_GRAPH_HPP
#define AGP_GRAPH_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "agp/matrix.hpp"
#include "agp/rng.hpp"

namespace agp {

/// One labelled graph: node features, symmetric binary adjacency with zero
/// diagonal, and T binary task labels of which some may be missing.
struct Graph {
  Matrix x;    // N x D
  Matrix a;    // N x N
  Matrix y;    // 1 x T, entries 0/1 where labelled
  Matrix mask; // 1 x T, 1 = labelled, 0 = missing

  Index num_nodes() const { return x.rows(); }
  Index feature_dim() const { return x.cols(); }
  Index task_count() const { return y.cols(); }

  bool operator==(const Graph &o) const {
    auto eq = [](const Matrix &p, const Matrix &q) {
      return p.rows() == q.rows() && p.cols() == q.cols() && p == q;
    };
    return eq(x, o.x) && eq(a, o.a) && eq(y, o.y) && eq(mask, o.mask);
  }
};

/// Throws DataError unless `g` satisfies the Graph invariants.
inline void validate(const Graph &g) {
  const Index n = g.num_nodes();
  if (g.a.rows() != n || g.a.cols() != n)
    throw DataError("graph: adjacency is " + shape_str(g.a) + " for " + std::to_string(n) +
                    " nodes");
  for (Index i = 0; i < n; ++i) {
    if (g.a(i, i) != 0.0)
      throw DataError("graph: nonzero diagonal at node " + std::to_string(i));
    for (Index j = 0; j < n; ++j) {
      const double v = g.a(i, j);
      if (v != 0.0 && v != 1.0)
        throw DataError("graph: adjacency entry is not binary");
      if (v != g.a(j, i))
        throw DataError("graph: adjacency is not symmetric");
    }
  }
  require_finite(g.x, "graph features");
  if (g.y.rows() != 1 || g.mask.rows() != 1 || g.y.cols() != g.mask.cols())
    throw DataError("graph: label/mask shape mismatch");
  bool any = false;
  for (Index t = 0; t < g.y.cols(); ++t) {
    if (g.mask(0, t) == 0.0)
      continue;
    any = true;
    if (g.y(0, t) != 0.0 && g.y(0, t) != 1.0)
      throw DataError("graph: label is not 0/1");
  }
  if (!any)
    throw DataError("graph: every label is missing");
}

/// ||A||_0: nonzero adjacency entries, so each undirected edge counts twice.
inline Index adjacency_nnz(const Graph &g) { return count_nonzero(g.a); }

inline Index edge_count(const Graph &g) { return adjacency_nnz(g) / 2; }

struct Dataset {
  std::vector<Graph> graphs;
  Index feature_dim = 0;
  Index task_count = 0;
  std::string name;

  std::size_t size() const { return graphs.size(); }
  bool empty() const { return graphs.empty(); }
  bool operator==(const Dataset &o) const = default;

  Dataset subset(const std::vector<std::size_t> &indices) const {
    Dataset d{{}, feature_dim, task_count, name};
    d.graphs.reserve(indices.size());
    for (auto i : indices)
      d.graphs.push_back(graphs.at(i));
    return d;
  }
};

inline void validate(const Dataset &d) {
  for (std::size_t i = 0; i < d.graphs.size(); ++i) {
    const Graph &g = d.graphs[i];
    if (g.feature_dim() != d.feature_dim || g.task_count() != d.task_count)
      throw DataError("dataset: graph " + std::to_string(i) + " does not match D/T");
    validate(g);
  }
}

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

inline void validate(const SplitRatios &r) {
  if (!(r.train > 0.0 && r.val > 0.0 && r.test > 0.0))
    throw ConfigError("split: every ratio must be positive");
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ConfigError("split: ratios must sum to 1");
}

struct DatasetSplit {
  Dataset train, val, test;
};

/// Seeded random split. Validation and test sizes are floored; the
/// remainder goes to train.
inline DatasetSplit split(const Dataset &d, SplitRatios r, std::uint64_t seed) {
  if (d.empty())
    throw DataError("split: empty dataset");
  validate(r);
  const std::size_t n = d.size();
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.val));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.test));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5b117));
  rng.shuffle(order.begin(), order.end());
  const std::size_t n_train = n - n_val - n_test;
  auto take = [&](std::size_t from, std::size_t count) {
    return std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(from),
                                    order.begin() + static_cast<std::ptrdiff_t>(from + count));
  };
  return {d.subset(take(0, n_train)), d.subset(take(n_train, n_val)),
          d.subset(take(n_train + n_val, n_test))};
}

/// Builds a graph from an undirected edge list. Self-loops are dropped and
/// repeated edges merged.
inline Graph make_graph(Matrix x, const std::vector<std::pair<Index, Index>> &edges, Matrix y,
                        Matrix mask) {
  const Index n = x.rows();
  Graph g{std::move(x), Matrix::Zero(n, n), std::move(y), std::move(mask)};
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw DataError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                      ") out of range for " + std::to_string(n) + " nodes");
    if (i == j)
      continue;
    g.a(i, j) = 1.0;
    g.a(j, i) = 1.0;
  }
  return g;
}

inline std::vector<std::pair<Index, Index>> edge_list(const Graph &g) {
  std::vector<std::pair<Index, Index>> out;
  for (Index i = 0; i < g.num_nodes(); ++i)
    for (Index j = i + 1; j < g.num_nodes(); ++j)
      if (g.a(i, j) != 0.0)
        out.emplace_back(i, j);
  return out;
}

} // namespace agp

#endif
