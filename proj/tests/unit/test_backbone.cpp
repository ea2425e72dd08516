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


#include <gtest/gtest.h>

#include <numeric>

#include "agp/backbone.hpp"
#include "agp/model.hpp"
#include "helpers.hpp"
#include "oracles/oracles.hpp"

using namespace agp;
using agp::testing::random_graph;
using agp::testing::random_matrix;
using agp::testing::small_model;

namespace {

Matrix layer_value(const Matrix &h, const Matrix &a, double eps, const BackboneParams &p,
                   std::size_t l) {
  Tape t;
  const BackboneVars v = bind(t, p, false, false);
  const Var adj = t.constant(a);
  return layer_forward(t.constant(h), std::span(&adj, 1), {0, h.rows()}, eps, v.layers[l],
                       p.layers[l], p.config.mode, NormMode::eval)
      .value();
}

Matrix eval_norm(const Matrix &z, const BatchNormState &s) {
  Matrix out(z.rows(), z.cols());
  for (Index r = 0; r < z.rows(); ++r)
    for (Index c = 0; c < z.cols(); ++c)
      out(r, c) = (z(r, c) - s.running_mean(0, c)) / std::sqrt(s.running_var(0, c) + s.eps) *
                      s.scale(0, c) +
                  s.shift(0, c);
  return out;
}

Matrix add_bias(Matrix m, const Matrix &b) {
  for (Index r = 0; r < m.rows(); ++r)
    m.row(r) += b.row(0);
  return m;
}

} // namespace

TEST(AugAdjacency, Examples) {
  EXPECT_EQ(aug_adjacency(Matrix::Zero(2, 2), 0.0), Matrix::Identity(2, 2));
  EXPECT_EQ(aug_adjacency(make_matrix({{0, 1}, {1, 0}}), 0.0), make_matrix({{1, 1}, {1, 1}}));
  Rng rng(1);
  const Matrix a = agp::testing::random_adjacency(6, 0.5, rng);
  const Matrix t = aug_adjacency(a, 0.5);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_EQ(t(i, i), 1.5);
    for (Index j = 0; j < 6; ++j)
      if (i != j)
        EXPECT_EQ(t(i, j), a(i, j));
  }
  EXPECT_THROW(aug_adjacency(Matrix::Zero(2, 3), 0.0), DimensionError);
}

TEST(LayerForward, LinearScalarChain) {
  BackboneConfig c;
  c.input_dim = 1;
  c.hidden_dim = 1;
  c.num_layers = 1;
  c.mode = BackboneMode::linear;
  BackboneParams p = init_backbone(c, 1);
  p.layers[0].w1 = make_matrix({{3}});
  EXPECT_EQ(layer_value(make_matrix({{2}}), Matrix::Zero(1, 1), 0.0, p, 0), make_matrix({{6}}));
}

TEST(LayerForward, LinearIdentityWeightGivesAggregation) {
  BackboneConfig c;
  c.input_dim = 3;
  c.hidden_dim = 3;
  c.num_layers = 1;
  c.mode = BackboneMode::linear;
  BackboneParams p = init_backbone(c, 2);
  p.layers[0].w1 = Matrix::Identity(3, 3);
  Rng rng(3);
  const Matrix a = agp::testing::random_adjacency(5, 0.5, rng);
  const Matrix h = random_matrix(5, 3, rng);
  EXPECT_LT(max_abs(layer_value(h, a, 0.3, p, 0) - aug_adjacency(a, 0.3) * h), 1e-14);
}

TEST(LayerForward, FullModeMatchesComposedFormula) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = small_model(4, 6, 2, 1, 10 + trial);
    const auto &p = m.backbone;
    const Matrix a = agp::testing::random_adjacency(7, 0.4, rng);
    const Matrix h = random_matrix(7, 4, rng);
    const auto &L = p.layers[0];
    const Matrix agg = oracle::matmul_loops(aug_adjacency(a, 0.2), h);
    const Matrix z1 = oracle::relu_formula(add_bias(oracle::matmul_loops(agg, L.w1), L.b1));
    const Matrix z2 = add_bias(oracle::matmul_loops(z1, L.w2), L.b2);
    const Matrix expect = oracle::relu_formula(eval_norm(z2, L.norm));
    EXPECT_LT(max_abs(layer_value(h, a, 0.2, p, 0) - expect), 1e-12);
  }
}

TEST(LayerForward, ShapeMismatchThrows) {
  const Model m = small_model(4, 6, 2, 1, 1);
  EXPECT_THROW(layer_value(Matrix::Zero(3, 5), Matrix::Zero(3, 3), 0.0, m.backbone, 0),
               DimensionError);
}

TEST(Encode, ZeroPromptsMatchUnprompted) {
  Rng rng(5);
  for (auto mode : {BackboneMode::full, BackboneMode::linear})
    for (auto scheme : {PromptScheme::agp, PromptScheme::agp_s, PromptScheme::gpf}) {
      Model plain;
      BackboneConfig c;
      c.input_dim = 4;
      c.hidden_dim = 8;
      c.num_layers = 3;
      c.mode = mode;
      plain.backbone = init_backbone(c, 7);
      Model prompted = plain;
      prompted.prompts = init_prompt_stack({scheme, 3}, c, 8);
      for (int trial = 0; trial < 10; ++trial) {
        const Graph g = random_graph(6, 4, 1, rng);
        const Encoding a = encode(g, plain), b = encode(g, prompted);
        EXPECT_EQ(a.embedding, b.embedding);
        EXPECT_EQ(a.logits, b.logits);
        for (std::size_t l = 0; l < a.per_layer.size(); ++l)
          EXPECT_EQ(a.per_layer[l], b.per_layer[l]);
      }
    }
}

TEST(Encode, NoiseEqualsPerturbedGraph) {
  Rng rng(6);
  const Model m = small_model(4, 6, 3, 2, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const Graph g = random_graph(1 + static_cast<Index>(rng.below(8)), 4, 2, rng);
    Noise n{random_matrix(g.num_nodes(), 4, rng), Matrix::Zero(g.num_nodes(), g.num_nodes())};
    const Matrix mask = Matrix::Ones(g.num_nodes(), g.num_nodes()) -
                        Matrix::Identity(g.num_nodes(), g.num_nodes()) - 2.0 * g.a;
    for (Index i = 0; i < g.num_nodes(); ++i)
      for (Index j = i + 1; j < g.num_nodes(); ++j)
        if (rng.bernoulli(0.3))
          n.e_a(i, j) = n.e_a(j, i) = mask(i, j);
    Graph manual = g;
    manual.x += n.e_x;
    manual.a += n.e_a;
    const Encoding a = encode(g, m, &n), b = encode(manual, m);
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.embedding, b.embedding);
  }
}

TEST(Encode, RejectsMismatchedOrNonBinaryNoise) {
  Rng rng(7);
  const Model m = small_model(4, 6, 2, 1, 3);
  const Graph g = random_graph(5, 4, 1, rng);
  Noise bad{Matrix::Zero(4, 4), Matrix::Zero(5, 5)};
  EXPECT_THROW(encode(g, m, &bad), DimensionError);
  Noise half{Matrix::Zero(5, 4), Matrix::Constant(5, 5, 0.5)};
  EXPECT_THROW(encode(g, m, &half), DataError);
}

TEST(Encode, MeanPoolingIsPermutationInvariant) {
  Rng rng(8);
  const Model m = small_model(4, 6, 3, 1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const Graph g = random_graph(7, 4, 1, rng);
    std::vector<Index> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Graph h = g;
    for (Index i = 0; i < 7; ++i) {
      h.x.row(i) = g.x.row(perm[static_cast<std::size_t>(i)]);
      for (Index j = 0; j < 7; ++j)
        h.a(i, j) = g.a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    EXPECT_LT(max_abs(encode(g, m).embedding - encode(h, m).embedding), 1e-10);
  }
}

TEST(Classify, ZeroWeightsGiveZeroLogits) {
  BackboneParams p = small_model(4, 6, 1, 2, 5).backbone;
  for (std::size_t k = 0; k < 3; ++k) {
    p.head.w[k].setZero();
    p.head.b[k].setZero();
  }
  Rng rng(9);
  EXPECT_EQ(classify(random_matrix(1, 6, rng), p), Matrix::Zero(1, 2));
}

TEST(Classify, PassThroughHead) {
  BackboneConfig c;
  c.input_dim = 1;
  c.hidden_dim = 1;
  c.num_layers = 1;
  BackboneParams p = init_backbone(c, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    p.head.w[k] = make_matrix({{1}});
    p.head.b[k] = make_matrix({{0}});
  }
  EXPECT_EQ(classify(make_matrix({{0.75}}), p), make_matrix({{0.75}}));
}

TEST(Classify, MatchesFormula) {
  Rng rng(10);
  const BackboneParams p = small_model(4, 6, 1, 3, 6).backbone;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix e = random_matrix(1, 6, rng);
    Matrix z = oracle::relu_formula(add_bias(oracle::matmul_loops(e, p.head.w[0]), p.head.b[0]));
    z = oracle::relu_formula(add_bias(oracle::matmul_loops(z, p.head.w[1]), p.head.b[1]));
    z = add_bias(oracle::matmul_loops(z, p.head.w[2]), p.head.b[2]);
    EXPECT_LT(max_abs(classify(e, p) - z), 1e-12);
  }
  EXPECT_THROW(classify(Matrix::Zero(1, 5), p), DimensionError);
}

TEST(Backbone, ConfigValidationAndCounts) {
  BackboneConfig c;
  c.num_layers = 0;
  EXPECT_THROW(init_backbone(c, 1), ConfigError);
  c.num_layers = 2;
  c.epsilon_gin = {0.1};
  EXPECT_THROW(init_backbone(c, 1), ConfigError);
  c.epsilon_gin = {};
  c.input_dim = 3;
  c.hidden_dim = 5;
  const BackboneParams p = init_backbone(c, 1);
  // layer 0: 3*5 + 5 + 25 + 5 + 10; layer 1: 25 + 5 + 25 + 5 + 10
  EXPECT_EQ(encoder_parameter_count(p), 60 + 70);
  EXPECT_EQ(head_parameter_count(p.head), (25 + 5) + (25 + 5) + (5 + 1));
  EXPECT_EQ(p.config.epsilon_gin.size(), 2u);
}
