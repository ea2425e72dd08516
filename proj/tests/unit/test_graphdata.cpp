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

#include <set>
#include <sstream>

#include "agp/graph_io.hpp"
#include "agp/synthetic.hpp"
#include "helpers.hpp"
#include "oracles/oracles.hpp"

using namespace agp;

namespace {

Dataset parse(const std::string &text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

std::size_t parse_error_line(const std::string &text) {
  try {
    parse(text);
  } catch (const ParseError &e) {
    return e.line();
  }
  return 0;
}

} // namespace

TEST(LoadDataset, SingleEdgeGraph) {
  const Dataset d = parse(R"({"n":2,"edges":[[0,1]],"x":[[0.5],[-1]],"y":[1]})");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.feature_dim, 1);
  EXPECT_EQ(d.task_count, 1);
  EXPECT_EQ(d.graphs[0].a, make_matrix({{0, 1}, {1, 0}}));
  EXPECT_EQ(d.graphs[0].y, make_matrix({{1}}));
}

TEST(LoadDataset, NullLabelIsMasked) {
  const Dataset d = parse("{\"D\":1,\"T\":2,\"name\":\"t\"}\n"
                          R"({"n":1,"edges":[],"x":[[0]],"y":[null,1]})");
  EXPECT_EQ(d.graphs[0].mask, make_matrix({{0, 1}}));
  EXPECT_EQ(d.graphs[0].y(0, 1), 1.0);
}

TEST(LoadDataset, SymmetrizesAndDropsSelfLoops) {
  const Dataset d = parse(R"({"n":3,"edges":[[0,1],[1,0],[2,2]],"x":[[0],[0],[0]],"y":[0]})");
  EXPECT_EQ(d.graphs[0].a, make_matrix({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}}));
}

TEST(LoadDataset, ErrorsCarryLineNumbers) {
  const std::string header = "{\"D\":2,\"T\":1}\n";
  const std::string good = R"({"n":1,"edges":[],"x":[[0,1]],"y":[1]})";
  EXPECT_EQ(parse_error_line(header + good + "\n" + R"({"n":1,"edges":[],"x":[[0]],"y":[1]})"), 3u);
  EXPECT_EQ(parse_error_line(header + "not json"), 2u);
  EXPECT_EQ(parse_error_line(header + R"({"n":2,"edges":[[0,5]],"x":[[0,1],[1,1]],"y":[1]})"), 2u);
  EXPECT_EQ(parse_error_line(header + R"({"n":1,"edges":[],"x":[[0,1]],"y":[null]})"), 2u);
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(load_dataset("/nonexistent/file.jsonl"), DataError);
}

TEST(LoadDataset, RoundTripOfHundredGraphs) {
  SyntheticSpec s = agp::testing::tiny_spec(100, LabelRule::multitask);
  Dataset d = generate_synthetic(s, 11);
  d.graphs[3].mask(0, 1) = 0.0;
  d.graphs[3].y(0, 1) = 0.0;
  const auto path = std::filesystem::temp_directory_path() / "agp_roundtrip.jsonl";
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  EXPECT_TRUE(back == d);
  EXPECT_EQ(dataset_hash(back), dataset_hash(d));
  std::filesystem::remove(path);
}

TEST(GenerateSynthetic, EmptySpecGivesEmptyDataset) {
  SyntheticSpec s = agp::testing::tiny_spec(0);
  EXPECT_TRUE(generate_synthetic(s, 1).empty());
}

TEST(GenerateSynthetic, InfeasibleSpecThrows) {
  SyntheticSpec s = agp::testing::tiny_spec();
  s.nodes_min = 2;
  EXPECT_THROW(generate_synthetic(s, 1), ConfigError);
  s = agp::testing::tiny_spec();
  s.edge_prob = 1.0;
  EXPECT_THROW(generate_synthetic(s, 1), ConfigError);
  s = agp::testing::tiny_spec();
  s.topology_signal = TopologySignal::two_community;
  s.nodes_min = s.nodes_max = 3;
  EXPECT_THROW(generate_synthetic(s, 1), ConfigError);
}

TEST(GenerateSynthetic, TopologyOnlyLabelsMatchTriangles) {
  SyntheticSpec s;
  s.label_rule = LabelRule::topology_only;
  const Dataset d = generate_synthetic(s, 5);
  ASSERT_EQ(d.size(), 500u);
  for (const auto &g : d.graphs)
    EXPECT_EQ(oracle::count_triangles(g.a) > 0, g.y(0, 0) == 1.0);
}

TEST(GenerateSynthetic, JointLabelRequiresBothSignals) {
  SyntheticSpec s;
  s.feature_noise = 0.0;
  const Dataset d = generate_synthetic(s, 6);
  for (const auto &g : d.graphs) {
    const bool positive = g.x.mean() > 0.0;
    const bool motif = oracle::count_triangles(g.a) > 0;
    EXPECT_EQ(g.y(0, 0) == 1.0, positive && motif);
  }
}

TEST(GenerateSynthetic, BalancedAndDeterministic) {
  for (auto rule : {LabelRule::feature_only, LabelRule::topology_only, LabelRule::joint}) {
    SyntheticSpec s;
    s.label_rule = rule;
    const Dataset d = generate_synthetic(s, 7);
    double pos = 0.0;
    for (const auto &g : d.graphs)
      pos += g.y(0, 0);
    EXPECT_NEAR(pos / static_cast<double>(d.size()), 0.5, 0.05);
    EXPECT_EQ(serialize_dataset(d), serialize_dataset(generate_synthetic(s, 7)));
  }
  SyntheticSpec s;
  EXPECT_NE(serialize_dataset(generate_synthetic(s, 1)), serialize_dataset(generate_synthetic(s, 2)));
}

TEST(GenerateSynthetic, CommunityGraphsAreValid) {
  SyntheticSpec s = agp::testing::tiny_spec(50, LabelRule::topology_only);
  s.topology_signal = TopologySignal::two_community;
  const Dataset d = generate_synthetic(s, 8);
  EXPECT_NO_THROW(validate(d));
}

TEST(Adjacency, SymmetricZeroDiagonalOverManyGraphs) {
  SyntheticSpec s = agp::testing::tiny_spec(1000);
  const Dataset d = generate_synthetic(s, 9);
  for (const auto &g : d.graphs) {
    EXPECT_EQ(g.a, g.a.transpose());
    EXPECT_EQ(g.a.diagonal().cwiseAbs().sum(), 0.0);
    EXPECT_TRUE(((g.a.array() == 0.0) || (g.a.array() == 1.0)).all());
  }
}

TEST(AdjacencyNnz, Examples) {
  const auto g0 = make_graph(Matrix::Zero(3, 1), {}, Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  EXPECT_EQ(adjacency_nnz(g0), 0);
  const auto g1 = make_graph(Matrix::Zero(3, 1), {{0, 1}}, Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  EXPECT_EQ(adjacency_nnz(g1), 2);
  const auto g3 = make_graph(Matrix::Zero(3, 1), {{0, 1}, {1, 2}, {0, 2}}, Matrix::Ones(1, 1),
                             Matrix::Ones(1, 1));
  EXPECT_EQ(adjacency_nnz(g3), 6);
  EXPECT_EQ(edge_count(g3), 3);
}

TEST(Split, SizesFollowFloorThenRemainder) {
  SyntheticSpec s = agp::testing::tiny_spec(100);
  auto p = split(generate_synthetic(s, 1), {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(p.train.size(), 80u);
  EXPECT_EQ(p.val.size(), 10u);
  EXPECT_EQ(p.test.size(), 10u);
  s.num_graphs = 103;
  p = split(generate_synthetic(s, 1), {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(p.train.size(), 83u);
  EXPECT_EQ(p.val.size(), 10u);
  EXPECT_EQ(p.test.size(), 10u);
}

TEST(Split, RejectsBadRatiosAndEmptyData) {
  const Dataset d = generate_synthetic(agp::testing::tiny_spec(10), 1);
  EXPECT_THROW(split(d, {1.0, 0.0, 0.0}, 1), ConfigError);
  EXPECT_THROW(split(d, {0.5, 0.2, 0.2}, 1), ConfigError);
  EXPECT_THROW(split(Dataset{}, {0.8, 0.1, 0.1}, 1), DataError);
}

TEST(Split, DisjointExhaustiveAndStable) {
  SyntheticSpec s = agp::testing::tiny_spec(57);
  s.feature_noise = 1.0;
  const Dataset d = generate_synthetic(s, 4);
  const auto p = split(d, {0.6, 0.2, 0.2}, 9);
  std::multiset<std::string> all, parts;
  for (const auto &g : d.graphs)
    all.insert(graph_to_json(g).dump());
  for (const auto *part : {&p.train, &p.val, &p.test})
    for (const auto &g : part->graphs)
      parts.insert(graph_to_json(g).dump());
  EXPECT_EQ(all, parts);
  const auto q = split(d, {0.6, 0.2, 0.2}, 9);
  EXPECT_TRUE(q.train == p.train && q.val == p.val && q.test == p.test);
}
