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

#include <filesystem>
#include <set>

#include "agp/checkpoint.hpp"
#include "agp/config.hpp"
#include "helpers.hpp"

using namespace agp;

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(validate(c));
  const std::string text = serialize_config(c);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(Config, OverridesRoundTrip) {
  const std::string in = "# tuning\n"
                         "seed = 17\n"
                         "  train.mode = agp_s   # trailing comment\n"
                         "train.loss_mask = adv,consis\n"
                         "train.gamma = 0.125\n"
                         "attack.mode = topology\n"
                         "attack.epsilon = 0.2\n"
                         "backbone.mode = linear\n"
                         "backbone.epsilon_gin = 0.1,-0.25,0\n"
                         "data.topology = two_community\n"
                         "data.label_rule = topology_only\n"
                         "\n"
                         "out = /tmp/x y\n";
  const ExperimentConfig c = parse_config(in);
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.train.mode, TuningMode::agp_s);
  EXPECT_EQ(c.train.loss_mask, (LossMask{true, false, true}));
  EXPECT_EQ(c.train.gamma, 0.125);
  EXPECT_EQ(c.attack.mode, AttackMode::topology);
  EXPECT_EQ(c.backbone.mode, BackboneMode::linear);
  EXPECT_EQ(c.backbone.epsilon_gin, (std::vector<double>{0.1, -0.25, 0.0}));
  EXPECT_EQ(c.data.label_rule, LabelRule::topology_only);
  EXPECT_EQ(c.out, "/tmp/x y");
  const ExperimentConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse_config("seed = 1\ntrain.gamma = abc\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config("no_such.key = 1"), ConfigError);
  EXPECT_THROW(parse_config("seed"), ConfigError);
  EXPECT_THROW(parse_config("train.mode = sideways"), ConfigError);
  EXPECT_THROW(parse_config("train.attack_enabled = maybe"), ConfigError);
}

TEST(Config, ValidationRejectsBadValues) {
  for (const char *text : {"train.lr = 0", "attack.ratio = 1.5", "attack.epsilon = -1",
                           "eval.repetitions = 0", "split.train = 0.95",
                           "data.nodes_min = 9\ndata.nodes_max = 4"}) {
    const ExperimentConfig c = parse_config(text);
    EXPECT_THROW(validate(c), ConfigError) << text;
  }
}

TEST(Config, EveryKeyIsListedOnce) {
  std::set<std::string> seen;
  for (const auto &k : config_keys()) {
    EXPECT_TRUE(seen.insert(k.key).second) << k.key;
    EXPECT_FALSE(k.help.empty()) << k.key;
  }
  EXPECT_TRUE(seen.count("train.loss_mask"));
  EXPECT_TRUE(seen.count("attack.ratio"));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (auto scheme : {PromptScheme::agp, PromptScheme::agp_s, PromptScheme::gpf, PromptScheme::none}) {
    const Model m = agp::testing::small_model(4, 6, 3, 2, 7, scheme);
    const std::string text = serialize_checkpoint(m);
    const Model back = parse_checkpoint(text);
    EXPECT_EQ(serialize_checkpoint(back), text);
    Rng rng(1);
    const Graph g = agp::testing::random_graph(7, 4, 2, rng);
    EXPECT_TRUE(predict(g, m) == predict(g, back));
  }
}

TEST(Checkpoint, LinearBackboneRoundTrip) {
  BackboneConfig c;
  c.input_dim = 3;
  c.hidden_dim = 5;
  c.num_layers = 2;
  c.mode = BackboneMode::linear;
  Model m;
  m.backbone = init_backbone(c, 2);
  m.backbone.encoder_frozen = true;
  const Model back = parse_checkpoint(serialize_checkpoint(m));
  EXPECT_TRUE(same_model(m, back));
  EXPECT_TRUE(back.backbone.encoder_frozen);
  EXPECT_EQ(back.backbone.config.mode, BackboneMode::linear);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "agp_checkpoint_test.json";
  const Model m = agp::testing::small_model(4, 6, 2, 1, 3);
  save_checkpoint(m, path.string());
  EXPECT_TRUE(same_model(m, load_checkpoint(path.string())));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), DataError);
}

TEST(Checkpoint, RejectsDamagedFiles) {
  const Model m = agp::testing::small_model(4, 6, 2, 1, 3);
  const auto j = nlohmann::json::parse(serialize_checkpoint(m));
  EXPECT_THROW(parse_checkpoint("{not json"), DataError);
  auto bad = j;
  bad["format"] = "other";
  EXPECT_THROW(parse_checkpoint(bad.dump()), DataError);
  bad = j;
  bad["version"] = 99;
  EXPECT_THROW(parse_checkpoint(bad.dump()), DataError);
  bad = j;
  bad["tensors"].erase("head.w0");
  EXPECT_THROW(parse_checkpoint(bad.dump()), DataError);
  bad = j;
  bad["tensors"]["stray"] = bad["tensors"]["head.b0"];
  EXPECT_THROW(parse_checkpoint(bad.dump()), DataError);
  bad = j;
  bad["tensors"]["head.b0"]["shape"] = {2, 2};
  EXPECT_THROW(parse_checkpoint(bad.dump()), DataError);
  bad = j;
  bad["backbone"].erase("hidden_dim");
  EXPECT_THROW(parse_checkpoint(bad.dump()), DataError);
}
