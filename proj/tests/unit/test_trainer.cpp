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

#include <cmath>

#include "agp/checkpoint.hpp"
#include "agp/trainer.hpp"
#include "helpers.hpp"
#include "oracles/oracles.hpp"

using namespace agp;

namespace {

struct Fixture {
  DatasetSplit split;
  BackboneParams backbone;
};

const Fixture &fixture() {
  static const Fixture f = [] {
    Fixture f;
    f.split = split(generate_synthetic(agp::testing::tiny_spec(80), 3), {0.6, 0.2, 0.2}, 1);
    BackboneConfig c;
    c.input_dim = 4;
    c.hidden_dim = 8;
    c.num_layers = 2;
    TrainConfig pc;
    pc.warmup_epochs = 0;
    pc.epochs = 3;
    pc.lr = 1e-2;
    pc.batch_size = 16;
    DatasetSplit surrogate =
        split(generate_synthetic(agp::testing::tiny_spec(60, LabelRule::multitask), 4),
              {0.8, 0.1, 0.1}, 1);
    f.backbone = pretrain(surrogate, c, pc).model.backbone;
    return f;
  }();
  return f;
}

TrainConfig quick(TuningMode mode, int warmup = 2, int epochs = 2) {
  TrainConfig c;
  c.mode = mode;
  c.warmup_epochs = warmup;
  c.epochs = epochs;
  c.lr = 1e-2;
  c.batch_size = 16;
  c.bottleneck_dim = 3;
  c.seed = 5;
  c.log_attacked_val = false;
  return c;
}

PerturbationBudget light_budget() {
  PerturbationBudget b;
  b.steps = 3;
  return b;
}

bool same_encoder(const BackboneParams &a, const BackboneParams &b) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto &x = a.layers[l], &y = b.layers[l];
    if (!(x.w1 == y.w1 && x.b1 == y.b1 && x.w2 == y.w2 && x.b2 == y.b2 &&
          x.norm.scale == y.norm.scale && x.norm.shift == y.norm.shift &&
          x.norm.running_mean == y.norm.running_mean && x.norm.running_var == y.norm.running_var))
      return false;
  }
  return true;
}

double mean_clean_loss(const Model &m, const Dataset &d) {
  double s = 0.0;
  for (const auto &g : d.graphs)
    s += perturbed_loss(g, m);
  return s / static_cast<double>(d.size());
}

} // namespace

TEST(TaskLoss, Examples) {
  EXPECT_NEAR(task_loss(make_matrix({{0}}), make_matrix({{1}}), make_matrix({{1}})), std::log(2.0), 1e-15);
  EXPECT_LT(task_loss(make_matrix({{40, -40}}), make_matrix({{1, 0}}), make_matrix({{1, 1}})), 1e-15);
  const Matrix z = make_matrix({{0.3, -1.2}, {2.0, 0.7}});
  const Matrix y = make_matrix({{1, 0}, {0, 1}});
  const Matrix mask = make_matrix({{1, 0}, {1, 1}});
  const double expect = (oracle::bce_formula(0.3, 1) + oracle::bce_formula(2.0, 0) +
                         oracle::bce_formula(0.7, 1)) / 3.0;
  EXPECT_NEAR(task_loss(z, y, mask), expect, 1e-14);
  EXPECT_THROW(task_loss(z, y, Matrix::Zero(2, 2)), DataError);
  EXPECT_THROW(task_loss(z, make_matrix({{1}}), make_matrix({{1}})), DimensionError);
}

TEST(TotalLoss, WeightsAndMasks) {
  LossWeights w;
  EXPECT_NEAR(total_loss(1, 1, 1, w), 1.9, 1e-15);
  w.gamma = w.eta = 0.0;
  EXPECT_EQ(total_loss(0.7, 5, 9, w), 0.7);
  LossWeights ori{0.3, 0.6, parse_loss_mask("ori"), false};
  EXPECT_EQ(total_loss(4, 2, 8, ori), 0.3 * 2);
  LossWeights swapped;
  swapped.swap_weights = true;
  EXPECT_NEAR(total_loss(0, 1, 0, swapped), 0.6, 1e-15);
  EXPECT_NEAR(total_loss(0, 0, 1, swapped), 0.3, 1e-15);
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    EXPECT_NEAR(total_loss(a, b, c, {}), a + 0.3 * b + 0.6 * c, 1e-15);
  }
}

TEST(LossMask, Parsing) {
  EXPECT_EQ(parse_loss_mask("adv,consis"), (LossMask{true, false, true}));
  EXPECT_EQ(to_string(parse_loss_mask("consis,ori,adv")), "adv,ori,consis");
  EXPECT_THROW(parse_loss_mask("adv,foo"), ConfigError);
  EXPECT_THROW(parse_loss_mask(""), ConfigError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Matrix p = make_matrix({{1, -2}}), g = Matrix::Zero(1, 2);
  OptimizerState s;
  const std::array refs{ParamRef{"p", &p, &g}};
  adam_step(refs, s, {});
  EXPECT_EQ(p, make_matrix({{1, -2}}));
}

TEST(Adam, FirstAndSecondStepClosedForm) {
  Matrix p = Matrix::Zero(1, 1), g = Matrix::Ones(1, 1);
  OptimizerState s;
  const AdamConfig cfg{1e-3};
  const std::array refs{ParamRef{"p", &p, &g}};
  adam_step(refs, s, cfg);
  const double d1 = p(0, 0);
  EXPECT_NEAR(d1, -1e-3 / (1.0 + 1e-8), 1e-18);
  adam_step(refs, s, cfg);
  const double d2 = p(0, 0) - d1;
  EXPECT_LE(std::abs(d2), std::abs(d1) * 1.01);
}

TEST(Adam, NonFiniteGradientThrows) {
  Matrix p = Matrix::Zero(1, 1), g = Matrix::Constant(1, 1, std::nan(""));
  OptimizerState s;
  const std::array refs{ParamRef{"p", &p, &g}};
  EXPECT_THROW(adam_step(refs, s, {}), NumericError);
}

TEST(Finetune, NoEpochsReturnsPreparedModel) {
  const auto &f = fixture();
  const auto cfg = quick(TuningMode::agp, 0, 0);
  const auto r = agp_finetune(f.split, f.backbone, cfg, light_budget());
  EXPECT_TRUE(r.log.empty());
  EXPECT_TRUE(same_model(r.model, prepare_model(f.backbone, cfg, 1)));
}

TEST(Finetune, LogHasWarmupPlusEpochRows) {
  const auto &f = fixture();
  const auto r = agp_finetune(f.split, f.backbone, quick(TuningMode::agp, 2, 3), light_budget());
  ASSERT_EQ(r.log.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(r.log[k].epoch, static_cast<int>(k) + 1);
    EXPECT_EQ(r.log[k].warmup, k < 2);
    EXPECT_EQ(r.log[k].adv_loss.has_value(), k >= 2);
  }
}

TEST(Finetune, WarmupLowersCleanLoss) {
  const auto &f = fixture();
  const auto cfg = quick(TuningMode::agp, 6, 0);
  const double before = mean_clean_loss(prepare_model(f.backbone, cfg, 1), f.split.train);
  const auto r = agp_finetune(f.split, f.backbone, cfg, light_budget());
  EXPECT_LE(mean_clean_loss(r.model, f.split.train), before);
}

TEST(Finetune, FrozenGroupsStayBitIdentical) {
  const auto &f = fixture();
  for (auto mode : {TuningMode::agp, TuningMode::agp_s, TuningMode::clean_prompt,
                    TuningMode::gpf, TuningMode::linear_probe}) {
    const auto cfg = quick(mode);
    const auto r = mode == TuningMode::agp || mode == TuningMode::agp_s
                       ? agp_finetune(f.split, f.backbone, cfg, light_budget())
                       : baseline_finetune(f.split, f.backbone, cfg);
    EXPECT_TRUE(same_encoder(r.model.backbone, f.backbone)) << to_string(mode);
    EXPECT_EQ(r.model.backbone.config.epsilon_gin, f.backbone.config.epsilon_gin);
  }
  const auto full = baseline_finetune(f.split, f.backbone, quick(TuningMode::full_ft));
  EXPECT_FALSE(same_encoder(full.model.backbone, f.backbone));
}

TEST(Finetune, TrainableCounts) {
  const auto &f = fixture();
  const Model gpf = prepare_model(f.backbone, quick(TuningMode::gpf), 1);
  EXPECT_EQ(trainable_parameter_count(gpf), 4 + head_parameter_count(gpf.backbone.head));
  const Model probe = prepare_model(f.backbone, quick(TuningMode::linear_probe), 1);
  EXPECT_EQ(trainable_parameter_count(probe), head_parameter_count(probe.backbone.head));
}

TEST(Finetune, CleanPromptEqualsOriOnlyAgpWithoutAttack) {
  const auto &f = fixture();
  const auto a = baseline_finetune(f.split, f.backbone, quick(TuningMode::clean_prompt));
  auto cfg = quick(TuningMode::agp);
  cfg.loss_mask = parse_loss_mask("ori");
  cfg.attack_enabled = false;
  const auto b = agp_finetune(f.split, f.backbone, cfg, light_budget());
  EXPECT_TRUE(a.log == b.log);
  EXPECT_TRUE(same_model(a.model, b.model));
}

TEST(Finetune, DeterministicGivenSeed) {
  const auto &f = fixture();
  auto cfg = quick(TuningMode::agp);
  cfg.log_attacked_val = true;
  const auto a = agp_finetune(f.split, f.backbone, cfg, light_budget());
  const auto b = agp_finetune(f.split, f.backbone, cfg, light_budget());
  EXPECT_TRUE(a.log == b.log);
  EXPECT_EQ(serialize_checkpoint(a.model), serialize_checkpoint(b.model));
  cfg.seed = 6;
  const auto c = agp_finetune(f.split, f.backbone, cfg, light_budget());
  EXPECT_NE(serialize_checkpoint(a.model), serialize_checkpoint(c.model));
}

TEST(Finetune, RejectsWrongEntryPoint) {
  const auto &f = fixture();
  EXPECT_THROW(agp_finetune(f.split, f.backbone, quick(TuningMode::gpf), {}), ConfigError);
  EXPECT_THROW(baseline_finetune(f.split, f.backbone, quick(TuningMode::agp)), ConfigError);
  auto bad = quick(TuningMode::agp);
  bad.lr = 0.0;
  EXPECT_THROW(agp_finetune(f.split, f.backbone, bad, {}), ConfigError);
}

TEST(TrainStep, LossesMatchDirectFormulas) {
  const auto &f = fixture();
  const auto cfg = quick(TuningMode::agp);
  Model m = prepare_model(f.backbone, cfg, 1);
  Rng rng(2);
  for (auto &p : m.prompts.layers)
    p.w_up = agp::testing::random_matrix(p.w_up.rows(), p.w_up.cols(), rng, -0.3, 0.3);
  const Model before = m;
  const std::vector<std::size_t> ids{0, 3, 5, 7};
  const StepContext ctx = make_context(cfg, light_budget(), true);
  OptimizerState opt;
  const StepLosses got = train_step(m, opt, f.split.train, ids, ctx, 4);

  // Rebuild both forwards by hand on the pre-step model.
  Tape t;
  const ModelVars v = bind(t, before, {});
  std::vector<GraphInput> clean, adv;
  for (auto gi : ids) {
    const Graph &g = f.split.train.graphs[gi];
    Rng r = attack_rng(cfg.seed, gi, 5);
    const Noise n = run_attack(g, before, light_budget(), r).noise();
    clean.push_back({t.constant(g.x), t.constant(g.a)});
    adv.push_back({t.constant(g.x + n.e_x), t.constant(g.a + n.e_a)});
  }
  const NormModes modes{NormMode::eval, NormMode::train};
  const Matrix yc = forward(before, v, clean, modes).logits.value();
  const Matrix ya = forward(before, v, adv, modes).logits.value();
  double l_ori = 0.0, l_adv = 0.0, l_consis = 0.0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const double y = f.split.train.graphs[ids[k]].y(0, 0);
    const auto r = static_cast<Index>(k);
    l_ori += oracle::bce_formula(yc(r, 0), y);
    l_adv += oracle::bce_formula(ya(r, 0), y);
    l_consis += oracle::bce_formula(ya(r, 0), 1.0 / (1.0 + std::exp(-yc(r, 0))));
  }
  const double n = static_cast<double>(ids.size());
  EXPECT_NEAR(got.clean, l_ori / n, 1e-12);
  EXPECT_NEAR(*got.adv, l_adv / n, 1e-12);
  EXPECT_NEAR(*got.consis, l_consis / n, 1e-12);
  EXPECT_NEAR(got.total, l_adv / n + 0.3 * l_ori / n + 0.6 * l_consis / n, 1e-12);
  EXPECT_TRUE(same_encoder(m.backbone, before.backbone));
}

TEST(Finetune, AdversarialLossFallsOnJointData) {
  const auto &f = fixture();
  double first = 0.0, last = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = quick(TuningMode::agp, 3, 8);
    cfg.seed = seed;
    const auto r = agp_finetune(f.split, f.backbone, cfg, light_budget());
    first += *r.log[3].adv_loss;
    last += *r.log.back().adv_loss;
  }
  EXPECT_LT(last, first);
}
