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



#ifndef AGP_EXPERIMENT_HPP
#define AGP_EXPERIMENT_HPP

#include <utility>
#include <vector>

#include "agp/config.hpp"
#include "agp/graph_io.hpp"
#include "agp/metrics.hpp"

namespace agp {

/// The configured dataset: loaded from data.path, or generated from data.*.
inline Dataset experiment_dataset(const ExperimentConfig &c) {
  if (!c.data_path.empty())
    return load_dataset(c.data_path);
  return generate_synthetic(c.data, c.data_seed);
}

/// Train/val/test split drawn from the run seed.
inline DatasetSplit experiment_split(const ExperimentConfig &c, const Dataset &d) {
  return split(d, c.split, derive_seed(c.seed, 0x5e1));
}

struct PretrainOutcome {
  TrainResult result;
  EvalResult val;
  EvalResult test;
};

/// Supervised training of a fresh backbone on the surrogate task. Depends
/// only on backbone.*, pretrain.* and train.batch_size.
inline PretrainOutcome pretrain_backbone(const ExperimentConfig &c) {
  const Dataset surrogate = generate_synthetic(c.pretrain_data, c.pretrain_seed);
  const DatasetSplit s = split(surrogate, {}, c.pretrain_seed);
  BackboneConfig bc = c.backbone;
  bc.input_dim = surrogate.feature_dim;
  TrainConfig pc;
  pc.warmup_epochs = 0;
  pc.epochs = c.pretrain_epochs;
  pc.lr = c.pretrain_lr;
  pc.batch_size = c.train.batch_size;
  pc.seed = c.pretrain_seed;
  PretrainOutcome out;
  out.result = pretrain(s, bc, pc);
  out.val = evaluate(out.result.model, s.val);
  out.test = evaluate(out.result.model, s.test);
  return out;
}

/// Frozen backbone from backbone.checkpoint, or pre-trained on the spot.
inline BackboneParams experiment_backbone(const ExperimentConfig &c, Index input_dim) {
  BackboneParams b = c.checkpoint.empty() ? pretrain_backbone(c).result.model.backbone
                                          : load_checkpoint(c.checkpoint).backbone;
  if (b.config.input_dim != input_dim)
    throw DataError("backbone expects " + std::to_string(b.config.input_dim) +
                    " input features but the dataset has " + std::to_string(input_dim));
  return b;
}

/// Fine-tunes with train.* under the run seed.
inline TrainResult experiment_tune(const ExperimentConfig &c, const DatasetSplit &s,
                                   const BackboneParams &backbone) {
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  const bool adversarial = tc.mode == TuningMode::agp || tc.mode == TuningMode::agp_s ||
                           tc.mode == TuningMode::clean_prompt;
  return adversarial ? agp_finetune(s, backbone, tc, c.attack) : baseline_finetune(s, backbone, tc);
}

/// Attack settings for evaluation: attack.* with `mode`, eval.repetitions seeds.
inline AttackEval experiment_attack(const ExperimentConfig &c, AttackMode mode) {
  PerturbationBudget b = c.attack;
  b.mode = mode;
  return {b, repetition_seeds(derive_seed(c.seed, 0xe7a1), c.eval_repetitions)};
}

struct RobustnessReport {
  EvalResult clean;
  std::vector<std::pair<AttackMode, EvalResult>> attacked; // eval.attack_modes order
};

inline RobustnessReport evaluate_robustness(const ExperimentConfig &c, const Model &m,
                                            const Dataset &d) {
  RobustnessReport r;
  r.clean = evaluate(m, d);
  for (auto mode : c.eval_attack_modes)
    r.attacked.emplace_back(mode, evaluate(m, d, experiment_attack(c, mode)));
  return r;
}

} // namespace agp

#endif
