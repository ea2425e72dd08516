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


#ifndef AGP_TRAINER_HPP
#define AGP_TRAINER_HPP

#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "agp/adam.hpp"
#include "agp/losses.hpp"
#include "agp/metrics.hpp"

namespace agp {

enum class TuningMode { agp, agp_s, gpf, full_ft, linear_probe, clean_prompt };

inline const char *to_string(TuningMode m) {
  switch (m) {
  case TuningMode::agp:
    return "agp";
  case TuningMode::agp_s:
    return "agp_s";
  case TuningMode::gpf:
    return "gpf";
  case TuningMode::full_ft:
    return "full_ft";
  case TuningMode::linear_probe:
    return "linear_probe";
  case TuningMode::clean_prompt:
    return "clean_prompt";
  }
  return "?";
}

inline TuningMode parse_tuning_mode(const std::string &s) {
  for (auto m : {TuningMode::agp, TuningMode::agp_s, TuningMode::gpf, TuningMode::full_ft,
                 TuningMode::linear_probe, TuningMode::clean_prompt})
    if (s == to_string(m))
      return m;
  throw ConfigError("unknown tuning mode '" + s + "'");
}

struct TrainConfig {
  double gamma = 0.3;
  double eta = 0.6;
  double lr = 1e-3;
  int warmup_epochs = 30;
  int epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  TuningMode mode = TuningMode::agp;
  LossMask loss_mask;
  bool swap_weights = false;
  Index bottleneck_dim = 64;
  bool attack_enabled = true;
  bool log_attacked_val = true; // attack the validation split every epoch
};

inline void validate(const TrainConfig &c) {
  if (!(c.gamma >= 0.0) || !(c.eta >= 0.0))
    throw ConfigError("train: gamma and eta must be >= 0");
  if (!(c.lr > 0.0))
    throw ConfigError("train: lr must be > 0");
  if (c.warmup_epochs < 0 || c.epochs < 0 || c.batch_size == 0)
    throw ConfigError("train: epochs must be >= 0 and batch_size >= 1");
}

inline bool is_prompt_mode(TuningMode m) {
  return m == TuningMode::agp || m == TuningMode::agp_s || m == TuningMode::gpf ||
         m == TuningMode::clean_prompt;
}

inline PromptScheme scheme_for(TuningMode m) {
  switch (m) {
  case TuningMode::agp:
  case TuningMode::clean_prompt:
    return PromptScheme::agp;
  case TuningMode::agp_s:
    return PromptScheme::agp_s;
  case TuningMode::gpf:
    return PromptScheme::gpf;
  default:
    return PromptScheme::none;
  }
}

inline Trainable trainable_for(TuningMode m) {
  switch (m) {
  case TuningMode::full_ft:
    return {true, true, false};
  case TuningMode::linear_probe:
    return {false, true, false};
  default:
    return {false, true, true};
  }
}

/// Effective objective. clean_prompt keeps the weighted form with only the
/// clean term live; the other baselines minimize the plain clean loss.
inline LossWeights weights_for(const TrainConfig &c) {
  LossWeights w{c.gamma, c.eta, c.loss_mask, c.swap_weights};
  if (c.mode == TuningMode::clean_prompt)
    w.mask = {false, true, false};
  else if (c.mode != TuningMode::agp && c.mode != TuningMode::agp_s)
    w = LossWeights{1.0, 0.0, {false, true, false}, false};
  return w;
}

inline bool attacks_enabled(const TrainConfig &c) {
  return c.attack_enabled && (c.mode == TuningMode::agp || c.mode == TuningMode::agp_s);
}

/// Copies the pre-trained backbone, attaches a fresh head for `task_count`
/// tasks and a no-op prompt stack for the tuning mode, and sets freeze flags.
inline Model prepare_model(const BackboneParams &pretrained, const TrainConfig &cfg,
                           Index task_count) {
  Model m;
  m.backbone = pretrained;
  m.backbone.config.task_count = task_count;
  Rng rng(derive_seed(cfg.seed, 0x4ead));
  const Index hidden = pretrained.config.hidden_dim;
  m.backbone.head = init_head(hidden, hidden, task_count, rng);
  const Trainable tr = trainable_for(cfg.mode);
  m.backbone.encoder_frozen = !tr.encoder;
  m.backbone.head_frozen = !tr.head;
  m.prompts = init_prompt_stack({scheme_for(cfg.mode), cfg.bottleneck_dim}, pretrained.config,
                                cfg.seed);
  return m;
}

inline Index trainable_parameter_count(const Model &m) {
  Index n = prompt_parameter_count(m.prompts);
  if (!m.backbone.head_frozen)
    n += head_parameter_count(m.backbone.head);
  if (!m.backbone.encoder_frozen)
    n += encoder_parameter_count(m.backbone);
  return n;
}

/// Per-parameter handles pairing storage with its tape variable.
struct BoundParam {
  std::string name;
  Matrix *value;
  Var var;
};

inline std::vector<BoundParam> collect_params(Model &m, const ModelVars &v, Trainable tr) {
  std::vector<BoundParam> out;
  if (tr.encoder)
    for (std::size_t l = 0; l < m.backbone.layers.size(); ++l) {
      auto &L = m.backbone.layers[l];
      const auto &V = v.backbone.layers[l];
      const std::string p = "encoder.l" + std::to_string(l) + ".";
      out.push_back({p + "w1", &L.w1, V.w1});
      if (m.backbone.config.mode == BackboneMode::full) {
        out.push_back({p + "b1", &L.b1, V.b1});
        out.push_back({p + "w2", &L.w2, V.w2});
        out.push_back({p + "b2", &L.b2, V.b2});
        out.push_back({p + "norm.scale", &L.norm.scale, V.scale});
        out.push_back({p + "norm.shift", &L.norm.shift, V.shift});
      }
    }
  if (tr.head)
    for (std::size_t k = 0; k < 3; ++k) {
      out.push_back({"head.w" + std::to_string(k), &m.backbone.head.w[k], v.backbone.head.w[k]});
      out.push_back({"head.b" + std::to_string(k), &m.backbone.head.b[k], v.backbone.head.b[k]});
    }
  if (tr.prompts) {
    for (std::size_t k = 0; k < m.prompts.layers.size(); ++k) {
      auto &P = m.prompts.layers[k];
      const auto &V = v.prompt_layers[k];
      const std::string p = "prompt.l" + std::to_string(P.layer) + ".";
      out.push_back({p + "w_down", &P.w_down, V.w_down});
      out.push_back({p + "w_up", &P.w_up, V.w_up});
      out.push_back({p + "norm.scale", &P.norm.scale, V.scale});
      out.push_back({p + "norm.shift", &P.norm.shift, V.shift});
    }
    if (m.prompts.scheme == PromptScheme::gpf)
      out.push_back({"prompt.gpf", &m.prompts.gpf, v.gpf});
  }
  return out;
}

struct StepLosses {
  double clean = 0.0;
  std::optional<double> adv;
  std::optional<double> consis;
  double total = 0.0;
};

/// Everything that stays fixed across one fine-tuning run.
struct StepContext {
  TrainConfig cfg;
  PerturbationBudget budget;
  Trainable trainable;
  LossWeights weights;
  bool attack = false; // generate adversarial samples in this phase
  bool warmup = false;
};

/// One optimizer step on a batch: clean forward, optional inner
/// maximization per graph, the weighted objective, and an Adam update.
/// `graph_ids` are the graphs' indices in the training split.
inline StepLosses train_step(Model &m, OptimizerState &opt, const Dataset &data,
                             std::span<const std::size_t> graph_ids, const StepContext &ctx,
                             int epoch) {
  std::vector<Noise> noise;
  if (ctx.attack) {
    noise.reserve(graph_ids.size());
    for (auto gi : graph_ids) {
      Rng rng = attack_rng(ctx.cfg.seed, gi, static_cast<std::uint64_t>(epoch) + 1);
      try {
        noise.push_back(run_attack(data.graphs[gi], m, ctx.budget, rng).noise());
      } catch (const NumericError &e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", graph " + std::to_string(gi) +
                           ": " + e.what());
      }
    }
  }

  Tape t;
  const ModelVars v = bind(t, m, ctx.trainable);
  const NormModes modes{ctx.trainable.encoder ? NormMode::train : NormMode::eval,
                        NormMode::train};
  const auto rows = static_cast<Index>(graph_ids.size());
  Matrix y(rows, data.task_count), mask(rows, data.task_count);
  std::vector<GraphInput> clean_in, adv_in;
  for (std::size_t k = 0; k < graph_ids.size(); ++k) {
    const Graph &g = data.graphs[graph_ids[k]];
    y.row(static_cast<Index>(k)) = g.y.row(0);
    mask.row(static_cast<Index>(k)) = g.mask.row(0);
    clean_in.push_back({t.constant(g.x), t.constant(g.a)});
    if (ctx.attack)
      adv_in.push_back({t.constant(g.x + noise[k].e_x), t.constant(g.a + noise[k].e_a)});
  }

  const ForwardOutput f_clean = forward(m, v, clean_in, modes);
  const Var l_ori = ad::bce_with_logits(f_clean.logits, y, mask);
  StepLosses out;
  out.clean = l_ori.value()(0, 0);

  Var total = ad::scale(l_ori, ctx.weights.mask.ori ? ctx.weights.ori_weight() : 0.0);
  std::optional<ForwardOutput> f_adv;
  if (ctx.attack) {
    f_adv = forward(m, v, adv_in, modes);
    const Var l_adv = ad::bce_with_logits(f_adv->logits, y, mask);
    // Clean predictions act as fixed soft targets.
    const Matrix soft = elementwise(ElementwiseOp::sigmoid, f_clean.logits.value());
    const Var l_consis =
        ad::bce_with_logits(f_adv->logits, soft, Matrix::Ones(rows, data.task_count));
    out.adv = l_adv.value()(0, 0);
    out.consis = l_consis.value()(0, 0);
    if (ctx.weights.mask.adv)
      total = ad::add(total, l_adv);
    if (ctx.weights.mask.consis)
      total = ad::add(total, ad::scale(l_consis, ctx.weights.consis_weight()));
  }
  out.total = total.value()(0, 0);
  t.backward(total);

  const auto params = collect_params(m, v, ctx.trainable);
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (const auto &p : params)
    grads.push_back(t.grad(p.var));
  std::vector<ParamRef> refs;
  for (std::size_t k = 0; k < params.size(); ++k)
    refs.push_back({params[k].name, params[k].value, &grads[k]});
  adam_step(refs, opt, AdamConfig{ctx.cfg.lr});

  commit_norm_stats(m, f_clean, modes);
  if (f_adv)
    commit_norm_stats(m, *f_adv, modes);
  return out;
}

struct EpochLog {
  int epoch = 0; // 1-based, warm-up epochs first
  bool warmup = false;
  double clean_loss = 0.0;
  std::optional<double> adv_loss;
  std::optional<double> consis_loss;
  double val_auc_clean = 0.0;
  std::optional<double> val_auc_attacked;

  bool operator==(const EpochLog &) const = default;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

/// Runs `epochs` epochs over `split.train`, appending to `log`.
inline void run_epochs(Model &m, OptimizerState &opt, const DatasetSplit &split,
                       const StepContext &ctx, int epochs, std::vector<EpochLog> &log) {
  const Dataset &train = split.train;
  std::vector<std::size_t> order(train.size());
  for (int e = 0; e < epochs; ++e) {
    const int epoch = static_cast<int>(log.size()) + 1;
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(ctx.cfg.seed, 0x5bf1e, static_cast<std::uint64_t>(epoch)));
    shuffle.shuffle(order.begin(), order.end());

    EpochLog row;
    row.epoch = epoch;
    row.warmup = ctx.warmup;
    double clean = 0.0, adv = 0.0, consis = 0.0;
    for (std::size_t start = 0; start < order.size(); start += ctx.cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + ctx.cfg.batch_size);
      const std::span<const std::size_t> ids(order.data() + start, end - start);
      const StepLosses l = train_step(m, opt, train, ids, ctx, epoch);
      const double w = static_cast<double>(ids.size());
      clean += w * l.clean;
      if (l.adv)
        adv += w * *l.adv;
      if (l.consis)
        consis += w * *l.consis;
    }
    const double n = static_cast<double>(order.size());
    row.clean_loss = n > 0 ? clean / n : 0.0;
    if (ctx.attack && n > 0) {
      row.adv_loss = adv / n;
      row.consis_loss = consis / n;
    }
    if (!split.val.empty()) {
      row.val_auc_clean = evaluate(m, split.val).mean_auc;
      if (attacks_enabled(ctx.cfg) && ctx.cfg.log_attacked_val)
        row.val_auc_attacked =
            evaluate(m, split.val,
                     AttackEval{ctx.budget, {derive_seed(ctx.cfg.seed, 0x7a1, epoch)}})
                .mean_auc;
    }
    log.push_back(row);
  }
}

inline StepContext make_context(const TrainConfig &cfg, const PerturbationBudget &budget,
                                bool attack_phase) {
  return {cfg, budget, trainable_for(cfg.mode), weights_for(cfg),
          attack_phase && attacks_enabled(cfg) && weights_for(cfg).mask.needs_attack(),
          !attack_phase};
}

/// Clean-only training (loss L_ori) of the trainable groups.
inline void warmup(Model &m, OptimizerState &opt, const DatasetSplit &split,
                   const TrainConfig &cfg, const PerturbationBudget &budget,
                   std::vector<EpochLog> &log) {
  StepContext ctx = make_context(cfg, budget, false);
  ctx.weights = LossWeights{1.0, 0.0, {false, true, false}, false};
  run_epochs(m, opt, split, ctx, cfg.warmup_epochs, log);
}

/// Warm-up followed by `cfg.epochs` epochs of the mode's objective. The
/// optimizer state carries over from warm-up.
inline TrainResult finetune(Model m, const DatasetSplit &split, const TrainConfig &cfg,
                            const PerturbationBudget &budget) {
  validate(cfg);
  validate(budget);
  if (split.train.empty())
    throw DataError("finetune: empty training split");
  TrainResult r;
  OptimizerState opt;
  warmup(m, opt, split, cfg, budget, r.log);
  run_epochs(m, opt, split, make_context(cfg, budget, true), cfg.epochs, r.log);
  r.model = std::move(m);
  return r;
}

/// Adversarial prompt tuning against a frozen backbone (agp, agp_s, or the
/// clean_prompt control).
inline TrainResult agp_finetune(const DatasetSplit &split, const BackboneParams &backbone,
                                const TrainConfig &cfg, const PerturbationBudget &budget) {
  if (cfg.mode != TuningMode::agp && cfg.mode != TuningMode::agp_s &&
      cfg.mode != TuningMode::clean_prompt)
    throw ConfigError("agp_finetune: mode must be agp, agp_s or clean_prompt");
  return finetune(prepare_model(backbone, cfg, split.train.task_count), split, cfg, budget);
}

inline TrainResult baseline_finetune(const DatasetSplit &split, const BackboneParams &backbone,
                                     const TrainConfig &cfg) {
  if (cfg.mode == TuningMode::agp || cfg.mode == TuningMode::agp_s)
    throw ConfigError("baseline_finetune: mode must be full_ft, linear_probe, gpf or clean_prompt");
  return finetune(prepare_model(backbone, cfg, split.train.task_count), split, cfg, {});
}

/// Supervised surrogate pre-training of every backbone weight. Returns the
/// trained backbone with both groups marked frozen.
inline TrainResult pretrain(const DatasetSplit &split, const BackboneConfig &bcfg,
                            TrainConfig cfg) {
  cfg.mode = TuningMode::full_ft;
  cfg.attack_enabled = false;
  BackboneConfig c = bcfg;
  c.task_count = split.train.task_count;
  Model m;
  m.backbone = init_backbone(c, cfg.seed);
  TrainResult r = finetune(std::move(m), split, cfg, {});
  r.model.backbone.encoder_frozen = true;
  r.model.backbone.head_frozen = true;
  return r;
}

} // namespace agp

#endif
