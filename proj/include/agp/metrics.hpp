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


#ifndef AGP_METRICS_HPP
#define AGP_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "agp/attack.hpp"

namespace agp {

/**
 * ROC-AUC as the Mann-Whitney statistic: the probability that a random
 * positive scores above a random negative, tied pairs counting one half.
 * Entries with mask 0 are ignored.
 *
 * Returns nullopt when the labelled entries contain a single class.
 */
inline std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> labels,
                                     std::span<const double> mask = {}) {
  if (scores.size() != labels.size() || (!mask.empty() && mask.size() != scores.size()))
    throw DimensionError("roc_auc: scores, labels and mask must have equal length");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (mask.empty() || mask[i] != 0.0)
      idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Twice the rank sum of positives, with tied groups sharing their mid-rank.
  std::uint64_t n_pos = 0, rank2_pos = 0;
  for (std::size_t lo = 0; lo < idx.size();) {
    std::size_t hi = lo;
    while (hi < idx.size() && scores[idx[hi]] == scores[idx[lo]])
      ++hi;
    const std::uint64_t mid2 = lo + hi + 1; // (lo+1) + hi, 1-based ranks
    for (std::size_t k = lo; k < hi; ++k)
      if (labels[idx[k]] > 0.5) {
        ++n_pos;
        rank2_pos += mid2;
      }
    lo = hi;
  }
  const std::uint64_t n_neg = idx.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    return std::nullopt;
  const std::uint64_t u2 = rank2_pos - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / static_cast<double>(2 * n_pos * n_neg);
}

struct EvalResult {
  std::vector<std::optional<double>> per_task; // nullopt for single-class tasks
  double mean_auc = 0.0;                        // over valid tasks
  Index n_valid_tasks = 0;
  std::optional<AttackMode> attack_mode;
  double clean_auc = 0.0;
  double drop = 0.0; // clean_auc - mean_auc
};

/// Logits of every graph, stacked S x T.
inline Matrix score_dataset(const Model &m, const Dataset &d,
                            const std::vector<Noise> *noise = nullptr) {
  Matrix s(static_cast<Index>(d.size()), d.task_count);
  for (std::size_t i = 0; i < d.size(); ++i)
    s.row(static_cast<Index>(i)) =
        encode(d.graphs[i], m, noise ? &(*noise)[i] : nullptr).logits.row(0);
  return s;
}

/// Per-task AUCs of stacked scores.
inline EvalResult auc_table(const Dataset &d, const Matrix &scores) {
  EvalResult r;
  double sum = 0.0;
  for (Index t = 0; t < d.task_count; ++t) {
    std::vector<double> s, y, mk;
    for (std::size_t i = 0; i < d.size(); ++i) {
      s.push_back(scores(static_cast<Index>(i), t));
      y.push_back(d.graphs[i].y(0, t));
      mk.push_back(d.graphs[i].mask(0, t));
    }
    const auto auc = roc_auc(s, y, mk);
    r.per_task.push_back(auc);
    if (auc) {
      sum += *auc;
      ++r.n_valid_tasks;
    }
  }
  r.mean_auc = r.n_valid_tasks ? sum / static_cast<double>(r.n_valid_tasks) : 0.0;
  r.clean_auc = r.mean_auc;
  return r;
}

struct AttackEval {
  PerturbationBudget budget;
  std::vector<std::uint64_t> seeds; // one attack repetition per seed
};

/// `repetitions` reproducible repetition seeds derived from `base`.
inline std::vector<std::uint64_t> repetition_seeds(std::uint64_t base, int repetitions = 5) {
  std::vector<std::uint64_t> s;
  for (int r = 0; r < repetitions; ++r)
    s.push_back(derive_seed(base, 0xe7a1, static_cast<std::uint64_t>(r)));
  return s;
}

/// Per-graph adversarial noise for one repetition.
inline std::vector<Noise> attack_dataset(const Model &m, const Dataset &d,
                                         const PerturbationBudget &budget, std::uint64_t seed) {
  std::vector<Noise> out;
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    Rng rng = attack_rng(seed, i);
    out.push_back(run_attack(d.graphs[i], m, budget, rng).noise());
  }
  return out;
}

/// Clean evaluation, or attacked evaluation averaged over repetitions.
inline EvalResult evaluate(const Model &m, const Dataset &d,
                           const std::optional<AttackEval> &attack = std::nullopt) {
  if (d.empty())
    throw DataError("evaluate: empty dataset");
  const EvalResult clean = auc_table(d, score_dataset(m, d));
  if (!attack)
    return clean;
  if (attack->seeds.empty())
    throw ConfigError("evaluate: attack needs at least one repetition seed");
  EvalResult r = clean;
  r.attack_mode = attack->budget.mode;
  std::vector<double> task_sum(static_cast<std::size_t>(d.task_count), 0.0);
  double mean_sum = 0.0;
  for (auto seed : attack->seeds) {
    const auto noise = attack_dataset(m, d, attack->budget, seed);
    const EvalResult rep = auc_table(d, score_dataset(m, d, &noise));
    mean_sum += rep.mean_auc;
    for (std::size_t t = 0; t < task_sum.size(); ++t)
      if (rep.per_task[t])
        task_sum[t] += *rep.per_task[t];
  }
  const double reps = static_cast<double>(attack->seeds.size());
  for (std::size_t t = 0; t < task_sum.size(); ++t)
    if (r.per_task[t])
      r.per_task[t] = task_sum[t] / reps;
  r.mean_auc = mean_sum / reps;
  r.clean_auc = clean.mean_auc;
  r.drop = r.clean_auc - r.mean_auc;
  return r;
}

} // namespace agp

#endif
