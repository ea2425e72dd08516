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


#ifndef AGP_LOSSES_HPP
#define AGP_LOSSES_HPP

#include <string>

#include "agp/ops.hpp"

namespace agp {

/// Mean binary cross-entropy with logits over labelled entries.
inline double task_loss(const Matrix &logits, const Matrix &labels, const Matrix &mask) {
  Tape t;
  return ad::bce_with_logits(t.constant(logits), labels, mask).value()(0, 0);
}

/// Which of the three objective terms are live.
struct LossMask {
  bool adv = true;
  bool ori = true;
  bool consis = true;

  bool operator==(const LossMask &) const = default;
  bool needs_attack() const { return adv || consis; }
};

inline std::string to_string(const LossMask &m) {
  std::string s;
  auto put = [&](bool on, const char *name) {
    if (!on)
      return;
    if (!s.empty())
      s += ',';
    s += name;
  };
  put(m.adv, "adv");
  put(m.ori, "ori");
  put(m.consis, "consis");
  return s;
}

inline LossMask parse_loss_mask(const std::string &text) {
  LossMask m{false, false, false};
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    const std::string tok = text.substr(start, end == std::string::npos ? std::string::npos
                                                                        : end - start);
    if (tok == "adv")
      m.adv = true;
    else if (tok == "ori")
      m.ori = true;
    else if (tok == "consis")
      m.consis = true;
    else if (!tok.empty())
      throw ConfigError("unknown loss term '" + tok + "' (adv, ori, consis)");
    if (end == std::string::npos)
      break;
    start = end + 1;
  }
  if (!m.adv && !m.ori && !m.consis)
    throw ConfigError("loss mask selects no terms");
  return m;
}

struct LossWeights {
  double gamma = 0.3; // clean-loss weight
  double eta = 0.6;   // consistency weight
  LossMask mask;
  /// Pair gamma with the consistency term and eta with the clean term
  /// instead (the pairing printed in the training-loop pseudocode).
  bool swap_weights = false;

  double ori_weight() const { return swap_weights ? eta : gamma; }
  double consis_weight() const { return swap_weights ? gamma : eta; }
};

/// L_adv + gamma L_ori + eta L_consis, masked terms contributing 0.
inline double total_loss(double l_adv, double l_ori, double l_consis, const LossWeights &w) {
  double total = 0.0;
  if (w.mask.adv)
    total += l_adv;
  if (w.mask.ori)
    total += w.ori_weight() * l_ori;
  if (w.mask.consis)
    total += w.consis_weight() * l_consis;
  return total;
}

} // namespace agp

#endif
