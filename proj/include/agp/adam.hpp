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


#ifndef AGP_ADAM_HPP
#define AGP_ADAM_HPP

#include <cmath>
#include <map>
#include <span>
#include <string>

#include "agp/matrix.hpp"

namespace agp {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Matrix m;
  Matrix v;
};

/// Moments keyed by parameter name, plus the shared step counter.
struct OptimizerState {
  std::map<std::string, AdamMoments> moments;
  long step = 0;
};

/// A named parameter and its gradient for one update.
struct ParamRef {
  std::string name;
  Matrix *value;
  const Matrix *grad;
};

/// Bias-corrected Adam update, no weight decay.
inline void adam_step(std::span<const ParamRef> params, OptimizerState &state,
                      const AdamConfig &cfg) {
  if (!(cfg.lr > 0.0))
    throw ConfigError("adam: learning rate must be positive");
  for (const auto &p : params) {
    require_same_shape(*p.value, *p.grad, ("adam: " + p.name).c_str());
    if (!p.grad->allFinite())
      throw NumericError("adam: non-finite gradient for " + p.name);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto &p : params) {
    auto [it, fresh] = state.moments.try_emplace(p.name);
    AdamMoments &mo = it->second;
    if (fresh) {
      mo.m = Matrix::Zero(p.value->rows(), p.value->cols());
      mo.v = Matrix::Zero(p.value->rows(), p.value->cols());
    }
    require_same_shape(mo.m, *p.value, ("adam moments: " + p.name).c_str());
    const Matrix &g = *p.grad;
    mo.m = cfg.beta1 * mo.m + (1.0 - cfg.beta1) * g;
    mo.v = cfg.beta2 * mo.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const auto m_hat = mo.m.array() / c1;
    const auto v_hat = mo.v.array() / c2;
    p.value->array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
  }
}

} // namespace agp

#endif
