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


#ifndef AGP_BATCHNORM_HPP
#define AGP_BATCHNORM_HPP

#include <cmath>

#include "agp/ops.hpp"

namespace agp {

enum class NormMode { train, eval };

/// Per-feature batch normalization parameters and running statistics.
struct BatchNormState {
  Matrix scale;        // 1 x C (gamma)
  Matrix shift;        // 1 x C (beta)
  Matrix running_mean; // 1 x C
  Matrix running_var;  // 1 x C
  double eps = 1e-5;
  double momentum = 0.1;

  static BatchNormState identity(Index features) {
    BatchNormState s;
    s.scale = Matrix::Ones(1, features);
    s.shift = Matrix::Zero(1, features);
    s.running_mean = Matrix::Zero(1, features);
    s.running_var = Matrix::Ones(1, features);
    return s;
  }

  Index features() const { return scale.cols(); }
};

struct BatchStats {
  Matrix mean;         // 1 x C
  Matrix biased_var;   // 1 x C
  Index rows = 0;
};

inline BatchStats batch_stats(const Matrix &x) {
  BatchStats st;
  st.rows = x.rows();
  st.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - st.mean.row(0);
  st.biased_var = centered.array().square().colwise().mean().matrix();
  return st;
}

/// Folds batch statistics into the running estimates (unbiased variance).
inline void update_running(BatchNormState &state, const BatchStats &st) {
  const double m = state.momentum;
  const double n = static_cast<double>(st.rows);
  const Matrix var = st.rows > 1 ? Matrix(st.biased_var * (n / (n - 1.0))) : st.biased_var;
  state.running_mean = (1.0 - m) * state.running_mean + m * st.mean;
  state.running_var = (1.0 - m) * state.running_var + m * var;
}

namespace ad {

/// Train-mode batch normalization over rows with learnable scale/shift.
/// Returns the normalized output; `stats` receives the batch statistics.
inline Var batchnorm_train(Var x, Var scale, Var shift, double eps, BatchStats *stats = nullptr) {
  Tape &t = *x.tape();
  detail::same_tape(x, scale, "batchnorm");
  detail::same_tape(x, shift, "batchnorm");
  if (scale.cols() != x.cols() || shift.cols() != x.cols() || scale.rows() != 1 ||
      shift.rows() != 1)
    throw DimensionError("batchnorm: state has " + std::to_string(scale.cols()) +
                         " features, input is " + shape_str(x.value()));
  if (x.rows() == 0)
    throw DimensionError("batchnorm: empty batch");
  BatchStats st = batch_stats(x.value());
  const Matrix inv_std =
      (st.biased_var.array() + eps).sqrt().inverse().matrix(); // 1 x C
  Matrix xhat = (x.value().rowwise() - st.mean.row(0)).array().rowwise() * inv_std.row(0).array();
  Matrix out = (xhat.array().rowwise() * scale.value().row(0).array()).rowwise() +
               shift.value().row(0).array();
  if (stats)
    *stats = st;
  const bool needs = t.needs_grad(x) || t.needs_grad(scale) || t.needs_grad(shift);
  return t.record(std::move(out), needs,
                  [x, scale, shift, xhat, inv_std](Tape &t, const Matrix &g) {
                    if (t.needs_grad(shift))
                      t.accumulate(shift, g.colwise().sum());
                    if (t.needs_grad(scale))
                      t.accumulate(scale, g.cwiseProduct(xhat).colwise().sum());
                    if (!t.needs_grad(x))
                      return;
                    const double n = static_cast<double>(g.rows());
                    const Matrix gx_hat = g.array().rowwise() * scale.value().row(0).array();
                    const Matrix sum_g = gx_hat.colwise().sum();
                    const Matrix sum_gx = gx_hat.cwiseProduct(xhat).colwise().sum();
                    Matrix gx = (n * gx_hat).rowwise() - sum_g.row(0);
                    gx -= (xhat.array().rowwise() * sum_gx.row(0).array()).matrix();
                    gx = (gx.array().rowwise() * (inv_std.row(0).array() / n)).matrix();
                    t.accumulate(x, gx);
                  },
                  "batchnorm_train");
}

/// Eval-mode normalization with fixed running statistics.
inline Var batchnorm_eval(Var x, Var scale, Var shift, const Matrix &running_mean,
                          const Matrix &running_var, double eps) {
  Tape &t = *x.tape();
  if (scale.cols() != x.cols() || running_mean.cols() != x.cols())
    throw DimensionError("batchnorm: state has " + std::to_string(scale.cols()) +
                         " features, input is " + shape_str(x.value()));
  const Matrix inv_std = (running_var.array() + eps).sqrt().inverse().matrix();
  const Matrix mul = inv_std.cwiseProduct(scale.value());
  Matrix xhat = (x.value().rowwise() - running_mean.row(0)).array().rowwise() * inv_std.row(0).array();
  Matrix out = (xhat.array().rowwise() * scale.value().row(0).array()).rowwise() +
               shift.value().row(0).array();
  const bool needs = t.needs_grad(x) || t.needs_grad(scale) || t.needs_grad(shift);
  return t.record(std::move(out), needs,
                  [x, scale, shift, xhat, mul](Tape &t, const Matrix &g) {
                    if (t.needs_grad(shift))
                      t.accumulate(shift, g.colwise().sum());
                    if (t.needs_grad(scale))
                      t.accumulate(scale, g.cwiseProduct(xhat).colwise().sum());
                    if (t.needs_grad(x))
                      t.accumulate(x, (g.array().rowwise() * mul.row(0).array()).matrix());
                  },
                  "batchnorm_eval");
}

} // namespace ad

/// Value-level batch normalization. Train mode normalizes with the batch
/// statistics and updates the running estimates in `state`.
inline Matrix batchnorm(const Matrix &x, BatchNormState &state, NormMode mode) {
  if (state.features() != x.cols())
    throw DimensionError("batchnorm: state has " + std::to_string(state.features()) +
                         " features, input is " + shape_str(x));
  Tape tape;
  Var xv = tape.constant(x);
  Var sc = tape.constant(state.scale);
  Var sh = tape.constant(state.shift);
  if (mode == NormMode::eval)
    return ad::batchnorm_eval(xv, sc, sh, state.running_mean, state.running_var, state.eps)
        .value();
  BatchStats st;
  Matrix out = ad::batchnorm_train(xv, sc, sh, state.eps, &st).value();
  update_running(state, st);
  return out;
}

} // namespace agp

#endif
