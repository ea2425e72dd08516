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


#ifndef AGP_PROMPT_HPP
#define AGP_PROMPT_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "agp/backbone.hpp"

namespace agp {

enum class PromptScheme {
  none,
  agp,   // bottleneck prompt before every layer
  agp_s, // bottleneck prompt before the input layer only
  gpf,   // one shared vector added to every input node
};

struct PromptConfig {
  PromptScheme scheme = PromptScheme::agp;
  Index bottleneck_dim = 64;
};

/// Bottleneck prompt generator for one layer:
/// P = BatchNorm(relu(H W_down) W_up).
struct PromptLayer {
  std::size_t layer = 0;
  Matrix w_down; // D_l x d
  Matrix w_up;   // d x D_l
  BatchNormState norm;
};

struct PromptStack {
  PromptScheme scheme = PromptScheme::none;
  std::vector<PromptLayer> layers;
  Matrix gpf; // 1 x D when scheme == gpf

  const PromptLayer *find(std::size_t layer) const {
    for (const auto &p : layers)
      if (p.layer == layer)
        return &p;
    return nullptr;
  }
};

inline std::vector<std::size_t> prompted_layers(PromptScheme scheme, Index num_layers) {
  std::vector<std::size_t> out;
  if (scheme == PromptScheme::agp)
    for (Index l = 0; l < num_layers; ++l)
      out.push_back(static_cast<std::size_t>(l));
  else if (scheme == PromptScheme::agp_s)
    out.push_back(0);
  return out;
}

/// W_down uniform(+-1/sqrt(D_l)); W_up, the GPF vector and the norm shift
/// start at zero, so a fresh stack adds exactly nothing.
inline PromptStack init_prompt_stack(const PromptConfig &cfg, const BackboneConfig &backbone,
                                     std::uint64_t seed) {
  PromptStack s;
  s.scheme = cfg.scheme;
  if (cfg.scheme == PromptScheme::gpf) {
    s.gpf = Matrix::Zero(1, backbone.input_dim);
    return s;
  }
  if (cfg.scheme == PromptScheme::none)
    return s;
  if (cfg.bottleneck_dim < 1 || cfg.bottleneck_dim >= backbone.hidden_dim)
    throw ConfigError("prompt: bottleneck_dim must satisfy 1 <= d < hidden_dim (d=" +
                      std::to_string(cfg.bottleneck_dim) +
                      ", hidden_dim=" + std::to_string(backbone.hidden_dim) + ")");
  Rng rng(derive_seed(seed, 0x9707));
  for (auto l : prompted_layers(cfg.scheme, backbone.num_layers)) {
    const Index dim = backbone.layer_input_dim(l);
    PromptLayer p;
    p.layer = l;
    p.w_down = detail::uniform_matrix(dim, cfg.bottleneck_dim,
                                      1.0 / std::sqrt(static_cast<double>(dim)), rng);
    p.w_up = Matrix::Zero(cfg.bottleneck_dim, dim);
    p.norm = BatchNormState::identity(dim);
    s.layers.push_back(std::move(p));
  }
  return s;
}

/// Trainable prompt weights plus norm scale/shift.
inline Index prompt_parameter_count(const PromptStack &s) {
  Index n = s.gpf.size();
  for (const auto &p : s.layers)
    n += p.w_down.size() + p.w_up.size() + p.norm.scale.size() + p.norm.shift.size();
  return n;
}

struct PromptLayerVars {
  Var w_down, w_up, scale, shift;
};

namespace ad {

inline Var compute_prompt(Var h, const PromptLayerVars &w, const PromptLayer &layer,
                          NormMode mode, BatchStats *stats = nullptr) {
  if (h.cols() != w.w_down.rows())
    throw DimensionError("compute_prompt: input is " + shape_str(h.value()) +
                         ", down-projection is " + shape_str(w.w_down.value()));
  const Var z = ad::matmul(ad::relu(ad::matmul(h, w.w_down)), w.w_up);
  if (mode == NormMode::train)
    return ad::batchnorm_train(z, w.scale, w.shift, layer.norm.eps, stats);
  return ad::batchnorm_eval(z, w.scale, w.shift, layer.norm.running_mean,
                            layer.norm.running_var, layer.norm.eps);
}

} // namespace ad

/// Value-level prompt; train mode also updates `layer`'s running statistics.
inline Matrix compute_prompt(const Matrix &h, PromptLayer &layer, NormMode mode) {
  Tape t;
  const PromptLayerVars w{t.constant(layer.w_down), t.constant(layer.w_up),
                          t.constant(layer.norm.scale), t.constant(layer.norm.shift)};
  BatchStats st;
  Matrix out = ad::compute_prompt(t.constant(h), w, layer, mode, &st).value();
  if (mode == NormMode::train)
    update_running(layer.norm, st);
  return out;
}

/// h + p; a 1 x D prompt is broadcast over the rows of h.
inline Matrix apply_prompt(const Matrix &h, const Matrix &p) {
  if (p.rows() == 1 && p.cols() == h.cols())
    return h.rowwise() + p.row(0);
  require_same_shape(h, p, "apply_prompt");
  return h + p;
}

} // namespace agp

#endif
