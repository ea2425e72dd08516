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


#ifndef AGP_BACKBONE_HPP
#define AGP_BACKBONE_HPP

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "agp/batchnorm.hpp"
#include "agp/ops.hpp"
#include "agp/rng.hpp"

namespace agp {

enum class BackboneMode {
  full,   // per layer: 2-layer MLP on the aggregate, BatchNorm, relu
  linear, // per layer: A~ H Theta, nothing else
};

struct BackboneConfig {
  Index input_dim = 1;
  Index num_layers = 5;
  Index hidden_dim = 300;
  BackboneMode mode = BackboneMode::full;
  std::vector<double> epsilon_gin; // one per layer; empty means all zero
  Index task_count = 1;

  double epsilon(std::size_t layer) const {
    return layer < epsilon_gin.size() ? epsilon_gin[layer] : 0.0;
  }
  Index layer_input_dim(std::size_t layer) const { return layer == 0 ? input_dim : hidden_dim; }
};

inline void validate(const BackboneConfig &c) {
  if (c.num_layers < 1 || c.hidden_dim < 1 || c.input_dim < 1 || c.task_count < 1)
    throw ConfigError("backbone: layers, hidden_dim, input_dim and task_count must be >= 1");
  if (!c.epsilon_gin.empty() && static_cast<Index>(c.epsilon_gin.size()) != c.num_layers)
    throw ConfigError("backbone: epsilon_gin needs one value per layer");
}

/// A~ = A + (1 + eps) I.
inline Matrix aug_adjacency(const Matrix &a, double epsilon_gin) {
  if (a.rows() != a.cols())
    throw DimensionError("aug_adjacency: adjacency must be square, got " + shape_str(a));
  Matrix out = a;
  out.diagonal().array() += 1.0 + epsilon_gin;
  return out;
}

/// Weights of one GIN layer. Linear mode uses `w1` as Theta and ignores the rest.
struct GinLayer {
  Matrix w1, b1, w2, b2;
  BatchNormState norm;
};

/// Three-layer MLP classifier on the pooled embedding.
struct ClassifierHead {
  std::array<Matrix, 3> w;
  std::array<Matrix, 3> b;
};

struct BackboneParams {
  BackboneConfig config;
  std::vector<GinLayer> layers;
  ClassifierHead head;
  bool encoder_frozen = false;
  bool head_frozen = false;
};

namespace detail {

inline Matrix uniform_matrix(Index r, Index c, double bound, Rng &rng) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      m(i, j) = rng.uniform(-bound, bound);
  return m;
}

} // namespace detail

/// Fresh head with uniform(+-1/sqrt(fan_in)) weights.
inline ClassifierHead init_head(Index in_dim, Index hidden, Index tasks, Rng &rng) {
  ClassifierHead h;
  const std::array<Index, 4> dims{in_dim, hidden, hidden, tasks};
  for (std::size_t k = 0; k < 3; ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[k]));
    h.w[k] = detail::uniform_matrix(dims[k], dims[k + 1], bound, rng);
    h.b[k] = detail::uniform_matrix(1, dims[k + 1], bound, rng);
  }
  return h;
}

inline BackboneParams init_backbone(const BackboneConfig &cfg, std::uint64_t seed) {
  validate(cfg);
  Rng rng(derive_seed(seed, 0xba5e));
  BackboneParams p;
  p.config = cfg;
  if (p.config.epsilon_gin.empty())
    p.config.epsilon_gin.assign(static_cast<std::size_t>(cfg.num_layers), 0.0);
  for (Index l = 0; l < cfg.num_layers; ++l) {
    const Index in = cfg.layer_input_dim(static_cast<std::size_t>(l));
    const Index h = cfg.hidden_dim;
    GinLayer layer;
    const double b_in = 1.0 / std::sqrt(static_cast<double>(in));
    const double b_h = 1.0 / std::sqrt(static_cast<double>(h));
    layer.w1 = detail::uniform_matrix(in, h, b_in, rng);
    if (cfg.mode == BackboneMode::full) {
      layer.b1 = detail::uniform_matrix(1, h, b_in, rng);
      layer.w2 = detail::uniform_matrix(h, h, b_h, rng);
      layer.b2 = detail::uniform_matrix(1, h, b_h, rng);
      layer.norm = BatchNormState::identity(h);
    }
    p.layers.push_back(std::move(layer));
  }
  p.head = init_head(cfg.hidden_dim, cfg.hidden_dim, cfg.task_count, rng);
  return p;
}

/// Tape handles for one layer's weights.
struct GinLayerVars {
  Var w1, b1, w2, b2, scale, shift;
};

struct HeadVars {
  std::array<Var, 3> w, b;
};

struct BackboneVars {
  std::vector<GinLayerVars> layers;
  HeadVars head;
};

inline Var bind_param(Tape &t, const Matrix &m, bool trainable) {
  return trainable ? t.leaf(m) : t.constant(m);
}

inline BackboneVars bind(Tape &t, const BackboneParams &p, bool encoder_trainable,
                         bool head_trainable) {
  BackboneVars v;
  for (const auto &layer : p.layers) {
    GinLayerVars lv;
    lv.w1 = bind_param(t, layer.w1, encoder_trainable);
    if (p.config.mode == BackboneMode::full) {
      lv.b1 = bind_param(t, layer.b1, encoder_trainable);
      lv.w2 = bind_param(t, layer.w2, encoder_trainable);
      lv.b2 = bind_param(t, layer.b2, encoder_trainable);
      lv.scale = bind_param(t, layer.norm.scale, encoder_trainable);
      lv.shift = bind_param(t, layer.norm.shift, encoder_trainable);
    }
    v.layers.push_back(lv);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    v.head.w[k] = bind_param(t, p.head.w[k], head_trainable);
    v.head.b[k] = bind_param(t, p.head.b[k], head_trainable);
  }
  return v;
}

/// One GIN layer over a stack of graphs. `adjacency[s]` is the (possibly
/// perturbed) adjacency of graph s, `h` the stacked layer input.
/// Full mode appends the layer's batch statistics to `stats` when training.
inline Var layer_forward(Var h, std::span<const Var> adjacency, const ad::Segments &seg,
                         double epsilon_gin, const GinLayerVars &w, const GinLayer &layer,
                         BackboneMode mode, NormMode norm_mode, BatchStats *stats = nullptr) {
  if (h.cols() != w.w1.rows())
    throw DimensionError("layer_forward: input is " + shape_str(h.value()) + ", weight is " +
                         shape_str(w.w1.value()));
  const Var agg =
      ad::add(ad::segment_matmul(adjacency, h, seg), ad::scale(h, 1.0 + epsilon_gin));
  if (mode == BackboneMode::linear)
    return ad::matmul(agg, w.w1);
  Var z = ad::relu(ad::add_row(ad::matmul(agg, w.w1), w.b1));
  z = ad::add_row(ad::matmul(z, w.w2), w.b2);
  if (norm_mode == NormMode::train)
    z = ad::batchnorm_train(z, w.scale, w.shift, layer.norm.eps, stats);
  else
    z = ad::batchnorm_eval(z, w.scale, w.shift, layer.norm.running_mean,
                           layer.norm.running_var, layer.norm.eps);
  return ad::relu(z);
}

/// Called with (layer index, stacked layer input); may return an additive
/// prompt of the same shape (or a 1 x D row broadcast over nodes).
using PromptHook = std::function<std::optional<Var>(std::size_t layer, Var h)>;

struct EncodeOutput {
  std::vector<Var> layer_inputs; // H^(l) before prompting, l = 0..L-1
  std::vector<Var> per_layer;    // layer outputs H^(1..L)
  Var nodes;                     // final node matrix
  Var embedding;                 // S x hidden, mean pooled per graph
  std::vector<BatchStats> stats; // full mode, train norm only
};

inline Var apply_prompt(Var h, Var p) {
  if (p.rows() == 1 && h.rows() != 1)
    return ad::add_row(h, p);
  return ad::add(h, p);
}

inline EncodeOutput encode_stack(Var x, std::span<const Var> adjacency, const ad::Segments &seg,
                                 const BackboneParams &p, const BackboneVars &v,
                                 NormMode norm_mode, const PromptHook &hook = {}) {
  EncodeOutput out;
  Var h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    out.layer_inputs.push_back(h);
    if (hook)
      if (auto prompt = hook(l, h))
        h = apply_prompt(h, *prompt);
    BatchStats st;
    h = layer_forward(h, adjacency, seg, p.config.epsilon(l), v.layers[l], p.layers[l],
                      p.config.mode, norm_mode, &st);
    if (p.config.mode == BackboneMode::full && norm_mode == NormMode::train)
      out.stats.push_back(std::move(st));
    out.per_layer.push_back(h);
  }
  out.nodes = h;
  out.embedding = ad::segment_mean(h, seg);
  return out;
}

/// Raw logits (no sigmoid) for each row of `embedding`.
inline Var classify(Var embedding, const HeadVars &head) {
  Var z = ad::relu(ad::add_row(ad::matmul(embedding, head.w[0]), head.b[0]));
  z = ad::relu(ad::add_row(ad::matmul(z, head.w[1]), head.b[1]));
  return ad::add_row(ad::matmul(z, head.w[2]), head.b[2]);
}

/// Value-level classifier on a 1 x hidden embedding.
inline Matrix classify(const Matrix &embedding, const BackboneParams &p) {
  if (embedding.cols() != p.head.w[0].rows())
    throw DimensionError("classify: embedding is " + shape_str(embedding) + ", head expects " +
                         std::to_string(p.head.w[0].rows()) + " columns");
  Tape t;
  const BackboneVars v = bind(t, p, false, false);
  return classify(t.constant(embedding), v.head).value();
}

/// Number of encoder weights (all layers, including norm scale/shift).
inline Index encoder_parameter_count(const BackboneParams &p) {
  Index n = 0;
  for (const auto &l : p.layers) {
    n += l.w1.size();
    if (p.config.mode == BackboneMode::full)
      n += l.b1.size() + l.w2.size() + l.b2.size() + l.norm.scale.size() + l.norm.shift.size();
  }
  return n;
}

inline Index head_parameter_count(const ClassifierHead &h) {
  Index n = 0;
  for (std::size_t k = 0; k < 3; ++k)
    n += h.w[k].size() + h.b[k].size();
  return n;
}

} // namespace agp

#endif
