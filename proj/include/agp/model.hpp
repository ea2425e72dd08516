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


#ifndef AGP_MODEL_HPP
#define AGP_MODEL_HPP

#include <span>
#include <vector>

#include "agp/graph.hpp"
#include "agp/prompt.hpp"

namespace agp {

/// Frozen (or tunable) backbone plus its prompt stack.
struct Model {
  BackboneParams backbone;
  PromptStack prompts;
};

/// Which parameter groups become tape leaves.
struct Trainable {
  bool encoder = false;
  bool head = false;
  bool prompts = false;
};

struct ModelVars {
  BackboneVars backbone;
  std::vector<PromptLayerVars> prompt_layers; // parallel to Model::prompts.layers
  Var gpf;
};

inline ModelVars bind(Tape &t, const Model &m, Trainable tr) {
  ModelVars v;
  v.backbone = bind(t, m.backbone, tr.encoder, tr.head);
  for (const auto &p : m.prompts.layers)
    v.prompt_layers.push_back(PromptLayerVars{
        bind_param(t, p.w_down, tr.prompts), bind_param(t, p.w_up, tr.prompts),
        bind_param(t, p.norm.scale, tr.prompts), bind_param(t, p.norm.shift, tr.prompts)});
  if (m.prompts.scheme == PromptScheme::gpf)
    v.gpf = bind_param(t, m.prompts.gpf, tr.prompts);
  return v;
}

struct NormModes {
  NormMode backbone = NormMode::eval;
  NormMode prompts = NormMode::eval;
};

/// Per-graph tape inputs: node features and (possibly relaxed) adjacency,
/// both before GIN self-loop augmentation.
struct GraphInput {
  Var x;
  Var adjacency;
};

struct ForwardOutput {
  Var logits; // S x T
  EncodeOutput encoded;
  std::vector<BatchStats> prompt_stats; // parallel to Model::prompts.layers, train mode only
};

inline ForwardOutput forward(const Model &m, const ModelVars &v, std::span<const GraphInput> batch,
                             NormModes modes) {
  if (batch.empty())
    throw DataError("forward: empty batch");
  ad::Segments seg{0};
  std::vector<Var> xs, adj;
  for (const auto &g : batch) {
    seg.push_back(seg.back() + g.x.rows());
    xs.push_back(g.x);
    adj.push_back(g.adjacency);
  }
  const Var x = batch.size() == 1 ? batch.front().x : ad::vstack(xs);
  ForwardOutput out;
  out.prompt_stats.resize(m.prompts.layers.size());
  PromptHook hook = [&](std::size_t layer, Var h) -> std::optional<Var> {
    if (m.prompts.scheme == PromptScheme::gpf)
      return layer == 0 ? std::optional<Var>(v.gpf) : std::nullopt;
    for (std::size_t k = 0; k < m.prompts.layers.size(); ++k)
      if (m.prompts.layers[k].layer == layer)
        return ad::compute_prompt(h, v.prompt_layers[k], m.prompts.layers[k], modes.prompts,
                                  &out.prompt_stats[k]);
    return std::nullopt;
  };
  out.encoded = encode_stack(x, adj, seg, m.backbone, v.backbone, modes.backbone, hook);
  out.logits = classify(out.encoded.embedding, v.backbone.head);
  return out;
}

/// Folds train-mode batch statistics into the running estimates.
inline void commit_norm_stats(Model &m, const ForwardOutput &f, NormModes modes) {
  if (modes.prompts == NormMode::train)
    for (std::size_t k = 0; k < m.prompts.layers.size(); ++k)
      update_running(m.prompts.layers[k].norm, f.prompt_stats[k]);
  if (modes.backbone == NormMode::train)
    for (std::size_t l = 0; l < f.encoded.stats.size(); ++l)
      update_running(m.backbone.layers[l].norm, f.encoded.stats[l]);
}

/// Additive perturbation of one graph: E_x (N x D) and E_a (N x N).
struct Noise {
  Matrix e_x;
  Matrix e_a;
};

struct Encoding {
  std::vector<Matrix> per_layer;
  Matrix embedding; // 1 x hidden
  Matrix logits;    // 1 x T
};

/// Evaluation-mode forward of one graph, optionally perturbed by `noise`:
/// features X + E_x, adjacency A + E_a (which must stay binary).
inline Encoding encode(const Graph &g, const Model &m, const Noise *noise = nullptr) {
  Tape t;
  const ModelVars v = bind(t, m, {});
  Matrix x = g.x, a = g.a;
  if (noise) {
    require_same_shape(g.x, noise->e_x, "encode: feature noise");
    require_same_shape(g.a, noise->e_a, "encode: topology noise");
    x += noise->e_x;
    a += noise->e_a;
    if (!((a.array() == 0.0) || (a.array() == 1.0)).all())
      throw DataError("encode: perturbed adjacency is not binary");
  }
  const GraphInput in{t.constant(std::move(x)), t.constant(std::move(a))};
  const ForwardOutput f = forward(m, v, std::span(&in, 1), {});
  Encoding e;
  for (const auto &h : f.encoded.per_layer)
    e.per_layer.push_back(h.value());
  e.embedding = f.encoded.embedding.value();
  e.logits = f.logits.value();
  return e;
}

/// Evaluation-mode logits of a clean graph.
inline Matrix predict(const Graph &g, const Model &m) { return encode(g, m).logits; }

} // namespace agp

#endif
