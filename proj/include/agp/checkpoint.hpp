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


#ifndef AGP_CHECKPOINT_HPP
#define AGP_CHECKPOINT_HPP

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "agp/model.hpp"

namespace agp {

inline std::string to_string(BackboneMode m) { return m == BackboneMode::full ? "full" : "linear"; }

inline BackboneMode parse_backbone_mode(const std::string &s) {
  if (s == "full")
    return BackboneMode::full;
  if (s == "linear")
    return BackboneMode::linear;
  throw ConfigError("unknown backbone mode '" + s + "' (expected full or linear)");
}

inline std::string to_string(PromptScheme s) {
  switch (s) {
  case PromptScheme::none: return "none";
  case PromptScheme::agp: return "agp";
  case PromptScheme::agp_s: return "agp_s";
  case PromptScheme::gpf: return "gpf";
  }
  return "none";
}

inline PromptScheme parse_prompt_scheme(const std::string &s) {
  for (auto v : {PromptScheme::none, PromptScheme::agp, PromptScheme::agp_s, PromptScheme::gpf})
    if (to_string(v) == s)
      return v;
  throw ConfigError("unknown prompt scheme '" + s + "'");
}

namespace detail {

template <class ModelT, class Fn> void for_each_tensor(ModelT &m, Fn &&fn) {
  auto norm = [&](const std::string &p, auto &n) {
    fn(p + "norm.scale", n.scale);
    fn(p + "norm.shift", n.shift);
    fn(p + "norm.running_mean", n.running_mean);
    fn(p + "norm.running_var", n.running_var);
  };
  for (std::size_t l = 0; l < m.backbone.layers.size(); ++l) {
    auto &L = m.backbone.layers[l];
    const std::string p = "encoder.l" + std::to_string(l) + ".";
    fn(p + "w1", L.w1);
    if (m.backbone.config.mode == BackboneMode::full) {
      fn(p + "b1", L.b1);
      fn(p + "w2", L.w2);
      fn(p + "b2", L.b2);
      norm(p, L.norm);
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    fn("head.w" + std::to_string(k), m.backbone.head.w[k]);
    fn("head.b" + std::to_string(k), m.backbone.head.b[k]);
  }
  for (auto &P : m.prompts.layers) {
    const std::string p = "prompt.l" + std::to_string(P.layer) + ".";
    fn(p + "w_down", P.w_down);
    fn(p + "w_up", P.w_up);
    norm(p, P.norm);
  }
  if (m.prompts.scheme == PromptScheme::gpf)
    fn(std::string("prompt.gpf"), m.prompts.gpf);
}

inline nlohmann::json tensor_to_json(const Matrix &t) {
  nlohmann::json data = nlohmann::json::array();
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j)
      data.push_back(t(i, j));
  return {{"shape", {t.rows(), t.cols()}}, {"data", std::move(data)}};
}

inline Matrix tensor_from_json(const nlohmann::json &j, const std::string &name) {
  const auto &shape = j.at("shape");
  const auto &data = j.at("data");
  const Index r = shape.at(0).get<Index>(), c = shape.at(1).get<Index>();
  if (r < 0 || c < 0 || static_cast<Index>(data.size()) != r * c)
    throw DataError("checkpoint: tensor '" + name + "' has inconsistent shape and data");
  Matrix t(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j2 = 0; j2 < c; ++j2)
      t(i, j2) = data[static_cast<std::size_t>(i * c + j2)].get<double>();
  return t;
}

} // namespace detail

inline constexpr const char *kCheckpointFormat = "agp-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Self-describing JSON container: configuration plus named tensors.
/// Doubles are written in shortest round-trip form, so load(save(m)) == m bitwise.
inline std::string serialize_checkpoint(const Model &m) {
  const auto &c = m.backbone.config;
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["backbone"] = {{"input_dim", c.input_dim},       {"num_layers", c.num_layers},
                   {"hidden_dim", c.hidden_dim},     {"mode", to_string(c.mode)},
                   {"epsilon_gin", c.epsilon_gin},   {"task_count", c.task_count},
                   {"encoder_frozen", m.backbone.encoder_frozen},
                   {"head_frozen", m.backbone.head_frozen}};
  nlohmann::json layers = nlohmann::json::array();
  Index bottleneck = 0;
  for (const auto &p : m.prompts.layers) {
    layers.push_back(p.layer);
    bottleneck = p.w_down.cols();
  }
  j["prompts"] = {{"scheme", to_string(m.prompts.scheme)},
                  {"layers", std::move(layers)},
                  {"bottleneck_dim", bottleneck}};
  nlohmann::json tensors = nlohmann::json::object();
  detail::for_each_tensor(m, [&](const std::string &name, const Matrix &t) {
    tensors[name] = detail::tensor_to_json(t);
  });
  j["tensors"] = std::move(tensors);
  return j.dump() + "\n";
}

inline Model parse_checkpoint(const std::string &text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("checkpoint: not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw DataError("checkpoint: unrecognised format tag");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw DataError("checkpoint: unsupported version " + j.at("version").dump());
    const auto &b = j.at("backbone");
    Model m;
    auto &c = m.backbone.config;
    c.input_dim = b.at("input_dim").get<Index>();
    c.num_layers = b.at("num_layers").get<Index>();
    c.hidden_dim = b.at("hidden_dim").get<Index>();
    c.mode = parse_backbone_mode(b.at("mode").get<std::string>());
    c.epsilon_gin = b.at("epsilon_gin").get<std::vector<double>>();
    c.task_count = b.at("task_count").get<Index>();
    validate(c);
    m.backbone.encoder_frozen = b.at("encoder_frozen").get<bool>();
    m.backbone.head_frozen = b.at("head_frozen").get<bool>();
    m.backbone.layers.resize(static_cast<std::size_t>(c.num_layers));

    const auto &p = j.at("prompts");
    m.prompts.scheme = parse_prompt_scheme(p.at("scheme").get<std::string>());
    for (const auto &l : p.at("layers")) {
      PromptLayer pl;
      pl.layer = l.get<std::size_t>();
      m.prompts.layers.push_back(std::move(pl));
    }

    const auto &tensors = j.at("tensors");
    std::size_t used = 0;
    detail::for_each_tensor(m, [&](const std::string &name, Matrix &t) {
      const auto it = tensors.find(name);
      if (it == tensors.end())
        throw DataError("checkpoint: missing tensor '" + name + "'");
      t = detail::tensor_from_json(*it, name);
      ++used;
    });
    if (used != tensors.size())
      throw DataError("checkpoint: " + std::to_string(tensors.size() - used) +
                      " unexpected tensor(s)");
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("checkpoint: malformed field: ") + e.what());
  }
}

inline void save_checkpoint(const Model &m, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot open '" + path + "' for writing");
  out << serialize_checkpoint(m);
  if (!out)
    throw DataError("write failed for '" + path + "'");
}

inline Model load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

/// Bitwise equality of every stored tensor and config field.
inline bool same_model(const Model &a, const Model &b) {
  return serialize_checkpoint(a) == serialize_checkpoint(b);
}

} // namespace agp

#endif
