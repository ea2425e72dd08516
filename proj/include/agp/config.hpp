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


#ifndef AGP_CONFIG_HPP
#define AGP_CONFIG_HPP

#include <charconv>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agp/checkpoint.hpp"
#include "agp/synthetic.hpp"
#include "agp/trainer.hpp"

namespace agp {

inline std::string to_string(TopologySignal s) {
  return s == TopologySignal::triangle_motif ? "triangle_motif" : "two_community";
}

inline TopologySignal parse_topology_signal(const std::string &s) {
  if (s == "triangle_motif")
    return TopologySignal::triangle_motif;
  if (s == "two_community")
    return TopologySignal::two_community;
  throw ConfigError("unknown topology signal '" + s + "'");
}

inline std::string to_string(LabelRule r) {
  switch (r) {
  case LabelRule::feature_only: return "feature_only";
  case LabelRule::topology_only: return "topology_only";
  case LabelRule::joint: return "joint";
  case LabelRule::multitask: return "multitask";
  }
  return "joint";
}

inline LabelRule parse_label_rule(const std::string &s) {
  for (auto r : {LabelRule::feature_only, LabelRule::topology_only, LabelRule::joint,
                 LabelRule::multitask})
    if (to_string(r) == s)
      return r;
  throw ConfigError("unknown label rule '" + s + "'");
}

/// Everything one experiment needs. `data_path` empty means generate
/// `data`; `checkpoint` empty means pretrain on `pretrain_data` first.
struct ExperimentConfig {
  std::string data_path;
  SyntheticSpec data;
  std::uint64_t data_seed = 1; // generation seed, independent of the run seed
  SplitRatios split;

  std::string checkpoint;
  BackboneConfig backbone = [] {
    BackboneConfig b;
    b.num_layers = 3;
    b.hidden_dim = 32;
    return b;
  }();
  SyntheticSpec pretrain_data = [] {
    SyntheticSpec s;
    s.label_rule = LabelRule::multitask;
    s.name = "surrogate";
    return s;
  }();
  std::uint64_t pretrain_seed = 1;
  int pretrain_epochs = 30;
  double pretrain_lr = 1e-2;

  TrainConfig train = [] {
    TrainConfig t;
    t.bottleneck_dim = 8;
    return t;
  }();
  PerturbationBudget attack;
  int eval_repetitions = 5;
  std::vector<AttackMode> eval_attack_modes{AttackMode::node, AttackMode::topology,
                                            AttackMode::hybrid};

  std::string out = "runs/default";
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T> T parse_number(const std::string &key, const std::string &v) {
  T out{};
  const char *first = v.data(), *last = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
  return out;
}

inline double parse_real(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size())
      throw std::invalid_argument(v);
    return d;
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a real");
  }
}

inline bool parse_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1")
    return true;
  if (v == "false" || v == "0")
    return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline std::string fmt_real(double d) {
  std::ostringstream ss;
  ss.precision(17);
  ss << d;
  return ss.str();
}

inline std::vector<double> parse_real_list(const std::string &key, const std::string &v) {
  std::vector<double> out;
  if (v.empty())
    return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_real(key, trim(item)));
  return out;
}

inline std::string fmt_real_list(const std::vector<double> &v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? "," : "") + fmt_real(v[i]);
  return out;
}

} // namespace detail

namespace detail {

inline std::string fmt_attack_modes(const std::vector<AttackMode> &modes) {
  if (modes.empty())
    return "none";
  std::string out;
  for (auto m : modes)
    out += (out.empty() ? "" : ",") + std::string(to_string(m));
  return out;
}

inline std::vector<AttackMode> parse_attack_modes(const std::string &v) {
  std::vector<AttackMode> out;
  if (trim(v) == "none")
    return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_attack_mode(trim(item)));
  if (out.empty())
    throw ConfigError("eval.attack_modes: list is empty; use none");
  return out;
}

} // namespace detail

struct ConfigKey {
  std::string key;
  std::string help;
  std::function<std::string(const ExperimentConfig &)> get;
  std::function<void(ExperimentConfig &, const std::string &)> set;
};

namespace detail {

inline void add_synthetic_keys(std::vector<ConfigKey> &keys, const std::string &prefix,
                               SyntheticSpec ExperimentConfig::*spec) {
  auto k = [&](std::string name, std::string help, auto get, auto set) {
    keys.push_back({prefix + name, std::move(help),
                    [=](const ExperimentConfig &c) { return get(c.*spec); },
                    [=](ExperimentConfig &c, const std::string &v) { set(c.*spec, prefix + name, v); }});
  };
  k("num_graphs", "number of generated graphs",
    [](const SyntheticSpec &s) { return std::to_string(s.num_graphs); },
    [](SyntheticSpec &s, const std::string &key, const std::string &v) {
      s.num_graphs = parse_number<std::size_t>(key, v);
    });
  k("nodes_min", "smallest graph size",
    [](const SyntheticSpec &s) { return std::to_string(s.nodes_min); },
    [](SyntheticSpec &s, const std::string &key, const std::string &v) {
      s.nodes_min = parse_number<Index>(key, v);
    });
  k("nodes_max", "largest graph size",
    [](const SyntheticSpec &s) { return std::to_string(s.nodes_max); },
    [](SyntheticSpec &s, const std::string &key, const std::string &v) {
      s.nodes_max = parse_number<Index>(key, v);
    });
  k("feature_dim", "node feature dimension",
    [](const SyntheticSpec &s) { return std::to_string(s.feature_dim); },
    [](SyntheticSpec &s, const std::string &key, const std::string &v) {
      s.feature_dim = parse_number<Index>(key, v);
    });
  k("edge_prob", "background edge probability",
    [](const SyntheticSpec &s) { return fmt_real(s.edge_prob); },
    [](SyntheticSpec &s, const std::string &key, const std::string &v) {
      s.edge_prob = parse_real(key, v);
    });
  k("feature_signal", "class-mean offset per feature entry",
    [](const SyntheticSpec &s) { return fmt_real(s.feature_signal); },
    [](SyntheticSpec &s, const std::string &key, const std::string &v) {
      s.feature_signal = parse_real(key, v);
    });
  k("feature_noise", "feature noise standard deviation",
    [](const SyntheticSpec &s) { return fmt_real(s.feature_noise); },
    [](SyntheticSpec &s, const std::string &key, const std::string &v) {
      s.feature_noise = parse_real(key, v);
    });
  k("topology", "triangle_motif or two_community",
    [](const SyntheticSpec &s) { return to_string(s.topology_signal); },
    [](SyntheticSpec &s, const std::string &, const std::string &v) {
      s.topology_signal = parse_topology_signal(v);
    });
  k("label_rule", "feature_only, topology_only, joint or multitask",
    [](const SyntheticSpec &s) { return to_string(s.label_rule); },
    [](SyntheticSpec &s, const std::string &, const std::string &v) {
      s.label_rule = parse_label_rule(v);
    });
  k("motif_copies", "triangles planted per motif graph",
    [](const SyntheticSpec &s) { return std::to_string(s.motif_copies); },
    [](SyntheticSpec &s, const std::string &key, const std::string &v) {
      s.motif_copies = parse_number<Index>(key, v);
    });
  k("name", "dataset name",
    [](const SyntheticSpec &s) { return s.name; },
    [](SyntheticSpec &s, const std::string &, const std::string &v) { s.name = v; });
}

} // namespace detail

/// All recognised keys, in snapshot order.
inline const std::vector<ConfigKey> &config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    using C = ExperimentConfig;
    using S = const std::string &;
    std::vector<ConfigKey> k;
    auto add = [&](std::string key, std::string help, std::function<std::string(const C &)> get,
                   std::function<void(C &, S)> set) {
      k.push_back({std::move(key), std::move(help), std::move(get), std::move(set)});
    };
    using detail::fmt_real;
    using detail::parse_bool;
    using detail::parse_number;
    using detail::parse_real;

    add("seed", "global seed", [](const C &c) { return std::to_string(c.seed); },
        [](C &c, S v) { c.seed = parse_number<std::uint64_t>("seed", v); });
    add("out", "output directory", [](const C &c) { return c.out; }, [](C &c, S v) { c.out = v; });

    add("data.path", "JSONL dataset file; empty generates data.*",
        [](const C &c) { return c.data_path; }, [](C &c, S v) { c.data_path = v; });
    detail::add_synthetic_keys(k, "data.", &C::data);
    add("data.seed", "generation seed of data.*", [](const C &c) { return std::to_string(c.data_seed); },
        [](C &c, S v) { c.data_seed = parse_number<std::uint64_t>("data.seed", v); });
    add("split.train", "train fraction", [](const C &c) { return fmt_real(c.split.train); },
        [](C &c, S v) { c.split.train = parse_real("split.train", v); });
    add("split.val", "validation fraction", [](const C &c) { return fmt_real(c.split.val); },
        [](C &c, S v) { c.split.val = parse_real("split.val", v); });
    add("split.test", "test fraction", [](const C &c) { return fmt_real(c.split.test); },
        [](C &c, S v) { c.split.test = parse_real("split.test", v); });

    add("backbone.checkpoint", "pretrained checkpoint; empty pretrains on pretrain.*",
        [](const C &c) { return c.checkpoint; }, [](C &c, S v) { c.checkpoint = v; });
    add("backbone.layers", "GIN layers", [](const C &c) { return std::to_string(c.backbone.num_layers); },
        [](C &c, S v) { c.backbone.num_layers = parse_number<Index>("backbone.layers", v); });
    add("backbone.hidden_dim", "hidden width",
        [](const C &c) { return std::to_string(c.backbone.hidden_dim); },
        [](C &c, S v) { c.backbone.hidden_dim = parse_number<Index>("backbone.hidden_dim", v); });
    add("backbone.mode", "full or linear", [](const C &c) { return to_string(c.backbone.mode); },
        [](C &c, S v) { c.backbone.mode = parse_backbone_mode(v); });
    add("backbone.epsilon_gin", "comma-separated per-layer epsilon; empty means zeros",
        [](const C &c) { return detail::fmt_real_list(c.backbone.epsilon_gin); },
        [](C &c, S v) { c.backbone.epsilon_gin = detail::parse_real_list("backbone.epsilon_gin", v); });
    detail::add_synthetic_keys(k, "pretrain.", &C::pretrain_data);
    add("pretrain.seed", "surrogate data, split and initialization seed",
        [](const C &c) { return std::to_string(c.pretrain_seed); },
        [](C &c, S v) { c.pretrain_seed = parse_number<std::uint64_t>("pretrain.seed", v); });
    add("pretrain.epochs", "surrogate training epochs",
        [](const C &c) { return std::to_string(c.pretrain_epochs); },
        [](C &c, S v) { c.pretrain_epochs = parse_number<int>("pretrain.epochs", v); });
    add("pretrain.lr", "surrogate learning rate", [](const C &c) { return fmt_real(c.pretrain_lr); },
        [](C &c, S v) { c.pretrain_lr = parse_real("pretrain.lr", v); });

    add("train.mode", "agp, agp_s, clean_prompt, gpf, full_ft or linear_probe",
        [](const C &c) { return std::string(to_string(c.train.mode)); },
        [](C &c, S v) { c.train.mode = parse_tuning_mode(v); });
    add("train.gamma", "weight of the clean loss", [](const C &c) { return fmt_real(c.train.gamma); },
        [](C &c, S v) { c.train.gamma = parse_real("train.gamma", v); });
    add("train.eta", "weight of the consistency loss", [](const C &c) { return fmt_real(c.train.eta); },
        [](C &c, S v) { c.train.eta = parse_real("train.eta", v); });
    add("train.lr", "Adam learning rate", [](const C &c) { return fmt_real(c.train.lr); },
        [](C &c, S v) { c.train.lr = parse_real("train.lr", v); });
    add("train.warmup_epochs", "clean-only epochs before attacks",
        [](const C &c) { return std::to_string(c.train.warmup_epochs); },
        [](C &c, S v) { c.train.warmup_epochs = parse_number<int>("train.warmup_epochs", v); });
    add("train.epochs", "adversarial epochs", [](const C &c) { return std::to_string(c.train.epochs); },
        [](C &c, S v) { c.train.epochs = parse_number<int>("train.epochs", v); });
    add("train.batch_size", "graphs per step",
        [](const C &c) { return std::to_string(c.train.batch_size); },
        [](C &c, S v) { c.train.batch_size = parse_number<std::size_t>("train.batch_size", v); });
    add("train.loss_mask", "comma-separated subset of adv,ori,consis",
        [](const C &c) { return to_string(c.train.loss_mask); },
        [](C &c, S v) { c.train.loss_mask = parse_loss_mask(v); });
    add("train.swap_weights", "swap gamma and eta between the clean and consistency terms",
        [](const C &c) { return std::string(c.train.swap_weights ? "true" : "false"); },
        [](C &c, S v) { c.train.swap_weights = parse_bool("train.swap_weights", v); });
    add("train.bottleneck_dim", "prompt bottleneck width",
        [](const C &c) { return std::to_string(c.train.bottleneck_dim); },
        [](C &c, S v) { c.train.bottleneck_dim = parse_number<Index>("train.bottleneck_dim", v); });
    add("train.attack_enabled", "run the inner attack during fine-tuning",
        [](const C &c) { return std::string(c.train.attack_enabled ? "true" : "false"); },
        [](C &c, S v) { c.train.attack_enabled = parse_bool("train.attack_enabled", v); });
    add("train.log_attacked_val", "attack the validation split every epoch",
        [](const C &c) { return std::string(c.train.log_attacked_val ? "true" : "false"); },
        [](C &c, S v) { c.train.log_attacked_val = parse_bool("train.log_attacked_val", v); });

    add("attack.mode", "node, topology or hybrid", [](const C &c) { return std::string(to_string(c.attack.mode)); },
        [](C &c, S v) { c.attack.mode = parse_attack_mode(v); });
    add("attack.epsilon", "feature perturbation radius", [](const C &c) { return fmt_real(c.attack.epsilon); },
        [](C &c, S v) { c.attack.epsilon = parse_real("attack.epsilon", v); });
    add("attack.ratio", "edge budget fraction", [](const C &c) { return fmt_real(c.attack.ratio); },
        [](C &c, S v) { c.attack.ratio = parse_real("attack.ratio", v); });
    add("attack.steps", "PGD iterations", [](const C &c) { return std::to_string(c.attack.steps); },
        [](C &c, S v) { c.attack.steps = parse_number<int>("attack.steps", v); });
    add("attack.alpha", "feature step size", [](const C &c) { return fmt_real(c.attack.alpha); },
        [](C &c, S v) { c.attack.alpha = parse_real("attack.alpha", v); });
    add("attack.beta", "topology step size", [](const C &c) { return fmt_real(c.attack.beta); },
        [](C &c, S v) { c.attack.beta = parse_real("attack.beta", v); });
    add("eval.repetitions", "attack repetitions averaged in evaluation",
        [](const C &c) { return std::to_string(c.eval_repetitions); },
        [](C &c, S v) { c.eval_repetitions = parse_number<int>("eval.repetitions", v); });
    add("eval.attack_modes", "attack modes evaluated after training, or none",
        [](const C &c) { return detail::fmt_attack_modes(c.eval_attack_modes); },
        [](C &c, S v) { c.eval_attack_modes = detail::parse_attack_modes(v); });
    return k;
  }();
  return keys;
}

inline const ConfigKey *find_config_key(const std::string &key) {
  for (const auto &k : config_keys())
    if (k.key == key)
      return &k;
  return nullptr;
}

inline void set_config_value(ExperimentConfig &c, const std::string &key, const std::string &value) {
  const ConfigKey *k = find_config_key(key);
  if (!k)
    throw ConfigError("unknown config key '" + key + "'");
  k->set(c, value);
}

inline void validate(const ExperimentConfig &c) {
  if (c.data_path.empty())
    validate(c.data);
  validate(c.split);
  validate(c.train);
  validate(c.attack);
  if (c.checkpoint.empty()) {
    validate(c.pretrain_data);
    BackboneConfig b = c.backbone;
    b.input_dim = std::max<Index>(1, c.pretrain_data.feature_dim);
    validate(b);
    if (c.pretrain_epochs < 1 || !(c.pretrain_lr > 0.0))
      throw ConfigError("pretrain: epochs must be >= 1 and lr > 0");
  }
  if (c.eval_repetitions < 1)
    throw ConfigError("eval.repetitions must be >= 1");
  if (c.out.empty())
    throw ConfigError("out must not be empty");
}

/// Applies `key = value` lines onto `c`. Blank lines and `#` comments are skipped.
inline void apply_config_text(ExperimentConfig &c, std::istream &in) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    line = detail::trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError &e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline ExperimentConfig parse_config(const std::string &text) {
  ExperimentConfig c;
  std::istringstream in(text);
  apply_config_text(c, in);
  return c;
}

inline void load_config_file(ExperimentConfig &c, const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  apply_config_text(c, in);
}

/// Canonical snapshot: every key, fixed order. parse_config(serialize_config(c))
/// reproduces `c`.
inline std::string serialize_config(const ExperimentConfig &c) {
  std::string out;
  for (const auto &k : config_keys())
    out += k.key + " = " + k.get(c) + "\n";
  return out;
}

} // namespace agp

#endif
