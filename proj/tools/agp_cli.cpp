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


// Command-line front end: pretrain, train, attack, eval, verify-theorem, report.
//
// Exit codes: 0 success, 1 failed check or unexpected error, 2 configuration
// error, 3 data or I/O error, 4 numeric failure. Machine-readable output goes
// to stdout, diagnostics to stderr.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agp/experiment.hpp"
#include "agp/theory.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace agp;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

/// Shortest decimal form that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(const std::optional<double> &v) { return v ? fmt(*v) : std::string(); }

json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw DataError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text))
    throw DataError("cannot write '" + p.string() + "'");
}

/// Output directory that appears under its final name only once complete.
class RunDir {
public:
  explicit RunDir(fs::path target) : target_(std::move(target)) {
    if (fs::exists(target_))
      throw ConfigError("output directory '" + target_.string() + "' already exists");
    staging_ = target_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  RunDir(const RunDir &) = delete;
  RunDir &operator=(const RunDir &) = delete;
  ~RunDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  fs::path path(const std::string &name) const { return staging_ / name; }
  void write(const std::string &name, const std::string &text) const { write_file(path(name), text); }

  void commit() {
    fs::rename(staging_, target_);
    committed_ = true;
  }

private:
  fs::path target_, staging_;
  bool committed_ = false;
};

std::string method_label(const TrainConfig &t) {
  std::string label = to_string(t.mode);
  if ((t.mode == TuningMode::agp || t.mode == TuningMode::agp_s) && !(t.loss_mask == LossMask{}))
    label += "[" + to_string(t.loss_mask) + "]";
  return label;
}

std::string log_csv(const std::vector<EpochLog> &log) {
  std::string out = "epoch,phase,clean_loss,adv_loss,consis_loss,val_auc_clean,val_auc_attacked\n";
  for (const auto &r : log)
    out += std::to_string(r.epoch) + (r.warmup ? ",warmup," : ",tune,") + fmt(r.clean_loss) + "," +
           fmt(r.adv_loss) + "," + fmt(r.consis_loss) + "," + fmt(r.val_auc_clean) + "," +
           fmt(r.val_auc_attacked) + "\n";
  return out;
}

json per_task_json(const EvalResult &r) {
  json a = json::array();
  for (const auto &t : r.per_task)
    a.push_back(optional_json(t));
  return a;
}

json robustness_json(const RobustnessReport &r) {
  json j;
  j["clean_auc"] = r.clean.mean_auc;
  j["per_task"] = per_task_json(r.clean);
  json attacked = json::object();
  for (const auto &[mode, e] : r.attacked)
    attacked[to_string(mode)] = {{"attacked_auc", e.mean_auc}, {"drop", e.drop},
                                 {"per_task", per_task_json(e)}};
  j["attacked"] = attacked;
  return j;
}

// ---------------------------------------------------------------------------
// Shared options

struct CommonOptions {
  std::string config_file;
  std::string run_dir;
  std::string model_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  bool deterministic = false;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option *> flags;
};

CommonOptions &add_common(CLI::App *sub, std::vector<std::unique_ptr<CommonOptions>> &store,
                          bool with_model) {
  store.push_back(std::make_unique<CommonOptions>());
  CommonOptions &o = *store.back();
  sub->add_option("--config", o.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "global seed (same as --seed key)");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--mode", o.mode, "attack mode: node, topology or hybrid")
      ->check(CLI::IsMember({"node", "topology", "hybrid"}));
  sub->add_flag("--deterministic", o.deterministic,
                "single-threaded execution (all commands are already single-threaded)");
  if (with_model) {
    sub->add_option("--run", o.run_dir, "run directory written by train: reuses its config and checkpoint")
        ->check(CLI::ExistingDirectory);
    sub->add_option("--model", o.model_path, "tuned model checkpoint (overrides --run)")
        ->check(CLI::ExistingFile);
  }
  auto *group = sub->add_option_group("config keys", "override any configuration key");
  for (const auto &k : config_keys()) {
    if (k.key == "seed" || k.key == "out")
      continue;
    o.flags[k.key] = group->add_option("--" + k.key, o.values[k.key], k.help)
                         ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
  return o;
}

/// Defaults, then the run snapshot, the config file, key flags and shorthands.
ExperimentConfig resolve_config(const CommonOptions &o) {
  ExperimentConfig c;
  if (!o.run_dir.empty())
    load_config_file(c, (fs::path(o.run_dir) / "config.txt").string());
  if (!o.config_file.empty())
    load_config_file(c, o.config_file);
  for (const auto &k : config_keys())
    if (auto it = o.flags.find(k.key); it != o.flags.end() && it->second->count() > 0)
      set_config_value(c, k.key, o.values.at(k.key));
  if (o.seed)
    c.seed = *o.seed;
  if (o.out)
    c.out = *o.out;
  if (o.mode)
    c.attack.mode = parse_attack_mode(*o.mode);
  if (o.deterministic)
    Eigen::setNbThreads(1);
  validate(c);
  return c;
}

Model resolve_model(const CommonOptions &o) {
  if (!o.model_path.empty())
    return load_checkpoint(o.model_path);
  if (!o.run_dir.empty())
    return load_checkpoint((fs::path(o.run_dir) / "checkpoint.json").string());
  throw ConfigError("a tuned model is required: pass --run <dir> or --model <file>");
}

json meta_json(const std::string &command, const ExperimentConfig &c, const Dataset &d,
               bool deterministic) {
  return {{"command", command},
          {"dataset_hash", dataset_hash(d)},
          {"dataset_name", d.name},
          {"num_graphs", d.size()},
          {"seed", c.seed},
          {"method", method_label(c.train)},
          {"deterministic", deterministic}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_pretrain(const CommonOptions &o) {
  const ExperimentConfig c = resolve_config(o);
  RunDir dir(c.out);
  std::cerr << "pretraining on " << c.pretrain_data.num_graphs << " surrogate graphs\n";
  const PretrainOutcome p = pretrain_backbone(c);
  const Dataset surrogate = generate_synthetic(c.pretrain_data, c.pretrain_seed);
  const fs::path ckpt = fs::path(c.out) / "checkpoint.json";
  dir.write("config.txt", serialize_config(c));
  dir.write("log.csv", log_csv(p.result.log));
  dir.write("checkpoint.json", serialize_checkpoint(p.result.model));
  json meta = meta_json("pretrain", c, surrogate, o.deterministic);
  meta.erase("method");
  dir.write("meta.json", meta.dump(2) + "\n");
  const json metrics = {{"val_auc", p.val.mean_auc}, {"test_auc", p.test.mean_auc},
                        {"val_per_task", per_task_json(p.val)}};
  dir.write("metrics.json", metrics.dump(2) + "\n");
  dir.commit();
  std::cout << json{{"checkpoint", ckpt.string()}, {"val_auc", p.val.mean_auc},
                    {"test_auc", p.test.mean_auc}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const CommonOptions &o) {
  const ExperimentConfig c = resolve_config(o);
  RunDir dir(c.out);
  const Dataset data = experiment_dataset(c);
  const DatasetSplit s = experiment_split(c, data);
  std::cerr << "dataset " << data.name << ": " << data.size() << " graphs, split "
            << s.train.size() << "/" << s.val.size() << "/" << s.test.size() << "\n";
  const BackboneParams backbone = experiment_backbone(c, data.feature_dim);
  std::cerr << "tuning with " << method_label(c.train) << "\n";
  const TrainResult r = experiment_tune(c, s, backbone);
  const RobustnessReport eval = evaluate_robustness(c, r.model, s.test);

  dir.write("config.txt", serialize_config(c));
  dir.write("log.csv", log_csv(r.log));
  dir.write("checkpoint.json", serialize_checkpoint(r.model));
  dir.write("meta.json", meta_json("train", c, data, o.deterministic).dump(2) + "\n");
  json metrics = robustness_json(eval);
  metrics["trainable_parameters"] = trainable_parameter_count(r.model);
  dir.write("metrics.json", metrics.dump(2) + "\n");
  dir.commit();

  json summary{{"out", c.out}, {"method", method_label(c.train)}, {"clean_auc", eval.clean.mean_auc}};
  for (const auto &[mode, e] : eval.attacked)
    summary[std::string(to_string(mode)) + "_auc"] = e.mean_auc;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_attack(const CommonOptions &o) {
  const ExperimentConfig c = resolve_config(o);
  const Model m = resolve_model(o);
  const Dataset data = experiment_dataset(c);
  const DatasetSplit s = experiment_split(c, data);
  const std::uint64_t base = derive_seed(c.seed, 0xa7ac);
  for (std::size_t i = 0; i < s.test.size(); ++i) {
    const Graph &g = s.test.graphs[i];
    Rng rng = attack_rng(base, i);
    const AdversarialSample a = run_attack(g, m, c.attack, rng);
    const Noise n = a.noise();
    const json rec{{"graph_id", i},
                   {"mode", to_string(c.attack.mode)},
                   {"clean_loss", perturbed_loss(g, m)},
                   {"adv_loss", perturbed_loss(g, m, &n)},
                   {"flips_used", count_nonzero(a.e_a) / 2},
                   {"linf_used", max_abs(a.e_x)}};
    std::cout << rec.dump() << "\n";
  }
  return 0;
}

int cmd_eval(const CommonOptions &o) {
  const ExperimentConfig c = resolve_config(o);
  const Model m = resolve_model(o);
  const Dataset data = experiment_dataset(c);
  const DatasetSplit s = experiment_split(c, data);
  const EvalResult r = evaluate(m, s.test, experiment_attack(c, c.attack.mode));
  const EvalResult clean = evaluate(m, s.test);
  json tasks = json::array();
  for (std::size_t t = 0; t < r.per_task.size(); ++t)
    tasks.push_back({{"task", t},
                     {"clean_auc", optional_json(clean.per_task[t])},
                     {"attacked_auc", optional_json(r.per_task[t])}});
  std::cout << json{{"mode", to_string(c.attack.mode)},
                    {"clean_auc", r.clean_auc},
                    {"attacked_auc", r.mean_auc},
                    {"drop", r.drop},
                    {"per_task", tasks}}
                   .dump()
            << "\n";
  return 0;
}

struct VerifyOptions {
  int scenarios = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
  double input_only_tolerance = 1e-12;
};

int cmd_verify(const VerifyOptions &o) {
  if (o.scenarios < 1)
    throw ConfigError("--scenarios must be >= 1");
  Rng rng(derive_seed(o.seed, 0x7e0));
  json list = json::array();
  double worst = 0.0;
  for (int k = 0; k < o.scenarios; ++k) {
    const TheoremInstance inst = sample_theorem_instance(rng, {});
    const TheoremCheck chk = verify_theorem1(inst.scenario, inst.backbone);
    worst = std::max(worst, chk.deviation);
    list.push_back({{"nodes", inst.scenario.x_hat.rows()},
                    {"layers", inst.backbone.config.num_layers},
                    {"deviation", chk.deviation},
                    {"conditions", chk.conditions},
                    {"rejections", inst.rejections},
                    {"pass", chk.deviation <= o.tolerance}});
  }
  ScenarioOptions feature_only;
  feature_only.topology_noise = false;
  double worst_input = 0.0;
  for (int k = 0; k < o.scenarios; ++k) {
    const TheoremInstance inst = sample_theorem_instance(rng, feature_only);
    worst_input = std::max(worst_input, verify_theorem1(inst.scenario, inst.backbone, true).deviation);
  }
  json cases = json::array();
  bool cases_ok = true;
  for (const auto &c : figure4_cases()) {
    cases_ok = cases_ok && c.deviation == 0.0;
    cases.push_back({{"case", c.name}, {"deviation", c.deviation}, {"pass", c.deviation == 0.0}});
  }
  const bool ok = worst <= o.tolerance && worst_input <= o.input_only_tolerance && cases_ok;
  const json report{{"tolerance", o.tolerance},
                    {"max_deviation", worst},
                    {"scenarios", list},
                    {"input_only", {{"scenarios", o.scenarios},
                                    {"tolerance", o.input_only_tolerance},
                                    {"max_deviation", worst_input},
                                    {"pass", worst_input <= o.input_only_tolerance}}},
                    {"aggregation_cases", cases},
                    {"pass", ok}};
  std::cout << report.dump(2) << "\n";
  return ok ? 0 : kExitFailure;
}

struct ReportOptions {
  std::vector<std::string> runs;
  std::string out;
};

struct Column {
  std::string name;
  std::vector<double> values;
};

std::pair<double, double> mean_std(const std::vector<double> &v) {
  double m = 0.0;
  for (double x : v)
    m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v)
    ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

int cmd_report(const ReportOptions &o) {
  const std::vector<std::string> columns{"clean", "node", "topology", "hybrid"};
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, std::vector<double>>> table;
  std::map<std::string, int> runs;
  std::optional<std::string> hash;
  for (const auto &dir : o.runs) {
    const json meta = json::parse(read_file(fs::path(dir) / "meta.json"));
    const json metrics = json::parse(read_file(fs::path(dir) / "metrics.json"));
    if (meta.value("command", "") != "train")
      throw DataError("'" + dir + "' is not a train run");
    const std::string h = meta.at("dataset_hash").get<std::string>();
    if (hash && *hash != h)
      throw DataError("'" + dir + "' was run on a different dataset (hash " + h + ", expected " +
                      *hash + ")");
    hash = h;
    const std::string method = meta.at("method").get<std::string>();
    if (!runs.count(method))
      order.push_back(method);
    ++runs[method];
    auto &row = table[method];
    row["clean"].push_back(metrics.at("clean_auc").get<double>());
    for (const auto &[mode, e] : metrics.at("attacked").items())
      row[mode].push_back(e.at("attacked_auc").get<double>());
  }

  // Column-wise best mean; only complete columns compete.
  std::map<std::string, double> best;
  for (const auto &col : columns)
    for (const auto &m : order) {
      const auto &v = table[m][col];
      if (static_cast<int>(v.size()) == runs[m]) {
        const double mean = mean_std(v).first;
        if (!best.count(col) || mean > best[col])
          best[col] = mean;
      }
    }

  std::string csv = "method,runs";
  for (const auto &col : columns)
    csv += "," + col + "_mean," + col + "_std";
  csv += "\n";
  std::ostringstream text;
  text << std::left << std::setw(28) << "method" << std::setw(6) << "runs";
  for (const auto &col : columns)
    text << std::setw(18) << col;
  text << "\n";
  for (const auto &m : order) {
    csv += m + "," + std::to_string(runs[m]);
    text << std::setw(28) << m << std::setw(6) << runs[m];
    for (const auto &col : columns) {
      const auto &v = table[m][col];
      if (static_cast<int>(v.size()) != runs[m]) {
        csv += ",,";
        text << std::setw(18) << "-";
        continue;
      }
      const auto [mean, sd] = mean_std(v);
      csv += "," + fmt(mean) + "," + fmt(sd);
      const bool top = best.count(col) && mean == best[col];
      text << std::setw(18) << (fixed(100 * mean, 2) + " +- " + fixed(100 * sd, 2) + (top ? " *" : ""));
    }
    csv += "\n";
    text << "\n";
  }
  text << "AUC x 100, mean +- std over runs; * marks the best mean per column\n";
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "report.csv", csv);
    write_file(fs::path(o.out) / "report.txt", text.str());
  }
  std::cout << csv;
  std::cerr << text.str();
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Adversarial graph prompt tuning: training, attacks and robustness reports"};
  app.footer("Exit codes: 0 ok, 1 failed check, 2 configuration error, 3 data/I-O error, "
             "4 numeric failure.");
  app.require_subcommand(1);
  std::vector<std::unique_ptr<CommonOptions>> store;

  auto *pretrain_cmd = app.add_subcommand("pretrain", "train a backbone on the surrogate task");
  auto &pretrain_opts = add_common(pretrain_cmd, store, false);
  auto *train_cmd = app.add_subcommand("train", "fine-tune a frozen backbone and evaluate it");
  auto &train_opts = add_common(train_cmd, store, false);
  auto *attack_cmd = app.add_subcommand("attack", "attack every test graph; JSON lines on stdout");
  auto &attack_opts = add_common(attack_cmd, store, true);
  auto *eval_cmd = app.add_subcommand("eval", "clean and attacked ROC-AUC on the test split");
  auto &eval_opts = add_common(eval_cmd, store, true);

  VerifyOptions verify;
  auto *verify_cmd = app.add_subcommand("verify-theorem", "check exact noise cancellation of the closed-form prompts");
  verify_cmd->add_option("--scenarios", verify.scenarios, "random scenarios per check");
  verify_cmd->add_option("--seed", verify.seed, "scenario seed");
  verify_cmd->add_flag("--deterministic", "accepted for symmetry; the check is single-threaded");

  ReportOptions report;
  auto *report_cmd = app.add_subcommand("report", "mean +- std table over train run directories");
  report_cmd->add_option("runs", report.runs, "run directories")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report.out, "also write report.csv and report.txt here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*pretrain_cmd)
      return cmd_pretrain(pretrain_opts);
    if (*train_cmd)
      return cmd_train(train_opts);
    if (*attack_cmd)
      return cmd_attack(attack_opts);
    if (*eval_cmd)
      return cmd_eval(eval_opts);
    if (*verify_cmd)
      return cmd_verify(verify);
    if (*report_cmd)
      return cmd_report(report);
  } catch (const ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError &e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error &e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
