// Copyright 2026 The bnparam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bnparam/core/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "bnparam/core/errors.hpp"
#include "bnparam/core/inference.hpp"
#include "bnparam/core/rng.hpp"

namespace bnp {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::vector<DataCase> forward_sample(const Network& net, std::size_t n, std::uint64_t seed) {
  const NetworkStructure& s = net.structure;
  Rng rng(seed);
  std::vector<DataCase> out;
  out.reserve(n);
  std::vector<std::size_t> pa;
  for (std::size_t l = 0; l < n; ++l) {
    DataCase c(s.size());
    for (std::size_t i : s.topo_order()) {
      pa.clear();
      for (std::size_t p : s.parents(i)) pa.push_back(static_cast<std::size_t>(c.values[p]));
      const std::size_t j = s.parent_config_index(i, pa);
      c.values[i] = static_cast<StateIndex>(rng.categorical(net.theta[i].row(j)));
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::size_t> resolve_names(const NetworkStructure& s,
                                       const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& name : names) {
    const auto idx = s.index_of(name);
    if (!idx) throw InputError("unknown variable '" + name + "'");
    if (std::find(out.begin(), out.end(), *idx) != out.end())
      throw InputError("variable '" + name + "' listed twice");
    out.push_back(*idx);
  }
  return out;
}

std::vector<std::string> split_csv_list(std::string_view text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    std::string item(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw InputError("empty item in list '" + std::string(text) + "'");
    out.push_back(item.substr(b, e - b + 1));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<DataCase> obscure(const NetworkStructure& s, std::vector<DataCase> cases,
                              const MissingnessSpec& spec) {
  if (!(spec.obscure_prob >= 0.0 && spec.obscure_prob <= 1.0))
    throw InputError("obscure probability must lie in [0, 1]");
  const std::vector<std::size_t> hidden_idx = resolve_names(s, spec.hidden);
  std::vector<bool> hidden(s.size(), false);
  for (std::size_t h : hidden_idx) hidden[h] = true;
  for (std::size_t l = 0; l < cases.size(); ++l) {
    DataCase& c = cases[l];
    if (c.values.size() != s.size()) throw InputError("case width does not match the network");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (hidden[i] || keyed_uniform(spec.seed, l, i) < spec.obscure_prob) c.values[i] = kMissing;
    }
  }
  return cases;
}

namespace {

QueryError compare_posteriors(const std::vector<double>& p, const std::vector<double>& ref) {
  QueryError q;
  double rel = 0.0;
  std::size_t rel_n = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double a = std::abs(p[k] - ref[k]);
    q.per_state_absolute.push_back(a);
    q.absolute += a;
    if (ref[k] > 0.0) {
      rel += a / ref[k];
      ++rel_n;
    } else {
      ++q.zero_reference;
    }
  }
  q.absolute /= static_cast<double>(p.size());
  if (rel_n > 0) q.relative = rel / static_cast<double>(rel_n);
  return q;
}

void require_same_structure(const Network& a, const Network& b) {
  if (!(a.structure == b.structure))
    throw InputError("learned and reference networks have different structures");
}

DataCase without(const DataCase& c, std::size_t target) {
  DataCase e = c;
  e.values.at(target) = kMissing;
  return e;
}

}  // namespace

QueryError query_error(const Network& learned, const Network& truth, const DataCase& c,
                       std::size_t target) {
  require_same_structure(learned, truth);
  if (target >= truth.structure.size()) throw InputError("target index out of range");
  const DataCase e = without(c, target);
  const auto p = InferenceEngine(learned.structure).variable_posterior(learned.theta, e, target);
  const auto ref = InferenceEngine(truth.structure).variable_posterior(truth.theta, e, target);
  return compare_posteriors(p, ref);
}

EvalReport evaluate(const Network& learned, const Network& truth, const DataSet& data,
                    const std::vector<std::size_t>& targets) {
  require_same_structure(learned, truth);
  if (data.empty()) throw InputError("evaluation dataset is empty");
  if (targets.empty()) throw InputError("no evaluation targets");
  const InferenceEngine engine(truth.structure);
  EvalReport rep;
  double abs_total = 0.0, rel_total = 0.0;
  std::size_t rel_n = 0;
  for (std::size_t target : targets) {
    TargetErrors te;
    te.name = truth.structure.variable(target).name;
    te.per_state_absolute.assign(truth.structure.arity(target), 0.0);
    double rel = 0.0;
    std::size_t n_rel = 0;
    for (std::size_t l = 0; l < data.size(); ++l) {
      const DataCase e = without(data.cases[l], target);
      QueryError q;
      try {
        q = compare_posteriors(engine.variable_posterior(learned.theta, e, target),
                               engine.variable_posterior(truth.theta, e, target));
      } catch (const ZeroProbabilityEvidence&) {
        throw ZeroProbabilityEvidence(l, "evaluating target " + te.name);
      }
      te.mean_absolute += q.absolute;
      for (std::size_t k = 0; k < q.per_state_absolute.size(); ++k)
        te.per_state_absolute[k] += q.per_state_absolute[k];
      if (q.relative) {
        rel += *q.relative;
        ++n_rel;
      }
      te.zero_reference += q.zero_reference;
      ++te.cases;
    }
    abs_total += te.mean_absolute;
    rel_total += rel;
    rel_n += n_rel;
    te.mean_absolute /= static_cast<double>(te.cases);
    for (double& v : te.per_state_absolute) v /= static_cast<double>(te.cases);
    if (n_rel > 0) te.mean_relative = rel / static_cast<double>(n_rel);
    rep.targets.push_back(std::move(te));
  }
  rep.mean_absolute = abs_total / static_cast<double>(data.size() * targets.size());
  if (rel_n > 0) rep.mean_relative = rel_total / static_cast<double>(rel_n);
  return rep;
}

namespace {

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson eval_to_json(const EvalReport& r) {
  ojson j;
  j["mean_absolute"] = r.mean_absolute;
  j["mean_relative"] = optional_number(r.mean_relative);
  auto targets = ojson::array();
  for (const auto& t : r.targets) {
    ojson tj;
    tj["name"] = t.name;
    tj["mean_absolute"] = t.mean_absolute;
    tj["mean_relative"] = optional_number(t.mean_relative);
    tj["per_state_absolute"] = t.per_state_absolute;
    tj["cases"] = t.cases;
    tj["zero_reference"] = t.zero_reference;
    targets.push_back(tj);
  }
  j["targets"] = targets;
  return j;
}

}  // namespace

std::string eval_report_json(const EvalReport& report) {
  return eval_to_json(report).dump(2) + "\n";
}

namespace {

struct BuiltinVar {
  const char* name;
  std::size_t arity;
  std::vector<const char*> parents;
  std::vector<std::vector<double>> cpt;
};

Network assemble(const char* name, const std::vector<BuiltinVar>& spec) {
  std::vector<Variable> vars;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    Variable v;
    v.index = i;
    v.name = spec[i].name;
    for (std::size_t k = 0; k < spec[i].arity; ++k) v.states.push_back("s" + std::to_string(k));
    vars.push_back(std::move(v));
  }
  auto index = [&](const char* n) {
    for (std::size_t i = 0; i < spec.size(); ++i)
      if (std::string_view(spec[i].name) == n) return i;
    throw InputError(std::string("built-in network refers to unknown variable ") + n);
  };
  std::vector<std::vector<std::size_t>> parents;
  for (const auto& v : spec) {
    parents.emplace_back();
    for (const char* p : v.parents) parents.back().push_back(index(p));
  }
  NetworkStructure s(std::move(vars), std::move(parents));
  ParameterVector theta(s);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec[i].cpt.size() != s.rows(i)) throw InputError("built-in CPT has the wrong row count");
    for (std::size_t j = 0; j < s.rows(i); ++j) {
      auto row = theta[i].row(j);
      std::copy(spec[i].cpt[j].begin(), spec[i].cpt[j].end(), row.begin());
      renormalize(row);
    }
  }
  return make_network(name, std::move(s), std::move(theta), 1e-6);
}

Network chain3() {
  return assemble("chain3", {
      {"A", 2, {}, {{0.3, 0.7}}},
      {"B", 2, {"A"}, {{0.8, 0.2}, {0.25, 0.75}}},
      {"C", 2, {"B"}, {{0.9, 0.1}, {0.2, 0.8}}},
  });
}

Network tree8() {
  return assemble("tree8", {
      {"R", 3, {}, {{0.5, 0.3, 0.2}}},
      {"A", 2, {"R"}, {{0.85, 0.15}, {0.4, 0.6}, {0.1, 0.9}}},
      {"B", 2, {"R"}, {{0.3, 0.7}, {0.75, 0.25}, {0.5, 0.5}}},
      {"C", 2, {"A"}, {{0.9, 0.1}, {0.35, 0.65}}},
      {"D", 3, {"A"}, {{0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}}},
      {"E", 2, {"B"}, {{0.2, 0.8}, {0.7, 0.3}}},
      {"F", 2, {"B"}, {{0.55, 0.45}, {0.05, 0.95}}},
      {"G", 2, {"D"}, {{0.95, 0.05}, {0.5, 0.5}, {0.15, 0.85}}},
  });
}

Network dag15() {
  return assemble("dag15", {
      {"H0", 2, {}, {{0.68, 0.32}}},
      {"H1", 2, {}, {{0.68, 0.32}}},
      {"H2", 2, {}, {{0.32, 0.68}}},
      {"U0", 2, {}, {{0.33, 0.67}}},
      {"U1", 2, {}, {{0.63, 0.37}}},
      {"X0", 2, {"H0", "U0"}, {{0.77, 0.23}, {0.73, 0.27}, {0.24, 0.76}, {0.24, 0.76}}},
      {"X1", 2, {"H0", "H1"}, {{0.72, 0.28}, {0.74, 0.26}, {0.26, 0.74}, {0.23, 0.77}}},
      {"X2", 2, {"H1", "U1"}, {{0.79, 0.21}, {0.75, 0.25}, {0.26, 0.74}, {0.27, 0.73}}},
      {"X3", 2, {"H2", "U0"}, {{0.3, 0.7}, {0.25, 0.75}, {0.73, 0.27}, {0.74, 0.26}}},
      {"X4", 2, {"H0", "H2"}, {{0.75, 0.25}, {0.76, 0.24}, {0.28, 0.72}, {0.3, 0.7}}},
      {"X5", 2, {"H1", "H2"}, {{0.29, 0.71}, {0.25, 0.75}, {0.8, 0.2}, {0.77, 0.23}}},
      {"X6", 2, {"H2", "U1"}, {{0.21, 0.79}, {0.22, 0.78}, {0.77, 0.23}, {0.79, 0.21}}},
      {"X7", 2, {"H0", "U1"}, {{0.78, 0.22}, {0.74, 0.26}, {0.2, 0.8}, {0.2, 0.8}}},
      {"X8", 2, {"H1", "U0"}, {{0.22, 0.78}, {0.23, 0.77}, {0.75, 0.25}, {0.75, 0.25}}},
      {"X9", 2, {"H2", "H1"}, {{0.21, 0.79}, {0.25, 0.75}, {0.78, 0.22}, {0.74, 0.26}}},
  });
}

}  // namespace

Network builtin_network(std::string_view name) {
  if (name == "chain3") return chain3();
  if (name == "tree8") return tree8();
  if (name == "dag15") return dag15();
  throw InputError("unknown built-in network '" + std::string(name) +
                   "' (expected chain3, tree8 or dag15)");
}

std::vector<std::string> builtin_network_names() { return {"chain3", "tree8", "dag15"}; }

Network load_network_ref(const std::string& ref) {
  constexpr std::string_view kPrefix = "builtin:";
  if (ref.rfind(kPrefix, 0) == 0) return builtin_network(std::string_view(ref).substr(kPrefix.size()));
  return load_network_file(ref);
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ stream);
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text, const std::string& base_dir) {
  static const std::set<std::string> kKeys = {
      "network", "train_size", "test_size", "hidden",  "obscure_prob", "targets", "seed",
      "init",    "init_seed",  "max_iters", "tol_ll",  "tol_param",    "arms"};
  ExperimentConfig cfg;
  try {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    if (!j.is_object()) throw InputError("experiment config must be a JSON object");
    for (const auto& [key, _] : j.items())
      if (!kKeys.count(key)) throw InputError("unknown experiment config key '" + key + "'");
    if (!j.contains("network")) throw InputError("experiment config needs 'network'");
    cfg.network = j.at("network").get<std::string>();
    if (cfg.network.rfind("builtin:", 0) != 0 && fs::path(cfg.network).is_relative())
      cfg.network = (fs::path(base_dir) / cfg.network).string();
    cfg.train_size = get_or<std::size_t>(j, "train_size", cfg.train_size);
    cfg.test_size = get_or<std::size_t>(j, "test_size", cfg.test_size);
    cfg.missingness.hidden = get_or<std::vector<std::string>>(j, "hidden", {});
    cfg.missingness.obscure_prob = get_or<double>(j, "obscure_prob", 0.0);
    cfg.targets = get_or<std::vector<std::string>>(j, "targets", {});
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
    cfg.init = get_or<std::string>(j, "init", "random");
    cfg.init_seed = get_or<std::uint64_t>(j, "init_seed", derive_seed(cfg.seed, 5));
    cfg.max_iters = get_or<std::size_t>(j, "max_iters", cfg.max_iters);
    cfg.tol_ll = get_or<double>(j, "tol_ll", cfg.tol_ll);
    cfg.tol_param = get_or<double>(j, "tol_param", cfg.tol_param);
    if (!j.contains("arms") || !j.at("arms").is_array() || j.at("arms").empty())
      throw InputError("experiment config needs a non-empty 'arms' list");
    for (const auto& a : j.at("arms")) {
      for (const auto& [key, _] : a.items())
        if (key != "rule" && key != "eta" && key != "warm_start_em1")
          throw InputError("unknown arm key '" + key + "'");
      ExperimentArm arm;
      arm.rule = parse_rule(get_or<std::string>(a, "rule", "em"));
      arm.eta = get_or<double>(a, "eta", 1.0);
      arm.warm_start_em1 = get_or<bool>(a, "warm_start_em1", false);
      cfg.arms.push_back(arm);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad experiment config: ") + e.what());
  }
  if (cfg.init != "random" && cfg.init != "uniform")
    throw InputError("experiment init must be 'random' or 'uniform'");
  if (cfg.train_size == 0) throw InputError("train_size must be positive");
  return cfg;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  ExperimentOutcome out;
  out.truth = load_network_ref(config.network);
  const NetworkStructure& s = out.truth.structure;

  const std::vector<std::size_t> hidden = resolve_names(s, config.missingness.hidden);
  const std::vector<std::size_t> targets = resolve_names(s, config.targets);
  for (std::size_t t : targets)
    if (std::find(hidden.begin(), hidden.end(), t) != hidden.end())
      throw InputError("target '" + s.variable(t).name + "' is a hidden variable");

  MissingnessSpec train_miss = config.missingness, test_miss = config.missingness;
  train_miss.seed = derive_seed(config.seed, 3);
  test_miss.seed = derive_seed(config.seed, 4);
  out.train = obscure(s, forward_sample(out.truth, config.train_size, derive_seed(config.seed, 1)),
                      train_miss);
  out.test = obscure(s, forward_sample(out.truth, config.test_size, derive_seed(config.seed, 2)),
                     test_miss);

  // Every arm reads the same bytes that go to disk.
  const std::string train_csv = format_dataset(s, out.train);
  const std::string test_csv = format_dataset(s, out.test);
  const DataSet train = load_dataset(train_csv, s);
  const DataSet test = config.test_size > 0 ? load_dataset(test_csv, s) : DataSet{};
  const std::string train_hash = fnv1a64_hex(train_csv);
  const std::string test_hash = fnv1a64_hex(test_csv);

  out.initial = config.init == "uniform" ? uniform_init(s) : random_init(s, config.init_seed);

  const bool write = !out_dir.empty();
  if (write) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());
    write_file((fs::path(out_dir) / "train.csv").string(), train_csv);
    write_file((fs::path(out_dir) / "test.csv").string(), test_csv);
  }

  ojson summary;
  summary["network"] = out.truth.name;
  summary["seed"] = config.seed;
  summary["init"] = config.init;
  summary["init_seed"] = config.init_seed;
  summary["train_size"] = config.train_size;
  summary["test_size"] = config.test_size;
  summary["hidden"] = config.missingness.hidden;
  summary["obscure_prob"] = config.missingness.obscure_prob;
  summary["targets"] = config.targets;
  summary["max_iters"] = config.max_iters;
  summary["tol_ll"] = config.tol_ll;
  summary["tol_param"] = config.tol_param;
  summary["train_hash"] = train_hash;
  summary["test_hash"] = test_hash;
  auto arms_json = ojson::array();

  for (std::size_t a = 0; a < config.arms.size(); ++a) {
    const ExperimentArm& arm = config.arms[a];
    ArmOutcome ao;
    ao.arm = arm;
    ao.label = "arm" + std::to_string(a) + "_" + to_string(arm.rule) + "_" + format_real(arm.eta);

    FitConfig fc;
    fc.rule = arm.rule;
    fc.eta = arm.eta;
    fc.max_iters = config.max_iters;
    fc.tol_ll = config.tol_ll;
    fc.tol_param = config.tol_param;
    fc.init = InitSpec::from(out.initial);
    fc.warm_start_em1 = arm.warm_start_em1;
    try {
      ao.fit = fit(s, train, fc, test.empty() ? nullptr : &test);
      if (!targets.empty() && !test.empty())
        ao.errors = evaluate(Network{out.truth.name, s, ao.fit.theta}, out.truth, test, targets);
    } catch (const ZeroProbabilityEvidence& e) {
      throw ZeroProbabilityEvidence(e.case_index(), ao.label + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(ao.label + ": " + e.what());
    }
    if (ao.fit.reason != Termination::MaxIters) ao.iterations_to_tol = ao.fit.iterations;
    ao.total_param_change = max_abs_diff(ao.fit.theta, out.initial);

    if (write) {
      write_trace(ao.fit.trace, (fs::path(out_dir) / (ao.label + ".trace.csv")).string());
      write_file((fs::path(out_dir) / (ao.label + ".network.json")).string(),
                 serialize_network(Network{out.truth.name + "_" + ao.label, s, ao.fit.theta}));
    }

    ojson aj;
    aj["label"] = ao.label;
    aj["rule"] = to_string(arm.rule);
    aj["eta"] = arm.eta;
    aj["warm_start_em1"] = arm.warm_start_em1;
    aj["termination"] = to_string(ao.fit.reason);
    aj["iterations"] = ao.fit.iterations;
    aj["iterations_to_tol"] =
        ao.iterations_to_tol ? ojson(*ao.iterations_to_tol) : ojson(nullptr);
    aj["final_train_ll"] = ao.fit.train_ll;
    aj["final_test_ll"] = optional_number(ao.fit.test_ll);
    aj["total_param_change"] = ao.total_param_change;
    aj["train_hash"] = train_hash;
    aj["test_hash"] = test_hash;
    aj["errors"] = ao.errors ? eval_to_json(*ao.errors) : ojson(nullptr);
    arms_json.push_back(aj);
    out.arms.push_back(std::move(ao));
  }
  summary["arms"] = arms_json;
  out.summary_json = summary.dump(2) + "\n";
  if (write) write_file((fs::path(out_dir) / "summary.json").string(), out.summary_json);
  return out;
}

}  // namespace bnp
