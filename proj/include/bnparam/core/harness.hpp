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

// Synthetic data, query-error evaluation and the experiment driver.

#ifndef BNPARAM_CORE_HARNESS_HPP
#define BNPARAM_CORE_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bnparam/core/estimation.hpp"
#include "bnparam/core/model.hpp"
#include "bnparam/core/netio.hpp"

namespace bnp {

/// Ancestral sampling in topological order.
std::vector<DataCase> forward_sample(const Network& net, std::size_t n, std::uint64_t seed);

struct MissingnessSpec {
  /// Always missing.
  std::vector<std::string> hidden;
  /// Chance that any other value is removed.
  double obscure_prob = 0.0;
  std::uint64_t seed = 0;
};

/// Whether cell (case, var) is removed depends only on (seed, case, var),
/// never on the values, so the mechanism is ignorable.
std::vector<DataCase> obscure(const NetworkStructure& s, std::vector<DataCase> cases,
                              const MissingnessSpec& spec);

std::vector<std::size_t> resolve_names(const NetworkStructure& s,
                                       const std::vector<std::string>& names);
std::vector<std::string> split_csv_list(std::string_view text);

struct QueryError {
  /// Mean over target states of |p - p*|.
  double absolute = 0.0;
  /// Mean over target states with p* > 0 of |p - p*| / p*.
  std::optional<double> relative;
  std::vector<double> per_state_absolute;
  /// States left out of the relative error because p* = 0.
  std::size_t zero_reference = 0;
};

/// p = P_learned(target = s | other observed values), p* the same under
/// `truth`. Any value the case holds for `target` is ignored.
QueryError query_error(const Network& learned, const Network& truth, const DataCase& c,
                       std::size_t target);

struct TargetErrors {
  std::string name;
  double mean_absolute = 0.0;
  std::optional<double> mean_relative;
  std::vector<double> per_state_absolute;
  std::size_t cases = 0;
  std::size_t zero_reference = 0;
};

struct EvalReport {
  std::vector<TargetErrors> targets;
  /// Mean over cases and targets.
  double mean_absolute = 0.0;
  std::optional<double> mean_relative;
};

EvalReport evaluate(const Network& learned, const Network& truth, const DataSet& data,
                    const std::vector<std::size_t>& targets);
std::string eval_report_json(const EvalReport& report);

/// chain3: A -> B -> C, binary. tree8: an 8-node tree with mixed arities.
/// dag15: 5 roots (H0, H1, H2, U0, U1) feeding 10 leaves X0..X9.
Network builtin_network(std::string_view name);
std::vector<std::string> builtin_network_names();
/// Accepts "builtin:NAME" or a path to a network file.
Network load_network_ref(const std::string& ref);

/// FNV-1a, 64 bit, as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

struct ExperimentArm {
  Rule rule = Rule::EM;
  double eta = 1.0;
  bool warm_start_em1 = false;
};

struct ExperimentConfig {
  std::string network;  // "builtin:NAME" or a path
  std::size_t train_size = 1000;
  std::size_t test_size = 1000;
  MissingnessSpec missingness;
  std::vector<std::string> targets;
  std::uint64_t seed = 0;
  /// "random" (seeded by init_seed) or "uniform".
  std::string init = "random";
  std::uint64_t init_seed = 0;
  std::size_t max_iters = 500;
  double tol_ll = 1e-6;
  double tol_param = 0.0;
  std::vector<ExperimentArm> arms;
};

/// Relative network paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::string& base_dir = ".");

struct ArmOutcome {
  ExperimentArm arm;
  std::string label;
  FitResult fit;
  /// Iterations until the stopping rule fired; empty when max_iters ran out.
  std::optional<std::size_t> iterations_to_tol;
  /// L-infinity distance between the final and the shared initial theta.
  double total_param_change = 0.0;
  std::optional<EvalReport> errors;
};

struct ExperimentOutcome {
  Network truth;
  ParameterVector initial;
  std::vector<DataCase> train;
  std::vector<DataCase> test;
  std::vector<ArmOutcome> arms;
  std::string summary_json;
};

/// Writes train.csv, test.csv, <arm>.trace.csv and <arm>.network.json for
/// every arm, then summary.json. An empty `out_dir` skips all writes.
ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::string& out_dir);

}  // namespace bnp

#endif  // BNPARAM_CORE_HARNESS_HPP
