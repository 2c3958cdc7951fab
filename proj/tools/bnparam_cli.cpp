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

// bnparam command line. Exit status: 0 success, 2 bad input, 3 numerical
// failure, 1 anything else.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bnparam/bnparam.h"

namespace {

struct Failure {
  bnp_status code;
};

void check(bnp_status s) {
  if (s != BNP_OK) {
    std::fprintf(stderr, "bnparam: %s\n", bnp_last_error());
    throw Failure{s};
  }
}

struct NetworkDeleter {
  void operator()(bnp_network* p) const { bnp_network_free(p); }
};
struct DatasetDeleter {
  void operator()(bnp_dataset* p) const { bnp_dataset_free(p); }
};
using NetworkPtr = std::unique_ptr<bnp_network, NetworkDeleter>;
using DatasetPtr = std::unique_ptr<bnp_dataset, DatasetDeleter>;

NetworkPtr load_network(const std::string& ref) {
  bnp_network* n = nullptr;
  check(bnp_network_load(ref.c_str(), &n));
  return NetworkPtr(n);
}

DatasetPtr load_dataset(const bnp_network* net, const std::string& path) {
  bnp_dataset* d = nullptr;
  check(bnp_dataset_load(net, path.c_str(), &d));
  return DatasetPtr(d);
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

std::vector<double> parse_reals(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      std::fprintf(stderr, "bnparam: bad number '%s' in list\n", item.c_str());
      throw Failure{BNP_ERR_INPUT};
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter learning for discrete Bayesian networks from incomplete data"};
  app.set_version_flag("--version", std::string(bnp_version()));
  app.require_subcommand(1);

  // sample
  std::string s_network, s_hidden, s_out;
  std::size_t s_n = 0;
  double s_obscure = 0.0;
  std::uint64_t s_seed = 0;
  auto* sample = app.add_subcommand("sample", "Draw a dataset from a network");
  sample->add_option("--network", s_network, "Network file or builtin:NAME")->required();
  sample->add_option("--n", s_n, "Number of cases")->required();
  sample->add_option("--hidden", s_hidden, "Comma-separated variables that are never observed");
  sample->add_option("--obscure", s_obscure, "Chance of dropping each other value");
  sample->add_option("--seed", s_seed, "Random seed");
  sample->add_option("--out", s_out, "Output CSV")->required();

  // fit
  std::string f_network, f_data, f_test, f_rule = "em", f_init = "random", f_trace, f_out;
  double f_eta = 1.0, f_tol_ll = 1e-6, f_tol_param = 0.0;
  std::size_t f_max_iters = 200;
  std::uint64_t f_seed = 0;
  bool f_warm = false, f_timing = false;
  auto* fit = app.add_subcommand("fit", "Batch EM(eta), EG(eta) or gradient projection");
  fit->add_option("--network", f_network, "Network file or builtin:NAME")->required();
  fit->add_option("--data", f_data, "Training CSV")->required();
  fit->add_option("--test", f_test, "Test CSV");
  fit->add_option("--rule", f_rule, "em, eg or gp")->check(CLI::IsMember({"em", "eg", "gp"}));
  fit->add_option("--eta", f_eta, "Learning rate");
  fit->add_option("--max-iters", f_max_iters, "Iteration limit");
  fit->add_option("--tol-ll", f_tol_ll, "Stop when the log-likelihood gain is below this");
  fit->add_option("--tol-param", f_tol_param, "Stop when no parameter moves more than this");
  fit->add_option("--init", f_init, "random, uniform or file:PATH");
  fit->add_option("--seed", f_seed, "Seed for random initialization");
  fit->add_option("--warm-start-em1", f_warm, "Take the first step with EM(1)");
  fit->add_flag("--timing", f_timing, "Record wall-clock times in the trace");
  fit->add_option("--trace", f_trace, "Trace CSV");
  fit->add_option("--out", f_out, "Learned network file");

  // online
  std::string o_network, o_stream, o_rule = "em", o_schedule = "per_row", o_trace, o_out;
  auto* online = app.add_subcommand("online", "Update a network one case at a time");
  online->add_option("--network", o_network, "Starting network file or builtin:NAME")->required();
  online->add_option("--stream", o_stream, "CSV read in row order")->required();
  online->add_option("--rule", o_rule, "em, eg or gp")->check(CLI::IsMember({"em", "eg", "gp"}));
  online->add_option("--schedule", o_schedule, "fixed:ETA, inv_t:C,T0 or per_row");
  online->add_option("--trace", o_trace, "Trace CSV");
  online->add_option("--out", o_out, "Learned network file");

  // spectral
  std::string p_network, p_data, p_theta, p_etas = "0.5,1,1.5", p_out;
  bool p_empirical = false;
  auto* spectral = app.add_subcommand("spectral", "Convergence analysis of EM at a fixpoint");
  spectral->add_option("--network", p_network, "Network file or builtin:NAME")->required();
  spectral->add_option("--data", p_data, "Training CSV")->required();
  spectral->add_option("--theta", p_theta, "Network file holding the fixpoint")->required();
  spectral->add_option("--etas", p_etas, "Comma-separated learning rates for the rate table");
  spectral->add_flag("--empirical", p_empirical, "Also measure rates from EM runs");
  spectral->add_option("--out", p_out, "Report JSON");

  // eval
  std::string e_learned, e_truth, e_data, e_targets, e_out;
  auto* eval = app.add_subcommand("eval", "Query errors of a learned network");
  eval->add_option("--learned", e_learned, "Learned network file")->required();
  eval->add_option("--truth", e_truth, "Reference network file or builtin:NAME")->required();
  eval->add_option("--data", e_data, "Evidence CSV")->required();
  eval->add_option("--targets", e_targets, "Comma-separated query variables")->required();
  eval->add_option("--out", e_out, "Report JSON");

  // experiment
  std::string x_config, x_out;
  auto* experiment = app.add_subcommand("experiment", "Run a seeded multi-arm experiment");
  experiment->add_option("--config", x_config, "Experiment JSON")->required();
  experiment->add_option("--out-dir", x_out, "Artifact directory")->required();

  // builtin
  std::string b_name, b_out;
  auto* builtin = app.add_subcommand("builtin", "Write a built-in network to a file");
  builtin->add_option("--name", b_name, "chain3, tree8 or dag15")->required();
  builtin->add_option("--out", b_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return BNP_ERR_INPUT;
  }

  try {
    if (*sample) {
      auto net = load_network(s_network);
      check(bnp_sample(net.get(), s_n, s_hidden.c_str(), s_obscure, s_seed, s_out.c_str()));
    } else if (*fit) {
      auto net = load_network(f_network);
      auto train = load_dataset(net.get(), f_data);
      DatasetPtr test;
      if (!f_test.empty()) test = load_dataset(net.get(), f_test);
      bnp_fit_options opts;
      bnp_fit_options_default(&opts);
      opts.rule = f_rule.c_str();
      opts.eta = f_eta;
      opts.max_iters = f_max_iters;
      opts.tol_ll = f_tol_ll;
      opts.tol_param = f_tol_param;
      opts.init = f_init.c_str();
      opts.seed = f_seed;
      opts.warm_start_em1 = f_warm ? 1 : 0;
      opts.record_wall_time = f_timing ? 1 : 0;
      bnp_network* learned = nullptr;
      bnp_fit_summary summary;
      check(bnp_fit(net.get(), train.get(), test.get(), &opts, or_null(f_trace), &learned,
                    &summary));
      NetworkPtr keep(learned);
      if (!f_out.empty()) check(bnp_network_save(learned, f_out.c_str()));
      std::printf("iterations=%zu termination=%s train_ll=%.17g", summary.iterations,
                  summary.termination, summary.train_ll);
      if (summary.has_test_ll) std::printf(" test_ll=%.17g", summary.test_ll);
      std::printf("\n");
    } else if (*online) {
      auto net = load_network(o_network);
      auto stream = load_dataset(net.get(), o_stream);
      bnp_network* learned = nullptr;
      std::size_t skipped = 0;
      check(bnp_online(net.get(), stream.get(), o_rule.c_str(), o_schedule.c_str(),
                       or_null(o_trace), &learned, &skipped));
      NetworkPtr keep(learned);
      if (!o_out.empty()) check(bnp_network_save(learned, o_out.c_str()));
      std::printf("cases=%zu skipped=%zu\n", bnp_dataset_size(stream.get()), skipped);
    } else if (*spectral) {
      auto net = load_network(p_network);
      auto data = load_dataset(net.get(), p_data);
      auto theta = load_network(p_theta);
      const std::vector<double> etas = parse_reals(p_etas);
      bnp_spectral_summary summary;
      check(bnp_spectral(theta.get(), data.get(), etas.data(), etas.size(), p_empirical ? 1 : 0,
                         or_null(p_out), &summary));
      std::printf("lambda_min=%.17g lambda_max=%.17g eta_star=%.17g rank_deficient=%d\n",
                  summary.lambda_min, summary.lambda_max, summary.eta_star,
                  summary.rank_deficient);
    } else if (*eval) {
      auto truth = load_network(e_truth);
      auto learned = load_network(e_learned);
      auto data = load_dataset(truth.get(), e_data);
      double mean_abs = 0.0;
      check(bnp_eval(learned.get(), truth.get(), data.get(), e_targets.c_str(), or_null(e_out),
                     &mean_abs));
      std::printf("mean_absolute=%.17g\n", mean_abs);
    } else if (*experiment) {
      check(bnp_experiment(x_config.c_str(), x_out.c_str()));
    } else if (*builtin) {
      auto net = load_network("builtin:" + b_name);
      check(bnp_network_save(net.get(), b_out.c_str()));
    }
  } catch (const Failure& f) {
    return static_cast<int>(f.code);
  }
  return 0;
}
