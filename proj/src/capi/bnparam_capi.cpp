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

#include "bnparam/bnparam.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "bnparam/core/errors.hpp"
#include "bnparam/core/estimation.hpp"
#include "bnparam/core/harness.hpp"
#include "bnparam/core/netio.hpp"
#include "bnparam/core/online.hpp"
#include "bnparam/core/rng.hpp"
#include "bnparam/core/spectral.hpp"

struct bnp_network {
  bnp::Network net;
};

struct bnp_dataset {
  bnp::NetworkStructure structure;
  bnp::DataSet data;
};

namespace {

thread_local std::string g_last_error;

bnp_status fail(bnp_status code, const char* what) {
  g_last_error = what;
  return code;
}

template <typename Fn>
bnp_status guarded(Fn&& fn) {
  try {
    fn();
    return BNP_OK;
  } catch (const bnp::Error& e) {
    return fail(e.kind() == bnp::ErrorKind::Numerical ? BNP_ERR_NUMERICAL : BNP_ERR_INPUT,
                e.what());
  } catch (const std::bad_alloc&) {
    return fail(BNP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BNP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BNP_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (!p) throw bnp::InputError(std::string(name) + " must not be null");
}

void require_match(const bnp::NetworkStructure& s, const bnp_dataset* d) {
  if (!(d->structure == s)) throw bnp::InputError("dataset was loaded for a different network");
}

bnp::InitSpec init_from(const char* text, std::uint64_t seed, const bnp::NetworkStructure& s) {
  const std::string init = text ? text : "random";
  if (init == "random") return bnp::InitSpec::random(seed);
  if (init == "uniform") return bnp::InitSpec::uniform();
  if (init.rfind("file:", 0) == 0) {
    bnp::Network start = bnp::load_network_file(init.substr(5));
    if (!(start.structure == s))
      throw bnp::InputError("initial parameter file has a different structure");
    return bnp::InitSpec::from(std::move(start.theta));
  }
  throw bnp::InputError("unknown init '" + init + "' (expected random, uniform or file:PATH)");
}

}  // namespace

extern "C" {

const char* bnp_version(void) { return "1.0.0"; }

const char* bnp_last_error(void) { return g_last_error.c_str(); }

bnp_status bnp_network_load(const char* ref, bnp_network** out) {
  return guarded([&] {
    require(ref, "ref");
    require(out, "out");
    *out = new bnp_network{bnp::load_network_ref(ref)};
  });
}

bnp_status bnp_network_parse(const char* json_text, bnp_network** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = new bnp_network{bnp::parse_network(json_text)};
  });
}

bnp_status bnp_network_save(const bnp_network* net, const char* path) {
  return guarded([&] {
    require(net, "net");
    require(path, "path");
    bnp::write_file(path, bnp::serialize_network(net->net));
  });
}

bnp_status bnp_network_to_json(const bnp_network* net, char** out) {
  return guarded([&] {
    require(net, "net");
    require(out, "out");
    const std::string text = bnp::serialize_network(net->net);
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out = buf;
  });
}

size_t bnp_network_num_variables(const bnp_network* net) {
  return net ? net->net.structure.size() : 0;
}

size_t bnp_network_num_parameters(const bnp_network* net) {
  return net ? net->net.structure.total_parameters() : 0;
}

void bnp_network_free(bnp_network* net) { delete net; }

void bnp_string_free(char* s) { std::free(s); }

bnp_status bnp_dataset_load(const bnp_network* net, const char* path, bnp_dataset** out) {
  return guarded([&] {
    require(net, "net");
    require(path, "path");
    require(out, "out");
    *out = new bnp_dataset{net->net.structure, bnp::load_dataset_file(path, net->net.structure)};
  });
}

size_t bnp_dataset_size(const bnp_dataset* data) { return data ? data->data.size() : 0; }

void bnp_dataset_free(bnp_dataset* data) { delete data; }

bnp_status bnp_sample(const bnp_network* net, size_t n, const char* hidden, double obscure_prob,
                      uint64_t seed, const char* out_path) {
  return guarded([&] {
    require(net, "net");
    require(out_path, "out_path");
    bnp::MissingnessSpec spec;
    spec.hidden = bnp::split_csv_list(hidden ? hidden : "");
    spec.obscure_prob = obscure_prob;
    // The sampling stream and the missingness mask use separate seeds.
    spec.seed = bnp::splitmix64(seed ^ 0x6d61736bULL);
    const auto cases = bnp::obscure(net->net.structure,
                                    bnp::forward_sample(net->net, n, seed), spec);
    bnp::write_dataset(net->net.structure, cases, out_path);
  });
}

void bnp_fit_options_default(bnp_fit_options* opts) {
  if (!opts) return;
  const bnp::FitConfig d;
  opts->rule = "em";
  opts->eta = d.eta;
  opts->max_iters = d.max_iters;
  opts->tol_ll = d.tol_ll;
  opts->tol_param = d.tol_param;
  opts->init = "random";
  opts->seed = 0;
  opts->warm_start_em1 = 0;
  opts->record_wall_time = 0;
}

bnp_status bnp_fit(const bnp_network* net, const bnp_dataset* train, const bnp_dataset* test,
                   const bnp_fit_options* opts, const char* trace_path, bnp_network** learned,
                   bnp_fit_summary* summary) {
  return guarded([&] {
    require(net, "net");
    require(train, "train");
    const bnp::NetworkStructure& s = net->net.structure;
    require_match(s, train);
    if (test) require_match(s, test);

    bnp_fit_options o;
    bnp_fit_options_default(&o);
    if (opts) o = *opts;
    bnp::FitConfig cfg;
    cfg.rule = bnp::parse_rule(o.rule ? o.rule : "em");
    cfg.eta = o.eta;
    cfg.max_iters = o.max_iters;
    cfg.tol_ll = o.tol_ll;
    cfg.tol_param = o.tol_param;
    cfg.init = init_from(o.init, o.seed, s);
    cfg.warm_start_em1 = o.warm_start_em1 != 0;
    cfg.record_wall_time = o.record_wall_time != 0;

    bnp::FitResult r = bnp::fit(s, train->data, cfg, test ? &test->data : nullptr);
    if (trace_path) bnp::write_trace(r.trace, trace_path);
    if (summary) {
      summary->iterations = r.iterations;
      std::snprintf(summary->termination, sizeof summary->termination, "%s",
                    bnp::to_string(r.reason).c_str());
      summary->train_ll = r.train_ll;
      summary->has_test_ll = r.test_ll ? 1 : 0;
      summary->test_ll = r.test_ll.value_or(0.0);
    }
    if (learned) *learned = new bnp_network{bnp::Network{net->net.name, s, std::move(r.theta)}};
  });
}

bnp_status bnp_online(const bnp_network* net, const bnp_dataset* stream, const char* rule,
                      const char* schedule, const char* trace_path, bnp_network** learned,
                      size_t* skipped) {
  return guarded([&] {
    require(net, "net");
    require(stream, "stream");
    require(schedule, "schedule");
    require_match(net->net.structure, stream);
    const bnp::OnlineResult r =
        bnp::run_stream(net->net, stream->data, bnp::parse_rule(rule ? rule : "em"),
                        bnp::LearningRateSchedule::parse(schedule));
    if (trace_path) bnp::write_file(trace_path, bnp::format_online_trace(r.trace));
    if (skipped) *skipped = r.skipped;
    if (learned)
      *learned = new bnp_network{bnp::Network{net->net.name, net->net.structure, r.state.theta}};
  });
}

bnp_status bnp_spectral(const bnp_network* theta, const bnp_dataset* data, const double* etas,
                        size_t n_etas, int measure_empirical, const char* out_path,
                        bnp_spectral_summary* summary) {
  return guarded([&] {
    require(theta, "theta");
    require(data, "data");
    if (n_etas > 0) require(etas, "etas");
    require_match(theta->net.structure, data);
    bnp::SpectralOptions options;
    options.etas.assign(etas, etas + n_etas);
    options.measure_empirical = measure_empirical != 0;
    const bnp::SpectralReport rep =
        bnp::analyze(theta->net.structure, theta->net.theta, data->data, options);
    if (out_path) bnp::write_file(out_path, bnp::spectral_report_json(rep));
    if (summary) {
      summary->lambda_min = rep.lambda_min;
      summary->lambda_max = rep.lambda_max;
      summary->eta_star = rep.eta_star;
      summary->rank_deficient = rep.rank_deficient ? 1 : 0;
      summary->theta_residual = rep.theta_residual;
    }
  });
}

bnp_status bnp_eval(const bnp_network* learned, const bnp_network* truth, const bnp_dataset* data,
                    const char* targets, const char* out_path, double* mean_absolute) {
  return guarded([&] {
    require(learned, "learned");
    require(truth, "truth");
    require(data, "data");
    require(targets, "targets");
    require_match(truth->net.structure, data);
    const auto idx = bnp::resolve_names(truth->net.structure, bnp::split_csv_list(targets));
    const bnp::EvalReport rep = bnp::evaluate(learned->net, truth->net, data->data, idx);
    if (out_path) bnp::write_file(out_path, bnp::eval_report_json(rep));
    if (mean_absolute) *mean_absolute = rep.mean_absolute;
  });
}

bnp_status bnp_experiment(const char* config_path, const char* out_dir) {
  return guarded([&] {
    require(config_path, "config_path");
    require(out_dir, "out_dir");
    const std::string base = std::filesystem::path(config_path).parent_path().string();
    const bnp::ExperimentConfig cfg =
        bnp::parse_experiment_config(bnp::read_file(config_path), base.empty() ? "." : base);
    bnp::run_experiment(cfg, out_dir);
  });
}

}  // extern "C"
