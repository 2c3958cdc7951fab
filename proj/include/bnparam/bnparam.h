/* Copyright 2026 The bnparam Authors.
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

/* C interface to libbnparam: parameter learning for discrete Bayesian
 * networks from incomplete data.
 *
 * Every call that can fail returns a bnp_status. On failure the message is
 * available from bnp_last_error() on the same thread until the next failing
 * call. Handles are opaque and owned by the caller; release them with the
 * matching _free function. Output pointers are written only on success. */

#ifndef BNPARAM_BNPARAM_H
#define BNPARAM_BNPARAM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(BNP_BUILDING_LIBRARY)
#    define BNP_API __declspec(dllexport)
#  else
#    define BNP_API __declspec(dllimport)
#  endif
#else
#  define BNP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bnp_status {
  BNP_OK = 0,
  BNP_ERR_INTERNAL = 1,
  BNP_ERR_INPUT = 2,     /* malformed input, bad arguments, I/O failure */
  BNP_ERR_NUMERICAL = 3  /* zero-probability evidence, eigen solver failure */
} bnp_status;

typedef struct bnp_network bnp_network;
typedef struct bnp_dataset bnp_dataset;

BNP_API const char* bnp_version(void);
BNP_API const char* bnp_last_error(void);

/* `ref` is a file path or "builtin:chain3|tree8|dag15". */
BNP_API bnp_status bnp_network_load(const char* ref, bnp_network** out);
BNP_API bnp_status bnp_network_parse(const char* json_text, bnp_network** out);
BNP_API bnp_status bnp_network_save(const bnp_network* net, const char* path);
/* Returns a malloc'ed string; release with bnp_string_free. */
BNP_API bnp_status bnp_network_to_json(const bnp_network* net, char** out);
BNP_API size_t bnp_network_num_variables(const bnp_network* net);
BNP_API size_t bnp_network_num_parameters(const bnp_network* net);
BNP_API void bnp_network_free(bnp_network* net);
BNP_API void bnp_string_free(char* s);

/* Loads a CSV dataset whose header names variables of `net`. */
BNP_API bnp_status bnp_dataset_load(const bnp_network* net, const char* path, bnp_dataset** out);
BNP_API size_t bnp_dataset_size(const bnp_dataset* data);
BNP_API void bnp_dataset_free(bnp_dataset* data);

/* Forward-samples `n` cases, hides the comma-separated `hidden` variables
 * (may be NULL or empty), drops every other value with probability
 * `obscure_prob` and writes the CSV to `out_path`. */
BNP_API bnp_status bnp_sample(const bnp_network* net, size_t n, const char* hidden,
                              double obscure_prob, uint64_t seed, const char* out_path);

typedef struct bnp_fit_options {
  const char* rule;     /* "em", "eg" or "gp" */
  double eta;
  size_t max_iters;
  double tol_ll;        /* <= 0 disables */
  double tol_param;     /* <= 0 disables */
  const char* init;     /* "random", "uniform" or "file:PATH" */
  uint64_t seed;        /* for "random" */
  int warm_start_em1;
  int record_wall_time; /* fill the wall_ms trace column */
} bnp_fit_options;

BNP_API void bnp_fit_options_default(bnp_fit_options* opts);

typedef struct bnp_fit_summary {
  size_t iterations;
  char termination[32]; /* "converged_ll", "converged_param" or "max_iters" */
  double train_ll;
  double test_ll;
  int has_test_ll;
} bnp_fit_summary;

/* `test`, `trace_path`, `learned` and `summary` may be NULL. */
BNP_API bnp_status bnp_fit(const bnp_network* net, const bnp_dataset* train,
                           const bnp_dataset* test, const bnp_fit_options* opts,
                           const char* trace_path, bnp_network** learned,
                           bnp_fit_summary* summary);

/* Streams the dataset through the one-case rule starting from the
 * parameters of `net`. `schedule` is "fixed:ETA", "inv_t:C,T0" or
 * "per_row". */
BNP_API bnp_status bnp_online(const bnp_network* net, const bnp_dataset* stream,
                              const char* rule, const char* schedule, const char* trace_path,
                              bnp_network** learned, size_t* skipped);

typedef struct bnp_spectral_summary {
  double lambda_min;
  double lambda_max;
  double eta_star;
  int rank_deficient;
  double theta_residual;
} bnp_spectral_summary;

/* Analyzes EM around the fixpoint held by `theta` (same structure as the
 * data's network) and writes the JSON report to `out_path` (may be NULL). */
BNP_API bnp_status bnp_spectral(const bnp_network* theta, const bnp_dataset* data,
                                const double* etas, size_t n_etas, int measure_empirical,
                                const char* out_path, bnp_spectral_summary* summary);

/* Query errors of `learned` against `truth` for the comma-separated
 * targets; the JSON report goes to `out_path` (may be NULL). */
BNP_API bnp_status bnp_eval(const bnp_network* learned, const bnp_network* truth,
                            const bnp_dataset* data, const char* targets, const char* out_path,
                            double* mean_absolute);

BNP_API bnp_status bnp_experiment(const char* config_path, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* BNPARAM_BNPARAM_H */
