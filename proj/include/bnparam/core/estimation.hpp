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

// Batch parameter estimation: expected sufficient statistics, the
// log-likelihood gradient and the three update rules derived from a
// distance-penalized, linearized likelihood objective:
//
//   GP      additive step from the L2 distance, gradient projected onto the
//           zero-sum directions of each CPT row;
//   EM(eta) from the chi-square distance:
//             theta' = eta * E(x, pa | D) / E(pa | D) + (1 - eta) * theta,
//           eta = 1 being classical EM, eta > 1 over-relaxation;
//   EG(eta) from the relative entropy: multiplicative, exponentiated
//           gradient with row renormalization.

#ifndef BNPARAM_CORE_ESTIMATION_HPP
#define BNPARAM_CORE_ESTIMATION_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bnparam/core/inference.hpp"
#include "bnparam/core/model.hpp"
#include "bnparam/core/netio.hpp"

namespace bnp {

/// Rows whose (estimated) parent mass is at or below this are left as they
/// are for the step.
inline constexpr double kRowMassFloor = 1e-12;
/// EG exponents are clipped to [0, kMaxExponent].
inline constexpr double kMaxExponent = 500.0;

struct SufficientStats {
  /// E_theta(x_i^k, pa_i^j | D), dataset average of the family posteriors.
  TableSet joint;
  /// E_theta(pa_i^j | D) = sum_k joint(i, j, k).
  ParentTable parent;
  /// Normalized log-likelihood L_D = (1/N) sum_l log P(y_l).
  double log_likelihood = 0.0;
  std::size_t cases = 0;
};

/// E-step. Cases are processed in fixed blocks whose partial sums are
/// combined in block order, so the result does not depend on the number of
/// worker threads. Throws ZeroProbabilityEvidence naming the first offending
/// case.
SufficientStats expected_stats(const InferenceEngine& engine, const ParameterVector& theta,
                               const DataSet& data);
SufficientStats expected_stats(const Network& net, const DataSet& data);

/// Reference E-step through enumerate_family_posteriors.
SufficientStats expected_stats_enumerated(const Network& net, const DataSet& data);

/// Average log P(y_l) over the dataset.
double mean_log_likelihood(const InferenceEngine& engine, const ParameterVector& theta,
                           const DataSet& data);

/// d L_D / d theta_ijk = E(x_i^k, pa_i^j | D) / theta_ijk.
TableSet gradient(const SufficientStats& stats, const ParameterVector& theta);

/// theta + eta * (grad - row mean of grad), before any clamping.
ParameterVector gp_step_unclamped(const ParameterVector& theta, const TableSet& grad, double eta);
ParameterVector gp_step(const ParameterVector& theta, const TableSet& grad, double eta);

/// EM(eta) with an explicit parent-mass estimate P^(pa_i^j). Rows are
/// renormalized (they already sum to one when the estimate is the
/// sample-based E(pa | D)); no floor is applied.
ParameterVector em_eta_step_unclamped(const ParameterVector& theta, const TableSet& joint,
                                      const ParentTable& parent_estimate, double eta);
ParameterVector em_eta_step(const ParameterVector& theta, const TableSet& joint,
                            const ParentTable& parent_estimate, double eta);
/// EM(eta) with the sample-based estimate P^ = E(pa | D).
ParameterVector em_eta_step(const ParameterVector& theta, const SufficientStats& stats,
                            double eta);

ParameterVector eg_eta_step(const ParameterVector& theta, const TableSet& joint,
                            const ParentTable& parent_estimate, double eta);
ParameterVector eg_eta_step(const ParameterVector& theta, const SufficientStats& stats,
                            double eta);

struct FixpointCheck {
  bool fixpoint = false;
  /// max |theta_ijk - joint(i,j,k) / parent(i,j)| over rows with mass.
  double residual = 0.0;
};
FixpointCheck is_fixpoint(const ParameterVector& theta, const SufficientStats& stats, double tol);

/// sum_ij w_ij KL(a_ij || b_ij).
double distance_kl(const ParameterVector& a, const ParameterVector& b, const ParentTable& weights);
/// sum_ij w_ij * 1/2 sum_k (a_ijk - b_ijk)^2 / b_ijk.
double distance_chi2(const ParameterVector& a, const ParameterVector& b,
                     const ParentTable& weights);

enum class Rule { EM, EG, GP };
std::string to_string(Rule r);
Rule parse_rule(const std::string& s);

struct InitSpec {
  enum class Kind { Random, Uniform, Given };
  Kind kind = Kind::Random;
  std::uint64_t seed = 0;
  ParameterVector given;

  static InitSpec random(std::uint64_t seed) { return {Kind::Random, seed, {}}; }
  static InitSpec uniform() { return {Kind::Uniform, 0, {}}; }
  static InitSpec from(ParameterVector theta) { return {Kind::Given, 0, std::move(theta)}; }
};

ParameterVector initial_parameters(const NetworkStructure& s, const InitSpec& init);

struct FitConfig {
  Rule rule = Rule::EM;
  double eta = 1.0;
  std::size_t max_iters = 200;
  /// Stop when |L_D(s) - L_D(s-1)| < tol_ll; <= 0 disables.
  double tol_ll = 1e-6;
  /// Stop when max |theta(s) - theta(s-1)| < tol_param; <= 0 disables.
  double tol_param = 0.0;
  InitSpec init;
  /// First step is EM(1) regardless of rule/eta.
  bool warm_start_em1 = false;
  /// Fill the wall_ms trace column. Off by default so traces are
  /// byte-reproducible.
  bool record_wall_time = false;
  /// Use the enumeration oracle instead of the elimination engine.
  bool use_enumeration = false;

  void validate() const;
};

enum class Termination { ConvergedLL, ConvergedParam, MaxIters };
std::string to_string(Termination t);

struct FitResult {
  ParameterVector theta;
  std::vector<TraceRecord> trace;
  Termination reason = Termination::MaxIters;
  /// Number of update steps taken.
  std::size_t iterations = 0;
  double train_ll = 0.0;
  std::optional<double> test_ll;
  /// Statistics at the final theta.
  SufficientStats stats;
};

/// Called with (iteration, theta) for the initial point and after every
/// step.
using IterateObserver = std::function<void(std::size_t, const ParameterVector&)>;

FitResult fit(const NetworkStructure& s, const DataSet& train, const FitConfig& config,
              const DataSet* test = nullptr, const IterateObserver& observer = {});

/// One batch update of the configured rule at `theta` given its statistics.
ParameterVector apply_rule(Rule rule, double eta, const ParameterVector& theta,
                           const SufficientStats& stats);

}  // namespace bnp

#endif  // BNPARAM_CORE_ESTIMATION_HPP
