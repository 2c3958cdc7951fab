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

// One-case-at-a-time versions of the EM(eta), EG(eta) and gradient
// projection updates. The parent-configuration mass in the EM and EG steps
// is the current model's prior marginal P_theta(pa), not the posterior.

#ifndef BNPARAM_CORE_ONLINE_HPP
#define BNPARAM_CORE_ONLINE_HPP

#include <string>
#include <vector>

#include "bnparam/core/estimation.hpp"
#include "bnparam/core/inference.hpp"
#include "bnparam/core/model.hpp"
#include "bnparam/core/netio.hpp"

namespace bnp {

inline constexpr double kMaxRate = 2.0;

class LearningRateSchedule {
 public:
  enum class Kind { Fixed, InverseT, PerRowCount };

  /// Constant eta in [0, 2].
  static LearningRateSchedule fixed(double eta);
  /// eta_t = c / (t + t0) with t counted from 1, capped at 2.
  static LearningRateSchedule inverse_t(double c, double t0);
  /// Running average per CPT row: the new case gets weight m / (n + m),
  /// where m is its posterior mass on the row and n the mass seen before.
  static LearningRateSchedule per_row_count();

  /// Parses "fixed:ETA", "inv_t:C,T0" or "per_row".
  static LearningRateSchedule parse(const std::string& text);
  std::string to_string() const;

  Kind kind() const { return kind_; }
  double eta() const { return eta_; }
  double c() const { return c_; }
  double t0() const { return t0_; }

  /// Rate for the t-th case (1-based) for the row-independent kinds.
  double rate(std::size_t t) const;
  /// Rate for row (i, j): `visits` is the mass n_ij seen before this case
  /// and `model_mass` the current prior marginal P_theta(pa_i^j).
  double row_rate(std::size_t t, double visits, double model_mass) const;

 private:
  Kind kind_ = Kind::Fixed;
  double eta_ = 1.0;
  double c_ = 1.0;
  double t0_ = 0.0;
};

struct OnlineState {
  ParameterVector theta;
  /// Number of cases consumed, skipped ones included.
  std::size_t t = 0;
  /// n_ij: accumulated posterior mass P_theta(pa_i^j | y) over past cases.
  ParentTable visits;

  static OnlineState start(const Network& net);
};

struct OnlineStepInfo {
  /// log P_theta(y) before the update.
  double log_likelihood = 0.0;
  /// L2 norm of the parameter change.
  double l2_step = 0.0;
};

/// Each step runs inference on the case once, updates theta, t and the
/// visit masses, and leaves the state untouched when it throws.
OnlineStepInfo online_em_step(const InferenceEngine& engine, OnlineState& state,
                              const DataCase& c, const LearningRateSchedule& schedule);
OnlineStepInfo online_eg_step(const InferenceEngine& engine, OnlineState& state,
                              const DataCase& c, const LearningRateSchedule& schedule);
OnlineStepInfo online_gp_step(const InferenceEngine& engine, OnlineState& state,
                              const DataCase& c, const LearningRateSchedule& schedule);

OnlineStepInfo online_step(Rule rule, const InferenceEngine& engine, OnlineState& state,
                           const DataCase& c, const LearningRateSchedule& schedule);

struct OnlineResult {
  OnlineState state;
  std::vector<OnlineTraceRecord> trace;
  std::size_t skipped = 0;
};

/// Feeds the cases in order. Cases with zero probability under the current
/// model are skipped and counted rather than aborting the run.
OnlineResult run_stream(const Network& start, const DataSet& stream, Rule rule,
                        const LearningRateSchedule& schedule);

}  // namespace bnp

#endif  // BNPARAM_CORE_ONLINE_HPP
