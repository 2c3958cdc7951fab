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

#include "bnparam/core/online.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "bnparam/core/errors.hpp"

namespace bnp {

namespace {

double parse_real(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw InputError("bad " + what + " '" + s + "' in schedule");
  return v;
}

}  // namespace

LearningRateSchedule LearningRateSchedule::fixed(double eta) {
  if (!(eta >= 0.0 && eta <= kMaxRate))
    throw InputError("fixed learning rate must lie in [0, 2]");
  LearningRateSchedule s;
  s.kind_ = Kind::Fixed;
  s.eta_ = eta;
  return s;
}

LearningRateSchedule LearningRateSchedule::inverse_t(double c, double t0) {
  if (!(c > 0.0) || !std::isfinite(c)) throw InputError("inverse-t schedule needs c > 0");
  if (!(t0 >= 0.0) || !std::isfinite(t0)) throw InputError("inverse-t schedule needs t0 >= 0");
  LearningRateSchedule s;
  s.kind_ = Kind::InverseT;
  s.c_ = c;
  s.t0_ = t0;
  return s;
}

LearningRateSchedule LearningRateSchedule::per_row_count() {
  LearningRateSchedule s;
  s.kind_ = Kind::PerRowCount;
  return s;
}

LearningRateSchedule LearningRateSchedule::parse(const std::string& text) {
  if (text == "per_row") return per_row_count();
  if (text.rfind("fixed:", 0) == 0) return fixed(parse_real(text.substr(6), "rate"));
  if (text.rfind("inv_t:", 0) == 0) {
    const std::string args = text.substr(6);
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw InputError("inv_t schedule expects C,T0");
    return inverse_t(parse_real(args.substr(0, comma), "C"),
                     parse_real(args.substr(comma + 1), "T0"));
  }
  throw InputError("unknown schedule '" + text + "' (expected fixed:ETA, inv_t:C,T0 or per_row)");
}

std::string LearningRateSchedule::to_string() const {
  switch (kind_) {
    case Kind::Fixed: return "fixed:" + format_real(eta_);
    case Kind::InverseT: return "inv_t:" + format_real(c_) + "," + format_real(t0_);
    case Kind::PerRowCount: return "per_row";
  }
  return "?";
}

double LearningRateSchedule::rate(std::size_t t) const {
  switch (kind_) {
    case Kind::Fixed: return eta_;
    case Kind::InverseT: return std::min(kMaxRate, c_ / (static_cast<double>(t) + t0_));
    case Kind::PerRowCount: break;
  }
  throw InputError("per-row schedule has no row-independent rate");
}

double LearningRateSchedule::row_rate(std::size_t t, double visits, double model_mass) const {
  if (kind_ != Kind::PerRowCount) return rate(t);
  // With EM's target J / P this gives theta' = (J + n theta) / (n + m) after
  // renormalization, the posterior-weighted running average. For a fully
  // observed root (P = 1) it is the familiar 1 / (n + 1).
  return model_mass / (visits + model_mass);
}

OnlineState OnlineState::start(const Network& net) {
  OnlineState s;
  s.theta = net.theta;
  s.visits.resize(net.structure.size());
  for (std::size_t i = 0; i < net.structure.size(); ++i)
    s.visits[i].assign(net.structure.rows(i), 0.0);
  return s;
}

namespace {

/// Inference runs on a copy where rows holding entries below the floor are
/// clamped, so a value never seen before still has positive probability.
/// Rows that already respect the floor are left bit-for-bit as they are.
const ParameterVector& floored_view(const ParameterVector& theta, ParameterVector& storage) {
  bool needed = false;
  for (const auto& t : theta)
    for (double v : t.values())
      if (v < kEpsFloor) needed = true;
  if (!needed) return theta;
  storage = theta;
  for (auto& t : storage)
    for (std::size_t j = 0; j < t.rows(); ++j) {
      const auto row = t.row(j);
      if (std::any_of(row.begin(), row.end(), [](double v) { return v < kEpsFloor; }))
        clamp_renormalize(row);
    }
  return storage;
}

struct CaseStats {
  const ParameterVector* model = nullptr;  // theta used for inference
  FamilyPosteriors joint;                  // P(x, pa | y)
  ParentTable prior;                       // P_theta(pa)
  double log_likelihood = 0.0;
};

CaseStats case_stats(const InferenceEngine& engine, const OnlineState& state, const DataCase& c,
                     ParameterVector& storage, bool need_prior) {
  CaseStats cs;
  cs.model = &floored_view(state.theta, storage);
  cs.joint = TableSet(engine.structure());
  cs.log_likelihood = engine.accumulate_posteriors(*cs.model, c, cs.joint);
  if (need_prior) cs.prior = engine.parent_marginals(*cs.model);
  return cs;
}

double row_mass(std::span<const double> row) {
  double m = 0.0;
  for (double v : row) m += v;
  return m;
}

OnlineStepInfo commit(OnlineState& state, ParameterVector next, const FamilyPosteriors& joint,
                      double log_likelihood) {
  OnlineStepInfo info{log_likelihood, l2_distance(next, state.theta)};
  for (std::size_t i = 0; i < joint.size(); ++i)
    for (std::size_t j = 0; j < joint[i].rows(); ++j)
      state.visits[i][j] += row_mass(joint[i].row(j));
  state.theta = std::move(next);
  ++state.t;
  return info;
}

void check_state(const InferenceEngine& engine, const OnlineState& state) {
  const TableSet shape(engine.structure());
  if (!shape.same_shape(state.theta) || state.visits.size() != state.theta.size())
    throw InputError("online state does not match the network");
}

}  // namespace

OnlineStepInfo online_em_step(const InferenceEngine& engine, OnlineState& state,
                              const DataCase& c, const LearningRateSchedule& schedule) {
  check_state(engine, state);
  ParameterVector storage;
  const bool running_average = schedule.kind() == LearningRateSchedule::Kind::PerRowCount;
  const CaseStats cs = case_stats(engine, state, c, storage, !running_average);
  const std::size_t t = state.t + 1;

  ParameterVector next = state.theta;
  for (std::size_t i = 0; i < next.size(); ++i) {
    Table& tab = next[i];
    for (std::size_t j = 0; j < tab.rows(); ++j) {
      const auto jr = cs.joint[i].row(j);
      const double m = row_mass(jr);
      // No posterior mass on this row: the update renormalizes to theta.
      if (m == 0.0) continue;
      auto row = tab.row(j);
      if (running_average) {
        // eta = P / (n + P) with the prior mass P cancelled, so rows first
        // reached through a tiny P are not frozen. No floor: inference sees
        // the floored view instead.
        const double n = state.visits[i][j];
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = (jr[k] + n * row[k]) / (n + m);
        renormalize(row);
        continue;
      }
      const double mass = cs.prior[i][j];
      if (mass <= kRowMassFloor) continue;
      const double eta = schedule.row_rate(t, state.visits[i][j], mass);
      for (std::size_t k = 0; k < row.size(); ++k)
        row[k] = eta * (jr[k] / mass) + (1.0 - eta) * row[k];
      renormalize(row);
      clamp_renormalize(row);
    }
  }
  return commit(state, std::move(next), cs.joint, cs.log_likelihood);
}

OnlineStepInfo online_eg_step(const InferenceEngine& engine, OnlineState& state,
                              const DataCase& c, const LearningRateSchedule& schedule) {
  check_state(engine, state);
  ParameterVector storage;
  const CaseStats cs = case_stats(engine, state, c, storage, true);
  const std::size_t t = state.t + 1;

  ParameterVector next = *cs.model;
  std::vector<double> expo;
  for (std::size_t i = 0; i < next.size(); ++i) {
    Table& tab = next[i];
    for (std::size_t j = 0; j < tab.rows(); ++j) {
      const double mass = cs.prior[i][j];
      auto row = tab.row(j);
      if (mass <= kRowMassFloor) continue;
      const auto jr = cs.joint[i].row(j);
      const double eta = schedule.row_rate(t, state.visits[i][j], mass);
      expo.assign(row.size(), 0.0);
      double top = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        expo[k] = std::clamp(eta * jr[k] / (row[k] * mass), 0.0, kMaxExponent);
        top = std::max(top, expo[k]);
      }
      for (std::size_t k = 0; k < row.size(); ++k) row[k] *= std::exp(expo[k] - top);
      renormalize(row);
      clamp_renormalize(row);
    }
  }
  return commit(state, std::move(next), cs.joint, cs.log_likelihood);
}

OnlineStepInfo online_gp_step(const InferenceEngine& engine, OnlineState& state,
                              const DataCase& c, const LearningRateSchedule& schedule) {
  check_state(engine, state);
  ParameterVector storage;
  const bool per_row = schedule.kind() == LearningRateSchedule::Kind::PerRowCount;
  const CaseStats cs = case_stats(engine, state, c, storage, per_row);
  const std::size_t t = state.t + 1;

  ParameterVector next = *cs.model;
  std::vector<double> grad;
  for (std::size_t i = 0; i < next.size(); ++i) {
    Table& tab = next[i];
    for (std::size_t j = 0; j < tab.rows(); ++j) {
      auto row = tab.row(j);
      const auto jr = cs.joint[i].row(j);
      const double eta =
          per_row ? schedule.row_rate(t, state.visits[i][j], cs.prior[i][j]) : schedule.rate(t);
      grad.assign(row.size(), 0.0);
      double mean = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        grad[k] = jr[k] / row[k];
        mean += grad[k];
      }
      mean /= static_cast<double>(row.size());
      for (std::size_t k = 0; k < row.size(); ++k) row[k] += eta * (grad[k] - mean);
      clamp_renormalize(row);
    }
  }
  return commit(state, std::move(next), cs.joint, cs.log_likelihood);
}

OnlineStepInfo online_step(Rule rule, const InferenceEngine& engine, OnlineState& state,
                           const DataCase& c, const LearningRateSchedule& schedule) {
  switch (rule) {
    case Rule::EM: return online_em_step(engine, state, c, schedule);
    case Rule::EG: return online_eg_step(engine, state, c, schedule);
    case Rule::GP: return online_gp_step(engine, state, c, schedule);
  }
  throw InputError("unknown rule");
}

OnlineResult run_stream(const Network& start, const DataSet& stream, Rule rule,
                        const LearningRateSchedule& schedule) {
  const InferenceEngine engine(start.structure);
  OnlineResult result;
  result.state = OnlineState::start(start);
  result.trace.reserve(stream.size());
  for (std::size_t l = 0; l < stream.size(); ++l) {
    OnlineTraceRecord rec;
    try {
      const OnlineStepInfo info = online_step(rule, engine, result.state, stream.cases[l], schedule);
      rec.case_ll = info.log_likelihood;
      rec.l2_step = info.l2_step;
    } catch (const ZeroProbabilityEvidence&) {
      ++result.skipped;
      ++result.state.t;
    } catch (const InputError& e) {
      throw InputError("stream case " + std::to_string(l) + ": " + e.what());
    }
    rec.t = result.state.t;
    rec.skipped = result.skipped;
    result.trace.push_back(rec);
  }
  return result;
}

}  // namespace bnp
