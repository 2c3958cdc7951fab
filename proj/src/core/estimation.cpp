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

#include "bnparam/core/estimation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "bnparam/core/errors.hpp"
#include "parallel.hpp"

namespace bnp {

namespace {

void finish_stats(SufficientStats& st, double ll_sum, std::size_t n) {
  const double dn = static_cast<double>(n);
  st.parent.resize(st.joint.size());
  for (std::size_t i = 0; i < st.joint.size(); ++i) {
    Table& t = st.joint[i];
    for (double& v : t.values()) v /= dn;
    st.parent[i].assign(t.rows(), 0.0);
    for (std::size_t j = 0; j < t.rows(); ++j)
      for (double v : t.row(j)) st.parent[i][j] += v;
  }
  st.log_likelihood = ll_sum / dn;
  st.cases = n;
}

void add_into(TableSet& acc, const TableSet& part) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    auto& a = acc[i].values();
    const auto& p = part[i].values();
    for (std::size_t e = 0; e < a.size(); ++e) a[e] += p[e];
  }
}

void require_cases(const DataSet& data) {
  if (data.empty()) throw InputError("dataset is empty");
}

void check_parent_shape(const ParameterVector& theta, const TableSet& joint,
                        const ParentTable& parent) {
  if (!theta.same_shape(joint) || parent.size() != theta.size())
    throw InputError("statistics do not match the parameter vector shape");
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (parent[i].size() != theta[i].rows())
      throw InputError("parent estimate does not match the parameter vector shape");
}

void check_eta(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InputError("learning rate must be >= 0");
}

}  // namespace

SufficientStats expected_stats(const InferenceEngine& engine, const ParameterVector& theta,
                               const DataSet& data) {
  require_cases(data);
  const std::size_t n = data.size();
  const std::size_t blocks = detail::block_count(n);
  std::vector<TableSet> partial(blocks);
  std::vector<double> ll(blocks, 0.0);
  detail::for_each_block(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    TableSet acc(engine.structure());
    double sum = 0.0;
    for (std::size_t l = begin; l < end; ++l) {
      try {
        sum += engine.accumulate_posteriors(theta, data.cases[l], acc);
      } catch (const ZeroProbabilityEvidence&) {
        throw ZeroProbabilityEvidence(l);
      }
    }
    partial[b] = std::move(acc);
    ll[b] = sum;
  });

  SufficientStats st;
  st.joint = std::move(partial[0]);
  double ll_sum = ll[0];
  for (std::size_t b = 1; b < blocks; ++b) {
    add_into(st.joint, partial[b]);
    ll_sum += ll[b];
  }
  finish_stats(st, ll_sum, n);
  return st;
}

SufficientStats expected_stats(const Network& net, const DataSet& data) {
  return expected_stats(InferenceEngine(net.structure), net.theta, data);
}

SufficientStats expected_stats_enumerated(const Network& net, const DataSet& data) {
  require_cases(data);
  SufficientStats st;
  st.joint = TableSet(net.structure);
  double ll_sum = 0.0;
  for (std::size_t l = 0; l < data.size(); ++l) {
    try {
      add_into(st.joint, enumerate_family_posteriors(net, data.cases[l]));
      ll_sum += enumerate_log_likelihood(net, data.cases[l]);
    } catch (const ZeroProbabilityEvidence&) {
      throw ZeroProbabilityEvidence(l);
    }
  }
  finish_stats(st, ll_sum, data.size());
  return st;
}

double mean_log_likelihood(const InferenceEngine& engine, const ParameterVector& theta,
                           const DataSet& data) {
  require_cases(data);
  std::vector<double> ll(detail::block_count(data.size()), 0.0);
  detail::for_each_block(data.size(), [&](std::size_t b, std::size_t begin, std::size_t end) {
    double sum = 0.0;
    for (std::size_t l = begin; l < end; ++l) {
      try {
        sum += engine.log_marginal_likelihood(theta, data.cases[l]);
      } catch (const ZeroProbabilityEvidence&) {
        throw ZeroProbabilityEvidence(l);
      }
    }
    ll[b] = sum;
  });
  double total = 0.0;
  for (double v : ll) total += v;
  return total / static_cast<double>(data.size());
}

TableSet gradient(const SufficientStats& stats, const ParameterVector& theta) {
  if (!theta.same_shape(stats.joint)) throw InputError("statistics do not match theta");
  TableSet g = stats.joint;
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto& gv = g[i].values();
    const auto& tv = theta[i].values();
    for (std::size_t e = 0; e < gv.size(); ++e) gv[e] /= tv[e];
  }
  return g;
}

ParameterVector gp_step_unclamped(const ParameterVector& theta, const TableSet& grad,
                                  double eta) {
  if (!theta.same_shape(grad)) throw InputError("gradient does not match theta");
  check_eta(eta);
  ParameterVector out = theta;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Table& t = out[i];
    for (std::size_t j = 0; j < t.rows(); ++j) {
      const auto g = grad[i].row(j);
      double mean = 0.0;
      for (double v : g) mean += v;
      mean /= static_cast<double>(g.size());
      auto row = t.row(j);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] += eta * (g[k] - mean);
    }
  }
  return out;
}

ParameterVector gp_step(const ParameterVector& theta, const TableSet& grad, double eta) {
  ParameterVector out = gp_step_unclamped(theta, grad, eta);
  for (auto& t : out)
    for (std::size_t j = 0; j < t.rows(); ++j) clamp_renormalize(t.row(j));
  return out;
}

ParameterVector em_eta_step_unclamped(const ParameterVector& theta, const TableSet& joint,
                                      const ParentTable& parent_estimate, double eta) {
  check_parent_shape(theta, joint, parent_estimate);
  check_eta(eta);
  ParameterVector out = theta;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Table& t = out[i];
    for (std::size_t j = 0; j < t.rows(); ++j) {
      const double mass = parent_estimate[i][j];
      if (mass <= kRowMassFloor) continue;
      auto row = t.row(j);
      const auto jr = joint[i].row(j);
      // A row without joint mass maps to (1 - eta) theta, i.e. theta after
      // normalization; for eta > 1 the sum is negative, so keep it as is.
      if (std::all_of(jr.begin(), jr.end(), [](double v) { return v == 0.0; })) continue;
      for (std::size_t k = 0; k < row.size(); ++k)
        row[k] = eta * (jr[k] / mass) + (1.0 - eta) * row[k];
      renormalize(row);
    }
  }
  return out;
}

ParameterVector em_eta_step(const ParameterVector& theta, const TableSet& joint,
                            const ParentTable& parent_estimate, double eta) {
  ParameterVector out = em_eta_step_unclamped(theta, joint, parent_estimate, eta);
  for (auto& t : out)
    for (std::size_t j = 0; j < t.rows(); ++j) clamp_renormalize(t.row(j));
  return out;
}

ParameterVector em_eta_step(const ParameterVector& theta, const SufficientStats& stats,
                            double eta) {
  return em_eta_step(theta, stats.joint, stats.parent, eta);
}

ParameterVector eg_eta_step(const ParameterVector& theta, const TableSet& joint,
                            const ParentTable& parent_estimate, double eta) {
  check_parent_shape(theta, joint, parent_estimate);
  check_eta(eta);
  ParameterVector out = theta;
  std::vector<double> expo;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Table& t = out[i];
    for (std::size_t j = 0; j < t.rows(); ++j) {
      const double mass = parent_estimate[i][j];
      if (mass <= kRowMassFloor) {
        clamp_renormalize(t.row(j));
        continue;
      }
      auto row = t.row(j);
      const auto jr = joint[i].row(j);
      expo.assign(row.size(), 0.0);
      double top = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        const double base = std::max(row[k], kEpsFloor);
        expo[k] = std::clamp(eta * jr[k] / (base * mass), 0.0, kMaxExponent);
        top = std::max(top, expo[k]);
      }
      // The common factor exp(-top) cancels in the normalization.
      for (std::size_t k = 0; k < row.size(); ++k) row[k] *= std::exp(expo[k] - top);
      renormalize(row);
      clamp_renormalize(row);
    }
  }
  return out;
}

ParameterVector eg_eta_step(const ParameterVector& theta, const SufficientStats& stats,
                            double eta) {
  return eg_eta_step(theta, stats.joint, stats.parent, eta);
}

FixpointCheck is_fixpoint(const ParameterVector& theta, const SufficientStats& stats, double tol) {
  check_parent_shape(theta, stats.joint, stats.parent);
  double residual = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const Table& t = theta[i];
    for (std::size_t j = 0; j < t.rows(); ++j) {
      const double mass = stats.parent[i][j];
      if (mass <= kRowMassFloor) continue;
      for (std::size_t k = 0; k < t.states(); ++k)
        residual = std::max(residual, std::abs(t.at(j, k) - stats.joint[i].at(j, k) / mass));
    }
  }
  return {residual < tol, residual};
}

namespace {

template <typename RowTerm>
double weighted_row_sum(const ParameterVector& a, const ParameterVector& b,
                        const ParentTable& w, RowTerm&& term) {
  if (!a.same_shape(b)) throw InputError("parameter vectors have different shapes");
  if (w.size() != a.size()) throw InputError("weights do not match the parameter vector");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (w[i].size() != a[i].rows()) throw InputError("weights do not match the parameter vector");
    for (std::size_t j = 0; j < a[i].rows(); ++j) {
      if (w[i][j] == 0.0) continue;
      total += w[i][j] * term(a[i].row(j), b[i].row(j));
    }
  }
  return total;
}

}  // namespace

double distance_kl(const ParameterVector& a, const ParameterVector& b, const ParentTable& weights) {
  return weighted_row_sum(a, b, weights, [](auto ra, auto rb) {
    double kl = 0.0;
    for (std::size_t k = 0; k < ra.size(); ++k)
      if (ra[k] > 0.0) kl += ra[k] * std::log(ra[k] / rb[k]);
    return kl;
  });
}

double distance_chi2(const ParameterVector& a, const ParameterVector& b,
                     const ParentTable& weights) {
  return weighted_row_sum(a, b, weights, [](auto ra, auto rb) {
    double c = 0.0;
    for (std::size_t k = 0; k < ra.size(); ++k) c += (ra[k] - rb[k]) * (ra[k] - rb[k]) / rb[k];
    return 0.5 * c;
  });
}

std::string to_string(Rule r) {
  switch (r) {
    case Rule::EM: return "em";
    case Rule::EG: return "eg";
    case Rule::GP: return "gp";
  }
  return "?";
}

Rule parse_rule(const std::string& s) {
  if (s == "em") return Rule::EM;
  if (s == "eg") return Rule::EG;
  if (s == "gp") return Rule::GP;
  throw InputError("unknown rule '" + s + "' (expected em, eg or gp)");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::ConvergedLL: return "converged_ll";
    case Termination::ConvergedParam: return "converged_param";
    case Termination::MaxIters: return "max_iters";
  }
  return "?";
}

ParameterVector initial_parameters(const NetworkStructure& s, const InitSpec& init) {
  switch (init.kind) {
    case InitSpec::Kind::Random: return random_init(s, init.seed);
    case InitSpec::Kind::Uniform: return uniform_init(s);
    case InitSpec::Kind::Given:
      check_simplex(s, init.given, 1e-6);
      return init.given;
  }
  throw InputError("unknown init kind");
}

void FitConfig::validate() const {
  check_eta(eta);
  if (tol_ll <= 0.0 && tol_param <= 0.0)
    throw InputError("at most one of tol_ll and tol_param may be disabled");
}

ParameterVector apply_rule(Rule rule, double eta, const ParameterVector& theta,
                           const SufficientStats& stats) {
  switch (rule) {
    case Rule::EM: return em_eta_step(theta, stats, eta);
    case Rule::EG: return eg_eta_step(theta, stats, eta);
    case Rule::GP: return gp_step(theta, gradient(stats, theta), eta);
  }
  throw InputError("unknown rule");
}

FitResult fit(const NetworkStructure& s, const DataSet& train, const FitConfig& config,
              const DataSet* test, const IterateObserver& observer) {
  config.validate();
  require_cases(train);
  if (test && test->empty()) test = nullptr;

  const InferenceEngine engine(s);
  const auto clock_start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    if (!config.record_wall_time) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     clock_start)
        .count();
  };

  std::size_t iter = 0;
  auto stats_at = [&](const ParameterVector& theta) {
    try {
      if (config.use_enumeration) return expected_stats_enumerated(Network{"", s, theta}, train);
      return expected_stats(engine, theta, train);
    } catch (const ZeroProbabilityEvidence& e) {
      throw ZeroProbabilityEvidence(e.case_index(),
                                    "training set, iteration " + std::to_string(iter));
    }
  };
  auto test_ll_at = [&](const ParameterVector& theta) -> std::optional<double> {
    if (!test) return std::nullopt;
    try {
      return mean_log_likelihood(engine, theta, *test);
    } catch (const ZeroProbabilityEvidence& e) {
      throw ZeroProbabilityEvidence(e.case_index(), "test set, iteration " + std::to_string(iter));
    }
  };

  FitResult result;
  result.theta = initial_parameters(s, config.init);
  result.stats = stats_at(result.theta);
  result.trace.push_back(
      {0, result.stats.log_likelihood, test_ll_at(result.theta), 0.0, 0.0, elapsed_ms()});
  if (observer) observer(0, result.theta);

  result.reason = Termination::MaxIters;
  for (iter = 1; iter <= config.max_iters; ++iter) {
    const bool warm = config.warm_start_em1 && iter == 1;
    ParameterVector next = warm ? em_eta_step(result.theta, result.stats, 1.0)
                                : apply_rule(config.rule, config.eta, result.theta, result.stats);
    const double delta = max_abs_diff(next, result.theta);
    const double step = l2_distance(next, result.theta);
    const double prev_ll = result.stats.log_likelihood;
    result.theta = std::move(next);
    result.stats = stats_at(result.theta);
    result.iterations = iter;
    result.trace.push_back(
        {iter, result.stats.log_likelihood, test_ll_at(result.theta), delta, step, elapsed_ms()});
    if (observer) observer(iter, result.theta);

    if (config.tol_ll > 0.0 && std::abs(result.stats.log_likelihood - prev_ll) < config.tol_ll) {
      result.reason = Termination::ConvergedLL;
      break;
    }
    if (config.tol_param > 0.0 && delta < config.tol_param) {
      result.reason = Termination::ConvergedParam;
      break;
    }
  }
  result.train_ll = result.stats.log_likelihood;
  result.test_ll = result.trace.back().test_ll;
  return result;
}

}  // namespace bnp
