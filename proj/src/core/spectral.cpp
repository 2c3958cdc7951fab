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

#include "bnparam/core/spectral.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "bnparam/core/errors.hpp"
#include "bnparam/core/rng.hpp"

namespace bnp {

ParameterVector phi_apply(const InferenceEngine& engine, const ParameterVector& theta,
                          const DataSet& data, double eta) {
  const SufficientStats st = expected_stats(engine, theta, data);
  return em_eta_step_unclamped(theta, st.joint, st.parent, eta);
}

std::vector<FreeCoordinate> free_coordinates(const NetworkStructure& s) {
  std::vector<FreeCoordinate> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t r = s.arity(i);
    for (std::size_t j = 0; j < s.rows(i); ++j)
      for (std::size_t k = 0; k + 1 < r; ++k) out.push_back({i, j * r + k, j * r + r - 1});
  }
  return out;
}

namespace {

/// Central difference of Phi_1 along free coordinate `c`, read back on the
/// free coordinates.
Eigen::VectorXd difference_column(const InferenceEngine& engine, const ParameterVector& theta,
                                  const DataSet& data, const std::vector<FreeCoordinate>& chart,
                                  const FreeCoordinate& c, double delta) {
  ParameterVector plus = theta, minus = theta;
  plus[c.table].values()[c.entry] += delta;
  plus[c.table].values()[c.last] -= delta;
  minus[c.table].values()[c.entry] -= delta;
  minus[c.table].values()[c.last] += delta;
  const ParameterVector fp = phi_apply(engine, plus, data, 1.0);
  const ParameterVector fm = phi_apply(engine, minus, data, 1.0);
  Eigen::VectorXd col(static_cast<Eigen::Index>(chart.size()));
  for (std::size_t r = 0; r < chart.size(); ++r) {
    const auto& o = chart[r];
    col[static_cast<Eigen::Index>(r)] =
        (fp[o.table].values()[o.entry] - fm[o.table].values()[o.entry]) / (2.0 * delta);
  }
  return col;
}

}  // namespace

JacobianEstimate jacobian(const InferenceEngine& engine, const ParameterVector& theta_star,
                          const DataSet& data, double h) {
  const NetworkStructure& s = engine.structure();
  if (s.total_parameters() > kMaxJacobianParameters)
    throw InputError("network has " + std::to_string(s.total_parameters()) +
                     " parameters; the Jacobian is limited to " +
                     std::to_string(kMaxJacobianParameters));
  if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
  check_simplex(s, theta_star, 1e-6);

  const SufficientStats st = expected_stats(engine, theta_star, data);
  const FixpointCheck fx = is_fixpoint(theta_star, st, kFixpointTol);
  if (!fx.fixpoint)
    throw InputError("parameters are not a fixpoint (residual " + format_real(fx.residual) + ")");

  const std::vector<FreeCoordinate> chart = free_coordinates(s);
  const auto n = static_cast<Eigen::Index>(chart.size());
  Eigen::MatrixXd grad(n, n);
  double gap = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const FreeCoordinate& fc = chart[static_cast<std::size_t>(c)];
    const auto& v = theta_star[fc.table].values();
    // Keep both probes strictly inside the simplex.
    const double delta = std::min({h, v[fc.entry] / 2.0, v[fc.last] / 2.0});
    if (!(delta > 0.0)) throw NumericalError("parameter on the simplex boundary");
    const Eigen::VectorXd d1 = difference_column(engine, theta_star, data, chart, fc, delta);
    const Eigen::VectorXd d2 = difference_column(engine, theta_star, data, chart, fc, delta / 2.0);
    grad.col(c) = d1;
    gap = std::max(gap, (d1 - d2).cwiseAbs().maxCoeff());
  }
  JacobianEstimate out;
  out.m = Eigen::MatrixXd::Identity(n, n) - grad;
  out.richardson_gap = gap;
  out.theta_residual = fx.residual;
  return out;
}

EigenRange eigen_range(const Eigen::MatrixXd& m, double cutoff) {
  if (m.rows() != m.cols() || m.rows() == 0) throw InputError("eigen_range needs a square matrix");
  if (!m.allFinite()) throw NumericalError("matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue solver did not converge");

  EigenRange out;
  for (Eigen::Index k = 0; k < m.rows(); ++k) out.eigenvalues.push_back(solver.eigenvalues()[k].real());
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  out.lambda_max = out.eigenvalues.back();
  out.rank_deficient = out.eigenvalues.front() < cutoff;
  const auto it = std::upper_bound(out.eigenvalues.begin(), out.eigenvalues.end(), cutoff);
  if (it == out.eigenvalues.end()) throw NumericalError("no eigenvalue above the cutoff");
  out.lambda_min = *it;
  return out;
}

double eta_star(double lambda_min, double lambda_max) {
  if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min))
    throw InputError("eta_star needs 0 < lambda_min <= lambda_max");
  return 2.0 / (lambda_min + lambda_max);
}

double contraction_rate(double eta, double lambda_min, double lambda_max) {
  return std::max(std::abs(1.0 - eta * lambda_min), std::abs(1.0 - eta * lambda_max));
}

double empirical_rate(const std::vector<ParameterVector>& iterates,
                      const ParameterVector& theta_star, std::size_t window) {
  constexpr double kNear = 0.05;
  constexpr double kNoise = 1e-13;
  std::vector<double> d;
  for (const auto& th : iterates) {
    const double v = l2_distance(th, theta_star);
    if (v < kNear) d.push_back(v);
  }
  if (window < 1) throw InputError("window must be at least 1");
  if (d.size() < 4)
    throw InputError("need at least 4 iterates within 0.05 of the fixpoint, got " +
                     std::to_string(d.size()));
  const std::size_t count = std::min(d.size(), window + 1);
  const std::vector<double> tail(d.end() - static_cast<std::ptrdiff_t>(count), d.end());
  for (double v : tail)
    if (v < kNoise) throw InputError("iterate distance below the 1e-13 noise floor");
  return std::pow(tail.back() / tail.front(), 1.0 / static_cast<double>(count - 1));
}

RateMeasurement measure_empirical_rate(const InferenceEngine& engine,
                                       const ParameterVector& theta_star, const DataSet& data,
                                       double eta, std::uint64_t seed) {
  constexpr double kMix = 0.02;
  constexpr double kStop = 1e-14;
  constexpr double kKeep = 1e-8;
  constexpr std::size_t kMaxSteps = 100000;

  ParameterVector theta = theta_star;
  Rng rng(seed);
  for (auto& t : theta)
    for (std::size_t j = 0; j < t.rows(); ++j) {
      auto row = t.row(j);
      std::vector<double> e(row.size());
      double total = 0.0;
      for (double& x : e) total += (x = rng.exponential());
      for (std::size_t k = 0; k < row.size(); ++k)
        row[k] = (1.0 - kMix) * row[k] + kMix * e[k] / total;
    }

  std::vector<ParameterVector> iterates{theta};
  RateMeasurement out;
  for (;;) {
    if (out.iterations == kMaxSteps) throw NumericalError("EM run did not settle");
    ParameterVector next = phi_apply(engine, theta, data, eta);
    ++out.iterations;
    const double step = max_abs_diff(next, theta);
    if (!std::isfinite(step) || step > 1.0) throw NumericalError("EM run diverged");
    theta = std::move(next);
    iterates.push_back(theta);
    if (step < kStop) break;
  }
  out.limit = theta;
  std::vector<ParameterVector> kept;
  for (auto& th : iterates)
    if (l2_distance(th, out.limit) >= kKeep) kept.push_back(std::move(th));
  out.rate = empirical_rate(kept, out.limit);
  return out;
}

SpectralReport analyze(const NetworkStructure& s, const ParameterVector& theta_star,
                       const DataSet& data, const SpectralOptions& options) {
  const InferenceEngine engine(s);
  const JacobianEstimate jac = jacobian(engine, theta_star, data);
  const EigenRange er = eigen_range(jac.m);

  SpectralReport rep;
  rep.lambda_min = er.lambda_min;
  rep.lambda_max = er.lambda_max;
  rep.eta_star = eta_star(er.lambda_min, er.lambda_max);
  rep.rank_deficient = er.rank_deficient;
  rep.theta_residual = jac.theta_residual;
  rep.richardson_gap = jac.richardson_gap;
  rep.eigenvalues = er.eigenvalues;
  for (double eta : options.etas) {
    if (!(eta > 0.0)) throw InputError("learning rates for the rho table must be positive");
    RhoEntry e{eta, contraction_rate(eta, er.lambda_min, er.lambda_max), std::nullopt};
    if (options.measure_empirical) {
      try {
        e.empirical = measure_empirical_rate(engine, theta_star, data, eta, options.seed).rate;
      } catch (const Error&) {
        // Diverging or too-short runs leave the entry without a measurement.
      }
    }
    rep.rho.push_back(e);
  }
  return rep;
}

std::string spectral_report_json(const SpectralReport& report) {
  nlohmann::ordered_json j;
  j["lambda_min"] = report.lambda_min;
  j["lambda_max"] = report.lambda_max;
  j["eta_star"] = report.eta_star;
  j["rank_deficient"] = report.rank_deficient;
  j["theta_residual"] = report.theta_residual;
  j["richardson_gap"] = report.richardson_gap;
  j["eigenvalues"] = report.eigenvalues;
  auto rho = nlohmann::ordered_json::array();
  for (const auto& e : report.rho) {
    nlohmann::ordered_json row;
    row["eta"] = e.eta;
    row["predicted"] = e.predicted;
    if (e.empirical) row["empirical"] = *e.empirical;
    rho.push_back(row);
  }
  j["rho"] = rho;
  return j.dump(2) + "\n";
}

}  // namespace bnp
