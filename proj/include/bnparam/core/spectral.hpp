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

// Local convergence analysis of EM(eta) around a fixpoint theta*.
//
// Phi_eta(theta) = E-step at theta followed by the EM(eta) update. Near a
// fixpoint, grad Phi_eta = I - eta M, so each eigen-direction of M with
// eigenvalue lambda shrinks by |1 - eta lambda| per iteration. The rate
//
//   rho_eta = max(|1 - eta lambda_min|, |1 - eta lambda_max|)
//
// is smallest at eta* = 2 / (lambda_min + lambda_max).
//
// M is estimated by central differences of Phi_1 in a chart of free
// coordinates: for a row of r states the first r - 1 entries move and the
// last one absorbs the difference.

#ifndef BNPARAM_CORE_SPECTRAL_HPP
#define BNPARAM_CORE_SPECTRAL_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnparam/core/estimation.hpp"
#include "bnparam/core/inference.hpp"
#include "bnparam/core/model.hpp"
#include "bnparam/core/netio.hpp"

namespace bnp {

inline constexpr double kEigenCutoff = 1e-8;
inline constexpr double kJacobianStep = 1e-5;
inline constexpr double kFixpointTol = 1e-6;
inline constexpr std::size_t kMaxJacobianParameters = 2000;

/// Expected statistics at theta, then EM(eta) without the floor.
ParameterVector phi_apply(const InferenceEngine& engine, const ParameterVector& theta,
                          const DataSet& data, double eta);

/// Flat positions (table, entry) of the free coordinates, in table order.
struct FreeCoordinate {
  std::size_t table = 0;
  std::size_t entry = 0;  // j * r + k with k < r - 1
  std::size_t last = 0;   // j * r + r - 1
};
std::vector<FreeCoordinate> free_coordinates(const NetworkStructure& s);

struct JacobianEstimate {
  /// M = I - grad Phi_1 on the free coordinates.
  Eigen::MatrixXd m;
  /// max |D(h) - D(h/2)| over all entries of the difference quotient.
  double richardson_gap = 0.0;
  /// Fixpoint residual at the analysis point.
  double theta_residual = 0.0;
};

/// Throws InputError when theta_star is not a fixpoint within kFixpointTol
/// or the network has more than kMaxJacobianParameters entries.
JacobianEstimate jacobian(const InferenceEngine& engine, const ParameterVector& theta_star,
                          const DataSet& data, double h = kJacobianStep);

struct EigenRange {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  bool rank_deficient = false;
  /// Real parts, ascending.
  std::vector<double> eigenvalues;
};

/// lambda_min is the smallest eigenvalue above the cutoff; eigenvalues at
/// or below it only set rank_deficient.
EigenRange eigen_range(const Eigen::MatrixXd& m, double cutoff = kEigenCutoff);

double eta_star(double lambda_min, double lambda_max);
double contraction_rate(double eta, double lambda_min, double lambda_max);

/// Geometric mean of ||theta_{s+1} - theta*|| / ||theta_s - theta*|| over
/// the last `window` ratios among iterates within 0.05 of theta*. Needs at
/// least 4 such iterates, all farther than 1e-13 from theta*.
double empirical_rate(const std::vector<ParameterVector>& iterates,
                      const ParameterVector& theta_star, std::size_t window = 10);

struct RateMeasurement {
  double rate = 0.0;
  /// Point the run converged to; on flat ridges of the likelihood this can
  /// differ from the starting fixpoint.
  ParameterVector limit;
  std::size_t iterations = 0;
};

/// Starts EM(eta) from a small random perturbation of theta_star, runs it to
/// convergence and measures the rate of approach to the run's own limit.
RateMeasurement measure_empirical_rate(const InferenceEngine& engine,
                                       const ParameterVector& theta_star, const DataSet& data,
                                       double eta, std::uint64_t seed = 1);

struct RhoEntry {
  double eta = 0.0;
  double predicted = 0.0;
  std::optional<double> empirical;
};

struct SpectralReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double eta_star = 0.0;
  bool rank_deficient = false;
  double theta_residual = 0.0;
  double richardson_gap = 0.0;
  std::vector<double> eigenvalues;
  std::vector<RhoEntry> rho;
};

struct SpectralOptions {
  std::vector<double> etas{0.5, 1.0, 1.5};
  bool measure_empirical = false;
  std::uint64_t seed = 1;
};

SpectralReport analyze(const NetworkStructure& s, const ParameterVector& theta_star,
                       const DataSet& data, const SpectralOptions& options = {});

std::string spectral_report_json(const SpectralReport& report);

}  // namespace bnp

#endif  // BNPARAM_CORE_SPECTRAL_HPP
