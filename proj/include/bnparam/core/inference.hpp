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

// Exact inference for discrete networks.
//
// The engine runs variable elimination with a min-degree ordering of the
// moral graph. Each eliminated variable produces a clique (the variable plus
// its neighbours at elimination time); the cliques form an elimination tree,
// and a single upward/downward sweep over that tree shares the intermediate
// factors between all family queries of one case. Upward messages are
// rescaled to max 1 with the log of the scale accumulated separately, so
// likelihoods far below the double range stay representable.

#ifndef BNPARAM_CORE_INFERENCE_HPP
#define BNPARAM_CORE_INFERENCE_HPP

#include <cstdint>
#include <vector>

#include "bnparam/core/model.hpp"
#include "bnparam/core/netio.hpp"

namespace bnp {

/// Entry (i, j, k) holds P(X_i = k, Pa_i = j | case). Same shape as the
/// parameter vector; each table sums to one.
using FamilyPosteriors = TableSet;

/// Per (i, j) weights over parent configurations, e.g. P(Pa_i = j).
using ParentTable = std::vector<std::vector<double>>;

class InferenceEngine {
 public:
  explicit InferenceEngine(const NetworkStructure& s);

  const NetworkStructure& structure() const { return structure_; }
  const std::vector<std::size_t>& elimination_order() const { return order_; }
  /// Largest clique table size in the elimination tree.
  std::size_t max_clique_size() const;

  /// log P(case). Throws ZeroProbabilityEvidence when the evidence is
  /// impossible under `theta`.
  double log_marginal_likelihood(const ParameterVector& theta, const DataCase& c) const;

  FamilyPosteriors family_posteriors(const ParameterVector& theta, const DataCase& c) const;

  /// Adds `weight * P(x_i^k, pa_i^j | c)` into `acc` and returns log P(c).
  double accumulate_posteriors(const ParameterVector& theta, const DataCase& c, TableSet& acc,
                               double weight = 1.0) const;

  /// P(X_i = k | c) for every state k.
  std::vector<double> variable_posterior(const ParameterVector& theta, const DataCase& c,
                                         std::size_t i) const;

  /// Prior parent-configuration marginals P_theta(Pa_i = j).
  ParentTable parent_marginals(const ParameterVector& theta) const;

 private:
  struct Family {
    std::size_t var = 0;
    std::size_t states = 0;
    /// Flat CPT index (j * r_i + k) for every clique assignment.
    std::vector<std::uint32_t> cpt_index;
  };
  struct Clique {
    std::vector<std::size_t> vars;
    std::size_t size = 1;
    std::size_t parent = kNone;
    std::vector<std::size_t> children;
    std::size_t sep_size = 1;
    /// Separator index for each assignment of this clique.
    std::vector<std::uint32_t> up_map;
    /// Separator index for each assignment of the parent clique.
    std::vector<std::uint32_t> down_map;
    std::vector<Family> families;
  };
  struct Workspace;

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  void validate_case(const DataCase& c) const;
  void build_potentials(const ParameterVector& theta, const DataCase& c, Workspace& ws) const;
  double upward(Workspace& ws) const;
  void downward(Workspace& ws) const;

  NetworkStructure structure_;
  std::vector<std::size_t> order_;
  std::vector<Clique> cliques_;          // indexed by elimination position
  std::vector<std::size_t> family_home_;  // variable -> clique holding its CPT
};

/// Chain-rule product for a case that assigns every variable.
double joint_probability(const Network& net, const DataCase& c);

double log_marginal_likelihood(const Network& net, const DataCase& c);
FamilyPosteriors family_posteriors(const Network& net, const DataCase& c);

/// Reference implementations by exhaustive summation over completions of
/// the case. Limited to 2^20 joint states.
FamilyPosteriors enumerate_family_posteriors(const Network& net, const DataCase& c);
double enumerate_log_likelihood(const Network& net, const DataCase& c);

inline constexpr std::size_t kMaxEnumerationStates = std::size_t{1} << 20;

}  // namespace bnp

#endif  // BNPARAM_CORE_INFERENCE_HPP
