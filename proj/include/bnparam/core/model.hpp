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

// Discrete Bayesian network representation: variables, parent structure and
// the conditional probability tables.

#ifndef BNPARAM_CORE_MODEL_HPP
#define BNPARAM_CORE_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bnp {

/// Lower bound every estimator output is clamped to.
inline constexpr double kEpsFloor = 1e-9;
/// Row-sum tolerance of the simplex invariant.
inline constexpr double kSimplexTol = 1e-9;
inline constexpr std::size_t kMaxArity = 64;
inline constexpr std::size_t kMaxRows = std::size_t{1} << 20;

struct Variable {
  std::size_t index = 0;
  std::string name;
  std::vector<std::string> states;

  std::size_t arity() const { return states.size(); }
  std::optional<std::size_t> state_index(std::string_view state) const;
};

/// Variables plus parent lists. Immutable after construction; the
/// constructor rejects cycles, duplicate names/parents and oversize tables.
class NetworkStructure {
 public:
  NetworkStructure() = default;
  NetworkStructure(std::vector<Variable> variables,
                   std::vector<std::vector<std::size_t>> parents);

  std::size_t size() const { return variables_.size(); }
  const Variable& variable(std::size_t i) const { return variables_.at(i); }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& topo_order() const { return topo_order_; }

  std::size_t arity(std::size_t i) const { return variables_[i].arity(); }
  /// q_i: number of parent configurations of variable i.
  std::size_t rows(std::size_t i) const { return rows_[i]; }
  /// Total number of CPT entries, sum of q_i * r_i.
  std::size_t total_parameters() const;
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Lexicographic row index of a parent assignment, first parent most
  /// significant. `parent_states[t]` is the state of parents(i)[t].
  std::size_t parent_config_index(std::size_t i,
                                  std::span<const std::size_t> parent_states) const;
  std::vector<std::size_t> decode_parent_config(std::size_t i, std::size_t j) const;

  bool operator==(const NetworkStructure& other) const;

 private:
  std::vector<Variable> variables_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::size_t> topo_order_;
  std::vector<std::size_t> rows_;
};

/// Dense q x r table stored row-major.
class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t states, double fill = 0.0)
      : rows_(rows), states_(states), values_(rows * states, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t states() const { return states_; }

  double& at(std::size_t j, std::size_t k) { return values_[j * states_ + k]; }
  double at(std::size_t j, std::size_t k) const { return values_[j * states_ + k]; }
  std::span<double> row(std::size_t j) { return {values_.data() + j * states_, states_}; }
  std::span<const double> row(std::size_t j) const {
    return {values_.data() + j * states_, states_};
  }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const Table&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t states_ = 0;
  std::vector<double> values_;
};

/// One table per variable, shaped q_i x r_i.
class TableSet {
 public:
  TableSet() = default;
  explicit TableSet(const NetworkStructure& s, double fill = 0.0);

  std::size_t size() const { return tables_.size(); }
  Table& operator[](std::size_t i) { return tables_[i]; }
  const Table& operator[](std::size_t i) const { return tables_[i]; }
  auto begin() { return tables_.begin(); }
  auto end() { return tables_.end(); }
  auto begin() const { return tables_.begin(); }
  auto end() const { return tables_.end(); }

  bool same_shape(const TableSet& other) const;
  std::size_t total_entries() const;

  bool operator==(const TableSet&) const = default;

 private:
  std::vector<Table> tables_;
};

/// CPT entries theta_ijk. Rows lie on the simplex.
using ParameterVector = TableSet;

struct Network {
  std::string name;
  NetworkStructure structure;
  ParameterVector theta;
};

/// Builds a network after checking that table shapes match the structure and
/// every row lies on the simplex within `tol`.
Network make_network(std::string name, NetworkStructure structure, ParameterVector theta,
                     double tol = kSimplexTol);

/// Each row drawn from the flat Dirichlet distribution.
ParameterVector random_init(const NetworkStructure& s, std::uint64_t seed);
ParameterVector uniform_init(const NetworkStructure& s);

/// Half squared L2 distance over all entries.
double param_distance(const ParameterVector& a, const ParameterVector& b);
/// Plain L2 norm of the difference.
double l2_distance(const TableSet& a, const TableSet& b);
double max_abs_diff(const TableSet& a, const TableSet& b);

/// Raises entries below `floor` to exactly `floor` and rescales the remaining
/// entries so the row sums to one. Rows that are not finite or have no
/// positive mass become uniform.
void clamp_renormalize(std::span<double> row, double floor = kEpsFloor);
/// Divides the row by its sum, no floor.
void renormalize(std::span<double> row);

/// Largest |sum_k theta_ijk - 1| over all rows.
double max_row_sum_error(const ParameterVector& theta);
/// Throws InputError unless shapes match and every row sums to one within
/// `tol` with entries in [0, 1].
void check_simplex(const NetworkStructure& s, const ParameterVector& theta,
                   double tol = kSimplexTol);

}  // namespace bnp

#endif  // BNPARAM_CORE_MODEL_HPP
