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

#include "bnparam/core/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "bnparam/core/errors.hpp"
#include "bnparam/core/rng.hpp"

namespace bnp {

std::optional<std::size_t> Variable::state_index(std::string_view state) const {
  for (std::size_t k = 0; k < states.size(); ++k)
    if (states[k] == state) return k;
  return std::nullopt;
}

NetworkStructure::NetworkStructure(std::vector<Variable> variables,
                                   std::vector<std::vector<std::size_t>> parents)
    : variables_(std::move(variables)), parents_(std::move(parents)) {
  const std::size_t n = variables_.size();
  if (parents_.size() != n)
    throw InputError("parent list count does not match variable count");

  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    Variable& v = variables_[i];
    v.index = i;
    if (v.name.empty()) throw InputError("variable " + std::to_string(i) + " has no name");
    if (!names.insert(v.name).second) throw InputError("duplicate variable name '" + v.name + "'");
    if (v.arity() < 2)
      throw InputError("variable '" + v.name + "' needs at least 2 states");
    if (v.arity() > kMaxArity)
      throw InputError("variable '" + v.name + "' exceeds the arity cap of " +
                       std::to_string(kMaxArity));
    std::unordered_set<std::string> states(v.states.begin(), v.states.end());
    if (states.size() != v.arity())
      throw InputError("variable '" + v.name + "' has duplicate state names");
  }

  rows_.assign(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::unordered_set<std::size_t> seen;
    for (std::size_t p : parents_[i]) {
      if (p >= n) throw InputError("parent index out of range for '" + variables_[i].name + "'");
      if (p == i) throw InputError("cycle detected: '" + variables_[i].name + "' is its own parent");
      if (!seen.insert(p).second)
        throw InputError("duplicate parent '" + variables_[p].name + "' of '" +
                         variables_[i].name + "'");
      rows_[i] *= variables_[p].arity();
      if (rows_[i] > kMaxRows)
        throw InputError("'" + variables_[i].name + "' has more than 2^20 parent configurations");
    }
  }

  // Kahn's algorithm; the smallest ready index goes first so the order is
  // canonical.
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    indegree[i] = parents_[i].size();
    for (std::size_t p : parents_[i]) children[p].push_back(i);
  }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.insert(i);
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    topo_order_.push_back(v);
    for (std::size_t c : children[v])
      if (--indegree[c] == 0) ready.insert(c);
  }
  if (topo_order_.size() != n) throw InputError("cycle detected in parent graph");
}

std::size_t NetworkStructure::total_parameters() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < size(); ++i) total += rows_[i] * arity(i);
  return total;
}

std::optional<std::size_t> NetworkStructure::index_of(std::string_view name) const {
  for (const auto& v : variables_)
    if (v.name == name) return v.index;
  return std::nullopt;
}

std::size_t NetworkStructure::parent_config_index(
    std::size_t i, std::span<const std::size_t> parent_states) const {
  if (i >= size()) throw InputError("unknown variable index " + std::to_string(i));
  const auto& pa = parents_[i];
  if (parent_states.size() != pa.size())
    throw InputError("parent assignment has wrong length for '" + variables_[i].name + "'");
  std::size_t j = 0;
  for (std::size_t t = 0; t < pa.size(); ++t) {
    const std::size_t r = variables_[pa[t]].arity();
    if (parent_states[t] >= r)
      throw InputError("state out of range for parent '" + variables_[pa[t]].name + "'");
    j = j * r + parent_states[t];
  }
  return j;
}

std::vector<std::size_t> NetworkStructure::decode_parent_config(std::size_t i,
                                                                std::size_t j) const {
  if (i >= size()) throw InputError("unknown variable index " + std::to_string(i));
  if (j >= rows_[i]) throw InputError("row index out of range");
  const auto& pa = parents_[i];
  std::vector<std::size_t> states(pa.size());
  for (std::size_t t = pa.size(); t-- > 0;) {
    const std::size_t r = variables_[pa[t]].arity();
    states[t] = j % r;
    j /= r;
  }
  return states;
}

bool NetworkStructure::operator==(const NetworkStructure& other) const {
  if (size() != other.size() || parents_ != other.parents_) return false;
  for (std::size_t i = 0; i < size(); ++i)
    if (variables_[i].name != other.variables_[i].name ||
        variables_[i].states != other.variables_[i].states)
      return false;
  return true;
}

TableSet::TableSet(const NetworkStructure& s, double fill) {
  tables_.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) tables_.emplace_back(s.rows(i), s.arity(i), fill);
}

bool TableSet::same_shape(const TableSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i)
    if (tables_[i].rows() != other.tables_[i].rows() ||
        tables_[i].states() != other.tables_[i].states())
      return false;
  return true;
}

std::size_t TableSet::total_entries() const {
  std::size_t n = 0;
  for (const auto& t : tables_) n += t.values().size();
  return n;
}

Network make_network(std::string name, NetworkStructure structure, ParameterVector theta,
                     double tol) {
  check_simplex(structure, theta, tol);
  return Network{std::move(name), std::move(structure), std::move(theta)};
}

ParameterVector random_init(const NetworkStructure& s, std::uint64_t seed) {
  ParameterVector theta(s);
  Rng rng(seed);
  for (std::size_t i = 0; i < s.size(); ++i) {
    Table& t = theta[i];
    for (std::size_t j = 0; j < t.rows(); ++j) {
      auto row = t.row(j);
      double total = 0.0;
      for (double& v : row) total += (v = rng.exponential());
      for (double& v : row) v /= total;
      clamp_renormalize(row);
    }
  }
  return theta;
}

ParameterVector uniform_init(const NetworkStructure& s) {
  ParameterVector theta(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = 1.0 / static_cast<double>(s.arity(i));
    std::fill(theta[i].values().begin(), theta[i].values().end(), v);
  }
  return theta;
}

namespace {

void require_same_shape(const TableSet& a, const TableSet& b) {
  if (!a.same_shape(b)) throw InputError("parameter vectors have different shapes");
}

}  // namespace

double param_distance(const ParameterVector& a, const ParameterVector& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& va = a[i].values();
    const auto& vb = b[i].values();
    for (std::size_t e = 0; e < va.size(); ++e) acc += (va[e] - vb[e]) * (va[e] - vb[e]);
  }
  return 0.5 * acc;
}

double l2_distance(const TableSet& a, const TableSet& b) {
  return std::sqrt(2.0 * param_distance(a, b));
}

double max_abs_diff(const TableSet& a, const TableSet& b) {
  require_same_shape(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& va = a[i].values();
    const auto& vb = b[i].values();
    for (std::size_t e = 0; e < va.size(); ++e) m = std::max(m, std::abs(va[e] - vb[e]));
  }
  return m;
}

void renormalize(std::span<double> row) {
  double total = 0.0;
  for (double v : row) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
    return;
  }
  if (total == 1.0) return;
  for (double& v : row) v /= total;
}

void clamp_renormalize(std::span<double> row, double floor) {
  const std::size_t r = row.size();
  for (double v : row) {
    if (!std::isfinite(v)) {
      std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(r));
      return;
    }
  }
  // Clamped entries are pinned at `floor`; the rest share the remaining mass
  // in proportion to their current values. Pinning can push another entry
  // under the floor after rescaling, so repeat until stable (at most r
  // rounds, since the pinned set only grows).
  std::vector<bool> pinned(r, false);
  for (std::size_t round = 0; round <= r; ++round) {
    std::size_t n_pinned = 0;
    double free_total = 0.0;
    bool changed = false;
    for (std::size_t k = 0; k < r; ++k) {
      if (!pinned[k] && row[k] < floor) {
        pinned[k] = true;
        changed = true;
      }
      if (pinned[k]) {
        row[k] = floor;
        ++n_pinned;
      } else {
        free_total += row[k];
      }
    }
    if (!changed && n_pinned == 0) {
      renormalize(row);
      return;
    }
    const double free_mass = 1.0 - static_cast<double>(n_pinned) * floor;
    if (n_pinned == r || !(free_total > 0.0)) {
      // Nothing positive left to rescale; spread the free mass evenly.
      const std::size_t n_free = r - n_pinned;
      if (n_free == 0) {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(r));
        return;
      }
      for (std::size_t k = 0; k < r; ++k)
        if (!pinned[k]) row[k] = free_mass / static_cast<double>(n_free);
      return;
    }
    const double scale = free_mass / free_total;
    bool below = false;
    for (std::size_t k = 0; k < r; ++k) {
      if (pinned[k]) continue;
      row[k] *= scale;
      if (row[k] < floor) below = true;
    }
    if (!below) return;
  }
}

double max_row_sum_error(const ParameterVector& theta) {
  double worst = 0.0;
  for (const auto& t : theta)
    for (std::size_t j = 0; j < t.rows(); ++j) {
      double s = 0.0;
      for (double v : t.row(j)) s += v;
      worst = std::max(worst, std::abs(s - 1.0));
    }
  return worst;
}

void check_simplex(const NetworkStructure& s, const ParameterVector& theta, double tol) {
  if (theta.size() != s.size()) throw InputError("CPT count does not match variable count");
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Table& t = theta[i];
    const std::string& name = s.variable(i).name;
    if (t.rows() != s.rows(i) || t.states() != s.arity(i))
      throw InputError("CPT of '" + name + "' has shape " + std::to_string(t.rows()) + "x" +
                       std::to_string(t.states()) + ", expected " + std::to_string(s.rows(i)) +
                       "x" + std::to_string(s.arity(i)));
    for (std::size_t j = 0; j < t.rows(); ++j) {
      double sum = 0.0;
      for (double v : t.row(j)) {
        if (!(v >= 0.0 && v <= 1.0))
          throw InputError("CPT of '" + name + "' row " + std::to_string(j) +
                           " has an entry outside [0, 1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol)
        throw InputError("CPT of '" + name + "' row " + std::to_string(j) + " sums to " +
                         std::to_string(sum));
    }
  }
}

}  // namespace bnp
