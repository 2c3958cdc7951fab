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

// File formats: network JSON, dataset CSV and trace CSV.
//
// Network file:
//   { "name": str,
//     "variables": [ {"name": str, "states": [str, ...]}, ... ],
//     "parents": { var: [var, ...] },
//     "cpt": { var: [[p, ...], ...] } }
// CPT rows are listed in lexicographic parent-configuration order, first
// parent most significant.
//
// Dataset file: comma separated, header row of variable names, "?" marks a
// missing value. Names are restricted to [A-Za-z0-9_-].

#ifndef BNPARAM_CORE_NETIO_HPP
#define BNPARAM_CORE_NETIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bnparam/core/model.hpp"

namespace bnp {

using StateIndex = std::int32_t;
inline constexpr StateIndex kMissing = -1;

/// Partial assignment; one slot per network variable.
struct DataCase {
  std::vector<StateIndex> values;

  DataCase() = default;
  explicit DataCase(std::size_t n) : values(n, kMissing) {}

  bool observed(std::size_t i) const { return values[i] != kMissing; }
  bool complete() const;
  bool operator==(const DataCase&) const = default;
};

struct DataSet {
  /// Variable indices in file column order.
  std::vector<std::size_t> columns;
  std::vector<DataCase> cases;

  std::size_t size() const { return cases.size(); }
  bool empty() const { return cases.empty(); }
};

Network parse_network(std::string_view text);
std::string serialize_network(const Network& net);

DataSet load_dataset(std::string_view text, const NetworkStructure& s);
/// Writes the given columns (all variables in declared order when empty).
std::string format_dataset(const NetworkStructure& s, const std::vector<DataCase>& cases,
                           const std::vector<std::size_t>& columns = {});

struct TraceRecord {
  std::size_t iter = 0;
  double train_ll = 0.0;
  std::optional<double> test_ll;
  double max_param_delta = 0.0;
  double l2_step = 0.0;
  double wall_ms = 0.0;
};

struct OnlineTraceRecord {
  std::size_t t = 0;
  /// Log-likelihood of the case under the model before the update; empty
  /// when the case was skipped for having zero probability.
  std::optional<double> case_ll;
  double l2_step = 0.0;
  /// Running count of skipped cases up to and including this one.
  std::size_t skipped = 0;
};

std::string format_trace(const std::vector<TraceRecord>& records);
std::string format_online_trace(const std::vector<OnlineTraceRecord>& records);

/// printf("%.17g"): 17 significant digits, trailing zeros dropped.
std::string format_real(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

Network load_network_file(const std::string& path);
DataSet load_dataset_file(const std::string& path, const NetworkStructure& s);
void write_trace(const std::vector<TraceRecord>& records, const std::string& path);
void write_dataset(const NetworkStructure& s, const std::vector<DataCase>& cases,
                   const std::string& path);

}  // namespace bnp

#endif  // BNPARAM_CORE_NETIO_HPP
