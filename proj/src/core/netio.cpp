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

#include "bnparam/core/netio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "bnparam/core/errors.hpp"
#include <json.hpp>

namespace bnp {

namespace {

using json = nlohmann::json;

constexpr double kParseRowTol = 1e-6;
constexpr double kRoundingSlack = 1e-13;

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

bool DataCase::complete() const {
  for (StateIndex v : values)
    if (v == kMissing) return false;
  return true;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Network parse_network(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw InputError(std::string("network file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("network file must be a JSON object");

  try {
    std::string name = doc.value("name", std::string{});
    if (!doc.contains("variables") || !doc["variables"].is_array())
      throw InputError("network file needs a \"variables\" array");

    std::vector<Variable> vars;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& jv : doc["variables"]) {
      Variable v;
      v.name = jv.at("name").get<std::string>();
      if (!valid_name(v.name)) throw InputError("invalid variable name '" + v.name + "'");
      v.states = jv.at("states").get<std::vector<std::string>>();
      for (const auto& st : v.states)
        if (!valid_name(st))
          throw InputError("invalid state name '" + st + "' of variable '" + v.name + "'");
      if (index.count(v.name)) throw InputError("duplicate variable name '" + v.name + "'");
      index.emplace(v.name, vars.size());
      vars.push_back(std::move(v));
    }

    auto lookup = [&](const std::string& n) {
      auto it = index.find(n);
      if (it == index.end()) throw InputError("unknown variable '" + n + "'");
      return it->second;
    };

    std::vector<std::vector<std::size_t>> parents(vars.size());
    if (doc.contains("parents")) {
      const auto& jp = doc["parents"];
      if (!jp.is_object()) throw InputError("\"parents\" must be an object");
      for (auto it = jp.begin(); it != jp.end(); ++it) {
        const std::size_t child = lookup(it.key());
        for (const auto& pn : it.value()) {
          const std::string pname = pn.get<std::string>();
          auto pit = index.find(pname);
          if (pit == index.end())
            throw InputError("unknown parent '" + pname + "' of '" + it.key() + "'");
          parents[child].push_back(pit->second);
        }
      }
    }

    NetworkStructure structure(std::move(vars), std::move(parents));

    if (!doc.contains("cpt") || !doc["cpt"].is_object())
      throw InputError("network file needs a \"cpt\" object");
    const auto& jc = doc["cpt"];
    for (auto it = jc.begin(); it != jc.end(); ++it) lookup(it.key());

    ParameterVector theta(structure);
    for (std::size_t i = 0; i < structure.size(); ++i) {
      const std::string& vname = structure.variable(i).name;
      if (!jc.contains(vname)) throw InputError("missing CPT for '" + vname + "'");
      const auto& rows = jc[vname];
      if (!rows.is_array() || rows.size() != structure.rows(i))
        throw InputError("CPT of '" + vname + "' must have " + std::to_string(structure.rows(i)) +
                         " rows");
      Table& t = theta[i];
      for (std::size_t j = 0; j < t.rows(); ++j) {
        const auto& jr = rows[j];
        if (!jr.is_array() || jr.size() != t.states())
          throw InputError("CPT of '" + vname + "' row " + std::to_string(j) + " must have " +
                           std::to_string(t.states()) + " entries");
        double sum = 0.0;
        for (std::size_t k = 0; k < t.states(); ++k) {
          const double v = jr[k].get<double>();
          if (!(v >= 0.0 && v <= 1.0))
            throw InputError("CPT of '" + vname + "' row " + std::to_string(j) +
                             " has an entry outside [0, 1]");
          t.at(j, k) = v;
          sum += v;
        }
        if (std::abs(sum - 1.0) > kParseRowTol)
          throw InputError("CPT of '" + vname + "' row " + std::to_string(j) +
                           " sums to " + format_real(sum));
        // Rows already normalized to rounding error are kept bit-exact so
        // that serialize/parse is idempotent.
        if (std::abs(sum - 1.0) > kRoundingSlack)
          for (double& v : t.row(j)) v /= sum;
      }
    }
    return make_network(std::move(name), std::move(structure), std::move(theta));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed network file: ") + e.what());
  }
}

std::string serialize_network(const Network& net) {
  const NetworkStructure& s = net.structure;
  auto quote = [](const std::string& x) { return json(x).dump(); };
  std::ostringstream out;
  out << "{\n  \"name\": " << quote(net.name) << ",\n  \"variables\": [";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Variable& v = s.variable(i);
    out << (i ? ",\n" : "\n") << "    {\"name\": " << quote(v.name) << ", \"states\": [";
    for (std::size_t k = 0; k < v.arity(); ++k) out << (k ? ", " : "") << quote(v.states[k]);
    out << "]}";
  }
  out << "\n  ],\n  \"parents\": {";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << (i ? ",\n" : "\n") << "    " << quote(s.variable(i).name) << ": [";
    const auto& pa = s.parents(i);
    for (std::size_t t = 0; t < pa.size(); ++t)
      out << (t ? ", " : "") << quote(s.variable(pa[t]).name);
    out << "]";
  }
  out << "\n  },\n  \"cpt\": {";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << (i ? ",\n" : "\n") << "    " << quote(s.variable(i).name) << ": [";
    const Table& t = net.theta[i];
    for (std::size_t j = 0; j < t.rows(); ++j) {
      out << (j ? ",\n      [" : "\n      [");
      for (std::size_t k = 0; k < t.states(); ++k) out << (k ? ", " : "") << format_real(t.at(j, k));
      out << "]";
    }
    out << "\n    ]";
  }
  out << "\n  }\n}\n";
  return out.str();
}

DataSet load_dataset(std::string_view text, const NetworkStructure& s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = pos + 1;
  }
  // A trailing newline leaves empty lines at the end; those end the file.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw InputError("dataset is empty (no header row)");

  DataSet ds;
  std::unordered_set<std::size_t> seen;
  for (std::string_view h : split_commas(lines[0])) {
    auto idx = s.index_of(h);
    if (!idx) throw InputError("unknown variable '" + std::string(h) + "' in dataset header");
    if (!seen.insert(*idx).second)
      throw InputError("duplicate column '" + std::string(h) + "' in dataset header");
    ds.columns.push_back(*idx);
  }

  ds.cases.reserve(lines.size() - 1);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto cells = split_commas(lines[ln]);
    if (cells.size() != ds.columns.size())
      throw InputError("dataset line " + std::to_string(ln + 1) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(ds.columns.size()));
    DataCase c(s.size());
    for (std::size_t col = 0; col < cells.size(); ++col) {
      const std::string_view cell = cells[col];
      if (cell == "?") continue;
      const Variable& v = s.variable(ds.columns[col]);
      if (cell.empty())
        throw InputError("dataset line " + std::to_string(ln + 1) + " has an empty cell for '" +
                         v.name + "' (use ? for missing)");
      auto k = v.state_index(cell);
      if (!k)
        throw InputError("dataset line " + std::to_string(ln + 1) + ": '" + std::string(cell) +
                         "' is not a state of '" + v.name + "'");
      c.values[v.index] = static_cast<StateIndex>(*k);
    }
    ds.cases.push_back(std::move(c));
  }
  return ds;
}

std::string format_dataset(const NetworkStructure& s, const std::vector<DataCase>& cases,
                           const std::vector<std::size_t>& columns) {
  std::vector<std::size_t> cols = columns;
  if (cols.empty())
    for (std::size_t i = 0; i < s.size(); ++i) cols.push_back(i);
  std::string out;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    out += s.variable(cols[c]).name;
  }
  out += '\n';
  for (const auto& dc : cases) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out += ',';
      const StateIndex v = dc.values.at(cols[c]);
      out += v == kMissing ? std::string("?") : s.variable(cols[c]).states.at(v);
    }
    out += '\n';
  }
  return out;
}

std::string format_trace(const std::vector<TraceRecord>& records) {
  std::string out = "iter,train_ll,test_ll,max_param_delta,l2_step,wall_ms\n";
  for (const auto& r : records) {
    out += std::to_string(r.iter);
    out += ',' + format_real(r.train_ll);
    out += ',' + (r.test_ll ? format_real(*r.test_ll) : std::string{});
    out += ',' + format_real(r.max_param_delta);
    out += ',' + format_real(r.l2_step);
    out += ',' + format_real(r.wall_ms);
    out += '\n';
  }
  return out;
}

std::string format_online_trace(const std::vector<OnlineTraceRecord>& records) {
  std::string out = "t,case_ll,l2_step,skipped\n";
  for (const auto& r : records) {
    out += std::to_string(r.t);
    out += ',' + (r.case_ll ? format_real(*r.case_ll) : std::string{});
    out += ',' + format_real(r.l2_step);
    out += ',' + std::to_string(r.skipped) + '\n';
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

Network load_network_file(const std::string& path) { return parse_network(read_file(path)); }

DataSet load_dataset_file(const std::string& path, const NetworkStructure& s) {
  return load_dataset(read_file(path), s);
}

void write_trace(const std::vector<TraceRecord>& records, const std::string& path) {
  write_file(path, format_trace(records));
}

void write_dataset(const NetworkStructure& s, const std::vector<DataCase>& cases,
                   const std::string& path) {
  write_file(path, format_dataset(s, cases));
}

}  // namespace bnp
