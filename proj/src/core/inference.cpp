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

#include "bnparam/core/inference.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bnparam/core/errors.hpp"

namespace bnp {

namespace {

constexpr std::size_t kMaxCliqueSize = std::size_t{1} << 24;

// Row-major strides for `vars` (last variable fastest).
std::vector<std::size_t> strides_for(const NetworkStructure& s,
                                     const std::vector<std::size_t>& vars, std::size_t* total) {
  std::vector<std::size_t> st(vars.size());
  std::size_t acc = 1;
  for (std::size_t t = vars.size(); t-- > 0;) {
    st[t] = acc;
    acc *= s.arity(vars[t]);
    if (acc > kMaxCliqueSize)
      throw InputError("network too densely connected for exact inference (clique table over 2^24)");
  }
  if (total) *total = acc;
  return st;
}

// Index into a table over `sub_vars` for the assignment `states` of the
// full variable set.
std::uint32_t project(const std::vector<std::size_t>& sub_vars,
                      const std::vector<std::size_t>& sub_strides,
                      const std::vector<std::size_t>& states) {
  std::size_t idx = 0;
  for (std::size_t t = 0; t < sub_vars.size(); ++t) idx += states[sub_vars[t]] * sub_strides[t];
  return static_cast<std::uint32_t>(idx);
}

}  // namespace

struct InferenceEngine::Workspace {
  std::vector<std::vector<double>> pot;
  std::vector<std::vector<double>> up_belief;
  std::vector<std::vector<double>> up_msg;
  std::vector<std::vector<double>> down_msg;
  std::vector<std::vector<double>> belief;
  std::vector<double> scratch;
};

InferenceEngine::InferenceEngine(const NetworkStructure& s) : structure_(s) {
  const std::size_t n = s.size();

  std::vector<std::set<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pa = s.parents(i);
    for (std::size_t a = 0; a < pa.size(); ++a) {
      adj[i].insert(pa[a]);
      adj[pa[a]].insert(i);
      for (std::size_t b = a + 1; b < pa.size(); ++b) {
        adj[pa[a]].insert(pa[b]);
        adj[pa[b]].insert(pa[a]);
      }
    }
  }

  // Greedy min-degree elimination; ties go to the smaller index.
  std::vector<bool> gone(n, false);
  std::vector<std::size_t> position(n, 0);
  std::vector<std::vector<std::size_t>> clique_vars;
  for (std::size_t pos = 0; pos < n; ++pos) {
    std::size_t best = kNone;
    for (std::size_t v = 0; v < n; ++v) {
      if (gone[v]) continue;
      if (best == kNone || adj[v].size() < adj[best].size()) best = v;
    }
    const std::size_t v = best;
    std::vector<std::size_t> nbrs(adj[v].begin(), adj[v].end());
    for (std::size_t a : nbrs) {
      adj[a].erase(v);
      for (std::size_t b : nbrs)
        if (a != b) adj[a].insert(b);
    }
    adj[v].clear();
    gone[v] = true;
    position[v] = pos;
    order_.push_back(v);
    nbrs.push_back(v);
    std::sort(nbrs.begin(), nbrs.end());
    clique_vars.push_back(std::move(nbrs));
  }

  cliques_.resize(n);
  std::vector<std::vector<std::size_t>> clique_strides(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    Clique& c = cliques_[pos];
    c.vars = clique_vars[pos];
    clique_strides[pos] = strides_for(s, c.vars, &c.size);
    std::size_t parent_pos = kNone;
    for (std::size_t v : c.vars)
      if (v != order_[pos] && (parent_pos == kNone || position[v] < parent_pos))
        parent_pos = position[v];
    c.parent = parent_pos;
    if (parent_pos != kNone) cliques_[parent_pos].children.push_back(pos);
  }

  // Decoded assignment of a clique's flat index, as a full-length state
  // vector (entries outside the clique are left at zero).
  std::vector<std::size_t> states(n, 0);
  auto decode = [&](std::size_t pos, std::size_t a) {
    const Clique& c = cliques_[pos];
    for (std::size_t t = 0; t < c.vars.size(); ++t) {
      const std::size_t v = c.vars[t];
      states[v] = (a / clique_strides[pos][t]) % s.arity(v);
    }
  };

  for (std::size_t pos = 0; pos < n; ++pos) {
    Clique& c = cliques_[pos];
    if (c.parent == kNone) continue;
    std::vector<std::size_t> sep;
    for (std::size_t v : c.vars)
      if (v != order_[pos]) sep.push_back(v);
    const auto sep_strides = strides_for(s, sep, &c.sep_size);
    c.up_map.resize(c.size);
    for (std::size_t a = 0; a < c.size; ++a) {
      decode(pos, a);
      c.up_map[a] = project(sep, sep_strides, states);
    }
    const Clique& p = cliques_[c.parent];
    c.down_map.resize(p.size);
    for (std::size_t a = 0; a < p.size; ++a) {
      decode(c.parent, a);
      c.down_map[a] = project(sep, sep_strides, states);
    }
  }

  // Each CPT goes to the clique of the first-eliminated member of its
  // family; moralization guarantees that clique contains the whole family.
  family_home_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t home = position[i];
    for (std::size_t p : s.parents(i)) home = std::min(home, position[p]);
    family_home_[i] = home;
    Clique& c = cliques_[home];
    Family f;
    f.var = i;
    f.states = s.arity(i);
    f.cpt_index.resize(c.size);
    for (std::size_t a = 0; a < c.size; ++a) {
      decode(home, a);
      std::size_t j = 0;
      for (std::size_t p : s.parents(i)) j = j * s.arity(p) + states[p];
      f.cpt_index[a] = static_cast<std::uint32_t>(j * f.states + states[i]);
    }
    c.families.push_back(std::move(f));
  }
}

std::size_t InferenceEngine::max_clique_size() const {
  std::size_t m = 0;
  for (const auto& c : cliques_) m = std::max(m, c.size);
  return m;
}

void InferenceEngine::validate_case(const DataCase& c) const {
  if (c.values.size() != structure_.size())
    throw InputError("data case has " + std::to_string(c.values.size()) + " slots, network has " +
                     std::to_string(structure_.size()) + " variables");
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    const StateIndex v = c.values[i];
    if (v != kMissing && (v < 0 || static_cast<std::size_t>(v) >= structure_.arity(i)))
      throw InputError("state out of range for variable '" + structure_.variable(i).name + "'");
  }
}

void InferenceEngine::build_potentials(const ParameterVector& theta, const DataCase& dc,
                                       Workspace& ws) const {
  const std::size_t n = cliques_.size();
  ws.pot.resize(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const Clique& c = cliques_[pos];
    auto& pot = ws.pot[pos];
    pot.assign(c.size, 1.0);
    for (const Family& f : c.families) {
      const auto& values = theta[f.var].values();
      const StateIndex ev = dc.values[f.var];
      if (ev == kMissing) {
        for (std::size_t a = 0; a < c.size; ++a) pot[a] *= values[f.cpt_index[a]];
      } else {
        const auto k_obs = static_cast<std::size_t>(ev);
        for (std::size_t a = 0; a < c.size; ++a) {
          const std::uint32_t idx = f.cpt_index[a];
          pot[a] *= (idx % f.states == k_obs) ? values[idx] : 0.0;
        }
      }
    }
  }
}

double InferenceEngine::upward(Workspace& ws) const {
  const std::size_t n = cliques_.size();
  ws.up_belief.resize(n);
  ws.up_msg.resize(n);
  double log_z = 0.0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const Clique& c = cliques_[pos];
    auto& buf = ws.up_belief[pos];
    buf = ws.pot[pos];
    for (std::size_t ch : c.children) {
      const auto& msg = ws.up_msg[ch];
      const auto& map = cliques_[ch].down_map;
      for (std::size_t a = 0; a < c.size; ++a) buf[a] *= msg[map[a]];
    }
    if (c.parent != kNone) {
      auto& msg = ws.up_msg[pos];
      msg.assign(c.sep_size, 0.0);
      for (std::size_t a = 0; a < c.size; ++a) msg[c.up_map[a]] += buf[a];
      const double mx = *std::max_element(msg.begin(), msg.end());
      if (!(mx > 0.0)) throw ZeroProbabilityEvidence();
      for (double& m : msg) m /= mx;
      log_z += std::log(mx);
    } else {
      double z = 0.0;
      for (double b : buf) z += b;
      if (!(z > 0.0)) throw ZeroProbabilityEvidence();
      log_z += std::log(z);
    }
  }
  return log_z;
}

void InferenceEngine::downward(Workspace& ws) const {
  const std::size_t n = cliques_.size();
  ws.down_msg.resize(n);
  ws.belief.resize(n);
  for (std::size_t pos = n; pos-- > 0;) {
    const Clique& c = cliques_[pos];
    // base = potential times the message arriving from the parent side.
    auto& base = ws.scratch;
    base = ws.pot[pos];
    if (c.parent != kNone) {
      const auto& dm = ws.down_msg[pos];
      for (std::size_t a = 0; a < c.size; ++a) base[a] *= dm[c.up_map[a]];
    }
    auto& belief = ws.belief[pos];
    belief = ws.up_belief[pos];
    if (c.parent != kNone) {
      const auto& dm = ws.down_msg[pos];
      for (std::size_t a = 0; a < c.size; ++a) belief[a] *= dm[c.up_map[a]];
    }
    double z = 0.0;
    for (double b : belief) z += b;
    if (!(z > 0.0)) throw ZeroProbabilityEvidence();
    for (double& b : belief) b /= z;

    std::vector<double> tmp;
    for (std::size_t ch : c.children) {
      tmp = base;
      for (std::size_t other : c.children) {
        if (other == ch) continue;
        const auto& msg = ws.up_msg[other];
        const auto& map = cliques_[other].down_map;
        for (std::size_t a = 0; a < c.size; ++a) tmp[a] *= msg[map[a]];
      }
      const Clique& child = cliques_[ch];
      auto& out = ws.down_msg[ch];
      out.assign(child.sep_size, 0.0);
      for (std::size_t a = 0; a < c.size; ++a) out[child.down_map[a]] += tmp[a];
      const double mx = *std::max_element(out.begin(), out.end());
      if (mx > 0.0)
        for (double& m : out) m /= mx;
    }
  }
}

double InferenceEngine::log_marginal_likelihood(const ParameterVector& theta,
                                                const DataCase& c) const {
  validate_case(c);
  Workspace ws;
  build_potentials(theta, c, ws);
  return upward(ws);
}

double InferenceEngine::accumulate_posteriors(const ParameterVector& theta, const DataCase& c,
                                              TableSet& acc, double weight) const {
  validate_case(c);
  Workspace ws;
  build_potentials(theta, c, ws);
  const double log_p = upward(ws);
  downward(ws);
  for (std::size_t pos = 0; pos < cliques_.size(); ++pos) {
    const auto& belief = ws.belief[pos];
    for (const Family& f : cliques_[pos].families) {
      auto& out = acc[f.var].values();
      for (std::size_t a = 0; a < belief.size(); ++a) out[f.cpt_index[a]] += weight * belief[a];
    }
  }
  return log_p;
}

FamilyPosteriors InferenceEngine::family_posteriors(const ParameterVector& theta,
                                                    const DataCase& c) const {
  FamilyPosteriors post(structure_);
  accumulate_posteriors(theta, c, post);
  return post;
}

std::vector<double> InferenceEngine::variable_posterior(const ParameterVector& theta,
                                                        const DataCase& c, std::size_t i) const {
  const FamilyPosteriors post = family_posteriors(theta, c);
  const Table& t = post[i];
  std::vector<double> out(t.states(), 0.0);
  for (std::size_t j = 0; j < t.rows(); ++j)
    for (std::size_t k = 0; k < t.states(); ++k) out[k] += t.at(j, k);
  return out;
}

ParentTable InferenceEngine::parent_marginals(const ParameterVector& theta) const {
  const FamilyPosteriors post = family_posteriors(theta, DataCase(structure_.size()));
  ParentTable out(post.size());
  for (std::size_t i = 0; i < post.size(); ++i) {
    const Table& t = post[i];
    out[i].assign(t.rows(), 0.0);
    for (std::size_t j = 0; j < t.rows(); ++j)
      for (double v : t.row(j)) out[i][j] += v;
  }
  return out;
}

double joint_probability(const Network& net, const DataCase& c) {
  const NetworkStructure& s = net.structure;
  if (c.values.size() != s.size() || !c.complete())
    throw InputError("joint_probability needs a case that assigns every variable");
  double p = 1.0;
  std::vector<std::size_t> pa_states;
  for (std::size_t i = 0; i < s.size(); ++i) {
    pa_states.clear();
    for (std::size_t q : s.parents(i)) pa_states.push_back(static_cast<std::size_t>(c.values[q]));
    const std::size_t j = s.parent_config_index(i, pa_states);
    const auto k = static_cast<std::size_t>(c.values[i]);
    if (k >= s.arity(i)) throw InputError("state out of range");
    p *= net.theta[i].at(j, k);
  }
  return p;
}

double log_marginal_likelihood(const Network& net, const DataCase& c) {
  return InferenceEngine(net.structure).log_marginal_likelihood(net.theta, c);
}

FamilyPosteriors family_posteriors(const Network& net, const DataCase& c) {
  return InferenceEngine(net.structure).family_posteriors(net.theta, c);
}

namespace {

// Sums the joint over all completions of `c`, calling visit(states, p) for
// each completion with nonzero mass. Returns the total.
template <typename Visit>
double enumerate_completions(const Network& net, const DataCase& c, Visit&& visit) {
  const NetworkStructure& s = net.structure;
  if (c.values.size() != s.size()) throw InputError("data case has the wrong number of slots");
  std::size_t joint_states = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    joint_states *= s.arity(i);
    if (joint_states > kMaxEnumerationStates)
      throw InputError("state space too large for enumeration (over 2^20 joint states)");
  }
  std::vector<std::size_t> missing;
  std::vector<std::size_t> states(s.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (c.values[i] == kMissing) {
      missing.push_back(i);
    } else {
      if (static_cast<std::size_t>(c.values[i]) >= s.arity(i))
        throw InputError("state out of range");
      states[i] = static_cast<std::size_t>(c.values[i]);
    }
  }
  double total = 0.0;
  for (;;) {
    double p = 1.0;
    for (std::size_t i = 0; i < s.size() && p != 0.0; ++i) {
      std::size_t j = 0;
      for (std::size_t q : s.parents(i)) j = j * s.arity(q) + states[q];
      p *= net.theta[i].at(j, states[i]);
    }
    if (p != 0.0) {
      total += p;
      visit(states, p);
    }
    std::size_t t = 0;
    for (; t < missing.size(); ++t) {
      const std::size_t v = missing[t];
      if (++states[v] < s.arity(v)) break;
      states[v] = 0;
    }
    if (t == missing.size()) break;
  }
  return total;
}

}  // namespace

FamilyPosteriors enumerate_family_posteriors(const Network& net, const DataCase& c) {
  const NetworkStructure& s = net.structure;
  FamilyPosteriors post(s);
  const double total = enumerate_completions(net, c, [&](const auto& states, double p) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::size_t j = 0;
      for (std::size_t q : s.parents(i)) j = j * s.arity(q) + states[q];
      post[i].at(j, states[i]) += p;
    }
  });
  if (!(total > 0.0)) throw ZeroProbabilityEvidence();
  for (auto& t : post)
    for (double& v : t.values()) v /= total;
  return post;
}

double enumerate_log_likelihood(const Network& net, const DataCase& c) {
  const double total = enumerate_completions(net, c, [](const auto&, double) {});
  if (!(total > 0.0)) throw ZeroProbabilityEvidence();
  return std::log(total);
}

}  // namespace bnp
