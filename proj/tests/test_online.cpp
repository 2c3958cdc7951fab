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

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bnparam/core/errors.hpp"
#include "bnparam/core/estimation.hpp"
#include "bnparam/core/harness.hpp"
#include "bnparam/core/online.hpp"
#include "test_util.hpp"

using namespace bnp;

namespace {

DataCase observe_root(StateIndex v) {
  DataCase c(1);
  c.values[0] = v;
  return c;
}

ParameterVector step_once(Rule rule, const Network& net, const DataCase& c,
                          const LearningRateSchedule& sched) {
  const InferenceEngine engine(net.structure);
  OnlineState st = OnlineState::start(net);
  online_step(rule, engine, st, c, sched);
  return st.theta;
}

}  // namespace

TEST_SUITE("online") {
  TEST_CASE("schedules") {
    CHECK(LearningRateSchedule::fixed(0.3).rate(17) == 0.3);
    const auto inv = LearningRateSchedule::inverse_t(4.0, 1.0);
    CHECK(inv.rate(1) == 2.0);
    CHECK(inv.rate(7) == 0.5);
    CHECK(LearningRateSchedule::per_row_count().row_rate(5, 3.0, 1.0) == 0.25);
    CHECK_THROWS_AS(LearningRateSchedule::per_row_count().rate(1), InputError);
    CHECK_THROWS_AS(LearningRateSchedule::fixed(2.5), InputError);
    CHECK_THROWS_AS(LearningRateSchedule::fixed(-0.1), InputError);
    CHECK_THROWS_AS(LearningRateSchedule::inverse_t(0.0, 1.0), InputError);

    for (const char* text : {"fixed:0.25", "inv_t:2,10", "per_row"})
      CHECK(LearningRateSchedule::parse(text).to_string() == text);
    CHECK_THROWS_AS(LearningRateSchedule::parse("fixed:abc"), InputError);
    CHECK_THROWS_AS(LearningRateSchedule::parse("inv_t:2"), InputError);
    CHECK_THROWS_AS(LearningRateSchedule::parse("adagrad"), InputError);
  }

  TEST_CASE("EM moves the observed row toward the indicator") {
    const Network net = bnp::testing::single_root(0.5, 0.5);
    const ParameterVector a = step_once(Rule::EM, net, observe_root(0), LearningRateSchedule::fixed(0.3));
    CHECK(a[0].at(0, 0) == doctest::Approx(0.65).epsilon(1e-15));
    const ParameterVector b = step_once(Rule::EM, net, observe_root(1), LearningRateSchedule::fixed(1.0));
    CHECK(b[0].at(0, 0) == kEpsFloor);
    CHECK(b[0].at(0, 1) == doctest::Approx(1.0 - kEpsFloor).epsilon(1e-15));
  }

  TEST_CASE("EG and GP single-root examples") {
    const Network net = bnp::testing::single_root(0.5, 0.5);
    const auto sched = LearningRateSchedule::fixed(0.1);
    const ParameterVector eg = step_once(Rule::EG, net, observe_root(0), sched);
    const double w0 = 0.5 * std::exp(0.2), w1 = 0.5;
    CHECK(eg[0].at(0, 0) == doctest::Approx(w0 / (w0 + w1)).epsilon(1e-14));
    const ParameterVector gp = step_once(Rule::GP, net, observe_root(0), sched);
    CHECK(gp[0].at(0, 0) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(gp[0].at(0, 1) == doctest::Approx(0.4).epsilon(1e-14));
  }

  TEST_CASE("constant ratios leave rows unchanged") {
    const Network net = builtin_network("tree8");
    const DataCase empty(net.structure.size());
    for (Rule rule : {Rule::EG, Rule::GP, Rule::EM}) {
      const ParameterVector next = step_once(rule, net, empty, LearningRateSchedule::fixed(0.7));
      CHECK(max_abs_diff(next, net.theta) <= 1e-12);
    }
  }

  TEST_CASE("zero rate is the identity for every rule") {
    const Network net = builtin_network("dag15");
    Rng rng(4);
    for (Rule rule : {Rule::EM, Rule::EG, Rule::GP})
      for (int rep = 0; rep < 5; ++rep) {
        const DataCase c = bnp::testing::random_case(rng, net, 0.3);
        CHECK(max_abs_diff(step_once(rule, net, c, LearningRateSchedule::fixed(0.0)), net.theta) <=
              1e-12);
      }
  }

  TEST_CASE("single-case EM equals batch EM with model marginals") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const Network net = bnp::testing::random_network(seed, 7, 3, 3);
      Rng rng(seed);
      const DataCase c = bnp::testing::random_case(rng, net, 0.4);
      const double eta = 0.2 + 0.08 * static_cast<double>(seed % 20);
      const ParameterVector online = step_once(Rule::EM, net, c, LearningRateSchedule::fixed(eta));
      const InferenceEngine engine(net.structure);
      const SufficientStats st =
          expected_stats(engine, net.theta, bnp::testing::make_dataset(net.structure, {c}));
      const ParameterVector batch =
          em_eta_step(net.theta, st.joint, engine.parent_marginals(net.theta), eta);
      CHECK(max_abs_diff(online, batch) <= 1e-12);
    }
  }

  TEST_CASE("per-row schedule reproduces batch frequencies") {
    const Network truth = builtin_network("dag15");
    const auto cases = forward_sample(truth, 3000, 21);
    const DataSet d = bnp::testing::make_dataset(truth.structure, cases);
    const Network start = make_network("start", truth.structure, random_init(truth.structure, 5));
    const OnlineResult r = run_stream(start, d, Rule::EM, LearningRateSchedule::per_row_count());
    CHECK(r.skipped == 0);
    const SufficientStats st = expected_stats(truth, d);
    double worst = 0.0;
    for (std::size_t i = 0; i < truth.structure.size(); ++i)
      for (std::size_t j = 0; j < truth.structure.rows(i); ++j) {
        if (st.parent[i][j] == 0.0) {
          CHECK(r.state.visits[i][j] == 0.0);
          continue;
        }
        for (std::size_t k = 0; k < truth.structure.arity(i); ++k)
          worst = std::max(worst, std::abs(r.state.theta[i].at(j, k) -
                                           st.joint[i].at(j, k) / st.parent[i][j]));
      }
    CHECK(worst <= 1e-12);
  }

  TEST_CASE("per-row schedule handles configurations first seen late") {
    // Two rare roots feeding one child: the joint configuration has a tiny
    // model marginal when it first appears.
    NetworkStructure s({bnp::testing::make_var(0, "A", 2), bnp::testing::make_var(1, "B", 2),
                        bnp::testing::make_var(2, "C", 2)},
                       {{}, {}, {0, 1}});
    std::vector<DataCase> cases;
    for (int l = 0; l < 6; ++l) {
      DataCase c(3);
      c.values = {0, 0, static_cast<StateIndex>(l % 2)};
      cases.push_back(c);
    }
    DataCase rare(3);
    rare.values = {1, 1, 1};
    cases.push_back(rare);
    const Network start = make_network("s", s, uniform_init(s));
    const OnlineResult r = run_stream(start, bnp::testing::make_dataset(s, cases), Rule::EM,
                                      LearningRateSchedule::per_row_count());
    CHECK(r.state.theta[2].at(3, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.state.theta[0].at(0, 1) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
    CHECK(r.state.theta[2].at(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  }

  TEST_CASE("empty stream") {
    const Network net = builtin_network("chain3");
    DataSet d = bnp::testing::make_dataset(net.structure, {});
    const OnlineResult r = run_stream(net, d, Rule::EG, LearningRateSchedule::fixed(0.5));
    CHECK(r.state.theta == net.theta);
    CHECK(r.trace.empty());
    CHECK(r.state.t == 0);
  }

  TEST_CASE("zero entries in the start network do not make cases impossible") {
    NetworkStructure s({bnp::testing::make_var(0, "X", 2)}, {{}});
    ParameterVector theta(s);
    theta[0].at(0, 0) = 1.0;
    const Network net = make_network("x", s, theta);
    const DataSet d =
        bnp::testing::make_dataset(s, {observe_root(0), observe_root(1), observe_root(0)});
    for (Rule rule : {Rule::EM, Rule::EG, Rule::GP}) {
      const OnlineResult r = run_stream(net, d, rule, LearningRateSchedule::fixed(0.5));
      CHECK(r.skipped == 0);
      REQUIRE(r.trace.size() == 3);
      CHECK(r.trace[1].case_ll.has_value());
      CHECK(*r.trace[1].case_ll == doctest::Approx(std::log(kEpsFloor)).epsilon(1e-6));
    }
    const OnlineResult em = run_stream(net, d, Rule::EM, LearningRateSchedule::fixed(0.5));
    CHECK(em.state.theta[0].at(0, 1) == doctest::Approx(0.25).epsilon(1e-8));
    const OnlineResult avg = run_stream(net, d, Rule::EM, LearningRateSchedule::per_row_count());
    CHECK(avg.state.theta[0].at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  TEST_CASE("bad stream cases report their index") {
    const Network net = builtin_network("chain3");
    DataCase bad(3);
    bad.values[1] = 7;
    const DataSet d = bnp::testing::make_dataset(net.structure, {DataCase(3), bad});
    try {
      (void)run_stream(net, d, Rule::EM, LearningRateSchedule::fixed(0.5));
      FAIL("expected an exception");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("stream case 1") != std::string::npos);
    }
  }

  TEST_CASE("every rule and schedule keeps rows on the simplex") {
    const Network truth = builtin_network("tree8");
    MissingnessSpec spec;
    spec.hidden = {"A"};
    spec.obscure_prob = 0.3;
    const DataSet d = bnp::testing::make_dataset(
        truth.structure, obscure(truth.structure, forward_sample(truth, 300, 2), spec));
    const Network start = make_network("s", truth.structure, random_init(truth.structure, 1));
    for (Rule rule : {Rule::EM, Rule::EG, Rule::GP})
      for (const char* sched : {"fixed:1.9", "inv_t:1,1", "per_row"}) {
        const OnlineResult r = run_stream(start, d, rule, LearningRateSchedule::parse(sched));
        CHECK(max_row_sum_error(r.state.theta) <= 1e-9);
        CHECK(r.trace.size() == d.size());
        for (std::size_t l = 0; l < r.trace.size(); ++l) CHECK(r.trace[l].t == l + 1);
      }
  }

  TEST_CASE("fixed small rate improves the case log-likelihood on a stationary stream") {
    const Network truth = builtin_network("tree8");
    MissingnessSpec spec;
    spec.obscure_prob = 0.2;
    spec.seed = 3;
    const DataSet d = bnp::testing::make_dataset(
        truth.structure, obscure(truth.structure, forward_sample(truth, 5000, 31), spec));
    const Network start = make_network("s", truth.structure, random_init(truth.structure, 8));
    for (Rule rule : {Rule::EM, Rule::EG, Rule::GP}) {
      const OnlineResult r = run_stream(start, d, rule, LearningRateSchedule::fixed(0.005));
      auto quartile_mean = [&](std::size_t q) {
        double s = 0.0;
        for (std::size_t l = q * 1250; l < (q + 1) * 1250; ++l) s += *r.trace[l].case_ll;
        return s / 1250.0;
      };
      CHECK(quartile_mean(3) >= quartile_mean(0));
    }
  }
}
