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

#include <json.hpp>

#include "bnparam/core/errors.hpp"
#include "bnparam/core/estimation.hpp"
#include "bnparam/core/harness.hpp"
#include "bnparam/core/spectral.hpp"
#include "test_util.hpp"

using namespace bnp;

namespace {

struct Testbed {
  Network net;
  DataSet data;
  ParameterVector theta_star;
};

DataSet sample(const Network& net, std::size_t n, std::uint64_t seed,
               const std::vector<std::string>& hidden) {
  MissingnessSpec spec;
  spec.hidden = hidden;
  spec.seed = seed;
  return bnp::testing::make_dataset(net.structure,
                                    obscure(net.structure, forward_sample(net, n, seed), spec));
}

ParameterVector converge(const NetworkStructure& s, const DataSet& d) {
  FitConfig cfg;
  cfg.max_iters = 100000;
  cfg.tol_ll = 0.0;
  cfg.tol_param = 1e-14;
  cfg.init = InitSpec::random(3);
  return fit(s, d, cfg).theta;
}

const Testbed& chain_testbed() {
  static const Testbed tb = [] {
    Testbed t{builtin_network("chain3"), {}, {}};
    t.data = sample(t.net, 500, 7, {"B"});
    t.theta_star = converge(t.net.structure, t.data);
    return t;
  }();
  return tb;
}

}  // namespace

TEST_SUITE("spectral") {
  TEST_CASE("phi at a fixpoint and at zero rate") {
    const Testbed& tb = chain_testbed();
    const InferenceEngine engine(tb.net.structure);
    for (double eta : {0.5, 1.0, 1.7})
      CHECK(max_abs_diff(phi_apply(engine, tb.theta_star, tb.data, eta), tb.theta_star) <= 1e-9);
    const ParameterVector other = random_init(tb.net.structure, 44);
    CHECK(max_abs_diff(phi_apply(engine, other, tb.data, 0.0), other) <= 1e-15);
  }

  TEST_CASE("phi on complete data blends the frequencies") {
    const Network net = builtin_network("tree8");
    const DataSet d = sample(net, 500, 2, {});
    const InferenceEngine engine(net.structure);
    const SufficientStats st = expected_stats(net, d);
    const ParameterVector theta = random_init(net.structure, 6);
    const ParameterVector out = phi_apply(engine, theta, d, 0.4);
    for (std::size_t i = 0; i < theta.size(); ++i)
      for (std::size_t j = 0; j < theta[i].rows(); ++j) {
        if (st.parent[i][j] == 0.0) continue;
        for (std::size_t k = 0; k < theta[i].states(); ++k) {
          const double freq = st.joint[i].at(j, k) / st.parent[i][j];
          CHECK(std::abs(out[i].at(j, k) - (0.4 * freq + 0.6 * theta[i].at(j, k))) <= 1e-12);
        }
      }
  }

  TEST_CASE("free coordinates drop the last state of each row") {
    const Network net = builtin_network("tree8");
    const auto fc = free_coordinates(net.structure);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < net.structure.size(); ++i)
      expected += net.structure.rows(i) * (net.structure.arity(i) - 1);
    CHECK(fc.size() == expected);
    for (const auto& c : fc) {
      const std::size_t r = net.structure.arity(c.table);
      CHECK(c.last % r == r - 1);
      CHECK(c.entry / r == c.last / r);
    }
  }

  TEST_CASE("complete data gives the identity matrix") {
    const Network net = builtin_network("tree8");
    const DataSet d = sample(net, 3000, 5, {});
    const ParameterVector theta = converge(net.structure, d);
    const InferenceEngine engine(net.structure);
    const JacobianEstimate j = jacobian(engine, theta, d);
    const auto n = j.m.rows();
    CHECK((j.m - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-6);
    const EigenRange er = eigen_range(j.m);
    CHECK(std::abs(er.lambda_min - 1.0) <= 1e-6);
    CHECK(std::abs(er.lambda_max - 1.0) <= 1e-6);
    CHECK_FALSE(er.rank_deficient);
    CHECK(std::abs(eta_star(er.lambda_min, er.lambda_max) - 1.0) <= 1e-6);
  }

  TEST_CASE("duplicating the data leaves the matrix unchanged") {
    const Testbed& tb = chain_testbed();
    DataSet twice = tb.data;
    twice.cases.insert(twice.cases.end(), tb.data.cases.begin(), tb.data.cases.end());
    const InferenceEngine engine(tb.net.structure);
    const JacobianEstimate a = jacobian(engine, tb.theta_star, tb.data);
    const JacobianEstimate b = jacobian(engine, tb.theta_star, twice);
    CHECK((a.m - b.m).cwiseAbs().maxCoeff() <= 1e-9);
  }

  TEST_CASE("hidden-middle chain eigenvalues lie in the unit interval") {
    const Testbed& tb = chain_testbed();
    const InferenceEngine engine(tb.net.structure);
    const JacobianEstimate j = jacobian(engine, tb.theta_star, tb.data);
    CHECK(j.theta_residual < kFixpointTol);
    CHECK(j.richardson_gap < 1e-6);
    const EigenRange er = eigen_range(j.m);
    for (double v : er.eigenvalues) {
      CHECK(v >= -1e-6);
      CHECK(v <= 1.0 + 1e-6);
    }
    CHECK(er.lambda_min > kEigenCutoff);
    CHECK(er.lambda_max <= 1.0 + 1e-6);
    CHECK(eta_star(er.lambda_min, er.lambda_max) >= 1.0 - 1e-6);
  }

  TEST_CASE("jacobian preconditions") {
    const Testbed& tb = chain_testbed();
    const InferenceEngine engine(tb.net.structure);
    CHECK_THROWS_AS(jacobian(engine, random_init(tb.net.structure, 9), tb.data), InputError);

    std::vector<Variable> vars;
    std::vector<std::vector<std::size_t>> parents(2);
    vars.push_back(bnp::testing::make_var(0, "A", 64));
    vars.push_back(bnp::testing::make_var(1, "B", 64));
    parents[1] = {0};
    const NetworkStructure big(vars, parents);
    CHECK_THROWS_AS(jacobian(InferenceEngine(big), uniform_init(big),
                             bnp::testing::make_dataset(big, {DataCase(2)})),
                    InputError);
  }

  TEST_CASE("eigen_range examples") {
    const EigenRange id = eigen_range(Eigen::MatrixXd::Identity(3, 3));
    CHECK(id.lambda_min == doctest::Approx(1.0));
    CHECK(id.lambda_max == doctest::Approx(1.0));
    CHECK_FALSE(id.rank_deficient);

    Eigen::MatrixXd d2 = Eigen::Vector2d(0.5, 1.0).asDiagonal();
    const EigenRange a = eigen_range(d2);
    CHECK(a.lambda_min == doctest::Approx(0.5));
    CHECK(a.lambda_max == doctest::Approx(1.0));
    CHECK_FALSE(a.rank_deficient);

    Eigen::MatrixXd d3 = Eigen::Vector3d(0.0, 0.5, 1.0).asDiagonal();
    const EigenRange b = eigen_range(d3, 1e-8);
    CHECK(b.lambda_min == doctest::Approx(0.5));
    CHECK(b.lambda_max == doctest::Approx(1.0));
    CHECK(b.rank_deficient);

    CHECK_THROWS_AS(eigen_range(Eigen::MatrixXd::Zero(2, 2)), NumericalError);
    CHECK_THROWS_AS(eigen_range(Eigen::MatrixXd::Zero(2, 3)), InputError);
  }

  TEST_CASE("optimal rate formula") {
    CHECK(eta_star(1.0, 1.0) == 1.0);
    CHECK(eta_star(0.5, 1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(eta_star(0.1, 0.4) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK_THROWS_AS(eta_star(0.0, 1.0), InputError);
    CHECK_THROWS_AS(eta_star(0.6, 0.5), InputError);
  }

  TEST_CASE("contraction rate examples") {
    CHECK(contraction_rate(1.0, 0.2, 1.0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(contraction_rate(4.0 / 3.0, 0.5, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(contraction_rate(2.0, 0.5, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("the optimal rate minimizes the contraction rate") {
    Rng rng(12);
    for (int pair = 0; pair < 50; ++pair) {
      double lo = 0.01 + 0.99 * rng.uniform(), hi = 0.01 + 0.99 * rng.uniform();
      if (lo > hi) std::swap(lo, hi);
      const double es = eta_star(lo, hi);
      const double best = contraction_rate(es, lo, hi);
      CHECK(best == doctest::Approx((hi - lo) / (hi + lo)).epsilon(1e-12));
      for (int g = 1; g <= 100; ++g) {
        const double eta = 0.05 * g;
        CHECK(best <= contraction_rate(eta, lo, hi) + 1e-15);
      }
    }
  }

  TEST_CASE("empirical rate of a constructed sequence") {
    const Network net = bnp::testing::single_root(0.4, 0.6);
    std::vector<ParameterVector> seq;
    double offset = 0.01;
    for (int s = 0; s < 20; ++s, offset *= 0.7) {
      ParameterVector t = net.theta;
      t[0].at(0, 0) += offset;
      t[0].at(0, 1) -= offset;
      seq.push_back(t);
    }
    CHECK(empirical_rate(seq, net.theta) == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(empirical_rate(seq, net.theta, 3) == doctest::Approx(0.7).epsilon(1e-9));

    const std::vector<ParameterVector> few(seq.begin(), seq.begin() + 3);
    CHECK_THROWS_AS(empirical_rate(few, net.theta), InputError);
    std::vector<ParameterVector> noisy = seq;
    noisy.push_back(net.theta);
    CHECK_THROWS_AS(empirical_rate(noisy, net.theta), InputError);
  }

  TEST_CASE("measured rates track the prediction on the chain testbed") {
    const Testbed& tb = chain_testbed();
    SpectralOptions opt;
    opt.measure_empirical = true;
    opt.etas = {0.5, 1.0, 1.5};
    const SpectralReport rep = analyze(tb.net.structure, tb.theta_star, tb.data, opt);
    REQUIRE(rep.rho.size() == 3);
    for (const auto& e : rep.rho) {
      REQUIRE(e.empirical.has_value());
      CHECK(std::abs(*e.empirical - e.predicted) / e.predicted <= 0.15);
    }

    const InferenceEngine engine(tb.net.structure);
    const double r1 = measure_empirical_rate(engine, tb.theta_star, tb.data, 1.0).rate;
    const double rs = measure_empirical_rate(engine, tb.theta_star, tb.data, rep.eta_star).rate;
    CHECK(rs < r1);
  }

  TEST_CASE("report fields and JSON") {
    const Testbed& tb = chain_testbed();
    SpectralOptions opt;
    opt.etas = {0.5, 1.0, 1.5, 1.9};
    const SpectralReport rep = analyze(tb.net.structure, tb.theta_star, tb.data, opt);
    CHECK(rep.lambda_min > 0.0);
    CHECK(rep.lambda_min <= rep.lambda_max);
    CHECK(rep.lambda_max <= 1.0 + 1e-6);
    CHECK(rep.eta_star == doctest::Approx(2.0 / (rep.lambda_min + rep.lambda_max)));
    const double best = contraction_rate(rep.eta_star, rep.lambda_min, rep.lambda_max);
    for (const auto& e : rep.rho) {
      CHECK_FALSE(e.empirical.has_value());
      CHECK(best <= e.predicted + 1e-15);
    }
    const auto j = nlohmann::json::parse(spectral_report_json(rep));
    for (const char* key : {"lambda_min", "lambda_max", "eta_star", "rank_deficient",
                            "theta_residual", "rho"})
      CHECK(j.contains(key));
    CHECK(j["rho"].size() == 4);
    CHECK_THROWS_AS(analyze(tb.net.structure, tb.theta_star, tb.data, SpectralOptions{{-1.0}}),
                    InputError);
  }
}
