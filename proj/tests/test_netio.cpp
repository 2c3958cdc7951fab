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

#include <filesystem>

#include "bnparam/core/errors.hpp"
#include "bnparam/core/harness.hpp"
#include "bnparam/core/netio.hpp"
#include "test_util.hpp"

using namespace bnp;

namespace {

const char* kTwoNode = R"({
  "name": "ab",
  "variables": [
    {"name": "A", "states": ["a0", "a1"]},
    {"name": "B", "states": ["b0", "b1", "b2"]}
  ],
  "parents": {"A": [], "B": ["A"]},
  "cpt": {
    "A": [[0.25, 0.75]],
    "B": [[0.1, 0.2, 0.7], [0.5, 0.25, 0.25]]
  }
})";

std::string with_replaced(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  return text;
}

}  // namespace

TEST_SUITE("netio") {
  TEST_CASE("parse a two-node network") {
    const Network net = parse_network(kTwoNode);
    CHECK(net.name == "ab");
    REQUIRE(net.structure.size() == 2);
    CHECK(net.structure.parents(1) == std::vector<std::size_t>{0});
    CHECK(net.theta[1].at(1, 0) == 0.5);
    CHECK(net.theta[0].at(0, 1) == 0.75);
  }

  TEST_CASE("serialize and parse round-trip") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const Network net = bnp::testing::random_network(seed, 8, 3, 4);
      const Network back = parse_network(serialize_network(net));
      CHECK(back.structure == net.structure);
      CHECK(max_abs_diff(back.theta, net.theta) <= 1e-15);
      CHECK(serialize_network(back) == serialize_network(net));
    }
  }

  TEST_CASE("uniform rows print as the exact decimal of 1/r") {
    Network net = parse_network(kTwoNode);
    net.theta = uniform_init(net.structure);
    const std::string text = serialize_network(net);
    CHECK(text.find("[0.5, 0.5]") != std::string::npos);
    CHECK(text.find(format_real(1.0 / 3.0)) != std::string::npos);
    CHECK(parse_network(text).theta == net.theta);
  }

  TEST_CASE("network errors") {
    CHECK_THROWS_AS(parse_network(with_replaced(kTwoNode, R"("A": [], "B": ["A"])",
                                                R"("A": ["B"], "B": ["A"])")),
                    InputError);
    CHECK_THROWS_AS(parse_network(with_replaced(kTwoNode, R"("B": ["A"])", R"("B": ["Q"])")),
                    InputError);
    CHECK_THROWS_AS(parse_network(with_replaced(kTwoNode, "[0.25, 0.75]", "[0.5, 0.6]")),
                    InputError);
    CHECK_THROWS_AS(parse_network(with_replaced(kTwoNode, "[0.25, 0.75]", "[0.25, 0.7, 0.05]")),
                    InputError);
    CHECK_THROWS_AS(parse_network(with_replaced(kTwoNode, R"({"name": "B", )", R"({"name": "A", )")),
                    InputError);
    CHECK_THROWS_AS(parse_network(with_replaced(kTwoNode, "[0.5, 0.25, 0.25]]", "]")), InputError);
    CHECK_THROWS_AS(parse_network("{not json"), InputError);
    CHECK_THROWS_AS(parse_network(with_replaced(kTwoNode, "\"a1\"", "\"a 1\"")), InputError);
  }

  TEST_CASE("near-normalized rows are renormalized") {
    const Network net = parse_network(with_replaced(kTwoNode, "[0.25, 0.75]", "[0.25, 0.7500005]"));
    CHECK(std::abs(net.theta[0].at(0, 0) + net.theta[0].at(0, 1) - 1.0) <= 1e-15);
  }

  TEST_CASE("dataset header may be a subset in any order") {
    const Network net = parse_network(kTwoNode);
    const DataSet d = load_dataset("B,A\nb2,a1\n?,a0\n", net.structure);
    REQUIRE(d.size() == 2);
    CHECK(d.columns == std::vector<std::size_t>{1, 0});
    CHECK(d.cases[0].values == std::vector<StateIndex>{1, 2});
    CHECK(d.cases[1].values == std::vector<StateIndex>{0, kMissing});

    const DataSet sub = load_dataset("A\na1\n", net.structure);
    CHECK(sub.cases[0].values == std::vector<StateIndex>{1, kMissing});
  }

  TEST_CASE("dataset errors") {
    const Network net = parse_network(kTwoNode);
    CHECK_THROWS_AS(load_dataset("A,B\na1,b9\n", net.structure), InputError);
    CHECK_THROWS_AS(load_dataset("A,C\na1,b0\n", net.structure), InputError);
    CHECK_THROWS_AS(load_dataset("A,B\na1\n", net.structure), InputError);
    CHECK_THROWS_AS(load_dataset("A,B\na1,\n", net.structure), InputError);
    CHECK_THROWS_AS(load_dataset("A,A\na1,a1\n", net.structure), InputError);
  }

  TEST_CASE("CRLF line endings and a missing final newline") {
    const Network net = parse_network(kTwoNode);
    const DataSet d = load_dataset("A,B\r\na1,b0\r\na0,?", net.structure);
    REQUIRE(d.size() == 2);
    CHECK(d.cases[1].values == std::vector<StateIndex>{0, kMissing});
  }

  TEST_CASE("sampled datasets survive a write/load round-trip") {
    const Network net = builtin_network("tree8");
    MissingnessSpec spec;
    spec.hidden = {"A"};
    spec.obscure_prob = 0.3;
    spec.seed = 9;
    const auto cases = obscure(net.structure, forward_sample(net, 2000, 4), spec);
    const std::string text = format_dataset(net.structure, cases);
    const DataSet d = load_dataset(text, net.structure);
    REQUIRE(d.size() == 2000);
    for (std::size_t l = 0; l < cases.size(); ++l) CHECK(d.cases[l] == cases[l]);
    CHECK(format_dataset(net.structure, d.cases) == text);
  }

  TEST_CASE("trace formats") {
    CHECK(format_trace({}) == "iter,train_ll,test_ll,max_param_delta,l2_step,wall_ms\n");
    const std::vector<TraceRecord> recs{{0, -1.5, std::nullopt, 0.0, 0.0, 0.0},
                                        {1, -1.25, -1.75, 0.5, 0.25, 0.0}};
    CHECK(format_trace(recs) ==
          "iter,train_ll,test_ll,max_param_delta,l2_step,wall_ms\n"
          "0,-1.5,,0,0,0\n"
          "1,-1.25,-1.75,0.5,0.25,0\n");
    CHECK(format_online_trace({{1, -0.5, 0.125, 0}, {2, std::nullopt, 0.0, 1}}) ==
          "t,case_ll,l2_step,skipped\n1,-0.5,0.125,0\n2,,0,1\n");
  }

  TEST_CASE("file helpers report I/O failures") {
    CHECK_THROWS_AS(read_file("/nonexistent/dir/file.json"), IoError);
    CHECK_THROWS_AS(write_file("/nonexistent/dir/file.json", "x"), IoError);
    const auto dir = std::filesystem::temp_directory_path() / "bnparam_netio_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "net.json").string();
    const Network net = parse_network(kTwoNode);
    write_file(path, serialize_network(net));
    CHECK(load_network_file(path).theta == net.theta);
    std::filesystem::remove_all(dir);
  }
}
