/*
 Copyright 2026 The riskpmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/


#include <algorithm>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "report.hpp"
#include "runners.hpp"
#include "scenario.hpp"

namespace riskpmp::cli {
namespace {

using nlohmann::json;

json lq_certify() {
    return json::parse(R"({
        "kind": "certify", "seed": 5,
        "model": {"name": "lq"},
        "ensemble": {"steps": 10, "paths": 200},
        "policy": {"family": "constant", "value": [1.0]}
    })");
}

TEST(Scenario, SeedIsMandatory) {
    json j = lq_certify();
    j.erase("seed");
    EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Scenario, UnknownKeysAreRejectedAtEveryLevel) {
    for (const char* where : {"", "model", "ensemble", "policy"}) {
        json j = lq_certify();
        (std::string(where).empty() ? j : j[where])["surprise"] = 1;
        EXPECT_THROW(parse_scenario(j), ConfigError) << where;
    }
}

TEST(Scenario, SectionsForeignToTheKindAreUnknown) {
    json j = lq_certify();
    j["search"] = json::object();  // only sop-solve has a search section
    EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Scenario, TypesAreChecked) {
    json j = lq_certify();
    j["seed"] = -3;
    EXPECT_THROW(parse_scenario(j), ConfigError);
    j = lq_certify();
    j["ensemble"]["paths"] = "many";
    EXPECT_THROW(parse_scenario(j), ConfigError);
    j = lq_certify();
    j["policy"]["value"] = json::array({1.0, 2.0});
    EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Scenario, SeedOverrideWinsAndIsEchoed) {
    const Scenario s = parse_scenario(lq_certify(), 42);
    EXPECT_EQ(s.seed, 42u);
    EXPECT_EQ(s.echo.at("seed"), 42);
}

TEST(Scenario, EchoIsAFixedPoint) {
    for (const char* name : {"counterexample", "risk_eval", "simulate_scalar", "convergence_linearization",
                             "adjoint_sop_expectation", "certify_lq", "sop_solve"}) {
        const Scenario s = load_scenario(std::string(RISKPMP_SCENARIO_DIR) + "/" + name + ".json");
        const Scenario again = parse_scenario(s.echo);
        EXPECT_EQ(s.echo.dump(), again.echo.dump()) << name;
    }
}

TEST(Scenario, OutputDirectoryIsNotEchoed) {
    json j = lq_certify();
    j["output"] = {{"dir", "/somewhere"}, {"costates_csv", true}};
    const Scenario s = parse_scenario(j);
    EXPECT_EQ(s.output.dir, "/somewhere");
    EXPECT_FALSE(s.echo.at("output").contains("dir"));
    EXPECT_TRUE(s.echo.at("output").at("costates_csv").get<bool>());
}

TEST(Scenario, SopPreconditionsSurfaceAsConfigErrors) {
    const json j = json::parse(R"({"kind": "sop-solve", "seed": 1, "instance": {"y0": 1.0, "target": 1.0},
                                   "ensemble": {"steps": 10, "paths": 10}})");
    EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Scenario, HorizonConflictIsRejected) {
    json j = lq_certify();
    j["ensemble"]["horizon"] = 3.0;
    EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Csv, EmptyTableIsJustTheHeader) {
    const CsvTable t{{"eps", "r"}, {}};
    EXPECT_EQ(t.render(), "eps,r\n");
}

TEST(Csv, NumbersRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(200000.0), "200000");
    EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333333333");
    EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
}

TEST(Csv, MartingaleColumns) {
    MartingaleReport m;
    m.times = {0.0, 0.5};
    m.raw_mean = Mat::Constant(2, 1, 1.5);
    m.raw_stderr = Mat::Constant(2, 1, 0.25);
    const CsvTable t = martingale_table(m);
    EXPECT_EQ(t.render(), "t,mean_p_y,stderr\n0,1.5,0.25\n0.5,1.5,0.25\n");
}

TEST(Run, RateTableIsSortedByEpsDescending) {
    json j = json::parse(R"({"kind": "convergence", "seed": 3,
        "model": {"name": "cubic-double-integrator"},
        "ensemble": {"steps": 40, "paths": 50},
        "policy": {"family": "constant", "value": [0.0]},
        "convergence": {"test": "linearization-rate", "eps": [0.4, 0.2, 0.1], "direction": [1.0]}})");
    const RunOutcome out = run_scenario(parse_scenario(j));
    const auto it = std::find_if(out.artifacts.begin(), out.artifacts.end(),
                                 [](const Artifact& a) { return a.name == "rate.csv"; });
    ASSERT_NE(it, out.artifacts.end());
    std::istringstream in(it->content);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "eps,r");
    double previous = std::numeric_limits<double>::infinity();
    int rows = 0;
    while (std::getline(in, line)) {
        const double eps = std::stod(line.substr(0, line.find(',')));
        EXPECT_LT(eps, previous);
        previous = eps;
        ++rows;
    }
    EXPECT_EQ(rows, 3);
    // the strong-order table of a rate study is an empty section
    const auto order = std::find_if(out.artifacts.begin(), out.artifacts.end(),
                                    [](const Artifact& a) { return a.name == "order.csv"; });
    ASSERT_NE(order, out.artifacts.end());
    EXPECT_EQ(order->content, "steps,dt,error\n");
}

TEST(Run, CounterexampleNumbers) {
    const RunOutcome out = run_scenario(parse_scenario(json{{"kind", "counterexample"}, {"seed", 0}}));
    EXPECT_EQ(out.status, Verdict::Pass);
    EXPECT_NEAR(out.results.at("ito_gap_lower_bound").get<double>(), 0.2, 1e-9);
    EXPECT_EQ(out.results.at("lebesgue_gap").get<double>(), 0.0);
}

TEST(Run, FlippedLqControlFails) {
    json j = lq_certify();
    j["policy"]["value"] = json::array({-1.0});
    j["tolerances"] = {{"bsde_residual_bound", 0.5}};
    EXPECT_EQ(run_scenario(parse_scenario(j)).status, Verdict::Fail);
}

TEST(Run, MissingResidualBoundIsInconclusive) {
    EXPECT_EQ(run_scenario(parse_scenario(lq_certify())).status, Verdict::Inconclusive);
}

TEST(Run, CostatesOnRequest) {
    json j = lq_certify();
    j["output"] = {{"costates_csv", true}, {"paths_csv", true}};
    const RunOutcome out = run_scenario(parse_scenario(j));
    std::vector<std::string> names;
    for (const auto& a : out.artifacts) names.push_back(a.name);
    EXPECT_NE(std::find(names.begin(), names.end(), "costates.csv"), names.end());
    EXPECT_NE(std::find(names.begin(), names.end(), "paths.csv"), names.end());
}

TEST(Report, TimestampHasItsOwnLine) {
    RunOutcome out;
    const std::string report = render_report("counterexample", out, json{{"seed", 1}}, "2026-01-01T00:00:00Z");
    const json j = json::parse(report);
    EXPECT_EQ(j.at("schema"), kReportSchema);
    EXPECT_EQ(j.at("reproduction").at("config").at("seed"), 1);
    EXPECT_NE(report.find("\n  \"timestamp\": \"2026-01-01T00:00:00Z\",\n"), std::string::npos);
}

}  // namespace
}  // namespace riskpmp::cli
