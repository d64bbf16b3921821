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


// Drives the installed-style binary in a child process: exit codes, files on
// disk, determinism across runs and thread counts.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kCli = RISKPMP_CLI_PATH;
const std::string kScenarios = RISKPMP_SCENARIO_DIR;

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "riskpmp_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + kCli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string without_timestamp(const std::string& report) {
    std::istringstream in(report);
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.find("\"timestamp\":") == std::string::npos) out += line + "\n";
    }
    return out;
}

void write(const fs::path& file, const json& j) {
    fs::create_directories(file.parent_path());
    std::ofstream(file) << j.dump(2);
}

// Every file identical, report.json modulo its timestamp line.
void expect_same_bundle(const fs::path& a, const fs::path& b) {
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const fs::path other = b / entry.path().filename();
        ASSERT_TRUE(fs::exists(other)) << other;
        if (entry.path().filename() == "report.json") {
            EXPECT_EQ(without_timestamp(slurp(entry.path())), without_timestamp(slurp(other)));
        } else {
            EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path().filename();
        }
        ++files;
    }
    EXPECT_EQ(files, static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator{})));
}

TEST(CliProcess, CounterexampleReport) {
    const fs::path out = scratch("counterexample");
    ASSERT_EQ(run("counterexample --config " + kScenarios + "/counterexample.json --out " + out.string()), 0);
    const json report = json::parse(slurp(out / "report.json"));
    EXPECT_EQ(report.at("schema"), "riskpmp_report_v1");
    EXPECT_EQ(report.at("status"), "pass");
    EXPECT_NEAR(report.at("results").at("ito_gap_lower_bound").get<double>(), 0.2, 1e-12);
    EXPECT_TRUE(report.at("reproduction").contains("version"));
}

TEST(CliProcess, MalformedConfigLeavesNoArtifacts) {
    const fs::path dir = scratch("malformed");
    const fs::path config = dir.parent_path() / "malformed.json";
    std::ofstream(config) << "{\"kind\": \"counterexample\", \"seed\": 1,";
    EXPECT_EQ(run("run --config " + config.string() + " --out " + dir.string()), 1);
    EXPECT_FALSE(fs::exists(dir));

    write(config, json{{"kind", "counterexample"}, {"seed", 1}, {"unexpected", true}});
    EXPECT_EQ(run("run --config " + config.string() + " --out " + dir.string()), 1);
    EXPECT_FALSE(fs::exists(dir));

    write(config, json{{"kind", "counterexample"}});
    EXPECT_EQ(run("run --config " + config.string() + " --out " + dir.string()), 1);
    EXPECT_FALSE(fs::exists(dir));
}

TEST(CliProcess, UsageErrors) {
    const fs::path dir = scratch("usage");
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("simulate --out " + dir.string()), 1);  // --config missing
    EXPECT_EQ(run("certify --config " + kScenarios + "/counterexample.json --out " + dir.string()), 1);
    EXPECT_EQ(run("run --config " + kScenarios + "/counterexample.json --out " + dir.string() + " --threads 0"), 1);
    EXPECT_EQ(run("run --config " + kScenarios + "/counterexample.json --out " + dir.string(), "RISKPMP_THREADS=x"),
              1);
    EXPECT_EQ(run("run --config /no/such/file.json --out " + dir.string()), 1);
    EXPECT_FALSE(fs::exists(dir));
}

TEST(CliProcess, ExitCodesFollowTheVerdict) {
    const fs::path dir = scratch("verdicts");
    json config = json::parse(slurp(kScenarios + "/certify_lq.json"));
    EXPECT_EQ(run("run --config " + kScenarios + "/certify_lq.json --out " + (dir / "pass").string()), 0);

    config["policy"]["value"] = json::array({-1.0});
    write(dir / "fail.json", config);
    EXPECT_EQ(run("run --config " + (dir / "fail.json").string() + " --out " + (dir / "fail").string()), 2);
    EXPECT_EQ(json::parse(slurp(dir / "fail" / "report.json")).at("status"), "fail");

    config["policy"]["value"] = json::array({1.0});
    config.erase("tolerances");
    write(dir / "inconclusive.json", config);
    EXPECT_EQ(run("run --config " + (dir / "inconclusive.json").string() + " --out " + (dir / "inc").string()), 3);
}

TEST(CliProcess, RerunsAndThreadCountsAreByteIdentical) {
    for (const char* name :
         {"counterexample", "risk_eval", "simulate_scalar", "convergence_linearization", "certify_lq"}) {
        const fs::path dir = scratch(std::string("determinism_") + name);
        const std::string config = " --config " + kScenarios + "/" + name + ".json --out ";
        ASSERT_LE(run("run" + config + (dir / "a").string() + " --threads 1"), 3) << name;
        ASSERT_LE(run("run" + config + (dir / "b").string() + " --threads 4"), 3) << name;
        ASSERT_LE(run("run" + config + (dir / "c").string(), "RISKPMP_THREADS=3"), 3) << name;
        expect_same_bundle(dir / "a", dir / "b");
        expect_same_bundle(dir / "a", dir / "c");
    }
}

TEST(CliProcess, ReportReproducesFromItsConfigEcho) {
    const fs::path dir = scratch("reproduce");
    ASSERT_EQ(run("run --config " + kScenarios + "/convergence_linearization.json --out " + (dir / "first").string()),
              0);
    const json report = json::parse(slurp(dir / "first" / "report.json"));
    write(dir / "echo.json", report.at("reproduction").at("config"));
    ASSERT_EQ(run("run --config " + (dir / "echo.json").string() + " --out " + (dir / "second").string()), 0);
    expect_same_bundle(dir / "first", dir / "second");
}

TEST(CliProcess, SeedFlagOverridesTheConfig) {
    const fs::path dir = scratch("seed");
    const std::string config = " --config " + kScenarios + "/certify_lq.json --out ";
    ASSERT_EQ(run("run" + config + (dir / "a").string() + " --seed 12345"), 0);
    const json report = json::parse(slurp(dir / "a" / "report.json"));
    EXPECT_EQ(report.at("reproduction").at("config").at("seed"), 12345);
    ASSERT_EQ(run("run" + config + (dir / "b").string()), 0);
    EXPECT_NE(slurp(dir / "a" / "martingale.csv"), slurp(dir / "b" / "martingale.csv"));
}

}  // namespace
