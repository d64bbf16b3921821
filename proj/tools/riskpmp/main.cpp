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


// riskpmp: scenario-driven front end.
//
//   riskpmp <kind> --config scenario.json [--out DIR] [--seed N] [--threads N]
//   riskpmp run    --config scenario.json ...      (kind taken from the file)
//
// Exit codes: 0 pass, 2 fail, 3 inconclusive, 1 usage/configuration error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "riskpmp/parallel.hpp"
#include "report.hpp"
#include "runners.hpp"
#include "scenario.hpp"

namespace {

using riskpmp::cli::ConfigError;

struct Invocation {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
};

void add_common_flags(CLI::App* cmd, Invocation& inv) {
    cmd->add_option("--config", inv.config, "scenario file (JSON)")->required();
    cmd->add_option("--out", inv.out, "output directory (overrides output.dir)");
    cmd->add_option("--seed", inv.seed, "seed (overrides the configured seed)");
    cmd->add_option("--threads", inv.threads, "worker threads; never changes results")
        ->check(CLI::Range(std::size_t{1}, std::size_t{4096}));
}

int execute(const std::string& verb, const Invocation& inv) {
    using namespace riskpmp::cli;
    if (inv.threads) {
        riskpmp::set_thread_count(*inv.threads);
    } else {
        try {
            riskpmp::configure_threads_from_env();
        } catch (const std::exception&) {
            throw ConfigError("RISKPMP_THREADS must be a positive integer");
        }
    }

    const Scenario scenario = load_scenario(inv.config, inv.seed);
    if (verb != "run" && to_string(scenario.kind) != verb) {
        throw ConfigError("config kind '" + to_string(scenario.kind) + "' does not match the verb '" + verb + "'");
    }
    const std::string dir = inv.out.empty() ? scenario.output.dir : inv.out;
    if (dir.empty()) throw ConfigError("no output directory: pass --out or set output.dir");

    const RunOutcome outcome = run_scenario(scenario);
    const std::string kind = to_string(scenario.kind);
    write_bundle(dir, render_report(kind, outcome, scenario.echo, utc_timestamp()), outcome.artifacts);

    std::cout << kind << ": " << riskpmp::to_string(outcome.status) << " (" << dir << "/report.json)\n";
    for (const auto& cause : outcome.causes) std::cout << "  " << cause << "\n";
    return exit_code(outcome.status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"riskpmp: maximum-principle certificates for risk-averse stochastic control"};
    app.require_subcommand(1);
    app.set_version_flag("--version", riskpmp::cli::version_string());

    Invocation inv;
    std::string verb;
    auto add_verb = [&](const std::string& name, const std::string& help) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common_flags(cmd, inv);
        cmd->callback([&verb, name] { verb = name; });
    };
    add_verb("run", "run a scenario of any kind");
    add_verb("simulate", "Euler-Maruyama ensemble statistics");
    add_verb("risk-eval", "risk values, subgradients and axiom checks");
    add_verb("adjoint", "costates by regression and their diagnostics");
    add_verb("certify", "necessary-condition certificate for a given policy");
    add_verb("sop-solve", "shoot the risk-averse double integrator and certify");
    add_verb("counterexample", "set-valued Ito integral counterexample");
    add_verb("convergence", "linearization rate, strong order, inverse check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        return execute(verb, inv);
    } catch (const ConfigError& e) {
        std::cerr << "riskpmp: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "riskpmp: run failed: " << e.what() << "\n";
        return 1;
    }
}
