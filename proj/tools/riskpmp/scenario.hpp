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


#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "riskpmp/adjoint.hpp"
#include "riskpmp/certificate.hpp"
#include "riskpmp/problems.hpp"
#include "riskpmp/sop.hpp"

namespace riskpmp::cli {

/// Anything wrong with the configuration or the command line. Maps to exit 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Kind { Simulate, RiskEval, Adjoint, Certify, SopSolve, Counterexample, Convergence };

std::string to_string(Kind kind);
std::optional<Kind> parse_kind(std::string_view name);
const std::vector<Kind>& all_kinds();

struct EnsembleConfig {
    std::size_t steps = 100;
    std::size_t paths = 1000;
    std::optional<double> horizon;  // fixed by the model for sop and lq
};

struct ScalarLinearModel {
    double a = 1.0;
    double b = 0.5;
    double x0 = 1.0;
};

struct CubicModel {
    double c = 0.1;
    double noise = 1.0;
    std::vector<double> x0{0.0, 0.0};
};

struct SopModel {
    SopInstance instance;
    bool expectation = false;  // risk "expectation" instead of AV@R_alpha
};

struct LqModel {
    LqExample example;
};

using Model = std::variant<ScalarLinearModel, CubicModel, SopModel, LqModel>;

std::string model_name(const Model& model);
double model_horizon(const Model& model, const EnsembleConfig& ensemble);

struct ConstantPolicy {
    std::vector<double> value;
};

using Policy = std::variant<ConstantPolicy, BangBangPolicy, PredictedMissPolicy>;

struct OutputConfig {
    std::string dir;  // never echoed: where results go is not part of the experiment
    bool paths_csv = false;
    bool costates_csv = false;
    bool binary_dump = false;
};

struct RiskSpecConfig {
    std::string measure = "avar";
    double alpha = 0.3;
    std::vector<double> levels;
    std::vector<double> lambdas;
    RiskMeasure build() const;
};

struct SampleConfig {
    std::vector<double> values;
    std::vector<double> weights;
    std::string distribution;  // used when values is empty
    std::size_t size = 0;
};

struct OracleConfig {
    std::size_t cases = 100;
    std::size_t min_size = 3;
    std::size_t max_size = 10000;
    double tolerance = 1e-9;
};

struct CoherenceConfig {
    std::size_t trials = 1000;
    std::size_t min_size = 2;
    std::size_t max_size = 64;
    double tolerance = 1e-9;
};

struct RiskEvalConfig {
    RiskSpecConfig risk;
    std::optional<SampleConfig> samples;
    std::optional<OracleConfig> oracle;
    std::optional<CoherenceConfig> coherence;
    std::optional<std::size_t> representation_trials;
};

struct StrongOrderConfig {
    std::vector<std::size_t> levels;
    std::pair<double, double> band{0.35, 0.65};
};

struct ConvergenceConfig {
    std::string test;  // linearization-rate, strong-order, inverse-check
    std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
    std::vector<double> direction;
    std::vector<std::size_t> levels;
    std::pair<double, double> band{0.35, 0.65};
    double threshold = 0.05;
};

struct SafetyConfig {
    double sigmas = 5.0;
    double bang_fraction = 0.95;
};

struct Scenario {
    Kind kind = Kind::Counterexample;
    std::uint64_t seed = 0;
    std::string description;
    OutputConfig output;
    EnsembleConfig ensemble;

    std::optional<Model> model;    // simulate, convergence, adjoint, certify, sop-solve
    std::optional<Policy> policy;  // defaults to zero control
    std::optional<StrongOrderConfig> strong_order;
    std::optional<RiskEvalConfig> risk_eval;
    std::optional<ConvergenceConfig> convergence;
    AdjointOptions adjoint;
    CertificateTolerances tolerances;
    ShootConfig search;
    SafetyConfig safety;

    /// Effective configuration (after command-line overrides), canonical key
    /// order, without the output directory.
    nlohmann::json echo;
};

/// Validates and converts. Unknown keys anywhere are rejected, "seed" is
/// mandatory. `seed_override` replaces the configured seed.
Scenario parse_scenario(const nlohmann::json& config, std::optional<std::uint64_t> seed_override = std::nullopt);
Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace riskpmp::cli
