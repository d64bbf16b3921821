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
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "riskpmp/philox.hpp"

namespace riskpmp {

/// Finite weighted sample of a scalar random variable.
class SampledRandomVariable {
public:
    /// Equal weights 1/N.
    explicit SampledRandomVariable(std::vector<double> values);
    /// Weights must be nonnegative and sum to 1 within 1e-12.
    SampledRandomVariable(std::vector<double> values, std::vector<double> weights);

    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double value(std::size_t i) const noexcept { return values_[i]; }
    double weight(std::size_t i) const noexcept { return weights_[i]; }
    bool uniform_weights() const noexcept { return uniform_; }

    double mean() const;
    /// E[h Z] for a per-sample multiplier h.
    double weighted_dot(const std::vector<double>& h) const;
    /// Same weights, new values.
    SampledRandomVariable with_values(std::vector<double> values) const;

private:
    std::vector<double> values_;
    std::vector<double> weights_;
    bool uniform_ = true;
};

class RiskMeasure {
public:
    enum class Kind { Expectation, AVaR, Mixture };

    static RiskMeasure expectation();
    static RiskMeasure avar(double alpha);
    /// sum_j lambda_j AV@R_{alpha_j}; lambda nonnegative and summing to 1.
    static RiskMeasure mixture(std::vector<double> levels, std::vector<double> lambdas);

    Kind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return levels_.empty() ? 1.0 : levels_.front(); }
    const std::vector<double>& levels() const noexcept { return levels_; }
    const std::vector<double>& lambdas() const noexcept { return lambdas_; }
    std::string describe() const;

private:
    RiskMeasure(Kind kind, std::vector<double> levels, std::vector<double> lambdas)
        : kind_(kind), levels_(std::move(levels)), lambdas_(std::move(lambdas)) {}

    Kind kind_;
    std::vector<double> levels_;
    std::vector<double> lambdas_;
};

/// AV@R by the weighted sorted-tail average (mass alpha of the upper tail).
double avar_tail(double alpha, const SampledRandomVariable& z);
/// AV@R as min over t of t + E[(Z - t)^+]/alpha, evaluated at every breakpoint.
double avar_infimum(double alpha, const SampledRandomVariable& z);

/// rho(Z). For AV@R both formulations are evaluated and must agree within
/// 1e-9 (relative to max(1, |rho|)); std::logic_error otherwise.
double risk_value(const RiskMeasure& rho, const SampledRandomVariable& z);

struct RiskSubgradient {
    std::vector<double> xi;
    bool has_quantile = false;
    double quantile = 0.0;        // inf{t : P(Z <= t) >= 1 - alpha}
    double quantile_upper = 0.0;  // inf{t : P(Z <= t) > 1 - alpha}
    double boundary_mass = 0.0;   // xi on the atom {Z = quantile}
    bool boundary_hit = false;    // boundary_mass is 0 or 1/alpha on a nonempty atom
    bool non_unique = false;      // another element of the face exists
};

RiskSubgradient risk_subgradient(const RiskMeasure& rho, const SampledRandomVariable& z);

/// True if xi lies in the subdifferential at zero: E[xi] = 1 and, for AV@R,
/// 0 <= xi <= 1/alpha (all within tol). For mixtures the box bound uses
/// sum_j lambda_j / alpha_j, which is necessary but not sufficient.
bool in_subdifferential_at_zero(const RiskMeasure& rho, const SampledRandomVariable& z,
                                const std::vector<double>& xi, double tol = 1e-9);

struct RepresentationReport {
    double rho = 0.0;
    double max_sampled = 0.0;     // max E[xi Z] over sampled feasible xi
    double subgradient_value = 0.0;  // E[xi* Z] for the risk_subgradient element
    std::size_t trials = 0;
    bool passed = false;
};

RepresentationReport representation_check(const RiskMeasure& rho, const SampledRandomVariable& z,
                                          std::size_t trials, std::uint64_t seed);

struct DirectionalDerivative {
    double value = 0.0;              // max over the face of E[xi H]
    double finite_difference = 0.0;  // Richardson combination of the two quotients
    double quotient_coarse = 0.0;
    double quotient_fine = 0.0;
    double step_coarse = 0.0;
    double step_fine = 0.0;
};

DirectionalDerivative directional_derivative(const RiskMeasure& rho, const SampledRandomVariable& z,
                                             const std::vector<double>& h);

// ---------------------------------------------------------------------------
// Axiom tests

using RiskFunctional = std::function<double(const SampledRandomVariable&)>;
using PairSampler =
    std::function<std::pair<SampledRandomVariable, SampledRandomVariable>(CounterRng&)>;

struct AxiomWitness {
    std::vector<double> z1;
    std::vector<double> z2;
    double parameter = 0.0;  // mixing weight, shift or scale used in the trial
    double lhs = 0.0;
    double rhs = 0.0;
};

struct AxiomResult {
    std::string axiom;
    std::size_t trials = 0;
    std::size_t violations = 0;
    double worst_excess = 0.0;
    std::optional<AxiomWitness> witness;
    bool passed() const noexcept { return violations == 0; }
};

struct CoherenceReport {
    std::vector<AxiomResult> axioms;  // convexity, monotonicity, translation, homogeneity
    bool passed() const noexcept;
    const AxiomResult& find(const std::string& name) const;
};

/// Checks the four axioms on `trials` sampled pairs. A trial violates an
/// axiom if the defining (in)equality fails by more than tol * max(1, scale).
CoherenceReport coherence_suite(const RiskFunctional& rho, const PairSampler& sampler,
                                std::size_t trials, std::uint64_t seed, double tol = 1e-9);

/// Pairs of equal-weight samples with sizes in [min_size, max_size], values
/// drawn from a mix of normal, uniform and heavy-tailed laws with ties.
PairSampler default_pair_sampler(std::size_t min_size = 2, std::size_t max_size = 64);

}  // namespace riskpmp
