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
#include <vector>

#include "riskpmp/adjoint.hpp"
#include "riskpmp/brownian.hpp"
#include "riskpmp/control.hpp"
#include "riskpmp/dynamics.hpp"
#include "riskpmp/risk.hpp"
#include "riskpmp/sde.hpp"

namespace riskpmp {

struct TerminalFunction {
    std::string name;
    std::function<double(ConstVecRef)> value;
    TerminalGradient gradient;
};

enum class DiffusionRegime {
    Uncontrolled,      // sigma does not depend on u
    ControlledConvex,  // sigma depends on u; convex velocity sets must be attested
};

struct ProblemValidation {
    std::size_t probes = 16;
    std::uint64_t seed = 0xfeed;
    double tolerance = 1e-5;
    double probe_scale = 1.0;
};

/// min rho(phi0(x(T))) subject to E[phi_i(x(T))] <= 0, i = 1..l.
class ProblemSpec {
public:
    ProblemSpec(DynamicsSpec dynamics, TerminalFunction cost, std::vector<TerminalFunction> constraints,
                RiskMeasure risk, InitialState x0, double horizon, DiffusionRegime regime,
                bool convex_velocities_attested = false, ProblemValidation validation = {});

    const DynamicsSpec& dynamics() const noexcept { return dyn_; }
    const TerminalFunction& cost() const noexcept { return cost_; }
    const std::vector<TerminalFunction>& constraints() const noexcept { return constraints_; }
    const RiskMeasure& risk() const noexcept { return risk_; }
    const InitialState& initial_state() const noexcept { return x0_; }
    double horizon() const noexcept { return horizon_; }
    DiffusionRegime regime() const noexcept { return regime_; }
    bool convex_velocities_attested() const noexcept { return attested_; }
    double max_gradient_error() const noexcept { return gradient_error_; }

private:
    DynamicsSpec dyn_;
    TerminalFunction cost_;
    std::vector<TerminalFunction> constraints_;
    RiskMeasure risk_;
    InitialState x0_;
    double horizon_;
    DiffusionRegime regime_;
    bool attested_;
    double gradient_error_ = 0.0;
};

/// H = p . f(t, x, u) + sum_i q_i . sigma_i(t, x, u), with q an n x d matrix.
double hamiltonian(const DynamicsSpec& dyn, double t, ConstVecRef x, ConstVecRef u, ConstVecRef p, ConstMatRef q);

struct CertificateTolerances {
    double feasibility = 1e-3;
    double slackness = 1e-3;  // times max(1, E|phi_i|)
    double active = 1e-2;     // times max(1, E|phi_i|)
    double risk_gap = 1e-6;
    std::vector<double> gap_levels{10.0, 100.0};  // cells with gap > 1/m
    double gap_measure = 0.05;                    // allowed measure at the first level
    std::optional<double> bsde_residual_bound;    // falls back to the costates' own bound
    double normality_margin = 1e-8;
};

struct SlacknessEntry {
    std::string name;
    double mean = 0.0;
    double stderr_ = 0.0;
    double multiplier = 0.0;
    double residual = 0.0;
    bool active = false;
    bool feasible = true;
};

struct SlacknessReport {
    std::vector<SlacknessEntry> entries;
    std::vector<std::size_t> active_set;
    bool feasible = true;
    bool passed = true;
};

SlacknessReport slackness_check(const ProblemSpec& problem, const StateEnsemble& states,
                                const Multipliers& multipliers, const CertificateTolerances& tol = {});

struct RiskGapReport {
    double rho = 0.0;
    double attained = 0.0;  // E[xi Z]
    double gap = 0.0;       // rho - attained
};

/// Throws std::invalid_argument when xi is not in the subdifferential at 0.
RiskGapReport risk_param_gap(const RiskMeasure& rho, const SampledRandomVariable& z, const std::vector<double>& xi);

struct MaximizationGapReport {
    double mean = 0.0;  // over dt x P
    double max = 0.0;
    std::vector<double> levels;    // m values
    std::vector<double> measures;  // normalized dt x P measure of {gap > 1/m}
    std::size_t cells = 0;
    std::size_t control_points = 0;
    std::vector<double> histogram_edges;
    std::vector<std::size_t> histogram_counts;
};

MaximizationGapReport maximization_gap(const DynamicsSpec& dyn, const StateEnsemble& states,
                                       const ControlTable& controls, const CostatePair& costates,
                                       const std::vector<double>& levels = {10.0, 100.0});

struct NormalityReport {
    enum class Status { Vacuous, Found, NotFound };
    Status status = Status::Vacuous;
    std::string witness;            // description of the direction found
    std::vector<double> values;     // E[grad phi_i . y(T)] over the active set
    std::size_t candidates_tried = 0;
};

std::string to_string(NormalityReport::Status status);

/// Looks for a control-difference direction w (constants on the control grid
/// and single-switch profiles between box vertices) whose linearized terminal
/// state strictly decreases every active constraint.
NormalityReport normality_certificate(const ProblemSpec& problem, const StateEnsemble& states,
                                      const ControlLaw& control, const BrownianEnsemble& noise,
                                      const std::vector<std::size_t>& active_set, double margin = 1e-8);

enum class Verdict { Pass, Fail, Inconclusive };
std::string to_string(Verdict verdict);

struct ConditionVerdict {
    std::string name;
    Verdict verdict = Verdict::Pass;
    std::string detail;
};

struct CandidateBundle {
    const StateEnsemble* states = nullptr;
    const ControlTable* controls = nullptr;
    const ControlLaw* control_law = nullptr;  // needed for the normality search
    const BrownianEnsemble* noise = nullptr;
    const CostatePair* costates = nullptr;
    const FundamentalMatrices* fundamental = nullptr;  // enables the martingale check
    RiskSubgradient xi;
    Multipliers multipliers;
};

struct PmpCertificate {
    SlacknessReport slackness;
    RiskGapReport risk_gap;
    double bsde_residual = 0.0;
    std::optional<double> bsde_bound;
    MaximizationGapReport maximization;
    NormalityReport normality;
    std::optional<MartingaleReport> martingale;
    Multipliers multipliers;
    std::vector<ConditionVerdict> conditions;
    Verdict verdict = Verdict::Pass;
    std::vector<std::string> causes;
    std::string summary;
};

/// Runs every check and aggregates: any failed condition fails the
/// certificate; otherwise any inconclusive one makes it inconclusive.
PmpCertificate certify(const ProblemSpec& problem, const CandidateBundle& bundle,
                       const CertificateTolerances& tol = {});

/// Everything produced while checking one control law on one ensemble.
struct PolicyAnalysis {
    std::optional<ControlLaw> law;
    std::optional<StateEnsemble> states;
    std::optional<ControlTable> controls;
    std::optional<FundamentalMatrices> fundamental;
    std::vector<double> cost_samples;  // phi0(x(T)) per path
    RiskSubgradient xi;
    std::optional<CostatePair> costates;
    std::optional<PmpCertificate> certificate;  // empty when certification was skipped
};

struct AnalysisOptions {
    AdjointOptions adjoint;
    CertificateTolerances tolerances;
    Multipliers multipliers;
    std::optional<RiskMeasure> risk_override;  // e.g. expectation in place of the problem's risk
    bool run_certificate = true;
};

/// Simulates the law, builds the risk subgradient, solves the adjoint and
/// (optionally) certifies. Throws if any path leaves the finite range.
PolicyAnalysis analyze_policy(const ProblemSpec& problem, ControlLaw law, const BrownianEnsemble& noise,
                              const AnalysisOptions& options = {});

/// Stable JSON ("pmp_certificate_v1").
std::string certificate_json(const PmpCertificate& certificate, int indent = 2);

}  // namespace riskpmp
