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

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "riskpmp/adjoint.hpp"
#include "riskpmp/brownian.hpp"
#include "riskpmp/certificate.hpp"
#include "riskpmp/control.hpp"
#include "riskpmp/risk.hpp"
#include "riskpmp/sde.hpp"

namespace riskpmp {

/// Risk-averse double integrator
///   dy = v dt + noise dW,  dv = u dt,  u in [-1, 1],
///   minimize AV@R_alpha(|y(T) - y_T|^2 / 2).
struct SopInstance {
    double y0 = 0.0;
    double v0 = 0.0;
    double target = 1.0;
    double horizon = 2.0;
    double alpha = 0.3;
    double noise = 1.0;
    std::size_t control_points = 21;

    /// Throws std::invalid_argument unless y0 < target, alpha in (0, 1],
    /// horizon > 0, noise >= 0 and at least two control points.
    void validate() const;
    Vec initial_state() const;
};

DynamicsSpec sop_dynamics(const SopInstance& instance);
ProblemSpec build_sop(const SopInstance& instance);

/// AV@R_alpha of the terminal cost under a control law on the given paths.
double sop_cost(const SopInstance& instance, const ControlLaw& law, const BrownianEnsemble& noise);

/// Open-loop bang-bang control with at most two switches, starting at
/// initial_sign. On a grid the control applied on [t_k, t_k+1) is the cell
/// average, so the cost is continuous in the switching times.
struct BangBangPolicy {
    std::vector<double> switches;
    int initial_sign = 1;

    double value(double t) const;
    double cell_average(double a, double b) const;
    ControlLaw law(const TimeGrid& grid) const;
    std::string describe() const;
};

/// u = sign(y_T - delta - y - gamma v (T - t)): steer the predicted miss
/// y_T - (y + v (T - t)) to zero, with gain gamma and offset delta.
struct PredictedMissPolicy {
    double gamma = 1.0;
    double delta = 0.0;

    ControlLaw law(const SopInstance& instance) const;
    std::string describe() const;
};

/// u = sign(beta_k . b(e, v)) with e = y_T - y - v (T - t) and
/// b = (1, e, v, e^2, e v, v^2, e^3): a per-step regression surface for the
/// sign of p_v.
struct SweepPolicy {
    static constexpr int kBasis = 7;
    using Coefficients = Eigen::Matrix<double, kBasis, 1>;
    std::vector<Coefficients> coefficients;  // one per step

    static Coefficients basis(double e, double v);
    static SweepPolicy from_predicted_miss(const PredictedMissPolicy& start, const SopInstance& instance,
                                           const TimeGrid& grid);
    ControlLaw law(const SopInstance& instance) const;
};

enum class PolicyFamily { OpenLoop, PredictedMiss };

struct ShootConfig {
    PolicyFamily family = PolicyFamily::OpenLoop;
    std::size_t coarse_points = 9;       // per search coordinate
    std::size_t sweeps = 2;              // coordinate-search rounds
    std::size_t golden_iterations = 18;  // per coordinate and round
    std::size_t indirect_iterations = 0; // damped regression sweeps after the direct search
    double damping = 0.3;
    std::pair<double, double> gamma_range{0.4, 1.6};
    std::pair<double, double> delta_range{-0.4, 0.4};
};

struct ShootResult {
    PolicyFamily family = PolicyFamily::OpenLoop;
    std::optional<BangBangPolicy> open_loop;
    std::optional<PredictedMissPolicy> feedback;
    std::optional<SweepPolicy> sweep;  // set when an indirect sweep iterate won
    std::string description;
    double cost = 0.0;
    std::vector<double> history;  // incumbent cost after each evaluation
    std::size_t evaluations = 0;
    std::size_t indirect_accepted = 0;  // sweep iterate index that became incumbent (0: none)

    ControlLaw law(const SopInstance& instance, const TimeGrid& grid) const;
};

/// Direct search over the chosen family on common random numbers, followed
/// by optional damped indirect sweeps: each sweep simulates the incumbent
/// family member, forms the terminal costate xi (y_T - y(T)), regresses it on
/// b(e, v) step by step and moves the sweep coefficients a fraction `damping`
/// towards the normalized fit. The incumbent is the cheapest policy seen.
ShootResult shoot(const SopInstance& instance, const BrownianEnsemble& noise, const ShootConfig& config);

struct SafetyReport {
    double avar_terminal = 0.0;  // AV@R_alpha(y(T))
    double margin = 0.0;         // y_T - AV@R_alpha(y(T))
    double stderr_ = 0.0;        // influence-function standard error of the AV@R estimate
    double band = 0.0;           // 5 stderr
    bool safe = false;           // margin > band
};

SafetyReport safety_check(const SopInstance& instance, const std::vector<double>& terminal_y, double sigmas = 5.0);

struct SingularInterval {
    double start = 0.0;
    double end = 0.0;
};

struct BangBangReport {
    bool applicable = false;
    std::string reason;
    double bang_fraction = 0.0;            // cells with |u| >= 1 - tol
    double fraction_threshold = 0.95;
    std::vector<SingularInterval> singular_intervals;
    double xi_miss = 0.0;                  // E[xi (y(T) - y_T)]
    double xi_miss_stderr = 0.0;
    bool xi_miss_away_from_zero = false;
    bool consistent = true;                // "consistent with" the bang-bang principle
    std::vector<std::string> chain;        // diagnostic narrative
    std::vector<double> mean_p_y, stderr_p_y, mean_p_v, stderr_p_v;
};

BangBangReport bangbang_necessity(const SopInstance& instance, const SafetyReport& safety,
                                  const StateEnsemble& states, const ControlTable& controls,
                                  const CostatePair& costates, const RiskSubgradient& xi,
                                  double fraction_threshold = 0.95, double sigmas = 5.0);

struct SopPipelineOptions {
    ShootConfig shoot;
    AdjointOptions adjoint;
    CertificateTolerances tolerances;
    /// Solve the adjoint with expectation risk instead of AV@R (xi = 1).
    bool expectation_risk = false;
    double sigmas = 5.0;
    double bang_fraction = 0.95;  // required share of cells with |u| = 1 on safe instances
};

/// Everything produced by solving one instance and certifying the result.
/// The members are filled in order; the certificate refers to the others.
struct SopSolution {
    ShootResult shot;
    std::optional<ControlLaw> law;
    std::optional<StateEnsemble> states;
    std::optional<ControlTable> controls;
    std::optional<FundamentalMatrices> fundamental;
    RiskSubgradient xi;
    std::optional<CostatePair> costates;
    SafetyReport safety;
    BangBangReport bangbang;
    PmpCertificate certificate;
};

/// shoot -> simulate -> risk parameter -> fundamental matrices -> adjoint
/// -> certificate -> safety and bang-bang analysis.
SopSolution solve_sop(const SopInstance& instance, const BrownianEnsemble& noise,
                      const SopPipelineOptions& options);

/// The costate half of solve_sop for a fixed control law.
SopSolution analyze_sop_policy(const SopInstance& instance, const BrownianEnsemble& noise, ControlLaw law,
                               const SopPipelineOptions& options);

}  // namespace riskpmp
