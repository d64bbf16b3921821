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

#include <gtest/gtest.h>

#include "json.hpp"

#include "riskpmp/certificate.hpp"
#include "riskpmp/problems.hpp"
#include "riskpmp/sop.hpp"

namespace riskpmp {
namespace {

TEST(Hamiltonian, Examples) {
    const DynamicsSpec dyn = sop_dynamics(SopInstance{});
    Vec x(2), u(1), p(2);
    x << 0.0, 5.0;
    u << 0.5;
    p << 1.0, 2.0;
    Mat q(2, 1);
    q << 3.0, 0.0;
    EXPECT_EQ(hamiltonian(dyn, 0.3, x, u, Vec::Zero(2), Mat::Zero(2, 1)), 0.0);
    EXPECT_EQ(hamiltonian(dyn, 0.3, x, u, p, q), 9.0);
    EXPECT_EQ(hamiltonian(dyn, 0.3, x, u, 2.0 * p, 2.0 * q), 18.0);
}

// Deterministic LQ variant (s = 0) so constraint means are exact.
ProblemSpec lq_with_constraints(std::vector<TerminalFunction> constraints, double s = 0.0) {
    LqExample lq;
    lq.s = s;
    const double target = lq.target;
    TerminalFunction cost{"miss", [target](ConstVecRef x) { return 0.5 * (x[0] - target) * (x[0] - target); },
                          [target](ConstVecRef x, VecRef g) { g[0] = x[0] - target; }};
    return ProblemSpec(lq_dynamics(lq), std::move(cost), std::move(constraints), RiskMeasure::expectation(),
                       InitialState::fixed(Vec::Zero(1)), lq.horizon, DiffusionRegime::Uncontrolled);
}

TerminalFunction affine(const std::string& name, double slope, double offset) {
    return {name, [=](ConstVecRef x) { return slope * x[0] + offset; }, [=](ConstVecRef, VecRef g) { g[0] = slope; }};
}

TEST(Slackness, NoConstraints) {
    const ProblemSpec problem = lq_with_constraints({});
    const BrownianEnsemble noise(TimeGrid(1.0, 16), 1, 4, 1);
    const auto x = euler_maruyama(problem.dynamics(), ControlLaw::constant({1.0}), problem.initial_state(), noise);
    const auto report = slackness_check(problem, x, Multipliers{});
    EXPECT_TRUE(report.entries.empty());
    EXPECT_TRUE(report.passed);
}

TEST(Slackness, ZeroMultiplierOnInactiveConstraint) {
    const ProblemSpec problem = lq_with_constraints({affine("upper", 1.0, -1.5)}, 0.2);
    const BrownianEnsemble noise(TimeGrid(1.0, 16), 1, 2000, 1);
    const auto x = euler_maruyama(problem.dynamics(), ControlLaw::constant({1.0}), problem.initial_state(), noise);
    Multipliers m;
    m.constraints = {0.0};
    const auto report = slackness_check(problem, x, m);
    ASSERT_EQ(report.entries.size(), 1u);
    EXPECT_EQ(report.entries[0].residual, 0.0);
    EXPECT_FALSE(report.entries[0].active);
    EXPECT_TRUE(report.passed);
}

TEST(Slackness, ConstructedViolation) {
    const ProblemSpec problem = lq_with_constraints({affine("upper", 1.0, -1.3)});
    const BrownianEnsemble noise(TimeGrid(1.0, 16), 1, 4, 1);
    const auto x = euler_maruyama(problem.dynamics(), ControlLaw::constant({1.0}), problem.initial_state(), noise);
    Multipliers m;
    m.constraints = {-1.0};
    const auto report = slackness_check(problem, x, m);
    EXPECT_NEAR(report.entries[0].residual, 0.3, 1e-12);
    EXPECT_TRUE(report.feasible);
    EXPECT_FALSE(report.passed);
}

TEST(Slackness, InfeasibleCandidate) {
    const ProblemSpec problem = lq_with_constraints({affine("upper", 1.0, -0.5)});
    const BrownianEnsemble noise(TimeGrid(1.0, 16), 1, 4, 1);
    const auto x = euler_maruyama(problem.dynamics(), ControlLaw::constant({1.0}), problem.initial_state(), noise);
    Multipliers m;
    m.constraints = {0.0};
    EXPECT_FALSE(slackness_check(problem, x, m).feasible);
}

TEST(RiskGap, Examples) {
    const auto rho = RiskMeasure::avar(0.3);
    CounterRng rng(3);
    std::vector<double> v(500);
    for (double& x : v) x = rng.normal();
    const SampledRandomVariable z(v);
    EXPECT_LE(std::abs(risk_param_gap(rho, z, risk_subgradient(rho, z).xi).gap), 1e-9);
    const auto ones = risk_param_gap(rho, z, std::vector<double>(500, 1.0));
    EXPECT_NEAR(ones.gap, risk_value(rho, z) - z.mean(), 1e-12);
    EXPECT_GT(ones.gap, 0.0);
    const SampledRandomVariable c(std::vector<double>(500, 2.0));
    std::vector<double> feasible(500, 0.0);
    for (std::size_t i = 0; i < 150; ++i) feasible[i] = 500.0 / 150.0;
    EXPECT_NEAR(risk_param_gap(rho, c, feasible).gap, 0.0, 1e-12);
    EXPECT_THROW(risk_param_gap(rho, z, std::vector<double>(500, 2.0)), std::invalid_argument);
}

TEST(RiskGap, ExpectationIsExactlyZero) {
    const SampledRandomVariable z({1.0, 5.0, -2.0});
    EXPECT_EQ(risk_param_gap(RiskMeasure::expectation(), z, {1.0, 1.0, 1.0}).gap, 0.0);
}

// Hand-built SOP cells: H is affine in u with slope p_v.
TEST(MaximizationGap, SopCells) {
    const DynamicsSpec dyn = sop_dynamics(SopInstance{});
    const TimeGrid grid(2.0, 2);
    StateEnsemble x(grid, 2, 1);
    ControlTable u(1, 2, 1);
    CostatePair costates(grid, 1, 2, 1);
    costates.p(0, 0) << 0.0, 0.7;
    costates.p(0, 1) << 0.0, 0.7;
    u.at(0, 0)[0] = 1.0;
    u.at(0, 1)[0] = 0.0;
    const auto report = maximization_gap(dyn, x, u, costates);
    EXPECT_NEAR(report.max, 0.7, 1e-15);
    EXPECT_NEAR(report.mean, 0.35, 1e-15);
    EXPECT_EQ(report.cells, 2u);
    EXPECT_NEAR(report.measures[0], 0.5, 1e-15);
}

TEST(MaximizationGap, SingletonControlSet) {
    DynamicsFunctions fns;
    fns.state_dim = 1;
    fns.control_dim = 1;
    fns.noise_dim = 1;
    fns.drift = [](double, ConstVecRef, ConstVecRef u, VecRef out) { out[0] = u[0]; };
    fns.diffusion = [](double, ConstVecRef, ConstVecRef, MatRef out) { out(0, 0) = 1.0; };
    fns.drift_jacobian = [](double, ConstVecRef, ConstVecRef, MatRef out) { out.setZero(); };
    fns.diffusion_jacobian = [](double, ConstVecRef, ConstVecRef, MatRef out) { out.setZero(); };
    const DynamicsSpec dyn(std::move(fns), ControlSet::from_points(1, {0.25}), 1.0);
    const BrownianEnsemble noise(TimeGrid(1.0, 10), 1, 30, 1);
    const auto x = euler_maruyama(dyn, ControlLaw::constant({0.25}), InitialState::fixed(Vec::Zero(1)), noise);
    const auto u = realize_controls(ControlLaw::constant({0.25}), x, noise);
    CostatePair costates(noise.grid(), 30, 1, 1);
    for (std::size_t p = 0; p < 30; ++p) {
        for (std::size_t k = 0; k <= 10; ++k) costates.p(p, k)[0] = static_cast<double>(p) - 10.0;
    }
    EXPECT_EQ(maximization_gap(dyn, x, u, costates).max, 0.0);
}

TEST(Normality, VacuousWitnessAndConflict) {
    const double s = 0.2;
    const ProblemSpec single = lq_with_constraints({affine("reach", 1.0, -1.0)}, s);
    const BrownianEnsemble noise(TimeGrid(1.0, 20), 1, 500, 3);
    const ControlLaw u = ControlLaw::constant({0.0});
    const auto x = euler_maruyama(single.dynamics(), u, single.initial_state(), noise);
    EXPECT_EQ(normality_certificate(single, x, u, noise, {}).status, NormalityReport::Status::Vacuous);
    const auto found = normality_certificate(single, x, u, noise, {0});
    EXPECT_EQ(found.status, NormalityReport::Status::Found);
    EXPECT_FALSE(found.witness.empty());
    ASSERT_EQ(found.values.size(), 1u);
    EXPECT_LT(found.values[0], 0.0);

    const ProblemSpec pair = lq_with_constraints({affine("upper", 1.0, -1.0), affine("lower", -1.0, 1.0)}, s);
    const auto conflict = normality_certificate(pair, x, u, noise, {0, 1});
    EXPECT_EQ(conflict.status, NormalityReport::Status::NotFound);
    EXPECT_GT(conflict.candidates_tried, 0u);
}

struct LqBundle {
    ProblemSpec problem = build_lq(LqExample{});
    BrownianEnsemble noise{TimeGrid(1.0, 50), 1, 4000, 99};
    ControlLaw law;
    StateEnsemble states;
    ControlTable controls;
    FundamentalMatrices fm;
    RiskSubgradient xi;  // filled by make_costates, so declared before costates
    CostatePair costates;

    explicit LqBundle(double u)
        : law(ControlLaw::constant({u})),
          states(euler_maruyama(problem.dynamics(), law, problem.initial_state(), noise)),
          controls(realize_controls(law, states, noise)),
          fm(fundamental_matrices(LinearCoefficients::along_trajectory(problem.dynamics(), states, controls), noise)),
          costates(make_costates()) {}

    CostatePair make_costates() {
        std::vector<double> z(noise.paths());
        for (std::size_t p = 0; p < z.size(); ++p) z[p] = problem.cost().value(states.terminal(p));
        xi = risk_subgradient(problem.risk(), SampledRandomVariable(z));
        const auto terminal = assemble_terminal(xi, problem.cost().gradient, {}, Multipliers{}, states);
        return solve_adjoint(problem.dynamics(), states, controls, terminal, fm, noise);
    }

    CandidateBundle bundle() const {
        CandidateBundle b;
        b.states = &states;
        b.controls = &controls;
        b.control_law = &law;
        b.noise = &noise;
        b.costates = &costates;
        b.fundamental = &fm;
        b.xi = xi;
        return b;
    }
};

CertificateTolerances lq_tolerances() {
    CertificateTolerances tol;
    tol.bsde_residual_bound = 0.05;  // observed residual is about 4e-3 at M=4000
    return tol;
}

TEST(Certify, LqOptimumPasses) {
    const LqBundle lq(1.0);
    const auto cert = certify(lq.problem, lq.bundle(), lq_tolerances());
    EXPECT_EQ(cert.verdict, Verdict::Pass) << cert.summary;
    EXPECT_EQ(cert.maximization.measures[0], 0.0);
    EXPECT_EQ(cert.risk_gap.gap, 0.0);
}

TEST(Certify, FlippedControlFailsMaximization) {
    const LqBundle lq(-1.0);
    const auto cert = certify(lq.problem, lq.bundle(), lq_tolerances());
    EXPECT_EQ(cert.verdict, Verdict::Fail);
    EXPECT_GT(cert.maximization.measures[0], 0.9);
    bool named = false;
    for (const auto& cause : cert.causes) named = named || cause.rfind("maximization", 0) == 0;
    EXPECT_TRUE(named);
}

TEST(Certify, MissingResidualBoundIsInconclusive) {
    const LqBundle lq(1.0);
    const auto cert = certify(lq.problem, lq.bundle(), CertificateTolerances{});
    EXPECT_EQ(cert.verdict, Verdict::Inconclusive);
}

TEST(Certify, TighteningNeverRescuesAFailure) {
    const LqBundle lq(0.0);
    auto tol = lq_tolerances();
    const auto loose = certify(lq.problem, lq.bundle(), tol);
    ASSERT_EQ(loose.verdict, Verdict::Fail);
    tol.gap_measure = 0.0;
    tol.risk_gap = 0.0;
    tol.bsde_residual_bound = 0.0;
    EXPECT_EQ(certify(lq.problem, lq.bundle(), tol).verdict, Verdict::Fail);
}

TEST(Certify, JsonSchema) {
    const LqBundle lq(1.0);
    const auto cert = certify(lq.problem, lq.bundle(), lq_tolerances());
    const auto j = nlohmann::json::parse(certificate_json(cert));
    EXPECT_EQ(j["schema"], "pmp_certificate_v1");
    EXPECT_EQ(j["verdict"], "pass");
    EXPECT_TRUE(j["conditions"].is_array());
    EXPECT_EQ(certificate_json(cert), certificate_json(certify(lq.problem, lq.bundle(), lq_tolerances())));
}

}  // namespace
}  // namespace riskpmp
