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

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "riskpmp/adjoint.hpp"
#include "riskpmp/problems.hpp"
#include "riskpmp/sop.hpp"

namespace riskpmp {
namespace {

struct Solved {
    StateEnsemble states;
    ControlTable controls;
    FundamentalMatrices fm;
    TerminalCostate terminal;
    CostatePair costates;
};

Solved solve(const DynamicsSpec& dyn, const ControlLaw& law, const Vec& x0, const BrownianEnsemble& noise,
             const TerminalGradient& grad, const std::function<double(ConstVecRef)>& cost, const RiskMeasure& rho,
             const AdjointOptions& options = {}) {
    StateEnsemble states = euler_maruyama(dyn, law, InitialState::fixed(x0), noise);
    ControlTable controls = realize_controls(law, states, noise);
    FundamentalMatrices fm = fundamental_matrices(LinearCoefficients::along_trajectory(dyn, states, controls), noise);
    std::vector<double> z(noise.paths());
    for (std::size_t p = 0; p < z.size(); ++p) z[p] = cost(states.terminal(p));
    TerminalCostate terminal =
        assemble_terminal(risk_subgradient(rho, SampledRandomVariable(z)), grad, {}, Multipliers{}, states);
    CostatePair costates = solve_adjoint(dyn, states, controls, terminal, fm, noise, options);
    return {std::move(states), std::move(controls), std::move(fm), std::move(terminal), std::move(costates)};
}

TEST(Terminal, ExpectationWithoutConstraints) {
    const SopInstance sop;
    const DynamicsSpec dyn = sop_dynamics(sop);
    const BrownianEnsemble noise(TimeGrid(2.0, 10), 1, 20, 1);
    const auto states = euler_maruyama(dyn, ControlLaw::constant({1.0}), InitialState::fixed(Vec::Zero(2)), noise);
    const auto grad = [](ConstVecRef x, VecRef g) { g = 2.0 * x; };
    const auto terminal = assemble_terminal(risk_subgradient(RiskMeasure::expectation(), SampledRandomVariable(std::vector<double>(20, 0.0))),
                                            grad, {}, Multipliers{}, states);
    for (std::size_t p = 0; p < 20; ++p) EXPECT_EQ(terminal.at(p), (-2.0 * states.terminal(p)).eval());
}

TEST(Terminal, SopAssembly) {
    const SopInstance sop;
    const ProblemSpec problem = build_sop(sop);
    const BrownianEnsemble noise(TimeGrid(2.0, 20), 1, 200, 1);
    const auto states = euler_maruyama(problem.dynamics(), ControlLaw::constant({0.5}), problem.initial_state(), noise);
    std::vector<double> z(200);
    for (std::size_t p = 0; p < 200; ++p) z[p] = problem.cost().value(states.terminal(p));
    const auto xi = risk_subgradient(problem.risk(), SampledRandomVariable(z));
    const auto terminal = assemble_terminal(xi, problem.cost().gradient, {}, Multipliers{}, states);
    for (std::size_t p = 0; p < 200; ++p) {
        EXPECT_DOUBLE_EQ(terminal.at(p)[0], xi.xi[p] * (sop.target - states.terminal(p)[0]));
        EXPECT_EQ(terminal.at(p)[1], 0.0);
    }
}

TEST(Terminal, AbnormalMultipliers) {
    const SopInstance sop;
    const DynamicsSpec dyn = sop_dynamics(sop);
    const BrownianEnsemble noise(TimeGrid(2.0, 10), 1, 5, 1);
    const auto states = euler_maruyama(dyn, ControlLaw::constant({1.0}), InitialState::fixed(Vec::Zero(2)), noise);
    const auto cost_grad = [](ConstVecRef, VecRef g) { g.setConstant(100.0); };
    const auto constraint_grad = [](ConstVecRef x, VecRef g) { g << x[1], 1.0; };
    Multipliers m;
    m.cost = 0.0;
    m.constraints = {-0.5};
    const auto terminal = assemble_terminal(risk_subgradient(RiskMeasure::expectation(), SampledRandomVariable(std::vector<double>(5, 1.0))),
                                            cost_grad, {constraint_grad}, m, states);
    for (std::size_t p = 0; p < 5; ++p) {
        EXPECT_EQ(terminal.at(p)[0], -0.5 * states.terminal(p)[1]);
        EXPECT_EQ(terminal.at(p)[1], -0.5);
    }
}

TEST(Terminal, InvalidMultipliers) {
    Multipliers zero;
    zero.cost = 0.0;
    zero.constraints = {0.0, 0.0};
    EXPECT_THROW(zero.validate(), std::invalid_argument);
    Multipliers positive;
    positive.constraints = {0.3};
    EXPECT_THROW(positive.validate(), std::invalid_argument);
    Multipliers half;
    half.cost = -0.5;
    EXPECT_THROW(half.validate(), std::invalid_argument);
    EXPECT_NO_THROW(Multipliers{}.validate());
}

// sigma = 0, linear drift: the costate is the discrete adjoint
// p_k = (I + A dt)' p_{k+1} of the backward equation dp = -A' p dt.
TEST(SolveAdjoint, DeterministicLinearMatchesTheBackwardOde) {
    Mat a(2, 2);
    a << 0.0, 1.0, -1.0, -0.2;
    DynamicsFunctions fns;
    fns.state_dim = 2;
    fns.control_dim = 1;
    fns.noise_dim = 1;
    fns.drift = [a](double, ConstVecRef x, ConstVecRef u, VecRef out) {
        out = a * x;
        out[1] += u[0];
    };
    fns.diffusion = [](double, ConstVecRef, ConstVecRef, MatRef out) { out.setZero(); };
    fns.drift_jacobian = [a](double, ConstVecRef, ConstVecRef, MatRef out) { out = a; };
    fns.diffusion_jacobian = [](double, ConstVecRef, ConstVecRef, MatRef out) { out.setZero(); };
    const DynamicsSpec dyn(std::move(fns), ControlSet::box({-1.0}, {1.0}, 3), 2.0);

    const std::size_t steps = 4000;
    const double horizon = 1.0;
    const BrownianEnsemble noise(TimeGrid(horizon, steps), 1, 4, 1);
    Vec x0(2);
    x0 << 1.0, 0.0;
    const auto solved = solve(dyn, ControlLaw::constant({0.5}), x0, noise,
                              [](ConstVecRef x, VecRef g) { g = x; },
                              [](ConstVecRef x) { return 0.5 * x.squaredNorm(); }, RiskMeasure::expectation());

    const double dt = horizon / steps;
    const Mat step = (Mat::Identity(2, 2) + a * dt).transpose();
    const Mat at = a.transpose();
    Vec p = -solved.states.terminal(0);
    const Vec p_terminal = p;
    double worst_discrete = 0.0, worst_exact = 0.0;
    for (std::size_t k = steps + 1; k-- > 0;) {
        if (k < steps) p = step * p;
        for (std::size_t path = 0; path < 4; ++path) {
            worst_discrete = std::max(worst_discrete, (solved.costates.p(path, k) - p).cwiseAbs().maxCoeff());
        }
        const double tau = horizon - noise.grid().node(k);
        const Vec exact = (at * tau).exp() * p_terminal;
        worst_exact = std::max(worst_exact, (solved.costates.p(0, k) - exact).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst_discrete, 1e-6);
    // Against the continuous adjoint the Euler error is first order.
    EXPECT_LE(worst_exact, 5.0 * dt);
}

TEST(SolveAdjoint, TerminalSliceIsExact) {
    const SopInstance sop;
    const ProblemSpec problem = build_sop(sop);
    const BrownianEnsemble noise(TimeGrid(2.0, 25), 1, 500, 3);
    const auto solved = solve(problem.dynamics(), PredictedMissPolicy{}.law(sop), sop.initial_state(), noise,
                              problem.cost().gradient, problem.cost().value, problem.risk());
    for (std::size_t p = 0; p < 500; ++p) {
        EXPECT_EQ(solved.costates.p(p, 25)[0], solved.terminal.at(p)[0]);
        EXPECT_EQ(solved.costates.p(p, 25)[1], solved.terminal.at(p)[1]);
    }
}

// With expectation risk and an open-loop control, p_y(t) = -(E[y(T) | F_t] - y_T)
// whose dW coefficient is -1.
TEST(SolveAdjoint, SopExpectationRiskDiffusionCostate) {
    const SopInstance sop;
    const ProblemSpec problem = build_sop(sop);
    const BrownianEnsemble noise(TimeGrid(2.0, 50), 1, 20000, 5);
    const BangBangPolicy policy{{0.9, 1.6}, 1};
    const auto solved = solve(problem.dynamics(), policy.law(noise.grid()), sop.initial_state(), noise,
                              problem.cost().gradient, problem.cost().value, RiskMeasure::expectation());
    double mean_qy = 0.0, mean_qv = 0.0;
    const double cells = 20000.0 * 50.0;
    for (std::size_t p = 0; p < 20000; ++p) {
        for (std::size_t k = 0; k < 50; ++k) {
            mean_qy += solved.costates.q(p, k)(0, 0) / cells;
            mean_qv += (solved.costates.q(p, k)(1, 0) + (2.0 - noise.grid().node(k))) / cells;
        }
    }
    EXPECT_LE(std::abs(mean_qy + 1.0), 0.05);
    EXPECT_LE(std::abs(mean_qv), 0.1);
}

TEST(SolveAdjoint, LqClosedForm) {
    const LqExample lq;
    const ProblemSpec problem = build_lq(lq);
    const BrownianEnsemble noise(TimeGrid(1.0, 50), 1, 5000, 12);
    const auto solved = solve(problem.dynamics(), ControlLaw::constant({1.0}), Vec::Zero(1), noise,
                              problem.cost().gradient, problem.cost().value, RiskMeasure::expectation());
    const auto w = noise.values();
    // The in-sample projection carries O(1/sqrt(M)) noise, so the oracle is checked
    // at Monte Carlo resolution rather than to round-off.
    double worst_p = 0.0, mean_abs_p = 0.0, mean_q = 0.0;
    for (std::size_t p = 0; p < 5000; ++p) {
        for (std::size_t k = 0; k < 50; ++k) {
            const double exact = lq.target - lq.horizon - lq.s * w.at(p, k)[0];
            const double err = std::abs(solved.costates.p(p, k)[0] - exact);
            worst_p = std::max(worst_p, err);
            mean_abs_p += err / (5000.0 * 50.0);
            mean_q += solved.costates.q(p, k)(0, 0) / (5000.0 * 50.0);
        }
    }
    EXPECT_LE(worst_p, 0.15);
    EXPECT_LE(mean_abs_p, 0.02);
    EXPECT_NEAR(mean_q, -lq.s, 0.01);
}

TEST(SolveAdjoint, BsdeResidualShrinksUnderRefinement) {
    const DynamicsSpec dyn = scalar_linear(1.0, 0.5);
    const BrownianEnsemble fine(TimeGrid(1.0, 200), 1, 5000, 44);
    std::vector<double> residuals;
    for (std::size_t factor : {8u, 2u}) {
        const BrownianEnsemble noise = fine.coarsen(factor);
        const auto solved = solve(dyn, ControlLaw::constant({0.0}), Vec::Ones(1), noise,
                                  [](ConstVecRef x, VecRef g) { g = x; },
                                  [](ConstVecRef x) { return 0.5 * x.squaredNorm(); }, RiskMeasure::expectation());
        residuals.push_back(solved.costates.diagnostics().bsde_residual);
    }
    EXPECT_LT(residuals[1], residuals[0]);
}

TEST(SolveAdjoint, ResidualBoundIsReported) {
    const DynamicsSpec dyn = scalar_linear(1.0, 0.5);
    const BrownianEnsemble noise(TimeGrid(1.0, 20), 1, 1000, 44);
    AdjointOptions options;
    options.residual_bound = 1e-12;
    const auto solved = solve(dyn, ControlLaw::constant({0.0}), Vec::Ones(1), noise,
                              [](ConstVecRef x, VecRef g) { g = x; },
                              [](ConstVecRef x) { return 0.5 * x.squaredNorm(); }, RiskMeasure::expectation(), options);
    EXPECT_FALSE(solved.costates.diagnostics().residual_within_bound());
    EXPECT_EQ(solved.costates.diagnostics().bsde_residuals.size(), 20u);
}

TEST(Martingale, SopExpectationDynamics) {
    const SopInstance sop;
    const ProblemSpec problem = build_sop(sop);
    const BrownianEnsemble noise(TimeGrid(2.0, 50), 1, 20000, 8);
    const auto solved = solve(problem.dynamics(), PredictedMissPolicy{0.95, 0.03}.law(sop), sop.initial_state(), noise,
                              problem.cost().gradient, problem.cost().value, problem.risk());
    const auto report = martingale_check(solved.costates, solved.fm);
    EXPECT_TRUE(report.passed);
    // E[p_y] is flat, and E[p_v] decreases with slope -E[p_y].
    EXPECT_LE(std::abs(report.raw_slope[0]), 5.0 * report.raw_slope_stderr[0]);
    const double level = report.raw_mean.col(0).mean();
    EXPECT_LE(std::abs(report.raw_slope[1] + level), 5.0 * (report.raw_slope_stderr[1] + report.raw_stderr(0, 0)));
}

TEST(Martingale, ZeroTerminalCostate) {
    const SopInstance sop;
    const ProblemSpec problem = build_sop(sop);
    const BrownianEnsemble noise(TimeGrid(2.0, 20), 1, 300, 8);
    const auto solved = solve(problem.dynamics(), ControlLaw::constant({0.0}), sop.initial_state(), noise,
                              [](ConstVecRef, VecRef g) { g.setZero(); }, [](ConstVecRef) { return 0.0; },
                              RiskMeasure::expectation());
    for (std::size_t p = 0; p < 300; ++p) {
        for (std::size_t k = 0; k <= 20; ++k) EXPECT_EQ(solved.costates.p(p, k).cwiseAbs().maxCoeff(), 0.0);
    }
    const auto report = martingale_check(solved.costates, solved.fm);
    EXPECT_EQ(report.adjusted_slope.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(report.passed);
}

}  // namespace
}  // namespace riskpmp
