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

#include "riskpmp/sop.hpp"

namespace riskpmp {
namespace {

TEST(BuildSop, DefaultInstance) {
    const SopInstance sop;
    const ProblemSpec problem = build_sop(sop);
    EXPECT_EQ(problem.dynamics().state_dim(), 2u);
    EXPECT_EQ(problem.dynamics().control_dim(), 1u);
    EXPECT_EQ(problem.dynamics().noise_dim(), 1u);
    EXPECT_TRUE(problem.constraints().empty());
    EXPECT_EQ(problem.regime(), DiffusionRegime::Uncontrolled);
    EXPECT_EQ(problem.risk().alpha(), 0.3);
    Mat sigma(2, 1);
    Vec x(2), u(1);
    x << 3.0, -1.0;
    u << 0.4;
    problem.dynamics().diffusion(0.7, x, u, sigma);
    EXPECT_EQ(sigma(0, 0), 1.0);
    EXPECT_EQ(sigma(1, 0), 0.0);
    const auto& U = problem.dynamics().controls();
    EXPECT_EQ(U.lower()[0], -1.0);
    EXPECT_EQ(U.upper()[0], 1.0);
}

TEST(BuildSop, FullLevelIsExpectation) {
    SopInstance sop;
    sop.alpha = 1.0;
    const ProblemSpec problem = build_sop(sop);
    const SampledRandomVariable z({0.0, 0.5, 2.0});
    EXPECT_NEAR(risk_value(problem.risk(), z), z.mean(), 1e-15);
}

TEST(BuildSop, RejectsUnorderedEndpoints) {
    SopInstance sop;
    sop.y0 = 1.0;
    EXPECT_THROW(build_sop(sop), std::invalid_argument);
    sop.y0 = 0.0;
    sop.alpha = 0.0;
    EXPECT_THROW(build_sop(sop), std::invalid_argument);
}

TEST(BangBangPolicy, ValuesAndCellAverages) {
    const BangBangPolicy policy{{0.5, 1.5}, 1};
    EXPECT_EQ(policy.value(0.2), 1.0);
    EXPECT_EQ(policy.value(0.5), -1.0);
    EXPECT_EQ(policy.value(1.7), 1.0);
    EXPECT_NEAR(policy.cell_average(0.25, 0.75), 0.0, 1e-15);
    EXPECT_NEAR(policy.cell_average(0.0, 2.0), 0.0, 1e-15);
    EXPECT_EQ(policy.cell_average(0.6, 0.8), -1.0);
}

TEST(Shoot, DeterministicTargetIsReached) {
    SopInstance sop;
    sop.noise = 0.0;
    const BrownianEnsemble noise(TimeGrid(sop.horizon, 100), 1, 4, 1);
    ShootConfig config;
    const auto result = shoot(sop, noise, config);
    EXPECT_LE(result.cost, 1e-6);
    ASSERT_TRUE(result.open_loop.has_value());
    // Independent check of the returned policy on a finer grid of the ODE.
    const BrownianEnsemble fine(TimeGrid(sop.horizon, 2000), 1, 1, 1);
    EXPECT_LE(sop_cost(sop, result.open_loop->law(fine.grid()), fine), 1e-4);
}

TEST(Shoot, IncumbentIsMonotoneAndDeterministic) {
    const SopInstance sop;
    const BrownianEnsemble noise(TimeGrid(sop.horizon, 40), 1, 1000, 7);
    ShootConfig config;
    config.family = PolicyFamily::PredictedMiss;
    config.coarse_points = 5;
    config.golden_iterations = 8;
    const auto a = shoot(sop, noise, config);
    const auto b = shoot(sop, noise, config);
    EXPECT_EQ(a.cost, b.cost);
    EXPECT_EQ(a.description, b.description);
    ASSERT_EQ(a.history.size(), a.evaluations);
    for (std::size_t i = 1; i < a.history.size(); ++i) EXPECT_LE(a.history[i], a.history[i - 1]);
    EXPECT_EQ(a.history.back(), a.cost);
}

TEST(Shoot, SmallerLevelCostsMore) {
    const BrownianEnsemble noise(TimeGrid(2.0, 40), 1, 2000, 9);
    ShootConfig config;
    config.coarse_points = 7;
    config.golden_iterations = 10;
    SopInstance mean_case;
    mean_case.alpha = 1.0;
    SopInstance tail_case;
    tail_case.alpha = 0.1;
    EXPECT_GE(shoot(tail_case, noise, config).cost, shoot(mean_case, noise, config).cost);
}

TEST(Shoot, SweepStartsFromTheFeedbackSurface) {
    const SopInstance sop;
    const BrownianEnsemble noise(TimeGrid(sop.horizon, 40), 1, 500, 3);
    const PredictedMissPolicy pm{0.8, 0.1};
    const SweepPolicy sweep = SweepPolicy::from_predicted_miss(pm, sop, noise.grid());
    const double a = sop_cost(sop, pm.law(sop), noise);
    const double b = sop_cost(sop, sweep.law(sop), noise);
    EXPECT_NEAR(a, b, 1e-9);
}

TEST(Safety, ConstantSamples) {
    const SopInstance sop;
    const auto safe = safety_check(sop, std::vector<double>(100, sop.target - 1.0));
    EXPECT_NEAR(safe.margin, 1.0, 1e-15);
    EXPECT_TRUE(safe.safe);
    const auto unsafe = safety_check(sop, std::vector<double>(100, sop.target + 1.0));
    EXPECT_FALSE(unsafe.safe);
}

TEST(Safety, SameValueAsTheRiskModule) {
    const SopInstance sop;
    CounterRng rng(6);
    std::vector<double> y(3000);
    for (double& v : y) v = 0.8 + 0.3 * rng.normal();
    const auto report = safety_check(sop, y);
    EXPECT_NEAR(report.avar_terminal, risk_value(RiskMeasure::avar(sop.alpha), SampledRandomVariable(y)), 1e-12);
    EXPECT_GT(report.stderr_, 0.0);
    EXPECT_NEAR(report.band, 5.0 * report.stderr_, 1e-15);
}

TEST(BangBang, ZeroControlIsFlagged) {
    const SopInstance sop;
    const BrownianEnsemble noise(TimeGrid(sop.horizon, 40), 1, 2000, 5);
    SopPipelineOptions options;
    const auto sol = analyze_sop_policy(sop, noise, ControlLaw::constant({0.0}), options);
    EXPECT_EQ(sol.bangbang.bang_fraction, 0.0);
    EXPECT_TRUE(std::isfinite(sol.bangbang.xi_miss));
    EXPECT_GT(sol.bangbang.xi_miss_stderr, 0.0);
    EXPECT_FALSE(sol.bangbang.chain.empty());
    // The zero control is not bang-bang: if the safety hypothesis held the
    // report would be inconsistent, otherwise it says why it makes no claim.
    if (sol.bangbang.applicable) {
        EXPECT_FALSE(sol.bangbang.consistent);
    } else {
        EXPECT_FALSE(sol.bangbang.reason.empty());
    }
}

TEST(BangBang, DeterministicInstanceIsNotApplicable) {
    SopInstance sop;
    sop.noise = 0.0;
    sop.target = 3.0;  // y(T) = 1 < y_T under u = 1 - ... keeps the trajectory safe
    const BrownianEnsemble noise(TimeGrid(sop.horizon, 40), 1, 10, 5);
    const auto sol = analyze_sop_policy(sop, noise, ControlLaw::constant({0.5}), SopPipelineOptions{});
    EXPECT_TRUE(sol.safety.safe);
    EXPECT_FALSE(sol.bangbang.applicable);
    EXPECT_NE(sol.bangbang.reason.find("deterministic"), std::string::npos);
}

TEST(Pipeline, SmallSolveCertifiesRiskParameter) {
    const SopInstance sop;
    const BrownianEnsemble noise(TimeGrid(sop.horizon, 40), 1, 3000, 21);
    SopPipelineOptions options;
    options.shoot.family = PolicyFamily::PredictedMiss;
    options.shoot.coarse_points = 5;
    options.shoot.golden_iterations = 8;
    options.tolerances.bsde_residual_bound = 1.5;
    const auto sol = solve_sop(sop, noise, options);
    EXPECT_LE(std::abs(sol.certificate.risk_gap.gap), 1e-6);
    EXPECT_TRUE(sol.certificate.slackness.entries.empty());
    EXPECT_NE(sol.certificate.verdict, Verdict::Fail) << sol.certificate.summary;
}

}  // namespace
}  // namespace riskpmp
