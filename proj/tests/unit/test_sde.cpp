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
#include <filesystem>
#include <numeric>
#include <sstream>

#include "riskpmp/ensemble_io.hpp"
#include "riskpmp/problems.hpp"
#include "riskpmp/sde.hpp"
#include "test_support.hpp"

namespace riskpmp {
namespace {

using testing::scalar_dynamics;
using testing::zero_matrix;

TEST(EulerMaruyama, FrozenDynamicsKeepTheInitialState) {
    const DynamicsSpec dyn = scalar_linear(0.0, 0.0);
    const BrownianEnsemble noise(TimeGrid(1.0, 20), 1, 50, 1);
    const auto x = euler_maruyama(dyn, ControlLaw::constant({0.0}), InitialState::fixed(Vec::Constant(1, 3.5)), noise);
    for (double v : x.values()) EXPECT_EQ(v, 3.5);
}

TEST(EulerMaruyama, ConstantDriftIsIntegratedExactly) {
    const DynamicsSpec dyn = scalar_dynamics([](double, ConstVecRef, ConstVecRef, VecRef out) { out[0] = 1.0; },
                                             zero_matrix(), zero_matrix(), zero_matrix());
    const BrownianEnsemble noise(TimeGrid(2.0, 8), 1, 10, 1);
    const auto x = euler_maruyama(dyn, ControlLaw::constant({0.0}), InitialState::fixed(Vec::Zero(1)), noise);
    for (std::size_t p = 0; p < 10; ++p) EXPECT_EQ(x.terminal(p)[0], 2.0);
}

// dx = b x dW is a martingale: E[x(T)] = x0.
TEST(EulerMaruyama, GeometricMartingaleKeepsItsMean) {
    const DynamicsSpec dyn = scalar_linear(0.0, 0.5);
    const std::size_t paths = 100000;
    const BrownianEnsemble noise(TimeGrid(1.0, 1000), 1, paths, 314);
    const auto sample = simulate_terminal(dyn, ControlLaw::constant({0.0}), InitialState::fixed(Vec::Ones(1)), noise);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < paths; ++p) mean += sample.at(p)[0];
    mean /= paths;
    for (std::size_t p = 0; p < paths; ++p) m2 += (sample.at(p)[0] - mean) * (sample.at(p)[0] - mean);
    const double stderr_ = std::sqrt(m2 / (paths - 1) / paths);
    EXPECT_LE(std::abs(mean - 1.0), 5.0 * stderr_);
}

TEST(EulerMaruyama, PerPathInitialStates) {
    const DynamicsSpec dyn = scalar_linear(0.0, 0.0);
    const BrownianEnsemble noise(TimeGrid(1.0, 4), 1, 3, 1);
    const auto x = euler_maruyama(dyn, ControlLaw::constant({0.0}), InitialState::per_path(1, {1.0, 2.0, 3.0}), noise);
    EXPECT_EQ(x.terminal(2)[0], 3.0);
}

TEST(EulerMaruyama, NonFinitePathsAreAborted) {
    const DynamicsSpec dyn = scalar_dynamics(
        [](double, ConstVecRef x, ConstVecRef, VecRef out) { out[0] = x[0] * x[0]; }, zero_matrix(),
        [](double, ConstVecRef x, ConstVecRef, MatRef out) { out(0, 0) = 2.0 * x[0]; }, zero_matrix(), 100.0);
    const BrownianEnsemble noise(TimeGrid(10.0, 200), 1, 2, 1);
    const auto x = euler_maruyama(dyn, ControlLaw::constant({0.0}), InitialState::per_path(1, {0.0, 1.0}), noise);
    ASSERT_EQ(x.aborts().size(), 1u);
    EXPECT_EQ(x.aborts()[0].path, 1u);
    EXPECT_TRUE(std::isnan(x.terminal(1)[0]));
    EXPECT_EQ(x.terminal(0)[0], 0.0);
}

// Permuting increments at steps >= k must not move x(t_0..t_k).
TEST(EulerMaruyama, Adaptedness) {
    const DynamicsSpec dyn = cubic_double_integrator(0.1, 1.0);
    const TimeGrid grid(1.0, 40);
    const std::size_t paths = 64, cut = 17;
    const BrownianEnsemble base = BrownianEnsemble(grid, 1, paths, 77).materialize();
    std::vector<double> incs(paths * grid.steps());
    for (std::size_t p = 0; p < paths; ++p) {
        base.path_increments(p, std::span<double>(incs.data() + p * grid.steps(), grid.steps()));
    }
    std::vector<double> shuffled = incs;
    for (std::size_t p = 0; p < paths; ++p) {
        auto* row = shuffled.data() + p * grid.steps();
        std::reverse(row + cut, row + grid.steps());
        row[grid.steps() - 1] *= -3.0;
    }
    const auto a = BrownianEnsemble::from_increments(grid, 1, paths, 77, incs);
    const auto b = BrownianEnsemble::from_increments(grid, 1, paths, 77, shuffled);
    const ControlLaw law = ControlLaw::feedback(1, [](const ControlQuery& q, std::span<double> out) {
        out[0] = q.state[1] + q.brownian[0] > 0.0 ? -1.0 : 1.0;
    });
    const InitialState x0 = InitialState::fixed(Vec::Zero(2));
    const auto xa = euler_maruyama(dyn, law, x0, a);
    const auto xb = euler_maruyama(dyn, law, x0, b);
    bool later_differs = false;
    for (std::size_t p = 0; p < paths; ++p) {
        for (std::size_t k = 0; k <= cut; ++k) {
            EXPECT_EQ(xa.at(p, k)[0], xb.at(p, k)[0]);
            EXPECT_EQ(xa.at(p, k)[1], xb.at(p, k)[1]);
        }
        later_differs = later_differs || xa.terminal(p)[0] != xb.terminal(p)[0];
    }
    EXPECT_TRUE(later_differs);
}

TEST(StrongOrder, ScalarLinearSdeIsHalfOrder) {
    const DynamicsSpec dyn = scalar_linear(1.0, 0.5);
    const BrownianEnsemble finest(TimeGrid(1.0, 1024), 1, 1000, 2718);
    const auto result = strong_convergence_order(dyn, ControlLaw::constant({0.0}), Vec::Ones(1), finest,
                                                 {64, 128, 256, 512, 1024});
    ASSERT_TRUE(result.order.has_value());
    EXPECT_GE(*result.order, 0.35);
    EXPECT_LE(*result.order, 0.65);
}

TEST(StrongOrder, DeterministicDriftIsFirstOrder) {
    const DynamicsSpec dyn = scalar_linear(1.0, 0.0);
    const BrownianEnsemble finest(TimeGrid(1.0, 1024), 1, 10, 1);
    const auto result =
        strong_convergence_order(dyn, ControlLaw::constant({0.0}), Vec::Ones(1), finest, {64, 128, 256, 512, 1024});
    ASSERT_TRUE(result.order.has_value());
    EXPECT_GE(*result.order, 0.9);
    EXPECT_LE(*result.order, 1.1);
}

TEST(StrongOrder, ZeroDynamicsHaveZeroError) {
    const DynamicsSpec dyn = scalar_linear(0.0, 0.0);
    const BrownianEnsemble finest(TimeGrid(1.0, 64), 1, 10, 1);
    const auto result = strong_convergence_order(dyn, ControlLaw::constant({0.0}), Vec::Ones(1), finest, {8, 16, 64});
    for (double e : result.errors) EXPECT_EQ(e, 0.0);
    EXPECT_FALSE(result.order.has_value());
}

TEST(StrongOrder, NeedsAClosedForm) {
    const DynamicsSpec dyn = cubic_double_integrator();
    const BrownianEnsemble finest(TimeGrid(1.0, 64), 1, 10, 1);
    EXPECT_THROW(strong_convergence_order(dyn, ControlLaw::constant({0.0}), Vec::Zero(2), finest, {8, 16}),
                 std::invalid_argument);
}

TEST(AprioriBound, GrowsWithTheInitialState) {
    const DynamicsSpec dyn = scalar_linear(0.5, 0.3);
    const BrownianEnsemble noise(TimeGrid(1.0, 100), 1, 500, 3);
    const InitialState x0 = InitialState::fixed(Vec::Ones(1));
    const auto one = a_priori_bound(dyn, ControlLaw::constant({0.0}), x0, noise);
    const auto two = a_priori_bound(dyn, ControlLaw::constant({0.0}), x0.scaled(2.0), noise);
    EXPECT_TRUE(std::isfinite(one.constant));
    EXPECT_GT(one.constant, 0.0);
    EXPECT_GT(two.mean_sup_norm, one.mean_sup_norm);
    EXPECT_GT(two.data_magnitude, one.data_magnitude);
}

// ---------------------------------------------------------------------------
// Linearized SDE

Forcing constant_forcing(std::size_t paths, std::size_t steps, double g1, double g2) {
    Forcing f(paths, steps, 1, 1);
    for (std::size_t p = 0; p < paths; ++p) {
        for (std::size_t k = 0; k <= steps; ++k) {
            f.drift(p, k)[0] = g1;
            f.noise(p, k)(0, 0) = g2;
        }
    }
    return f;
}

Forcing random_forcing(std::size_t paths, std::size_t steps, std::size_t n, std::size_t d, std::uint64_t seed) {
    CounterRng rng(seed);
    Forcing f(paths, steps, n, d);
    for (std::size_t p = 0; p < paths; ++p) {
        for (std::size_t k = 0; k <= steps; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                f.drift(p, k)[static_cast<Eigen::Index>(i)] = rng.normal();
                for (std::size_t j = 0; j < d; ++j) f.noise(p, k)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal();
            }
        }
    }
    return f;
}

LinearCoefficients random_coefficients(std::size_t n, std::size_t d, std::uint64_t seed) {
    CounterRng rng(seed);
    Mat a(n, n), noise(n, n * d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = 0.5 * rng.normal();
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = 0.3 * rng.normal();
    return LinearCoefficients::constant(a, noise);
}

TEST(Linearized, ZeroForcingGivesZero) {
    const BrownianEnsemble noise(TimeGrid(1.0, 30), 1, 20, 1);
    const auto y = solve_linearized(LinearCoefficients::constant(Mat::Constant(1, 1, 0.7), Mat::Constant(1, 1, 0.4)),
                                    constant_forcing(20, 30, 0.0, 0.0), noise);
    for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Linearized, PureIntegration) {
    const BrownianEnsemble noise(TimeGrid(2.0, 16), 1, 5, 1);
    const auto y = solve_linearized(LinearCoefficients::constant(Mat::Zero(1, 1), Mat::Zero(1, 1)),
                                    constant_forcing(5, 16, 1.5, 0.0), noise);
    for (std::size_t p = 0; p < 5; ++p) EXPECT_EQ(y.terminal(p)[0], 3.0);
}

TEST(Linearized, Superposition) {
    const std::size_t paths = 40, steps = 50, n = 2, d = 2;
    const BrownianEnsemble noise(TimeGrid(1.0, steps), d, paths, 9);
    const LinearCoefficients coeffs = random_coefficients(n, d, 4);
    const Forcing f = random_forcing(paths, steps, n, d, 1);
    const Forcing g = random_forcing(paths, steps, n, d, 2);
    const auto yf = solve_linearized(coeffs, f, noise);
    const auto yg = solve_linearized(coeffs, g, noise);
    const auto ysum = solve_linearized(coeffs, f + g, noise);
    for (std::size_t i = 0; i < ysum.values().size(); ++i) {
        EXPECT_NEAR(ysum.values()[i], yf.values()[i] + yg.values()[i], 1e-12);
    }
}

TEST(Linearized, LinearInTheInitialCondition) {
    const std::size_t paths = 10, steps = 30;
    const BrownianEnsemble noise(TimeGrid(1.0, steps), 1, paths, 9);
    const LinearCoefficients coeffs = LinearCoefficients::constant(Mat::Constant(1, 1, 0.3), Mat::Constant(1, 1, 0.2));
    const Forcing zero = constant_forcing(paths, steps, 0.0, 0.0);
    const auto y1 = solve_linearized(coeffs, zero, noise, InitialState::fixed(Vec::Ones(1)));
    const auto y3 = solve_linearized(coeffs, zero, noise, InitialState::fixed(Vec::Constant(1, 3.0)));
    for (std::size_t i = 0; i < y1.values().size(); ++i) EXPECT_NEAR(y3.values()[i], 3.0 * y1.values()[i], 1e-12);
}

// ---------------------------------------------------------------------------
// Fundamental matrices

TEST(Fundamental, IdentityWithoutCoefficients) {
    const BrownianEnsemble noise(TimeGrid(1.0, 10), 2, 5, 1);
    const auto fm = fundamental_matrices(LinearCoefficients::constant(Mat::Zero(3, 3), Mat::Zero(3, 6)), noise);
    for (std::size_t p = 0; p < 5; ++p) {
        for (std::size_t k = 0; k <= 10; ++k) {
            EXPECT_TRUE(fm.phi(p, k).isIdentity(0.0));
            EXPECT_TRUE(fm.psi(p, k).isIdentity(0.0));
        }
    }
}

TEST(Fundamental, ScalarClosedForm) {
    const double a = 1.0, b = 0.5;
    const std::size_t paths = 1000, steps = 1000;
    const BrownianEnsemble noise(TimeGrid(1.0, steps), 1, paths, 21);
    const auto fm = fundamental_matrices(LinearCoefficients::constant(Mat::Constant(1, 1, a), Mat::Constant(1, 1, b)), noise);
    const auto w = noise.values();
    const double bound = 5.0 * std::sqrt(1.0 / steps);
    std::size_t outside = 0;
    double mean_rel = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        const double exact = std::exp((a - 0.5 * b * b) + b * w.at(p, steps)[0]);
        const double rel = std::abs(fm.phi(p, steps)(0, 0) - exact) / exact;
        mean_rel += rel / paths;
        if (rel > bound) ++outside;
    }
    EXPECT_LE(mean_rel, bound);
    EXPECT_LE(outside, paths / 100);
}

TEST(Fundamental, InverseIdentityAtFineGrid) {
    const std::size_t steps = 4000;
    const BrownianEnsemble noise(TimeGrid(1.0, steps), 1, 1000, 5);
    const auto fm = fundamental_matrices(LinearCoefficients::constant(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 0.5)),
                                         noise, 0.05);
    EXPECT_LE(fm.inverse_check().max_deviation, 0.05);
}

TEST(Fundamental, ToleranceViolationNamesTheWorstNode) {
    const BrownianEnsemble noise(TimeGrid(1.0, 10), 1, 50, 5);
    try {
        fundamental_matrices(LinearCoefficients::constant(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 0.5)), noise, 1e-12);
        FAIL() << "expected a tolerance violation";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("path"), std::string::npos);
    }
}

TEST(Fundamental, ToleranceStudyShrinksWithRefinement) {
    const BrownianEnsemble finest(TimeGrid(1.0, 1024), 1, 200, 8);
    const auto study = inverse_tolerance_study(
        [](const BrownianEnsemble&) {
            return LinearCoefficients::constant(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 0.5));
        },
        finest, {64, 256, 1024});
    ASSERT_EQ(study.deviations.size(), 3u);
    EXPECT_LT(study.deviations[2], study.deviations[0]);
    EXPECT_GT(study.tolerance_for(1024, 1.0), study.deviations[2]);
}

// ---------------------------------------------------------------------------
// Representation formula

TEST(Representation, ZeroForcing) {
    const std::size_t paths = 10, steps = 40;
    const BrownianEnsemble noise(TimeGrid(1.0, steps), 2, paths, 2);
    const LinearCoefficients coeffs = random_coefficients(2, 2, 3);
    const Forcing zero(paths, steps, 2, 2);
    const auto fm = fundamental_matrices(coeffs, noise);
    const auto y = solve_linearized(coeffs, zero, noise);
    EXPECT_EQ(representation_formula_check(fm, coeffs, zero, noise, y), 0.0);
}

// Variation of constants with D = 0, A = a, g1 = cos t:
//   y(t) = (sin t - a cos t + a e^{a t}) / (1 + a^2).
TEST(Representation, DeterministicVariationOfConstants) {
    const double a = 0.5;
    const std::size_t steps = 4000;
    const TimeGrid grid(1.0, steps);
    const BrownianEnsemble noise(grid, 1, 1, 1);
    std::vector<double> phi(steps + 1), psi(steps + 1);
    Forcing forcing(1, steps, 1, 1);
    StateEnsemble y(grid, 1, 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = grid.node(k);
        phi[k] = std::exp(a * t);
        psi[k] = std::exp(-a * t);
        forcing.drift(0, k)[0] = std::cos(t);
        y.at(0, k)[0] = (std::sin(t) - a * std::cos(t) + a * std::exp(a * t)) / (1.0 + a * a);
    }
    const FundamentalMatrices fm(grid, 1, 1, phi, psi);
    const LinearCoefficients coeffs = LinearCoefficients::constant(Mat::Constant(1, 1, a), Mat::Zero(1, 1));
    RepresentationOptions options;
    options.trapezoid_drift = true;
    EXPECT_LE(representation_formula_check(fm, coeffs, forcing, noise, y, options), 1e-8);
}

// The scheme residual of the representation shrinks like sqrt(dt): the
// constant fitted on coarse grids still bounds the finest one.
TEST(Representation, RefinementStudy) {
    const std::size_t paths = 200, finest = 2000;
    const BrownianEnsemble fine(TimeGrid(1.0, finest), 1, paths, 17);
    Mat a(2, 2), d(2, 2);
    a << -0.4, 0.6, -0.3, 0.2;
    d << 0.2, -0.1, 0.05, 0.15;
    const LinearCoefficients coeffs = LinearCoefficients::constant(a, d);
    double fitted = 0.0, last = 0.0;
    for (std::size_t steps : {250u, 500u, 1000u, 2000u}) {
        const BrownianEnsemble noise = fine.coarsen(finest / steps);
        const TimeGrid& grid = noise.grid();
        Forcing f(paths, steps, 2, 1);
        for (std::size_t p = 0; p < paths; ++p) {
            for (std::size_t k = 0; k <= steps; ++k) {
                const double t = grid.node(k);
                f.drift(p, k) << std::sin(3.0 * t), std::cos(2.0 * t);
                f.noise(p, k) << 0.5 * std::cos(t), 0.3 * t;
            }
        }
        const auto fm = fundamental_matrices(coeffs, noise);
        const auto y = solve_linearized(coeffs, f, noise);
        const double residual = representation_formula_check(fm, coeffs, f, noise, y);
        const double scaled = residual / std::sqrt(grid.dt());
        if (steps < finest) fitted = std::max(fitted, scaled);
        last = scaled;
    }
    EXPECT_GT(fitted, 0.0);
    EXPECT_LE(last, fitted * 1.1);
}

// ---------------------------------------------------------------------------
// Export

TEST(EnsembleIo, CsvAndBinaryRoundTrip) {
    const DynamicsSpec dyn = cubic_double_integrator();
    const BrownianEnsemble noise(TimeGrid(1.0, 6), 1, 3, 4);
    const auto x = euler_maruyama(dyn, ControlLaw::constant({0.5}), InitialState::fixed(Vec::Zero(2)), noise);
    std::ostringstream csv;
    write_csv(csv, view_of(x));
    const std::string text = csv.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "path,step,t,x0,x1");
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), 1u + 3u * 7u);

    const auto file = std::filesystem::temp_directory_path() / "riskpmp_roundtrip.bin";
    write_binary(file, {2, 1, 6, 3, 4}, view_of(x));
    const BinaryDump dump = read_binary(file);
    std::filesystem::remove(file);
    EXPECT_EQ(dump.header.n, 2u);
    EXPECT_EQ(dump.header.M, 3u);
    EXPECT_EQ(dump.header.seed, 4u);
    EXPECT_EQ(dump.width, 2u);
    EXPECT_EQ(dump.data, x.values());
}

}  // namespace
}  // namespace riskpmp
