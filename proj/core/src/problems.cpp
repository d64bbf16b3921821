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

#include "riskpmp/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskpmp {

DynamicsSpec scalar_linear(double a, double b) {
    DynamicsFunctions fns;
    fns.state_dim = 1;
    fns.control_dim = 1;
    fns.noise_dim = 1;
    fns.drift = [a](double, ConstVecRef x, ConstVecRef, VecRef out) { out[0] = a * x[0]; };
    fns.diffusion = [b](double, ConstVecRef x, ConstVecRef, MatRef out) { out(0, 0) = b * x[0]; };
    fns.drift_jacobian = [a](double, ConstVecRef, ConstVecRef, MatRef out) { out(0, 0) = a; };
    fns.diffusion_jacobian = [b](double, ConstVecRef, ConstVecRef, MatRef out) { out(0, 0) = b; };
    fns.closed_form = [a, b](double t, ConstVecRef x0, ConstVecRef w, VecRef out) {
        out[0] = x0[0] * std::exp((a - 0.5 * b * b) * t + b * w[0]);
    };
    return DynamicsSpec(std::move(fns), ControlSet::from_points(1, {0.0}), std::max({std::abs(a), std::abs(b), 1e-12}));
}

DynamicsSpec cubic_double_integrator(double c, double noise) {
    if (c < 0.0) throw std::invalid_argument("cubic coefficient must be nonnegative");
    DynamicsFunctions fns;
    fns.state_dim = 2;
    fns.control_dim = 1;
    fns.noise_dim = 1;
    fns.drift = [c](double, ConstVecRef x, ConstVecRef u, VecRef out) {
        out[0] = x[1];
        out[1] = u[0] - c * x[0] * x[0] * x[0];
    };
    fns.diffusion = [noise](double, ConstVecRef, ConstVecRef, MatRef out) {
        out(0, 0) = noise;
        out(1, 0) = 0.0;
    };
    fns.drift_jacobian = [c](double, ConstVecRef x, ConstVecRef, MatRef out) {
        out << 0.0, 1.0, -3.0 * c * x[0] * x[0], 0.0;
    };
    fns.diffusion_jacobian = [](double, ConstVecRef, ConstVecRef, MatRef out) { out.setZero(); };
    // The cubic term is only locally Lipschitz; the constant covers |y| <= 4.
    DynamicsValidation validation;
    validation.probe_state_scale = 1.0;
    return DynamicsSpec(std::move(fns), ControlSet::box({-1.0}, {1.0}, 21), 1.0 + 48.0 * c, {}, validation);
}

DynamicsSpec lq_dynamics(const LqExample& example) {
    const double s = example.s;
    DynamicsFunctions fns;
    fns.state_dim = 1;
    fns.control_dim = 1;
    fns.noise_dim = 1;
    fns.drift = [](double, ConstVecRef, ConstVecRef u, VecRef out) { out[0] = u[0]; };
    fns.diffusion = [s](double, ConstVecRef, ConstVecRef, MatRef out) { out(0, 0) = s; };
    fns.drift_jacobian = [](double, ConstVecRef, ConstVecRef, MatRef out) { out(0, 0) = 0.0; };
    fns.diffusion_jacobian = [](double, ConstVecRef, ConstVecRef, MatRef out) { out(0, 0) = 0.0; };
    fns.closed_form = [s](double t, ConstVecRef x0, ConstVecRef w, VecRef out) { out[0] = x0[0] + t + s * w[0]; };
    return DynamicsSpec(std::move(fns), ControlSet::box({-1.0}, {1.0}, example.control_points), 1.0);
}

ProblemSpec build_lq(const LqExample& example) {
    const double target = example.target;
    TerminalFunction cost{
        "terminal_miss",
        [target](ConstVecRef x) { return 0.5 * (x[0] - target) * (x[0] - target); },
        [target](ConstVecRef x, VecRef g) { g[0] = x[0] - target; },
    };
    return ProblemSpec(lq_dynamics(example), std::move(cost), {}, RiskMeasure::expectation(),
                       InitialState::fixed(Vec::Zero(1)), example.horizon, DiffusionRegime::Uncontrolled);
}

}  // namespace riskpmp
