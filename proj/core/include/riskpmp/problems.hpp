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

#include "riskpmp/certificate.hpp"
#include "riskpmp/dynamics.hpp"

namespace riskpmp {

/// dx = a x dt + b x dW with closed form x0 exp((a - b^2/2) t + b W(t)).
/// The control is a dummy scalar fixed at 0.
DynamicsSpec scalar_linear(double a, double b);

/// Double integrator with a cubic restoring term,
///   dy = v dt + noise dW,  dv = (u - c y^3) dt,  u in [-1, 1].
DynamicsSpec cubic_double_integrator(double c = 0.1, double noise = 1.0);

/// dx = u dt + s dW, u in [-1, 1], minimize E[(x(T) - target)^2 / 2] from
/// x(0) = 0. With target >= T the optimum is u = 1 and
/// p(t) = target - T - s W(t), q = -s.
struct LqExample {
    double s = 0.2;
    double target = 2.0;
    double horizon = 1.0;
    std::size_t control_points = 21;
};

DynamicsSpec lq_dynamics(const LqExample& example);
ProblemSpec build_lq(const LqExample& example);

}  // namespace riskpmp
