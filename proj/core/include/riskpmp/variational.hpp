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

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "riskpmp/brownian.hpp"
#include "riskpmp/control.hpp"
#include "riskpmp/dynamics.hpp"
#include "riskpmp/sde.hpp"

namespace riskpmp {

/// Control-difference tangent direction
///   g1 = f(t, x*, w) - f(t, x*, u*),  g2 = sigma(t, x*, w) - sigma(t, x*, u*).
/// The generating laws are kept so the forcing can be recomputed on the fly;
/// `forcing` is the materialized version along a stored x*.
struct TangentSelection {
    ControlLaw base;
    ControlLaw direction;
    std::optional<Forcing> forcing;
    bool moves_diffusion = false;
    std::vector<std::string> warnings;
};

/// Materializes (g1, g2) along x*. Node K reuses the controls of step K-1.
/// When the diffusion depends on the control and the problem does not attest
/// convex velocity sets, a warning is attached (the linearization is only
/// justified for uncontrolled diffusions in that case).
TangentSelection tangent_from_control(const DynamicsSpec& dyn, const StateEnsemble& x_star,
                                      const ControlLaw& base, const ControlLaw& direction,
                                      const BrownianEnsemble& noise, bool convex_velocities_attested);

/// A selection described only by its laws, for streaming use.
TangentSelection tangent_laws(const ControlLaw& base, const ControlLaw& direction);

struct RateTable {
    std::vector<double> eps;  // as given, decreasing
    std::vector<double> r;    // (1/eps) E[max_k |x_eps - x* - eps y|]
    bool nonincreasing = false;
    bool halved = false;      // r(eps_min) < r(eps_max) / 2
    bool vanishing = false;   // every r below the roundoff floor
    bool passed = false;
};

/// Perturbed dynamics
///   dx = (f(x, u*) + eps g1) dt + (sigma(x, u*) + eps g2) dW
/// integrated next to x* and the linearized y on shared paths, one path at
/// a time (nothing of size M x K is stored).
RateTable linearization_rate(const DynamicsSpec& dyn, const TangentSelection& selection, const InitialState& x0,
                             const BrownianEnsemble& noise, const std::vector<double>& eps,
                             double vanishing_floor = 1e-10);

struct ContinuityReport {
    double solution_gap = 0.0;  // E[max_k |y_g - y_g'|^2]^(1/2)
    double forcing_gap = 0.0;   // E[int |g - g'|^2 dt]^(1/2)
    double ratio = 0.0;         // 0 when the selections coincide
};

ContinuityReport selection_continuity(const LinearCoefficients& coeffs, const Forcing& a, const Forcing& b,
                                      const BrownianEnsemble& noise);

struct ItoCounterexample {
    double pointwise_distance_sq = 0.0;     // min over F of |(1/2, 1) - v|^2
    std::array<double, 2> nearest_point{};  // a minimizer
    double ito_gap_lower_bound = 0.0;       // int_0^1 of the pointwise minimum
    double lebesgue_gap = 0.0;              // |int f - int f~|^2 with the two-piece selection
    bool lebesgue_selection_admissible = false;
};

/// F = {0 <= y <= 1 - 2x, x in [0, 1/2]} U {0 <= y <= 2x - 1, x in [1/2, 1]}
/// against the constant selection (1/2, 1) of its convex hull.
ItoCounterexample ito_counterexample();

/// True if (x, y) lies in the set F above (within tol).
bool in_butterfly(double x, double y, double tol = 0.0);

}  // namespace riskpmp
