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
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "riskpmp/control.hpp"

namespace riskpmp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<Vec>;
using MatRef = Eigen::Ref<Mat>;
using ConstVecRef = Eigen::Ref<const Vec>;
using ConstMatRef = Eigen::Ref<const Mat>;

/// User-supplied coefficient callbacks of dx = f(t,x,u) dt + sigma(t,x,u) dW.
///
/// diffusion writes the n x d matrix whose column i is sigma_i.
/// diffusion_jacobian writes the n x (n*d) block row [dsigma_1/dx | ... | dsigma_d/dx].
struct DynamicsFunctions {
    std::size_t state_dim = 0;
    std::size_t control_dim = 0;
    std::size_t noise_dim = 0;
    std::function<void(double, ConstVecRef, ConstVecRef, VecRef)> drift;
    std::function<void(double, ConstVecRef, ConstVecRef, MatRef)> diffusion;
    std::function<void(double, ConstVecRef, ConstVecRef, MatRef)> drift_jacobian;
    std::function<void(double, ConstVecRef, ConstVecRef, MatRef)> diffusion_jacobian;
    /// Exact x(t) given x0 and W(t), for problems whose solution is known in
    /// closed form under the control used in convergence studies.
    std::function<void(double, ConstVecRef, ConstVecRef, VecRef)> closed_form;
};

struct DynamicsValidation {
    std::size_t probes = 24;
    std::uint64_t seed = 0x5eed;
    double jacobian_tolerance = 1e-5;
    double probe_state_scale = 1.0;
};

struct ValidationReport {
    double max_drift_jacobian_error = 0.0;
    double max_diffusion_jacobian_error = 0.0;
    double max_drift_jacobian_norm = 0.0;
    double max_diffusion_jacobian_norm = 0.0;
};

/// Controlled SDE coefficients with their state Jacobians, control set U,
/// Lipschitz constant L and a deterministic envelope for the bound map k(t).
///
/// Construction probes random (t, x, u) points and rejects the spec if the
/// analytic Jacobians disagree with central finite differences or exceed L.
class DynamicsSpec {
public:
    DynamicsSpec(DynamicsFunctions functions, ControlSet controls, double lipschitz,
                 std::function<double(double)> bound_envelope = {},
                 DynamicsValidation validation = {});

    std::size_t state_dim() const noexcept { return fns_.state_dim; }
    std::size_t control_dim() const noexcept { return fns_.control_dim; }
    std::size_t noise_dim() const noexcept { return fns_.noise_dim; }
    const ControlSet& controls() const noexcept { return controls_; }
    double lipschitz() const noexcept { return lipschitz_; }
    double bound_envelope(double t) const { return envelope_ ? envelope_(t) : lipschitz_; }
    const ValidationReport& validation() const noexcept { return report_; }
    bool has_closed_form() const noexcept { return static_cast<bool>(fns_.closed_form); }

    void drift(double t, ConstVecRef x, ConstVecRef u, VecRef out) const { fns_.drift(t, x, u, out); }
    void diffusion(double t, ConstVecRef x, ConstVecRef u, MatRef out) const {
        fns_.diffusion(t, x, u, out);
    }
    void drift_jacobian(double t, ConstVecRef x, ConstVecRef u, MatRef out) const {
        fns_.drift_jacobian(t, x, u, out);
    }
    void diffusion_jacobian(double t, ConstVecRef x, ConstVecRef u, MatRef out) const {
        fns_.diffusion_jacobian(t, x, u, out);
    }
    void closed_form(double t, ConstVecRef x0, ConstVecRef w, VecRef out) const {
        fns_.closed_form(t, x0, w, out);
    }

private:
    void validate(const DynamicsValidation& options);

    DynamicsFunctions fns_;
    ControlSet controls_;
    double lipschitz_;
    std::function<double(double)> envelope_;
    ValidationReport report_;
};

}  // namespace riskpmp
