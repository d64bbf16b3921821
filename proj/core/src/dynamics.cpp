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

#include "riskpmp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "riskpmp/philox.hpp"

namespace riskpmp {

namespace {

double spectral_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
}

}  // namespace

DynamicsSpec::DynamicsSpec(DynamicsFunctions functions, ControlSet controls, double lipschitz,
                           std::function<double(double)> bound_envelope,
                           DynamicsValidation validation)
    : fns_(std::move(functions)),
      controls_(std::move(controls)),
      lipschitz_(lipschitz),
      envelope_(std::move(bound_envelope)) {
    if (fns_.state_dim == 0 || fns_.control_dim == 0 || fns_.noise_dim == 0) {
        throw std::invalid_argument("dynamics dimensions n, m, d must all be positive");
    }
    if (!fns_.drift || !fns_.diffusion || !fns_.drift_jacobian || !fns_.diffusion_jacobian) {
        throw std::invalid_argument("dynamics needs drift, diffusion and both Jacobians");
    }
    if (controls_.dim() != fns_.control_dim) {
        throw std::invalid_argument("control set dimension does not match control_dim");
    }
    if (!(lipschitz_ > 0.0)) throw std::invalid_argument("Lipschitz constant must be positive");
    validate(validation);
}

void DynamicsSpec::validate(const DynamicsValidation& options) {
    const std::size_t n = state_dim();
    const std::size_t m = control_dim();
    const std::size_t d = noise_dim();
    CounterRng rng(options.seed, 0xd7a);

    Vec x(n), u(m), xp(n), xm(n), fp(n), fm(n);
    Mat jac(n, n), jac_fd(n, n), sjac(n, n * d), sjac_fd(n, n * d), sp(n, d), sm(n, d);

    for (std::size_t probe = 0; probe < options.probes; ++probe) {
        const double t = rng.uniform();
        for (std::size_t i = 0; i < n; ++i) x(i) = options.probe_state_scale * rng.normal();
        const auto point = controls_.point(rng.below(controls_.size()));
        for (std::size_t i = 0; i < m; ++i) u(i) = point[i];

        drift_jacobian(t, x, u, jac);
        diffusion_jacobian(t, x, u, sjac);
        for (std::size_t j = 0; j < n; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
            xp = x;
            xm = x;
            xp(j) += h;
            xm(j) -= h;
            drift(t, xp, u, fp);
            drift(t, xm, u, fm);
            jac_fd.col(j) = (fp - fm) / (2.0 * h);
            diffusion(t, xp, u, sp);
            diffusion(t, xm, u, sm);
            for (std::size_t i = 0; i < d; ++i) {
                sjac_fd.col(i * n + j) = (sp.col(i) - sm.col(i)) / (2.0 * h);
            }
        }
        const double drift_err = (jac - jac_fd).cwiseAbs().maxCoeff() / (1.0 + jac.cwiseAbs().maxCoeff());
        const double diff_err = (sjac - sjac_fd).cwiseAbs().maxCoeff() / (1.0 + sjac.cwiseAbs().maxCoeff());
        report_.max_drift_jacobian_error = std::max(report_.max_drift_jacobian_error, drift_err);
        report_.max_diffusion_jacobian_error = std::max(report_.max_diffusion_jacobian_error, diff_err);
        report_.max_drift_jacobian_norm = std::max(report_.max_drift_jacobian_norm, spectral_norm(jac));
        for (std::size_t i = 0; i < d; ++i) {
            report_.max_diffusion_jacobian_norm =
                std::max(report_.max_diffusion_jacobian_norm, spectral_norm(sjac.middleCols(i * n, n)));
        }

        if (drift_err > options.jacobian_tolerance || diff_err > options.jacobian_tolerance) {
            std::ostringstream msg;
            msg << "Jacobian mismatch at probe " << probe << " (t=" << t << "): drift error "
                << drift_err << ", diffusion error " << diff_err;
            throw std::invalid_argument(msg.str());
        }
    }
    const double slack = lipschitz_ * (1.0 + 1e-9);
    if (report_.max_drift_jacobian_norm > slack || report_.max_diffusion_jacobian_norm > slack) {
        std::ostringstream msg;
        msg << "Jacobian norm exceeds Lipschitz constant " << lipschitz_ << ": drift "
            << report_.max_drift_jacobian_norm << ", diffusion " << report_.max_diffusion_jacobian_norm;
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace riskpmp
