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

#include "riskpmp/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "riskpmp/parallel.hpp"

namespace riskpmp {

void Multipliers::validate() const {
    if (cost != -1.0 && cost != 0.0) throw std::invalid_argument("cost multiplier must be -1 or 0");
    bool nonzero = cost != 0.0;
    for (double m : constraints) {
        if (!(m <= 0.0)) throw std::invalid_argument("constraint multipliers must be nonpositive");
        nonzero = nonzero || m != 0.0;
    }
    if (!nonzero) throw std::invalid_argument("multipliers must not all vanish");
}

TerminalCostate::TerminalCostate(std::size_t paths, std::size_t dim, Multipliers multipliers, RiskSubgradient xi)
    : paths_(paths),
      dim_(dim),
      multipliers_(std::move(multipliers)),
      xi_(std::move(xi)),
      values_(paths * dim, 0.0) {}

TerminalCostate assemble_terminal(const RiskSubgradient& xi, const TerminalGradient& cost_gradient,
                                  const std::vector<TerminalGradient>& constraint_gradients,
                                  const Multipliers& multipliers, const StateEnsemble& states) {
    multipliers.validate();
    if (multipliers.constraints.size() != constraint_gradients.size()) {
        throw std::invalid_argument("one multiplier per constraint is required");
    }
    if (xi.xi.size() != states.paths()) throw std::invalid_argument("risk subgradient has the wrong length");
    const std::size_t n = states.dim();
    TerminalCostate out(states.paths(), n, multipliers, xi);
    Vec grad(n);
    for (std::size_t path = 0; path < states.paths(); ++path) {
        auto pt = out.at(path);
        pt.setZero();
        const auto xt = states.terminal(path);
        if (multipliers.cost != 0.0) {
            cost_gradient(xt, grad);
            pt += (xi.xi[path] * multipliers.cost) * grad;
        }
        for (std::size_t i = 0; i < constraint_gradients.size(); ++i) {
            if (multipliers.constraints[i] == 0.0) continue;
            constraint_gradients[i](xt, grad);
            pt += multipliers.constraints[i] * grad;
        }
    }
    return out;
}

CostatePair::CostatePair(TimeGrid grid, std::size_t paths, std::size_t state_dim, std::size_t noise_dim)
    : grid_(grid),
      paths_(paths),
      n_(state_dim),
      d_(noise_dim),
      p_(paths * (grid.steps() + 1) * state_dim, 0.0),
      q_(paths * (grid.steps() + 1) * state_dim * noise_dim, 0.0) {}

std::vector<double> CostatePair::interleaved() const {
    const std::size_t width = n_ + n_ * d_;
    const std::size_t records = paths_ * (grid_.steps() + 1);
    std::vector<double> out(records * width);
    for (std::size_t r = 0; r < records; ++r) {
        std::copy_n(p_.data() + r * n_, n_, out.data() + r * width);
        std::copy_n(q_.data() + r * n_ * d_, n_ * d_, out.data() + r * width + n_);
    }
    return out;
}

std::vector<std::string> CostatePair::column_names() const {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < n_; ++c) names.push_back("p" + std::to_string(c));
    for (std::size_t i = 0; i < d_; ++i) {
        for (std::size_t c = 0; c < n_; ++c) names.push_back("q" + std::to_string(c) + "_" + std::to_string(i));
    }
    return names;
}

ProcessView view_of(const CostatePair& costates, const std::vector<double>& storage) {
    ProcessView view;
    view.grid = costates.grid();
    view.paths = costates.paths();
    view.width = costates.state_dim() * (1 + costates.noise_dim());
    view.data = storage;
    view.columns = costates.column_names();
    return view;
}

CostatePair solve_adjoint(const DynamicsSpec& dyn, const StateEnsemble& states, const ControlTable& controls,
                          const TerminalCostate& terminal, const FundamentalMatrices& fm,
                          const BrownianEnsemble& noise, const AdjointOptions& options) {
    const std::size_t n = dyn.state_dim();
    const std::size_t d = dyn.noise_dim();
    const std::size_t paths = states.paths();
    const TimeGrid& grid = states.grid();
    const std::size_t steps = grid.steps();
    const double dt = grid.dt();
    if (noise.grid() != grid || fm.grid() != grid || noise.paths() != paths || fm.paths() != paths ||
        terminal.paths() != paths || terminal.dim() != n || states.dim() != n || fm.dim() != n) {
        throw std::invalid_argument("adjoint inputs are not on one ensemble");
    }
    const auto ni = static_cast<Eigen::Index>(n);
    const auto mi = static_cast<Eigen::Index>(paths);

    const BrownianPaths w = noise.values();
    std::vector<double> increments(paths * steps * d);
    parallel_for(paths, [&](std::size_t path) {
        noise.path_increments(path, {increments.data() + path * steps * d, steps * d});
    });
    const FeatureSource source{&states, &w};

    // Martingale target G = phi(T)' p_T.
    Mat target(mi, ni);
    for (std::size_t path = 0; path < paths; ++path) {
        target.row(static_cast<Eigen::Index>(path)) = (fm.phi(path, steps).transpose() * terminal.at(path)).transpose();
    }

    CostatePair out(grid, paths, n, d);
    std::vector<RegressionDiagnostics> step_diag(steps);

    // Pass 1: m(t_k), kept in the p slots for now.
    for (std::size_t path = 0; path < paths; ++path) {
        out.p(path, steps) = target.row(static_cast<Eigen::Index>(path)).transpose();
    }
    parallel_for(steps, [&](std::size_t k) {
        const LeastSquaresProjector projector(polynomial_features(source, k, options.basis), options.basis.ridge,
                                              options.basis.rank_cutoff);
        const Mat fitted = projector.fit(target);
        for (std::size_t path = 0; path < paths; ++path) {
            out.p(path, k) = fitted.row(static_cast<Eigen::Index>(path)).transpose();
        }
        auto& diag = step_diag[k];
        diag.basis_size = projector.basis_size();
        diag.rank = projector.rank();
        diag.rank_deficient = projector.rank_deficient();
        diag.ridge_effect = projector.ridge_effect(target);
        diag.ridge_flagged = diag.ridge_effect > options.basis.ridge_flag_threshold;
        diag.residual_rms = ((target - fitted).colwise().squaredNorm() / static_cast<double>(paths)).cwiseSqrt().transpose();
    });

    // Pass 2: mu_j(t_k) from the martingale increments, kept in the q slots.
    parallel_for(steps, [&](std::size_t k) {
        Mat y(mi, static_cast<Eigen::Index>(n * d));
        for (std::size_t path = 0; path < paths; ++path) {
            const Vec dm = out.p(path, k + 1) - out.p(path, k);
            for (std::size_t j = 0; j < d; ++j) {
                const double scale = increments[(path * steps + k) * d + j] / dt;
                y.block(static_cast<Eigen::Index>(path), static_cast<Eigen::Index>(j * n), 1, ni) = dm.transpose() * scale;
            }
        }
        const LeastSquaresProjector projector(polynomial_features(source, k, options.basis), options.basis.ridge,
                                              options.basis.rank_cutoff);
        const Mat fitted = projector.fit(y);
        for (std::size_t path = 0; path < paths; ++path) {
            auto q = out.q(path, k);
            for (std::size_t j = 0; j < d; ++j) {
                q.col(static_cast<Eigen::Index>(j)) =
                    fitted.block(static_cast<Eigen::Index>(path), static_cast<Eigen::Index>(j * n), 1, ni).transpose();
            }
        }
    });

    // Pass 3: p = psi' m and q_i = psi' mu_i - D_i' p with psi = phi^{-1}.
    const LinearCoefficients coeffs = LinearCoefficients::along_trajectory(dyn, states, controls);
    parallel_for_chunks(paths, [&](std::size_t begin, std::size_t end) {
        Mat a(n, n), dd(n, n * d), psi(n, n);
        Vec m(n);
        for (std::size_t path = begin; path < end; ++path) {
            for (std::size_t k = 0; k < steps; ++k) {
                psi = fm.phi(path, k).partialPivLu().inverse();
                m = out.p(path, k);
                out.p(path, k).noalias() = psi.transpose() * m;
                coeffs.evaluate(path, k, a, dd);
                auto q = out.q(path, k);
                for (std::size_t i = 0; i < d; ++i) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    m = q.col(ii);
                    q.col(ii).noalias() = psi.transpose() * m;
                    q.col(ii).noalias() -= dd.middleCols(ii * ni, ni).transpose() * out.p(path, k);
                }
            }
            out.p(path, steps) = terminal.at(path);
            if (steps > 0) out.q(path, steps) = out.q(path, steps - 1);
        }
    });

    // BSDE residual r_k = p_{k+1} - p_k + H_x dt - sum_i q_i dW^i, H_x = A'p + sum_i D_i'q_i.
    AdjointDiagnostics& diag = out.diagnostics();
    diag.bsde_residuals.assign(steps, 0.0);
    parallel_for(steps, [&](std::size_t k) {
        Mat a(n, n), dd(n, n * d);
        Vec r(n);
        double total = 0.0;
        for (std::size_t path = 0; path < paths; ++path) {
            coeffs.evaluate(path, k, a, dd);
            const auto p = out.p(path, k);
            const auto q = out.q(path, k);
            r = out.p(path, k + 1) - p;
            r.noalias() += (a.transpose() * p) * dt;
            for (std::size_t i = 0; i < d; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                r.noalias() += (dd.middleCols(ii * ni, ni).transpose() * q.col(ii)) * dt;
                r -= q.col(ii) * increments[(path * steps + k) * d + i];
            }
            total += r.norm();
        }
        diag.bsde_residuals[k] = total / static_cast<double>(paths);
    });

    for (std::size_t k = 0; k < steps; ++k) {
        const auto& s = step_diag[k];
        diag.basis_size = std::max(diag.basis_size, s.basis_size);
        diag.rank_deficient_steps += s.rank_deficient ? 1 : 0;
        diag.ridge_flagged_steps += s.ridge_flagged ? 1 : 0;
        diag.max_ridge_effect = std::max(diag.max_ridge_effect, s.ridge_effect);
        if (s.residual_rms.size() > 0) diag.max_residual_rms = std::max(diag.max_residual_rms, s.residual_rms.maxCoeff());
        diag.bsde_residual = std::max(diag.bsde_residual, diag.bsde_residuals[k]);
    }
    diag.residual_bound = options.residual_bound;
    return out;
}

MartingaleReport martingale_check(const CostatePair& costates, const FundamentalMatrices& fm, double sigmas) {
    const std::size_t n = costates.state_dim();
    const std::size_t paths = costates.paths();
    const std::size_t nodes = costates.grid().steps() + 1;
    if (fm.grid() != costates.grid() || fm.paths() != paths || fm.dim() != n) {
        throw std::invalid_argument("costates and fundamental matrices are not on one ensemble");
    }
    const auto ni = static_cast<Eigen::Index>(n);
    const auto ki = static_cast<Eigen::Index>(nodes);
    const double m = static_cast<double>(paths);

    MartingaleReport report;
    report.times = costates.grid().nodes();
    double t_mean = 0.0;
    for (double t : report.times) t_mean += t;
    t_mean /= static_cast<double>(nodes);
    double s_tt = 0.0;
    for (double t : report.times) s_tt += (t - t_mean) * (t - t_mean);
    std::vector<double> weights(nodes);
    for (std::size_t k = 0; k < nodes; ++k) weights[k] = s_tt > 0.0 ? (report.times[k] - t_mean) / s_tt : 0.0;

    Mat adj_sum = Mat::Zero(ki, ni), adj_sq = Mat::Zero(ki, ni);
    Mat raw_sum = Mat::Zero(ki, ni), raw_sq = Mat::Zero(ki, ni);
    Vec adj_slope_sum = Vec::Zero(ni), adj_slope_sq = Vec::Zero(ni);
    Vec raw_slope_sum = Vec::Zero(ni), raw_slope_sq = Vec::Zero(ni);
    Vec adj(n), adj_slope(n), raw_slope(n);
    for (std::size_t path = 0; path < paths; ++path) {
        adj_slope.setZero();
        raw_slope.setZero();
        for (std::size_t k = 0; k < nodes; ++k) {
            const auto ks = static_cast<Eigen::Index>(k);
            const auto p = costates.p(path, k);
            adj.noalias() = fm.phi(path, k).transpose() * p;
            adj_sum.row(ks) += adj.transpose();
            adj_sq.row(ks) += adj.array().square().matrix().transpose();
            raw_sum.row(ks) += p.transpose();
            raw_sq.row(ks) += p.array().square().matrix().transpose();
            adj_slope += weights[k] * adj;
            raw_slope += weights[k] * p;
        }
        adj_slope_sum += adj_slope;
        adj_slope_sq += adj_slope.array().square().matrix();
        raw_slope_sum += raw_slope;
        raw_slope_sq += raw_slope.array().square().matrix();
    }

    auto stderr_of = [m](const auto& sum, const auto& sq) {
        using T = std::decay_t<decltype(sum)>;
        const T mean = sum / m;
        const T var = ((sq / m).array() - mean.array().square()).max(0.0).matrix() * (m / std::max(1.0, m - 1.0));
        return T((var / m).cwiseSqrt());
    };
    report.adjusted_mean = adj_sum / m;
    report.adjusted_stderr = stderr_of(adj_sum, adj_sq);
    report.raw_mean = raw_sum / m;
    report.raw_stderr = stderr_of(raw_sum, raw_sq);
    report.adjusted_slope = adj_slope_sum / m;
    report.adjusted_slope_stderr = stderr_of(adj_slope_sum, adj_slope_sq);
    report.raw_slope = raw_slope_sum / m;
    report.raw_slope_stderr = stderr_of(raw_slope_sum, raw_slope_sq);

    report.passed = true;
    for (Eigen::Index c = 0; c < ni; ++c) {
        const double band = sigmas * std::max(report.adjusted_slope_stderr[c], 1e-12);
        report.passed = report.passed && std::abs(report.adjusted_slope[c]) <= band;
    }
    return report;
}

}  // namespace riskpmp
