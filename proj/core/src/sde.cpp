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

#include "riskpmp/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "riskpmp/parallel.hpp"

namespace riskpmp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_noise_matches(const DynamicsSpec& dyn, const BrownianEnsemble& noise) {
    if (noise.dim() != dyn.noise_dim()) {
        throw std::invalid_argument("Brownian dimension does not match the diffusion");
    }
}

void check_initial(const InitialState& x0, std::size_t dim, std::size_t paths) {
    if (x0.dim() != dim) throw std::invalid_argument("initial state has the wrong dimension");
    if (x0.is_per_path() && x0.paths() != paths) {
        throw std::invalid_argument("per-path initial state does not cover every path");
    }
}

// Workspace for one Euler path. Everything is preallocated so the step loop
// does not touch the heap.
struct EulerWork {
    Vec x, f, u;
    Mat sigma;
    std::vector<double> increments;
    std::vector<double> w;

    EulerWork(const DynamicsSpec& dyn, std::size_t steps)
        : x(dyn.state_dim()),
          f(dyn.state_dim()),
          u(dyn.control_dim()),
          sigma(dyn.state_dim(), dyn.noise_dim()),
          increments(steps * dyn.noise_dim()),
          w(dyn.noise_dim()) {}
};

// Advances x from t_k to t_{k+1} and returns false when the state left the reals.
bool euler_step(const DynamicsSpec& dyn, const ControlLaw& law, EulerWork& s, std::size_t path,
                std::size_t k, double t, double dt) {
    const std::size_t d = dyn.noise_dim();
    const ControlQuery query{k, t, path, {s.x.data(), static_cast<std::size_t>(s.x.size())}, s.w};
    law.evaluate(query, {s.u.data(), static_cast<std::size_t>(s.u.size())});
    dyn.drift(t, s.x, s.u, s.f);
    dyn.diffusion(t, s.x, s.u, s.sigma);
    Eigen::Map<const Vec> dw(s.increments.data() + k * d, static_cast<Eigen::Index>(d));
    s.x += s.f * dt;
    s.x.noalias() += s.sigma * dw;
    for (std::size_t c = 0; c < d; ++c) s.w[c] += dw[static_cast<Eigen::Index>(c)];
    return s.x.allFinite();
}

}  // namespace

InitialState InitialState::fixed(const Vec& x0) {
    InitialState s;
    s.dim_ = static_cast<std::size_t>(x0.size());
    s.values_.assign(x0.data(), x0.data() + x0.size());
    return s;
}

InitialState InitialState::per_path(std::size_t dim, std::vector<double> values) {
    if (dim == 0 || values.size() % dim != 0) {
        throw std::invalid_argument("per-path initial values must be a multiple of the dimension");
    }
    InitialState s;
    s.dim_ = dim;
    s.per_path_ = true;
    s.values_ = std::move(values);
    return s;
}

InitialState InitialState::scaled(double factor) const {
    InitialState s = *this;
    for (double& v : s.values_) v *= factor;
    return s;
}

StateEnsemble::StateEnsemble(TimeGrid grid, std::size_t dim, std::size_t paths)
    : grid_(grid), dim_(dim), paths_(paths), data_(paths * (grid.steps() + 1) * dim, 0.0) {}

StateEnsemble euler_maruyama(const DynamicsSpec& dyn, const ControlLaw& law, const InitialState& x0,
                             const BrownianEnsemble& noise) {
    check_noise_matches(dyn, noise);
    check_initial(x0, dyn.state_dim(), noise.paths());
    if (law.dim() != dyn.control_dim()) throw std::invalid_argument("control dimension mismatch");

    const TimeGrid& grid = noise.grid();
    const std::size_t steps = grid.steps();
    const std::size_t n = dyn.state_dim();
    StateEnsemble out(grid, n, noise.paths());
    std::vector<std::optional<PathAbort>> aborts(noise.paths());

    parallel_for_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        EulerWork s(dyn, steps);
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, s.increments);
            std::fill(s.w.begin(), s.w.end(), 0.0);
            s.x = x0.at(path);
            out.at(path, 0) = s.x;
            for (std::size_t k = 0; k < steps; ++k) {
                if (!euler_step(dyn, law, s, path, k, grid.node(k), grid.dt())) {
                    std::ostringstream why;
                    why << "non-finite state after step " << k << " at t=" << grid.node(k + 1);
                    aborts[path] = PathAbort{path, k + 1, why.str()};
                    for (std::size_t j = k + 1; j <= steps; ++j) out.at(path, j).setConstant(kNaN);
                    break;
                }
                out.at(path, k + 1) = s.x;
            }
        }
    });
    for (auto& a : aborts) {
        if (a) out.record_abort(std::move(*a));
    }
    return out;
}

ControlTable realize_controls(const ControlLaw& law, const StateEnsemble& states,
                              const BrownianEnsemble& noise) {
    const std::size_t steps = states.steps();
    const std::size_t d = noise.dim();
    if (noise.grid() != states.grid() || noise.paths() != states.paths()) {
        throw std::invalid_argument("states and Brownian ensemble are on different grids");
    }
    ControlTable table(states.paths(), steps, law.dim());
    parallel_for_chunks(states.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> increments(steps * d);
        std::vector<double> w(d);
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, increments);
            std::fill(w.begin(), w.end(), 0.0);
            for (std::size_t k = 0; k < steps; ++k) {
                auto x = states.at(path, k);
                const ControlQuery query{k, states.grid().node(k), path,
                                         {x.data(), static_cast<std::size_t>(x.size())}, w};
                law.evaluate(query, table.at(path, k));
                for (std::size_t c = 0; c < d; ++c) w[c] += increments[k * d + c];
            }
        }
    });
    return table;
}

TerminalSample simulate_terminal(const DynamicsSpec& dyn, const ControlLaw& law,
                                 const InitialState& x0, const BrownianEnsemble& noise) {
    check_noise_matches(dyn, noise);
    check_initial(x0, dyn.state_dim(), noise.paths());
    const TimeGrid& grid = noise.grid();
    const std::size_t steps = grid.steps();
    const std::size_t n = dyn.state_dim();

    TerminalSample out;
    out.paths = noise.paths();
    out.dim = n;
    out.terminal.assign(out.paths * n, 0.0);
    out.sup_norm.assign(out.paths, 0.0);

    parallel_for_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        EulerWork s(dyn, steps);
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, s.increments);
            std::fill(s.w.begin(), s.w.end(), 0.0);
            s.x = x0.at(path);
            double sup = s.x.norm();
            bool finite = true;
            for (std::size_t k = 0; k < steps && finite; ++k) {
                finite = euler_step(dyn, law, s, path, k, grid.node(k), grid.dt());
                sup = std::max(sup, s.x.norm());
            }
            if (!finite) {
                s.x.setConstant(kNaN);
                sup = kNaN;
            }
            std::copy(s.x.data(), s.x.data() + n, out.terminal.begin() + static_cast<std::ptrdiff_t>(path * n));
            out.sup_norm[path] = sup;
        }
    });
    return out;
}

StrongOrderResult strong_convergence_order(const DynamicsSpec& dyn, const ControlLaw& law,
                                           const Vec& x0, const BrownianEnsemble& finest,
                                           const std::vector<std::size_t>& step_counts) {
    if (!dyn.has_closed_form()) {
        throw std::invalid_argument("strong convergence study needs a closed-form solution");
    }
    if (step_counts.size() < 2) throw std::invalid_argument("need at least two refinement levels");
    const std::size_t fine_steps = finest.grid().steps();
    const std::size_t d = finest.dim();
    const std::size_t paths = finest.paths();
    const double horizon = finest.grid().horizon();

    // Exact terminal states driven by W(T) of each path.
    std::vector<double> exact(paths * dyn.state_dim());
    parallel_for_chunks(paths, [&](std::size_t begin, std::size_t end) {
        std::vector<double> increments(fine_steps * d);
        Vec w(d), xt(dyn.state_dim());
        for (std::size_t path = begin; path < end; ++path) {
            finest.path_increments(path, increments);
            w.setZero();
            for (std::size_t k = 0; k < fine_steps; ++k) {
                for (std::size_t c = 0; c < d; ++c) w[static_cast<Eigen::Index>(c)] += increments[k * d + c];
            }
            dyn.closed_form(horizon, x0, w, xt);
            std::copy(xt.data(), xt.data() + xt.size(),
                      exact.begin() + static_cast<std::ptrdiff_t>(path * dyn.state_dim()));
        }
    });

    StrongOrderResult result;
    const InitialState start = InitialState::fixed(x0);
    for (std::size_t steps : step_counts) {
        if (steps == 0 || fine_steps % steps != 0) {
            throw std::invalid_argument("refinement levels must divide the finest step count");
        }
        const BrownianEnsemble coarse = finest.coarsen(fine_steps / steps);
        const TerminalSample sample = simulate_terminal(dyn, law, start, coarse);
        double err = 0.0;
        for (std::size_t path = 0; path < paths; ++path) {
            Eigen::Map<const Vec> xe(exact.data() + path * dyn.state_dim(),
                                     static_cast<Eigen::Index>(dyn.state_dim()));
            err += (sample.at(path) - xe).norm();
        }
        result.steps.push_back(steps);
        result.dt.push_back(horizon / static_cast<double>(steps));
        result.errors.push_back(err / static_cast<double>(paths));
    }

    // Least-squares slope of log error against log dt.
    const bool usable = std::all_of(result.errors.begin(), result.errors.end(),
                                    [](double e) { return e > 0.0 && std::isfinite(e); });
    if (usable) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = static_cast<double>(result.errors.size());
        for (std::size_t i = 0; i < result.errors.size(); ++i) {
            const double lx = std::log(result.dt[i]);
            const double ly = std::log(result.errors[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        result.order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    return result;
}

AprioriBound a_priori_bound(const DynamicsSpec& dyn, const ControlLaw& law, const InitialState& x0,
                            const BrownianEnsemble& noise) {
    check_noise_matches(dyn, noise);
    check_initial(x0, dyn.state_dim(), noise.paths());
    const TimeGrid& grid = noise.grid();
    const std::size_t steps = grid.steps();
    const std::size_t paths = noise.paths();
    std::vector<double> sup(paths), data(paths);

    parallel_for_chunks(paths, [&](std::size_t begin, std::size_t end) {
        EulerWork s(dyn, steps);
        const Vec zero = Vec::Zero(static_cast<Eigen::Index>(dyn.state_dim()));
        Vec f0(dyn.state_dim());
        Mat sigma0(dyn.state_dim(), dyn.noise_dim());
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, s.increments);
            std::fill(s.w.begin(), s.w.end(), 0.0);
            s.x = x0.at(path);
            double best = s.x.norm();
            double drift_part = 0.0, noise_part = 0.0;
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = grid.node(k);
                // The control chosen at this node is the one euler_step will use.
                const ControlQuery query{k, t, path, {s.x.data(), static_cast<std::size_t>(s.x.size())}, s.w};
                law.evaluate(query, {s.u.data(), static_cast<std::size_t>(s.u.size())});
                dyn.drift(t, zero, s.u, f0);
                dyn.diffusion(t, zero, s.u, sigma0);
                drift_part += f0.norm() * grid.dt();
                noise_part += sigma0.squaredNorm() * grid.dt();
                euler_step(dyn, law, s, path, k, t, grid.dt());
                best = std::max(best, s.x.norm());
            }
            sup[path] = best;
            data[path] = x0.at(path).norm() + drift_part + std::sqrt(noise_part);
        }
    });

    AprioriBound out;
    for (std::size_t p = 0; p < paths; ++p) {
        out.mean_sup_norm += sup[p];
        out.data_magnitude += data[p];
    }
    out.mean_sup_norm /= static_cast<double>(paths);
    out.data_magnitude /= static_cast<double>(paths);
    out.constant = out.data_magnitude > 0.0 ? out.mean_sup_norm / out.data_magnitude
                                            : std::numeric_limits<double>::infinity();
    return out;
}

// ---------------------------------------------------------------------------
// Linearized equation

LinearCoefficients::LinearCoefficients(std::size_t state_dim, std::size_t noise_dim, Provider provider)
    : n_(state_dim), d_(noise_dim), provider_(std::move(provider)) {
    if (!provider_) throw std::invalid_argument("coefficient provider is empty");
}

LinearCoefficients LinearCoefficients::constant(const Mat& drift, const Mat& noise) {
    const auto n = static_cast<std::size_t>(drift.rows());
    if (drift.cols() != drift.rows() || noise.rows() != drift.rows() || noise.cols() % drift.rows() != 0) {
        throw std::invalid_argument("A must be n x n and D must be n x (n*d)");
    }
    const auto d = static_cast<std::size_t>(noise.cols()) / std::max<std::size_t>(n, 1);
    return LinearCoefficients(n, d, [drift, noise](std::size_t, std::size_t, MatRef a, MatRef dd) {
        a = drift;
        dd = noise;
    });
}

LinearCoefficients LinearCoefficients::along_trajectory(const DynamicsSpec& dyn,
                                                        const StateEnsemble& states,
                                                        const ControlTable& controls) {
    if (controls.paths() != states.paths() || controls.steps() != states.steps()) {
        throw std::invalid_argument("controls and states do not line up");
    }
    const DynamicsSpec* d = &dyn;
    const StateEnsemble* x = &states;
    const ControlTable* u = &controls;
    return LinearCoefficients(dyn.state_dim(), dyn.noise_dim(),
                              [d, x, u](std::size_t path, std::size_t step, MatRef a, MatRef dd) {
                                  // Node K has no control of its own; reuse the last one.
                                  const std::size_t ks = std::min(step, u->steps() - 1);
                                  auto uk = u->at(path, ks);
                                  Eigen::Map<const Vec> um(uk.data(), static_cast<Eigen::Index>(uk.size()));
                                  const double t = x->grid().node(step);
                                  d->drift_jacobian(t, x->at(path, step), um, a);
                                  d->diffusion_jacobian(t, x->at(path, step), um, dd);
                              });
}

Forcing::Forcing(std::size_t paths, std::size_t steps, std::size_t state_dim, std::size_t noise_dim)
    : paths_(paths),
      steps_(steps),
      n_(state_dim),
      d_(noise_dim),
      g1_(paths * (steps + 1) * state_dim, 0.0),
      g2_(paths * (steps + 1) * state_dim * noise_dim, 0.0) {}

bool Forcing::is_zero() const noexcept {
    return std::all_of(g1_.begin(), g1_.end(), [](double v) { return v == 0.0; }) && !has_noise_part();
}

bool Forcing::has_noise_part() const noexcept {
    return std::any_of(g2_.begin(), g2_.end(), [](double v) { return v != 0.0; });
}

void Forcing::check_same_shape(const Forcing& other) const {
    if (paths_ != other.paths_ || steps_ != other.steps_ || n_ != other.n_ || d_ != other.d_) {
        throw std::invalid_argument("forcing terms have different shapes");
    }
}

Forcing& Forcing::operator+=(const Forcing& other) {
    check_same_shape(other);
    for (std::size_t i = 0; i < g1_.size(); ++i) g1_[i] += other.g1_[i];
    for (std::size_t i = 0; i < g2_.size(); ++i) g2_[i] += other.g2_[i];
    return *this;
}

Forcing& Forcing::operator-=(const Forcing& other) {
    check_same_shape(other);
    for (std::size_t i = 0; i < g1_.size(); ++i) g1_[i] -= other.g1_[i];
    for (std::size_t i = 0; i < g2_.size(); ++i) g2_[i] -= other.g2_[i];
    return *this;
}

Forcing& Forcing::operator*=(double factor) {
    for (double& v : g1_) v *= factor;
    for (double& v : g2_) v *= factor;
    return *this;
}

double Forcing::l2_norm(double dt) const {
    double total = 0.0;
    for (std::size_t p = 0; p < paths_; ++p) {
        for (std::size_t k = 0; k < steps_; ++k) {
            total += (drift(p, k).squaredNorm() + noise(p, k).squaredNorm()) * dt;
        }
    }
    return paths_ == 0 ? 0.0 : std::sqrt(total / static_cast<double>(paths_));
}

StateEnsemble solve_linearized(const LinearCoefficients& coeffs, const Forcing& forcing,
                               const BrownianEnsemble& noise, const std::optional<InitialState>& y0) {
    const std::size_t n = coeffs.state_dim();
    const std::size_t d = coeffs.noise_dim();
    const TimeGrid& grid = noise.grid();
    const std::size_t steps = grid.steps();
    if (noise.dim() != d || forcing.state_dim() != n || forcing.noise_dim() != d ||
        forcing.steps() != steps || forcing.paths() != noise.paths()) {
        throw std::invalid_argument("linearized equation data have inconsistent shapes");
    }
    if (y0) check_initial(*y0, n, noise.paths());

    StateEnsemble out(grid, n, noise.paths());
    const double dt = grid.dt();
    parallel_for_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        Mat a(n, n), dd(n, n * d);
        Vec y(n), next(n);
        std::vector<double> increments(steps * d);
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, increments);
            if (y0) {
                y = y0->at(path);
            } else {
                y.setZero();
            }
            out.at(path, 0) = y;
            for (std::size_t k = 0; k < steps; ++k) {
                coeffs.evaluate(path, k, a, dd);
                next = y;
                next.noalias() += (a * y) * dt;
                next += forcing.drift(path, k) * dt;
                const auto g2 = forcing.noise(path, k);
                for (std::size_t i = 0; i < d; ++i) {
                    const double dw = increments[k * d + i];
                    const auto di = static_cast<Eigen::Index>(i);
                    next.noalias() += (dd.middleCols(di * static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) * y) * dw;
                    next += g2.col(di) * dw;
                }
                y = next;
                out.at(path, k + 1) = y;
            }
        }
    });
    return out;
}

FundamentalMatrices::FundamentalMatrices(TimeGrid grid, std::size_t paths, std::size_t dim)
    : grid_(grid),
      paths_(paths),
      n_(dim),
      phi_(paths * (grid.steps() + 1) * dim * dim, 0.0),
      psi_(paths * (grid.steps() + 1) * dim * dim, 0.0) {}

FundamentalMatrices::FundamentalMatrices(TimeGrid grid, std::size_t paths, std::size_t dim,
                                         std::vector<double> phi, std::vector<double> psi)
    : grid_(grid), paths_(paths), n_(dim), phi_(std::move(phi)), psi_(std::move(psi)) {
    const std::size_t expected = paths * (grid.steps() + 1) * dim * dim;
    if (phi_.size() != expected || psi_.size() != expected) {
        throw std::invalid_argument("fundamental matrix storage has the wrong size");
    }
    check_ = compute_inverse_check();
}

InverseCheck FundamentalMatrices::compute_inverse_check() const {
    InverseCheck check;
    const Mat eye = Mat::Identity(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t p = 0; p < paths_; ++p) {
        for (std::size_t k = 0; k <= grid_.steps(); ++k) {
            const double dev = (psi(p, k) * phi(p, k) - eye).norm();
            if (dev > check.max_deviation || !std::isfinite(dev)) {
                check.max_deviation = std::isfinite(dev) ? dev : std::numeric_limits<double>::infinity();
                check.worst_path = p;
                check.worst_step = k;
            }
        }
    }
    return check;
}

FundamentalMatrices fundamental_matrices(const LinearCoefficients& coeffs, const BrownianEnsemble& noise,
                                         std::optional<double> tolerance) {
    const std::size_t n = coeffs.state_dim();
    const std::size_t d = coeffs.noise_dim();
    if (noise.dim() != d) throw std::invalid_argument("Brownian dimension does not match D");
    const TimeGrid& grid = noise.grid();
    const std::size_t steps = grid.steps();
    const double dt = grid.dt();
    FundamentalMatrices fm(grid, noise.paths(), n);
    std::vector<InverseCheck> worst(noise.paths());

    parallel_for_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        const auto ni = static_cast<Eigen::Index>(n);
        const Mat eye = Mat::Identity(ni, ni);
        Mat a(n, n), dd(n, n * d), fwd(n, n), bwd(n, n);
        std::vector<double> increments(steps * d);
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, increments);
            fm.phi(path, 0) = eye;
            fm.psi(path, 0) = eye;
            InverseCheck& w = worst[path];
            w.worst_path = path;
            for (std::size_t k = 0; k < steps; ++k) {
                coeffs.evaluate(path, k, a, dd);
                // phi_{k+1} = (I + A dt + sum D_i dW^i) phi_k
                // psi_{k+1} = psi_k (I - (A - sum D_i^2) dt - sum D_i dW^i)
                fwd = eye + a * dt;
                bwd = eye - a * dt;
                for (std::size_t i = 0; i < d; ++i) {
                    const auto di = dd.middleCols(static_cast<Eigen::Index>(i) * ni, ni);
                    const double dw = increments[k * d + i];
                    fwd += di * dw;
                    bwd.noalias() += (di * di) * dt;
                    bwd -= di * dw;
                }
                fm.phi(path, k + 1).noalias() = fwd * fm.phi(path, k);
                fm.psi(path, k + 1).noalias() = fm.psi(path, k) * bwd;
                const double dev = (fm.psi(path, k + 1) * fm.phi(path, k + 1) - eye).norm();
                if (dev > w.max_deviation || !std::isfinite(dev)) {
                    w.max_deviation = std::isfinite(dev) ? dev : std::numeric_limits<double>::infinity();
                    w.worst_step = k + 1;
                }
            }
        }
    });

    InverseCheck overall;
    for (const auto& w : worst) {
        if (w.max_deviation > overall.max_deviation) overall = w;
    }
    fm.set_inverse_check(overall);
    if (tolerance && overall.max_deviation > *tolerance) {
        std::ostringstream msg;
        msg << "psi*phi deviates from the identity by " << overall.max_deviation << " > " << *tolerance
            << " at path " << overall.worst_path << ", step " << overall.worst_step;
        throw std::runtime_error(msg.str());
    }
    return fm;
}

double InverseToleranceStudy::tolerance_for(std::size_t steps_count, double horizon) const {
    return safety * constant * std::sqrt(horizon / static_cast<double>(steps_count));
}

InverseToleranceStudy inverse_tolerance_study(
    const std::function<LinearCoefficients(const BrownianEnsemble&)>& coefficients_for,
    const BrownianEnsemble& finest, const std::vector<std::size_t>& step_counts, double safety) {
    InverseToleranceStudy study;
    study.safety = safety;
    const std::size_t fine = finest.grid().steps();
    for (std::size_t steps : step_counts) {
        if (steps == 0 || fine % steps != 0) {
            throw std::invalid_argument("refinement levels must divide the finest step count");
        }
        const BrownianEnsemble coarse = finest.coarsen(fine / steps);
        const FundamentalMatrices fm = fundamental_matrices(coefficients_for(coarse), coarse);
        const double dev = fm.inverse_check().max_deviation;
        study.steps.push_back(steps);
        study.deviations.push_back(dev);
        study.constant = std::max(study.constant, dev / std::sqrt(coarse.grid().dt()));
    }
    return study;
}

double representation_formula_check(const FundamentalMatrices& fm, const LinearCoefficients& coeffs,
                                     const Forcing& forcing, const BrownianEnsemble& noise,
                                     const StateEnsemble& y, RepresentationOptions options) {
    const std::size_t n = coeffs.state_dim();
    const std::size_t d = coeffs.noise_dim();
    const TimeGrid& grid = noise.grid();
    const std::size_t steps = grid.steps();
    if (fm.grid() != grid || y.grid() != grid || fm.paths() != noise.paths() || y.paths() != noise.paths() ||
        forcing.steps() != steps) {
        throw std::invalid_argument("representation check inputs are on different grids");
    }
    const double dt = grid.dt();
    std::vector<double> worst(noise.paths(), 0.0);

    parallel_for_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        const auto ni = static_cast<Eigen::Index>(n);
        Mat a(n, n), dd(n, n * d);
        Vec acc(n), h(n), h_next(n);
        std::vector<double> increments(steps * d);
        // h = g1 - sum_i D_i g2^i at node k
        auto drift_density = [&](std::size_t path, std::size_t k, Vec& out) {
            coeffs.evaluate(path, k, a, dd);
            out = forcing.drift(path, k);
            const auto g2 = forcing.noise(path, k);
            for (std::size_t i = 0; i < d; ++i) {
                out.noalias() -= dd.middleCols(static_cast<Eigen::Index>(i) * ni, ni) *
                                 g2.col(static_cast<Eigen::Index>(i));
            }
        };
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, increments);
            acc.setZero();
            double w = (y.at(path, 0) - fm.phi(path, 0) * acc).norm();
            drift_density(path, 0, h);
            for (std::size_t k = 0; k < steps; ++k) {
                const auto psi_k = fm.psi(path, k);
                if (options.trapezoid_drift) {
                    drift_density(path, k + 1, h_next);
                    acc.noalias() += 0.5 * dt * (psi_k * h + fm.psi(path, k + 1) * h_next);
                } else {
                    acc.noalias() += dt * (psi_k * h);
                }
                const auto g2 = forcing.noise(path, k);
                for (std::size_t i = 0; i < d; ++i) {
                    acc.noalias() += (psi_k * g2.col(static_cast<Eigen::Index>(i))) * increments[k * d + i];
                }
                if (options.trapezoid_drift) {
                    h.swap(h_next);
                } else if (k + 1 < steps) {
                    drift_density(path, k + 1, h);
                }
                w = std::max(w, (y.at(path, k + 1) - fm.phi(path, k + 1) * acc).norm());
            }
            worst[path] = w;
        }
    });
    double result = 0.0;
    for (double w : worst) result = std::max(result, std::isfinite(w) ? w : std::numeric_limits<double>::infinity());
    return result;
}

}  // namespace riskpmp
