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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskpmp/brownian.hpp"
#include "riskpmp/control.hpp"
#include "riskpmp/dynamics.hpp"
#include "riskpmp/time_grid.hpp"

namespace riskpmp {

/// x_0 shared by all paths, or one x_0 per path (an F_0-measurable law).
class InitialState {
public:
    static InitialState fixed(const Vec& x0);
    static InitialState per_path(std::size_t dim, std::vector<double> values);

    std::size_t dim() const noexcept { return dim_; }
    bool is_per_path() const noexcept { return per_path_; }
    Eigen::Map<const Vec> at(std::size_t path) const {
        return {values_.data() + (per_path_ ? path * dim_ : 0), static_cast<Eigen::Index>(dim_)};
    }
    std::size_t paths() const noexcept { return per_path_ ? values_.size() / dim_ : 0; }

    /// Every x_0 multiplied by factor.
    InitialState scaled(double factor) const;

private:
    std::size_t dim_ = 0;
    bool per_path_ = false;
    std::vector<double> values_;
};

struct PathAbort {
    std::size_t path = 0;
    std::size_t step = 0;
    std::string reason;
};

/// Vector-valued process sampled on every node of every path, laid out
/// [path][step 0..K][component].
class StateEnsemble {
public:
    StateEnsemble(TimeGrid grid, std::size_t dim, std::size_t paths);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t steps() const noexcept { return grid_.steps(); }

    Eigen::Map<Vec> at(std::size_t path, std::size_t k) noexcept {
        return {data_.data() + offset(path, k), static_cast<Eigen::Index>(dim_)};
    }
    Eigen::Map<const Vec> at(std::size_t path, std::size_t k) const noexcept {
        return {data_.data() + offset(path, k), static_cast<Eigen::Index>(dim_)};
    }
    Eigen::Map<const Vec> terminal(std::size_t path) const noexcept { return at(path, steps()); }

    const std::vector<double>& values() const noexcept { return data_; }
    std::vector<double>& values() noexcept { return data_; }

    const std::vector<PathAbort>& aborts() const noexcept { return aborts_; }
    void record_abort(PathAbort abort) { aborts_.push_back(std::move(abort)); }

private:
    std::size_t offset(std::size_t path, std::size_t k) const noexcept {
        return (path * (grid_.steps() + 1) + k) * dim_;
    }

    TimeGrid grid_;
    std::size_t dim_;
    std::size_t paths_;
    std::vector<double> data_;
    std::vector<PathAbort> aborts_;
};

/// x_{k+1} = x_k + f(t_k, x_k, u_k) dt + sigma(t_k, x_k, u_k) dW_k on every path.
/// A path whose state stops being finite is aborted: its remaining nodes are
/// NaN and a PathAbort is recorded on the ensemble.
StateEnsemble euler_maruyama(const DynamicsSpec& dyn, const ControlLaw& law,
                             const InitialState& x0, const BrownianEnsemble& noise);

/// Control values u(t_k) chosen by law along a simulated ensemble.
ControlTable realize_controls(const ControlLaw& law, const StateEnsemble& states,
                              const BrownianEnsemble& noise);

/// Terminal states and running sup-norms without storing whole paths.
struct TerminalSample {
    std::size_t paths = 0;
    std::size_t dim = 0;
    std::vector<double> terminal;  // [path][component]
    std::vector<double> sup_norm;  // max_k |x(t_k)| per path

    Eigen::Map<const Vec> at(std::size_t path) const {
        return {terminal.data() + path * dim, static_cast<Eigen::Index>(dim)};
    }
};

TerminalSample simulate_terminal(const DynamicsSpec& dyn, const ControlLaw& law,
                                 const InitialState& x0, const BrownianEnsemble& noise);

struct StrongOrderResult {
    std::vector<std::size_t> steps;
    std::vector<double> dt;
    std::vector<double> errors;   // E|X_K(T) - x(T)| per level
    std::optional<double> order;  // empty when every error is exactly zero
};

/// Strong-error study against the registered closed form on shared Brownian
/// paths. Every entry of step_counts must divide finest.grid().steps().
StrongOrderResult strong_convergence_order(const DynamicsSpec& dyn, const ControlLaw& law,
                                           const Vec& x0, const BrownianEnsemble& finest,
                                           const std::vector<std::size_t>& step_counts);

/// Empirical E[sup |x|] against E[|x0| + int |f(s,0,u)| ds + (int |sigma(s,0,u)|^2 ds)^1/2].
struct AprioriBound {
    double mean_sup_norm = 0.0;
    double data_magnitude = 0.0;
    double constant = 0.0;  // mean_sup_norm / data_magnitude
};

AprioriBound a_priori_bound(const DynamicsSpec& dyn, const ControlLaw& law,
                            const InitialState& x0, const BrownianEnsemble& noise);

/// A(t) and D_i(t) along an ensemble. The noise block is n x (n*d), D_i in
/// columns [i*n, (i+1)*n).
class LinearCoefficients {
public:
    using Provider = std::function<void(std::size_t path, std::size_t step, MatRef drift, MatRef noise)>;

    LinearCoefficients(std::size_t state_dim, std::size_t noise_dim, Provider provider);

    static LinearCoefficients constant(const Mat& drift, const Mat& noise);

    /// A = df/dx and D_i = dsigma_i/dx evaluated along (x*, u*). Holds references
    /// to dyn, states and controls, which must outlive the returned object.
    static LinearCoefficients along_trajectory(const DynamicsSpec& dyn, const StateEnsemble& states,
                                               const ControlTable& controls);

    std::size_t state_dim() const noexcept { return n_; }
    std::size_t noise_dim() const noexcept { return d_; }
    void evaluate(std::size_t path, std::size_t step, MatRef drift, MatRef noise) const {
        provider_(path, step, drift, noise);
    }

private:
    std::size_t n_;
    std::size_t d_;
    Provider provider_;
};

/// Forcing (g1, g2) of the linearized SDE on nodes 0..K of every path. g2 at a
/// node is an n x d matrix whose column i is g2^i. Euler steps use nodes 0..K-1.
class Forcing {
public:
    Forcing(std::size_t paths, std::size_t steps, std::size_t state_dim, std::size_t noise_dim);

    std::size_t paths() const noexcept { return paths_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t state_dim() const noexcept { return n_; }
    std::size_t noise_dim() const noexcept { return d_; }

    Eigen::Map<Vec> drift(std::size_t path, std::size_t k) noexcept {
        return {g1_.data() + (path * (steps_ + 1) + k) * n_, static_cast<Eigen::Index>(n_)};
    }
    Eigen::Map<const Vec> drift(std::size_t path, std::size_t k) const noexcept {
        return {g1_.data() + (path * (steps_ + 1) + k) * n_, static_cast<Eigen::Index>(n_)};
    }
    Eigen::Map<Mat> noise(std::size_t path, std::size_t k) noexcept {
        return {g2_.data() + (path * (steps_ + 1) + k) * n_ * d_, static_cast<Eigen::Index>(n_),
                static_cast<Eigen::Index>(d_)};
    }
    Eigen::Map<const Mat> noise(std::size_t path, std::size_t k) const noexcept {
        return {g2_.data() + (path * (steps_ + 1) + k) * n_ * d_, static_cast<Eigen::Index>(n_),
                static_cast<Eigen::Index>(d_)};
    }

    bool is_zero() const noexcept;
    bool has_noise_part() const noexcept;

    Forcing& operator+=(const Forcing& other);
    Forcing& operator-=(const Forcing& other);
    Forcing& operator*=(double factor);
    friend Forcing operator+(Forcing a, const Forcing& b) { return a += b; }
    friend Forcing operator-(Forcing a, const Forcing& b) { return a -= b; }
    friend Forcing operator*(double factor, Forcing a) { return a *= factor; }

    /// E[int_0^T |g1|^2 + |g2|_F^2 dt]^(1/2), left-point rule.
    double l2_norm(double dt) const;

private:
    void check_same_shape(const Forcing& other) const;

    std::size_t paths_, steps_, n_, d_;
    std::vector<double> g1_;
    std::vector<double> g2_;
};

/// Euler-Maruyama solution of
///   dy = (A y + g1) dt + sum_i (D_i y + g2^i) dW^i,  y(0) = y0 (zero by default).
StateEnsemble solve_linearized(const LinearCoefficients& coeffs, const Forcing& forcing,
                               const BrownianEnsemble& noise,
                               const std::optional<InitialState>& y0 = std::nullopt);

struct InverseCheck {
    double max_deviation = 0.0;  // max over paths and nodes of |psi phi - I|_F
    std::size_t worst_path = 0;
    std::size_t worst_step = 0;
};

/// Solutions phi, psi of the matrix SDEs
///   dphi = A phi dt + sum_i D_i phi dW^i,
///   dpsi = -psi (A - sum_i D_i^2) dt - sum_i psi D_i dW^i,  phi(0) = psi(0) = I.
class FundamentalMatrices {
public:
    FundamentalMatrices(TimeGrid grid, std::size_t paths, std::size_t dim);
    FundamentalMatrices(TimeGrid grid, std::size_t paths, std::size_t dim, std::vector<double> phi,
                        std::vector<double> psi);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t dim() const noexcept { return n_; }

    Eigen::Map<Mat> phi(std::size_t path, std::size_t k) noexcept { return block(phi_, path, k); }
    Eigen::Map<const Mat> phi(std::size_t path, std::size_t k) const noexcept { return block(phi_, path, k); }
    Eigen::Map<Mat> psi(std::size_t path, std::size_t k) noexcept { return block(psi_, path, k); }
    Eigen::Map<const Mat> psi(std::size_t path, std::size_t k) const noexcept { return block(psi_, path, k); }

    const InverseCheck& inverse_check() const noexcept { return check_; }
    void set_inverse_check(InverseCheck check) noexcept { check_ = check; }
    InverseCheck compute_inverse_check() const;

private:
    Eigen::Map<Mat> block(std::vector<double>& v, std::size_t path, std::size_t k) noexcept {
        return {v.data() + (path * (grid_.steps() + 1) + k) * n_ * n_, static_cast<Eigen::Index>(n_),
                static_cast<Eigen::Index>(n_)};
    }
    Eigen::Map<const Mat> block(const std::vector<double>& v, std::size_t path,
                                std::size_t k) const noexcept {
        return {v.data() + (path * (grid_.steps() + 1) + k) * n_ * n_, static_cast<Eigen::Index>(n_),
                static_cast<Eigen::Index>(n_)};
    }

    TimeGrid grid_;
    std::size_t paths_;
    std::size_t n_;
    std::vector<double> phi_;
    std::vector<double> psi_;
    InverseCheck check_;
};

/// Integrates phi and psi. If tolerance is given and max |psi phi - I| exceeds
/// it, throws std::runtime_error naming the worst (path, step).
FundamentalMatrices fundamental_matrices(const LinearCoefficients& coeffs,
                                         const BrownianEnsemble& noise,
                                         std::optional<double> tolerance = std::nullopt);

/// Refinement study of max |psi phi - I| on shared paths. The suggested
/// tolerance at a step count K is safety * C * sqrt(T/K) with C the largest
/// observed deviation / sqrt(dt).
struct InverseToleranceStudy {
    std::vector<std::size_t> steps;
    std::vector<double> deviations;
    double constant = 0.0;
    double safety = 2.0;
    double tolerance_for(std::size_t steps_count, double horizon) const;
};

InverseToleranceStudy inverse_tolerance_study(
    const std::function<LinearCoefficients(const BrownianEnsemble&)>& coefficients_for,
    const BrownianEnsemble& finest, const std::vector<std::size_t>& step_counts,
    double safety = 2.0);

struct RepresentationOptions {
    /// Trapezoid rule for the ds-integral (needs forcing on node K); left-point otherwise.
    bool trapezoid_drift = false;
};

/// sup over paths and nodes of |y(t) - phi(t) [int psi (g1 - sum D_i g2^i) ds + sum int psi g2^i dW^i]|.
double representation_formula_check(const FundamentalMatrices& fm, const LinearCoefficients& coeffs,
                                     const Forcing& forcing, const BrownianEnsemble& noise,
                                     const StateEnsemble& y, RepresentationOptions options = {});

}  // namespace riskpmp
