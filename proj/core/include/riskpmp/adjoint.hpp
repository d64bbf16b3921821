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
#include <span>
#include <vector>

#include "riskpmp/brownian.hpp"
#include "riskpmp/control.hpp"
#include "riskpmp/dynamics.hpp"
#include "riskpmp/ensemble_io.hpp"
#include "riskpmp/regression.hpp"
#include "riskpmp/risk.hpp"
#include "riskpmp/sde.hpp"

namespace riskpmp {

/// (p0, p1, ..., pl): p0 in {-1, 0}, pi <= 0, not all zero.
struct Multipliers {
    double cost = -1.0;
    std::vector<double> constraints;

    bool normal() const noexcept { return cost == -1.0; }
    /// Throws std::invalid_argument when the sign or nontriviality rules fail.
    void validate() const;
};

using TerminalGradient = std::function<void(ConstVecRef x, VecRef gradient)>;

class TerminalCostate {
public:
    TerminalCostate(std::size_t paths, std::size_t dim, Multipliers multipliers, RiskSubgradient xi);

    std::size_t paths() const noexcept { return paths_; }
    std::size_t dim() const noexcept { return dim_; }
    const Multipliers& multipliers() const noexcept { return multipliers_; }
    const RiskSubgradient& risk_subgradient() const noexcept { return xi_; }

    Eigen::Map<Vec> at(std::size_t path) noexcept {
        return {values_.data() + path * dim_, static_cast<Eigen::Index>(dim_)};
    }
    Eigen::Map<const Vec> at(std::size_t path) const noexcept {
        return {values_.data() + path * dim_, static_cast<Eigen::Index>(dim_)};
    }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::size_t paths_;
    std::size_t dim_;
    Multipliers multipliers_;
    RiskSubgradient xi_;
    std::vector<double> values_;
};

/// p_T = xi p0 grad phi0(x(T)) + sum_i p_i grad phi_i(x(T)) on every path.
TerminalCostate assemble_terminal(const RiskSubgradient& xi, const TerminalGradient& cost_gradient,
                                  const std::vector<TerminalGradient>& constraint_gradients,
                                  const Multipliers& multipliers, const StateEnsemble& states);

struct AdjointOptions {
    BasisSpec basis;
    /// BSDE residual above this bound marks the costates as unreliable.
    std::optional<double> residual_bound;
};

struct AdjointDiagnostics {
    std::size_t basis_size = 0;
    std::size_t rank_deficient_steps = 0;
    std::size_t ridge_flagged_steps = 0;
    double max_ridge_effect = 0.0;
    double max_residual_rms = 0.0;       // regression residuals of the martingale target
    std::vector<double> bsde_residuals;  // ensemble mean of |r_k| per step
    double bsde_residual = 0.0;          // max over steps
    std::optional<double> residual_bound;
    bool residual_within_bound() const noexcept {
        return !residual_bound || bsde_residual <= *residual_bound;
    }
};

/// Adjoint processes p (n-vector) and q (n x d, column i = q_i) on every node.
/// q at the last node repeats the value at t_{K-1}.
class CostatePair {
public:
    CostatePair(TimeGrid grid, std::size_t paths, std::size_t state_dim, std::size_t noise_dim);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t state_dim() const noexcept { return n_; }
    std::size_t noise_dim() const noexcept { return d_; }

    Eigen::Map<Vec> p(std::size_t path, std::size_t k) noexcept {
        return {p_.data() + index(path, k) * n_, static_cast<Eigen::Index>(n_)};
    }
    Eigen::Map<const Vec> p(std::size_t path, std::size_t k) const noexcept {
        return {p_.data() + index(path, k) * n_, static_cast<Eigen::Index>(n_)};
    }
    Eigen::Map<Mat> q(std::size_t path, std::size_t k) noexcept {
        return {q_.data() + index(path, k) * n_ * d_, static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(d_)};
    }
    Eigen::Map<const Mat> q(std::size_t path, std::size_t k) const noexcept {
        return {q_.data() + index(path, k) * n_ * d_, static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(d_)};
    }

    AdjointDiagnostics& diagnostics() noexcept { return diagnostics_; }
    const AdjointDiagnostics& diagnostics() const noexcept { return diagnostics_; }

    /// Interleaved [p | q] records for CSV and binary export.
    std::vector<double> interleaved() const;
    std::vector<std::string> column_names() const;

private:
    std::size_t index(std::size_t path, std::size_t k) const noexcept { return path * (grid_.steps() + 1) + k; }

    TimeGrid grid_;
    std::size_t paths_, n_, d_;
    std::vector<double> p_;
    std::vector<double> q_;
    AdjointDiagnostics diagnostics_;
};

/// Costates along (x*, u*):
///   m(t_k) = E[phi(T)' p_T | F_{t_k}]                 (regression)
///   mu_j(t_k) = E[(m(t_{k+1}) - m(t_k)) dW^j_k / dt | F_{t_k}]
///   p = psi' m,   q_i = psi' mu_i - D_i' p,
/// with psi taken as the LU inverse of phi so that p is exactly the discrete
/// adjoint of the Euler scheme for phi.
CostatePair solve_adjoint(const DynamicsSpec& dyn, const StateEnsemble& states, const ControlTable& controls,
                          const TerminalCostate& terminal, const FundamentalMatrices& fm,
                          const BrownianEnsemble& noise, const AdjointOptions& options = {});

struct MartingaleReport {
    std::vector<double> times;
    Mat adjusted_mean;    // (K+1) x n, ensemble mean of phi' p
    Mat adjusted_stderr;  // (K+1) x n
    Mat raw_mean;         // (K+1) x n, ensemble mean of p
    Mat raw_stderr;
    Vec adjusted_slope;   // least-squares slope in t per component
    Vec adjusted_slope_stderr;
    Vec raw_slope;
    Vec raw_slope_stderr;
    bool passed = false;  // every |adjusted slope| <= 5 stderr
};

/// phi(t)' p(t) is a martingale; its ensemble mean should be flat in t. Slope
/// standard errors come from the spread of per-path least-squares slopes.
MartingaleReport martingale_check(const CostatePair& costates, const FundamentalMatrices& fm,
                                  double sigmas = 5.0);

ProcessView view_of(const CostatePair& costates, const std::vector<double>& storage);

}  // namespace riskpmp
