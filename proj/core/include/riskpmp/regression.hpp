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

#include "riskpmp/brownian.hpp"
#include "riskpmp/sde.hpp"

namespace riskpmp {

struct BasisSpec {
    std::size_t degree = 2;
    bool use_state = true;
    bool use_brownian = true;
    double ridge = 1e-10;
    double ridge_flag_threshold = 1e-8;
    /// Eigenvalues of the standardized Gram matrix below cutoff * largest are
    /// treated as zero (pseudo-inverse) and the step is flagged rank deficient.
    double rank_cutoff = 1e-11;
};

/// Where regression features come from; either pointer may be null.
struct FeatureSource {
    const StateEnsemble* states = nullptr;
    const BrownianPaths* brownian = nullptr;
};

/// Design matrix of all monomials up to spec.degree in the standardized
/// variables (x(t_k), W(t_k)). Column 0 is the intercept; variables with zero
/// sample variance at t_k are left out.
Mat polynomial_features(const FeatureSource& source, std::size_t step, const BasisSpec& spec);

/// Least-squares projection onto the columns of a fixed design matrix, using
/// the eigen-decomposition of the ridge-damped Gram matrix X'X/M. One
/// decomposition serves any number of right-hand sides.
class LeastSquaresProjector {
public:
    explicit LeastSquaresProjector(Mat design, double ridge = 1e-10, double rank_cutoff = 1e-11);

    std::size_t rows() const noexcept { return static_cast<std::size_t>(design_.rows()); }
    std::size_t basis_size() const noexcept { return static_cast<std::size_t>(design_.cols()); }
    std::size_t rank() const noexcept { return rank_; }
    bool rank_deficient() const noexcept { return rank_ < basis_size(); }
    const Mat& design() const noexcept { return design_; }

    /// Ridge-damped coefficients for every column of y (M x r).
    Mat coefficients(const Mat& y) const;
    Mat fit(const Mat& y) const { return design_ * coefficients(y); }
    /// max |X (beta_ridge - beta_pinv)|, how much the ridge moved the fit.
    double ridge_effect(const Mat& y) const;
    /// Diagonal of the hat matrix.
    Vec leverage() const;

private:
    Mat design_;
    Mat eigenvectors_;
    Vec eigenvalues_;
    double ridge_;
    double cutoff_;
    std::size_t rank_ = 0;
};

struct RegressionDiagnostics {
    std::size_t basis_size = 0;
    std::size_t rank = 0;
    bool rank_deficient = false;
    bool ridge_flagged = false;
    double ridge_effect = 0.0;
    Vec residual_rms;  // per regressand column
};

struct ConditionalEstimate {
    Mat fitted;  // M x r
    Mat stderr_;  // M x r, residual sd times sqrt(leverage)
    RegressionDiagnostics diagnostics;
};

/// Least-squares estimate of E[G | F_{t_k}] for each column of G (M x r).
ConditionalEstimate conditional_expectation(const Mat& regressand, const FeatureSource& source,
                                            std::size_t step, const BasisSpec& spec = {});

struct TowerReport {
    double max_abs_difference = 0.0;
    double max_standardized = 0.0;  // max |difference| / stderr
    bool passed = false;
};

/// Compares E[E[G | F_k] | F_j] with E[G | F_j] (j < k) path by path; the
/// difference is the projection of the step-k residual and is tested at
/// `sigmas` of its standard error.
TowerReport tower_check(const Mat& regressand, const FeatureSource& source, std::size_t j, std::size_t k,
                        const BasisSpec& spec = {}, double sigmas = 5.0);

}  // namespace riskpmp
