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

#include "riskpmp/regression.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace riskpmp {

namespace {

// All multisets of size <= degree drawn from nvars variables, in graded
// lexicographic order; each is a list of variable indices.
std::vector<std::vector<std::size_t>> monomials(std::size_t nvars, std::size_t degree) {
    std::vector<std::vector<std::size_t>> out{{}};
    std::vector<std::size_t> current;
    std::function<void(std::size_t, std::size_t)> extend = [&](std::size_t first, std::size_t remaining) {
        if (remaining == 0) {
            out.push_back(current);
            return;
        }
        for (std::size_t v = first; v < nvars; ++v) {
            current.push_back(v);
            extend(v, remaining - 1);
            current.pop_back();
        }
    };
    for (std::size_t deg = 1; deg <= degree; ++deg) extend(0, deg);
    return out;
}

}  // namespace

Mat polynomial_features(const FeatureSource& source, std::size_t step, const BasisSpec& spec) {
    std::size_t paths = 0;
    if (source.states) paths = source.states->paths();
    if (source.brownian) {
        if (paths != 0 && source.brownian->paths != paths) {
            throw std::invalid_argument("feature sources have different path counts");
        }
        paths = source.brownian->paths;
    }
    if (paths == 0) throw std::invalid_argument("no feature source");

    // Raw variables, one column each.
    std::vector<Vec> raw;
    if (spec.use_state && source.states) {
        for (std::size_t c = 0; c < source.states->dim(); ++c) {
            Vec col(static_cast<Eigen::Index>(paths));
            for (std::size_t p = 0; p < paths; ++p) {
                col[static_cast<Eigen::Index>(p)] = source.states->at(p, step)[static_cast<Eigen::Index>(c)];
            }
            raw.push_back(std::move(col));
        }
    }
    if (spec.use_brownian && source.brownian) {
        for (std::size_t c = 0; c < source.brownian->dim; ++c) {
            Vec col(static_cast<Eigen::Index>(paths));
            for (std::size_t p = 0; p < paths; ++p) col[static_cast<Eigen::Index>(p)] = source.brownian->at(p, step)[c];
            raw.push_back(std::move(col));
        }
    }

    std::vector<Vec> vars;
    for (Vec& col : raw) {
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) continue;
        vars.push_back((col.array() - mean) / sd);
    }

    const auto terms = monomials(vars.size(), spec.degree);
    Mat design(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(terms.size()));
    for (std::size_t j = 0; j < terms.size(); ++j) {
        auto col = design.col(static_cast<Eigen::Index>(j));
        col.setOnes();
        for (std::size_t v : terms[j]) col.array() *= vars[v].array();
    }
    return design;
}

LeastSquaresProjector::LeastSquaresProjector(Mat design, double ridge, double rank_cutoff)
    : design_(std::move(design)), ridge_(ridge), cutoff_(rank_cutoff) {
    if (design_.rows() == 0 || design_.cols() == 0) throw std::invalid_argument("empty design matrix");
    const double m = static_cast<double>(design_.rows());
    Mat gram = Mat::Zero(design_.cols(), design_.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(design_.transpose(), 1.0 / m);
    gram = gram.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    eigenvectors_ = eig.eigenvectors();
    eigenvalues_ = eig.eigenvalues();
    const double top = std::max(eigenvalues_.maxCoeff(), 0.0);
    for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
        if (eigenvalues_[i] > cutoff_ * top) ++rank_;
    }
}

Mat LeastSquaresProjector::coefficients(const Mat& y) const {
    if (y.rows() != design_.rows()) throw std::invalid_argument("regressand has the wrong number of rows");
    const double m = static_cast<double>(design_.rows());
    const double top = std::max(eigenvalues_.maxCoeff(), 0.0);
    Mat rotated = eigenvectors_.transpose() * (design_.transpose() * y / m);
    for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
        const double lambda = eigenvalues_[i];
        rotated.row(i) *= lambda > cutoff_ * top ? 1.0 / (lambda + ridge_) : 0.0;
    }
    return eigenvectors_ * rotated;
}

double LeastSquaresProjector::ridge_effect(const Mat& y) const {
    const double m = static_cast<double>(design_.rows());
    const double top = std::max(eigenvalues_.maxCoeff(), 0.0);
    Mat rotated = eigenvectors_.transpose() * (design_.transpose() * y / m);
    for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
        const double lambda = eigenvalues_[i];
        rotated.row(i) *= lambda > cutoff_ * top ? 1.0 / (lambda + ridge_) - 1.0 / lambda : 0.0;
    }
    return (design_ * (eigenvectors_ * rotated)).cwiseAbs().maxCoeff();
}

Vec LeastSquaresProjector::leverage() const {
    const double m = static_cast<double>(design_.rows());
    const double top = std::max(eigenvalues_.maxCoeff(), 0.0);
    Mat scaled = design_ * eigenvectors_;
    for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
        const double lambda = eigenvalues_[i];
        scaled.col(i) *= lambda > cutoff_ * top ? 1.0 / std::sqrt(m * (lambda + ridge_)) : 0.0;
    }
    return scaled.rowwise().squaredNorm();
}

ConditionalEstimate conditional_expectation(const Mat& regressand, const FeatureSource& source,
                                            std::size_t step, const BasisSpec& spec) {
    const LeastSquaresProjector projector(polynomial_features(source, step, spec), spec.ridge, spec.rank_cutoff);
    // Column 0 is the intercept and the other features are centered, so the
    // sample mean can be split off exactly; the ridge then never biases it.
    const Eigen::RowVectorXd mean = regressand.colwise().mean();
    const Mat centered = regressand.rowwise() - mean;
    ConditionalEstimate out;
    out.fitted = projector.fit(centered).rowwise() + mean;
    auto& diag = out.diagnostics;
    diag.basis_size = projector.basis_size();
    diag.rank = projector.rank();
    diag.rank_deficient = projector.rank_deficient();
    diag.ridge_effect = projector.ridge_effect(centered);
    diag.ridge_flagged = diag.ridge_effect > spec.ridge_flag_threshold;

    const Mat residual = regressand - out.fitted;
    const double dof = std::max(1.0, static_cast<double>(projector.rows()) - static_cast<double>(projector.rank()));
    diag.residual_rms = (residual.colwise().squaredNorm() / dof).cwiseSqrt().transpose();
    const Vec root_leverage = projector.leverage().cwiseSqrt();
    out.stderr_ = root_leverage * diag.residual_rms.transpose();
    return out;
}

TowerReport tower_check(const Mat& regressand, const FeatureSource& source, std::size_t j, std::size_t k,
                        const BasisSpec& spec, double sigmas) {
    if (j >= k) throw std::invalid_argument("tower check needs j < k");
    const ConditionalEstimate at_k = conditional_expectation(regressand, source, k, spec);
    const LeastSquaresProjector at_j(polynomial_features(source, j, spec), spec.ridge, spec.rank_cutoff);
    const Mat nested = at_j.fit(at_k.fitted);
    const Mat direct = at_j.fit(regressand);
    const Vec root_leverage = at_j.leverage().cwiseSqrt();

    TowerReport report;
    for (Eigen::Index c = 0; c < regressand.cols(); ++c) {
        const double sd = at_k.diagnostics.residual_rms[c];
        for (Eigen::Index p = 0; p < regressand.rows(); ++p) {
            const double diff = std::abs(nested(p, c) - direct(p, c));
            const double se = std::max(sd * root_leverage[p], 1e-14);
            report.max_abs_difference = std::max(report.max_abs_difference, diff);
            report.max_standardized = std::max(report.max_standardized, diff / se);
        }
    }
    report.passed = report.max_standardized <= sigmas;
    return report;
}

}  // namespace riskpmp
