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

#include "riskpmp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace riskpmp {

namespace {

// Neumaier-compensated running sum; the AV@R formulations are compared at
// 1e-9 on samples of 10^4 values, so plain summation is not quite enough.
class CompensatedSum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

constexpr double kMassTol = 1e-12;

std::vector<std::size_t> ascending_order(const SampledRandomVariable& z) {
    std::vector<std::size_t> order(z.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return z.value(a) < z.value(b); });
    return order;
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("AV@R level must lie in (0, 1]");
}

void check_nonempty(const SampledRandomVariable& z) {
    if (z.size() == 0) throw std::invalid_argument("empty sample");
}

struct QuantileInfo {
    double lower = 0.0;
    double upper = 0.0;
    double mass_above = 0.0;  // P(Z > lower)
    double mass_atom = 0.0;   // P(Z = lower)
};

QuantileInfo quantile_info(double alpha, const SampledRandomVariable& z,
                           const std::vector<std::size_t>& order) {
    QuantileInfo info;
    const double level = 1.0 - alpha;
    double cum = 0.0;
    bool have_lower = false;
    bool have_upper = false;
    for (std::size_t i = 0; i < order.size();) {
        const double v = z.value(order[i]);
        double group = 0.0;
        std::size_t j = i;
        for (; j < order.size() && z.value(order[j]) == v; ++j) group += z.weight(order[j]);
        cum += group;
        if (!have_lower && cum >= level - kMassTol) {
            info.lower = v;
            info.mass_atom = group;
            have_lower = true;
        }
        if (!have_upper && cum > level + kMassTol) {
            info.upper = v;
            have_upper = true;
        }
        i = j;
    }
    if (!have_lower) info.lower = z.value(order.back());
    if (!have_upper) info.upper = info.lower;
    CompensatedSum above;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z.value(i) > info.lower) above.add(z.weight(i));
    }
    info.mass_above = above.value();
    return info;
}

RiskSubgradient avar_subgradient(double alpha, const SampledRandomVariable& z) {
    const auto order = ascending_order(z);
    const QuantileInfo info = quantile_info(alpha, z, order);
    RiskSubgradient g;
    g.has_quantile = true;
    g.quantile = info.lower;
    g.quantile_upper = info.upper;
    const double cap = 1.0 / alpha;
    double lambda = 0.0;
    if (info.mass_atom > 0.0) {
        lambda = (1.0 - info.mass_above / alpha) / info.mass_atom;
        lambda = std::clamp(lambda, 0.0, cap);
    }
    g.boundary_mass = lambda;
    std::size_t atom_size = 0;
    g.xi.assign(z.size(), 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z.value(i) > info.lower) {
            g.xi[i] = cap;
        } else if (z.value(i) == info.lower) {
            g.xi[i] = lambda;
            ++atom_size;
        }
    }
    const double edge_tol = 1e-12 * cap;
    g.boundary_hit = atom_size > 0 && (lambda <= edge_tol || lambda >= cap - edge_tol);
    // Several samples on the atom with room to trade mass between them.
    g.non_unique = atom_size > 1 && !g.boundary_hit;
    return g;
}

double avar_face_derivative(double alpha, const SampledRandomVariable& z, const std::vector<double>& h) {
    const auto order = ascending_order(z);
    const QuantileInfo info = quantile_info(alpha, z, order);
    const double cap = 1.0 / alpha;
    CompensatedSum total;
    std::vector<std::size_t> atom;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z.value(i) > info.lower) {
            total.add(z.weight(i) * cap * h[i]);
        } else if (z.value(i) == info.lower) {
            atom.push_back(i);
        }
    }
    // The atom carries mass 1 - P(Z > q)/alpha in E[xi]; put it where H is largest.
    double budget = std::max(0.0, 1.0 - info.mass_above / alpha);
    std::stable_sort(atom.begin(), atom.end(), [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });
    for (std::size_t i : atom) {
        if (budget <= 0.0) break;
        const double take = std::min(budget, z.weight(i) * cap);
        total.add(take * h[i]);
        budget -= take;
    }
    return total.value();
}

double relative_scale(double v) { return std::max(1.0, std::abs(v)); }

}  // namespace

SampledRandomVariable::SampledRandomVariable(std::vector<double> values)
    : values_(std::move(values)), weights_(values_.size(), values_.empty() ? 0.0 : 1.0 / static_cast<double>(values_.size())) {}

SampledRandomVariable::SampledRandomVariable(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)), uniform_(false) {
    if (values_.size() != weights_.size()) throw std::invalid_argument("values and weights differ in length");
    CompensatedSum total;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
        total.add(w);
    }
    if (!values_.empty() && std::abs(total.value() - 1.0) > 1e-12) {
        throw std::invalid_argument("weights must sum to 1");
    }
}

double SampledRandomVariable::mean() const {
    CompensatedSum s;
    for (std::size_t i = 0; i < values_.size(); ++i) s.add(weights_[i] * values_[i]);
    return s.value();
}

double SampledRandomVariable::weighted_dot(const std::vector<double>& h) const {
    if (h.size() != values_.size()) throw std::invalid_argument("multiplier has the wrong length");
    CompensatedSum s;
    for (std::size_t i = 0; i < values_.size(); ++i) s.add(weights_[i] * h[i] * values_[i]);
    return s.value();
}

SampledRandomVariable SampledRandomVariable::with_values(std::vector<double> values) const {
    if (values.size() != values_.size()) throw std::invalid_argument("sample size changed");
    SampledRandomVariable out = *this;
    out.values_ = std::move(values);
    return out;
}

RiskMeasure RiskMeasure::expectation() { return RiskMeasure(Kind::Expectation, {}, {}); }

RiskMeasure RiskMeasure::avar(double alpha) {
    check_alpha(alpha);
    return RiskMeasure(Kind::AVaR, {alpha}, {1.0});
}

RiskMeasure RiskMeasure::mixture(std::vector<double> levels, std::vector<double> lambdas) {
    if (levels.empty() || levels.size() != lambdas.size()) {
        throw std::invalid_argument("mixture needs one weight per level");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < levels.size(); ++j) {
        check_alpha(levels[j]);
        if (lambdas[j] < 0.0) throw std::invalid_argument("mixture weights must be nonnegative");
        total += lambdas[j];
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights must sum to 1");
    return RiskMeasure(Kind::Mixture, std::move(levels), std::move(lambdas));
}

std::string RiskMeasure::describe() const {
    std::ostringstream out;
    switch (kind_) {
        case Kind::Expectation:
            out << "expectation";
            break;
        case Kind::AVaR:
            out << "avar(" << levels_.front() << ")";
            break;
        case Kind::Mixture:
            out << "mixture(";
            for (std::size_t j = 0; j < levels_.size(); ++j) {
                out << (j ? ", " : "") << lambdas_[j] << "*avar(" << levels_[j] << ")";
            }
            out << ")";
            break;
    }
    return out.str();
}

double avar_tail(double alpha, const SampledRandomVariable& z) {
    check_alpha(alpha);
    check_nonempty(z);
    auto order = ascending_order(z);
    CompensatedSum acc;
    double remaining = alpha;
    for (auto it = order.rbegin(); it != order.rend() && remaining > 0.0; ++it) {
        const double take = std::min(z.weight(*it), remaining);
        acc.add(take * z.value(*it));
        remaining -= take;
    }
    // Weights that sum to 1 - O(1e-12) can leave a sliver of mass unassigned;
    // it belongs to the smallest value reached.
    if (remaining > 0.0) acc.add(remaining * z.value(order.front()));
    return acc.value() / alpha;
}

double avar_infimum(double alpha, const SampledRandomVariable& z) {
    check_alpha(alpha);
    check_nonempty(z);
    const auto order = ascending_order(z);
    const std::size_t n = order.size();
    // Suffix sums over strictly larger values, group by group from the top.
    std::vector<double> breakpoints;
    std::vector<double> weight_above;
    std::vector<double> value_above;
    CompensatedSum w_sum, v_sum;
    for (std::size_t i = n; i > 0;) {
        const double v = z.value(order[i - 1]);
        breakpoints.push_back(v);
        weight_above.push_back(w_sum.value());
        value_above.push_back(v_sum.value());
        while (i > 0 && z.value(order[i - 1]) == v) {
            w_sum.add(z.weight(order[i - 1]));
            v_sum.add(z.weight(order[i - 1]) * z.value(order[i - 1]));
            --i;
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < breakpoints.size(); ++j) {
        const double t = breakpoints[j];
        // E[(Z - t)^+] = sum_{z > t} w z - t sum_{z > t} w
        const double excess = value_above[j] - t * weight_above[j];
        best = std::min(best, t + std::max(excess, 0.0) / alpha);
    }
    return best;
}

double risk_value(const RiskMeasure& rho, const SampledRandomVariable& z) {
    check_nonempty(z);
    switch (rho.kind()) {
        case RiskMeasure::Kind::Expectation:
            return z.mean();
        case RiskMeasure::Kind::AVaR: {
            const double tail = avar_tail(rho.alpha(), z);
            const double inf = avar_infimum(rho.alpha(), z);
            if (std::abs(tail - inf) > 1e-9 * relative_scale(tail)) {
                std::ostringstream msg;
                msg << std::setprecision(17) << "AV@R formulations disagree: tail " << tail << ", infimum " << inf;
                throw std::logic_error(msg.str());
            }
            return tail;
        }
        case RiskMeasure::Kind::Mixture: {
            double total = 0.0;
            for (std::size_t j = 0; j < rho.levels().size(); ++j) {
                if (rho.lambdas()[j] == 0.0) continue;
                total += rho.lambdas()[j] * risk_value(RiskMeasure::avar(rho.levels()[j]), z);
            }
            return total;
        }
    }
    return 0.0;
}

RiskSubgradient risk_subgradient(const RiskMeasure& rho, const SampledRandomVariable& z) {
    check_nonempty(z);
    switch (rho.kind()) {
        case RiskMeasure::Kind::Expectation: {
            RiskSubgradient g;
            g.xi.assign(z.size(), 1.0);
            return g;
        }
        case RiskMeasure::Kind::AVaR:
            return avar_subgradient(rho.alpha(), z);
        case RiskMeasure::Kind::Mixture: {
            RiskSubgradient g;
            g.xi.assign(z.size(), 0.0);
            std::size_t used = 0;
            for (std::size_t j = 0; j < rho.levels().size(); ++j) {
                const double lambda = rho.lambdas()[j];
                if (lambda == 0.0) continue;
                const RiskSubgradient part = avar_subgradient(rho.levels()[j], z);
                for (std::size_t i = 0; i < z.size(); ++i) g.xi[i] += lambda * part.xi[i];
                g.boundary_hit = g.boundary_hit || part.boundary_hit;
                g.non_unique = g.non_unique || part.non_unique;
                ++used;
            }
            // The sum of level-wise faces lies in the mixture's face; the full
            // face is larger in general and is not parametrized here.
            g.non_unique = g.non_unique || used > 1;
            return g;
        }
    }
    return {};
}

bool in_subdifferential_at_zero(const RiskMeasure& rho, const SampledRandomVariable& z,
                                const std::vector<double>& xi, double tol) {
    if (xi.size() != z.size()) return false;
    CompensatedSum mean;
    for (std::size_t i = 0; i < xi.size(); ++i) mean.add(z.weight(i) * xi[i]);
    if (std::abs(mean.value() - 1.0) > tol) return false;
    double cap = std::numeric_limits<double>::infinity();
    switch (rho.kind()) {
        case RiskMeasure::Kind::Expectation:
            return std::all_of(xi.begin(), xi.end(), [&](double v) { return std::abs(v - 1.0) <= tol; });
        case RiskMeasure::Kind::AVaR:
            cap = 1.0 / rho.alpha();
            break;
        case RiskMeasure::Kind::Mixture:
            cap = 0.0;
            for (std::size_t j = 0; j < rho.levels().size(); ++j) cap += rho.lambdas()[j] / rho.levels()[j];
            break;
    }
    return std::all_of(xi.begin(), xi.end(), [&](double v) { return v >= -tol && v <= cap + tol; });
}

namespace {

// A random element of {0 <= xi <= cap, E[xi] = 1}: uniform draws pulled
// towards 0 or towards cap until the mean is 1; every fourth draw is a
// random tail indicator instead, which is an extreme point of the set.
std::vector<double> random_feasible(double cap, const SampledRandomVariable& z, CounterRng& rng,
                                    std::size_t trial) {
    const std::size_t n = z.size();
    std::vector<double> xi(n);
    if (trial % 4 == 3) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double budget = 1.0;
        for (std::size_t i : order) {
            const double take = std::min(budget, z.weight(i) * cap);
            xi[i] = z.weight(i) > 0.0 ? take / z.weight(i) : 0.0;
            budget -= take;
            if (budget <= 0.0) break;
        }
        return xi;
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xi[i] = rng.uniform(0.0, cap);
        mean += z.weight(i) * xi[i];
    }
    if (mean > 1.0) {
        for (double& v : xi) v /= mean;
    } else if (mean < 1.0) {
        const double s = (cap - 1.0) / (cap - mean);
        for (double& v : xi) v = cap - (cap - v) * s;
    }
    return xi;
}

}  // namespace

RepresentationReport representation_check(const RiskMeasure& rho, const SampledRandomVariable& z,
                                          std::size_t trials, std::uint64_t seed) {
    RepresentationReport report;
    report.rho = risk_value(rho, z);
    report.trials = trials;
    const RiskSubgradient g = risk_subgradient(rho, z);
    report.subgradient_value = z.weighted_dot(g.xi);
    report.max_sampled = -std::numeric_limits<double>::infinity();

    CounterRng rng(seed, 0x7265);
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<double> xi(z.size(), 0.0);
        switch (rho.kind()) {
            case RiskMeasure::Kind::Expectation:
                std::fill(xi.begin(), xi.end(), 1.0);
                break;
            case RiskMeasure::Kind::AVaR:
                xi = random_feasible(1.0 / rho.alpha(), z, rng, t);
                break;
            case RiskMeasure::Kind::Mixture:
                for (std::size_t j = 0; j < rho.levels().size(); ++j) {
                    const auto part = random_feasible(1.0 / rho.levels()[j], z, rng, t);
                    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] += rho.lambdas()[j] * part[i];
                }
                break;
        }
        report.max_sampled = std::max(report.max_sampled, z.weighted_dot(xi));
    }
    if (trials == 0) report.max_sampled = report.subgradient_value;
    const double tol = 1e-9 * relative_scale(report.rho);
    report.passed = report.max_sampled <= report.rho + tol &&
                    std::abs(report.subgradient_value - report.rho) <= tol;
    return report;
}

DirectionalDerivative directional_derivative(const RiskMeasure& rho, const SampledRandomVariable& z,
                                             const std::vector<double>& h) {
    check_nonempty(z);
    if (h.size() != z.size()) throw std::invalid_argument("direction has the wrong length");
    DirectionalDerivative out;
    switch (rho.kind()) {
        case RiskMeasure::Kind::Expectation:
            out.value = z.with_values(h).mean();
            break;
        case RiskMeasure::Kind::AVaR:
            out.value = avar_face_derivative(rho.alpha(), z, h);
            break;
        case RiskMeasure::Kind::Mixture:
            for (std::size_t j = 0; j < rho.levels().size(); ++j) {
                out.value += rho.lambdas()[j] * avar_face_derivative(rho.levels()[j], z, h);
            }
            break;
    }

    double z_max = 0.0, h_max = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        z_max = std::max(z_max, std::abs(z.value(i)));
        h_max = std::max(h_max, std::abs(h[i]));
    }
    if (h_max == 0.0) return out;
    const double scale = std::max(1.0, z_max) / h_max;
    const double base = risk_value(rho, z);
    auto quotient = [&](double step) {
        std::vector<double> shifted(z.values());
        for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += step * h[i];
        return (risk_value(rho, z.with_values(std::move(shifted))) - base) / step;
    };
    out.step_coarse = 1e-3 * scale;
    out.step_fine = 1e-4 * scale;
    out.quotient_coarse = quotient(out.step_coarse);
    out.quotient_fine = quotient(out.step_fine);
    // One-sided quotients carry an O(step) error; eliminate it.
    out.finite_difference = (out.step_coarse * out.quotient_fine - out.step_fine * out.quotient_coarse) /
                            (out.step_coarse - out.step_fine);
    return out;
}

bool CoherenceReport::passed() const noexcept {
    return std::all_of(axioms.begin(), axioms.end(), [](const AxiomResult& a) { return a.passed(); });
}

const AxiomResult& CoherenceReport::find(const std::string& name) const {
    for (const auto& a : axioms) {
        if (a.axiom == name) return a;
    }
    throw std::out_of_range("no axiom named " + name);
}

CoherenceReport coherence_suite(const RiskFunctional& rho, const PairSampler& sampler, std::size_t trials,
                                std::uint64_t seed, double tol) {
    CoherenceReport report;
    for (const char* name : {"convexity", "monotonicity", "translation_invariance", "positive_homogeneity"}) {
        AxiomResult axiom;
        axiom.axiom = name;
        report.axioms.push_back(std::move(axiom));
    }
    auto record = [&](AxiomResult& axiom, double excess, double scale, const SampledRandomVariable& z1,
                      const SampledRandomVariable& z2, double parameter, double lhs, double rhs) {
        ++axiom.trials;
        if (excess <= tol * scale) return;
        ++axiom.violations;
        if (excess > axiom.worst_excess) {
            axiom.worst_excess = excess;
            axiom.witness = AxiomWitness{z1.values(), z2.values(), parameter, lhs, rhs};
        }
    };

    CounterRng rng(seed, 0xc0e);
    for (std::size_t t = 0; t < trials; ++t) {
        auto [z1, z2] = sampler(rng);
        if (z1.size() != z2.size() || z1.weights() != z2.weights()) {
            throw std::invalid_argument("sampler must return pairs on one sample space");
        }
        const double r1 = rho(z1);
        const double r2 = rho(z2);
        const double scale = std::max({1.0, std::abs(r1), std::abs(r2)});
        const std::size_t n = z1.size();

        const double lambda = rng.uniform();
        std::vector<double> mix(n), upper(n), shifted(n), scaled(n);
        const double shift = 3.0 * rng.normal();
        const double beta = std::exp(rng.uniform(std::log(0.25), std::log(4.0)));
        for (std::size_t i = 0; i < n; ++i) {
            mix[i] = lambda * z1.value(i) + (1.0 - lambda) * z2.value(i);
            upper[i] = std::max(z1.value(i), z2.value(i));
            shifted[i] = z1.value(i) + shift;
            scaled[i] = beta * z1.value(i);
        }

        const double conv_lhs = rho(z1.with_values(mix));
        const double conv_rhs = lambda * r1 + (1.0 - lambda) * r2;
        record(report.axioms[0], conv_lhs - conv_rhs, scale, z1, z2, lambda, conv_lhs, conv_rhs);

        const double mono_rhs = rho(z1.with_values(upper));
        record(report.axioms[1], r1 - mono_rhs, scale, z1, z1.with_values(upper), 0.0, r1, mono_rhs);

        const double trans_lhs = rho(z1.with_values(shifted));
        record(report.axioms[2], std::abs(trans_lhs - (r1 + shift)), scale + std::abs(shift), z1, z1, shift,
               trans_lhs, r1 + shift);

        const double hom_lhs = rho(z1.with_values(scaled));
        record(report.axioms[3], std::abs(hom_lhs - beta * r1), scale * beta, z1, z1, beta, hom_lhs, beta * r1);
    }
    return report;
}

PairSampler default_pair_sampler(std::size_t min_size, std::size_t max_size) {
    if (min_size == 0 || max_size < min_size) throw std::invalid_argument("bad sample size range");
    return [min_size, max_size](CounterRng& rng) {
        const std::size_t n = min_size + rng.below(max_size - min_size + 1);
        auto draw = [&](std::size_t law) {
            std::vector<double> v(n);
            for (double& x : v) {
                switch (law) {
                    case 0: x = rng.normal() * 2.0 + 0.5; break;
                    case 1: x = rng.uniform(-3.0, 5.0); break;
                    case 2: x = rng.normal() / std::sqrt(rng.uniform()); break;
                    default: x = std::round(2.0 * rng.normal()) * 0.5; break;  // ties
                }
            }
            return v;
        };
        const std::size_t law1 = rng.below(4);
        const std::size_t law2 = rng.below(4);
        return std::pair{SampledRandomVariable(draw(law1)), SampledRandomVariable(draw(law2))};
    };
}

}  // namespace riskpmp
