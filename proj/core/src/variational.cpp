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

#include "riskpmp/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "riskpmp/parallel.hpp"

namespace riskpmp {

namespace {

std::span<double> as_span(Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TangentSelection tangent_laws(const ControlLaw& base, const ControlLaw& direction) {
    if (base.dim() != direction.dim()) throw std::invalid_argument("control laws differ in dimension");
    return TangentSelection{base, direction, std::nullopt, false, {}};
}

TangentSelection tangent_from_control(const DynamicsSpec& dyn, const StateEnsemble& x_star,
                                      const ControlLaw& base, const ControlLaw& direction,
                                      const BrownianEnsemble& noise, bool convex_velocities_attested) {
    TangentSelection sel = tangent_laws(base, direction);
    const std::size_t n = dyn.state_dim();
    const std::size_t d = dyn.noise_dim();
    const std::size_t steps = x_star.steps();
    const TimeGrid& grid = x_star.grid();
    if (noise.grid() != grid || noise.paths() != x_star.paths()) {
        throw std::invalid_argument("x* and the Brownian ensemble are on different grids");
    }
    Forcing forcing(x_star.paths(), steps, n, d);
    std::vector<char> moved(x_star.paths(), 0);

    parallel_for_chunks(x_star.paths(), [&](std::size_t begin, std::size_t end) {
        Vec u(dyn.control_dim()), w(dyn.control_dim()), fu(n), fw(n);
        Mat su(n, d), sw(n, d);
        std::vector<double> increments(steps * d), bw(d);
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, increments);
            std::fill(bw.begin(), bw.end(), 0.0);
            for (std::size_t k = 0; k <= steps; ++k) {
                const auto x = x_star.at(path, k);
                const double t = grid.node(k);
                if (k < steps) {
                    const ControlQuery q{k, t, path, {x.data(), n}, bw};
                    base.evaluate(q, as_span(u));
                    direction.evaluate(q, as_span(w));
                }
                dyn.drift(t, x, u, fu);
                dyn.drift(t, x, w, fw);
                dyn.diffusion(t, x, u, su);
                dyn.diffusion(t, x, w, sw);
                forcing.drift(path, k) = fw - fu;
                forcing.noise(path, k) = sw - su;
                if (k < steps && (sw - su).cwiseAbs().maxCoeff() > 0.0) moved[path] = 1;
                if (k < steps) {
                    for (std::size_t c = 0; c < d; ++c) bw[c] += increments[k * d + c];
                }
            }
        }
    });
    sel.forcing = std::move(forcing);
    sel.moves_diffusion = std::any_of(moved.begin(), moved.end(), [](char m) { return m != 0; });
    if (sel.moves_diffusion && !convex_velocities_attested) {
        sel.warnings.push_back(
            "control enters the diffusion but convex velocity sets are not attested; "
            "control-difference directions need not be tangent to the reachable set");
    }
    return sel;
}

RateTable linearization_rate(const DynamicsSpec& dyn, const TangentSelection& selection, const InitialState& x0,
                             const BrownianEnsemble& noise, const std::vector<double>& eps,
                             double vanishing_floor) {
    if (eps.empty()) throw std::invalid_argument("need at least one eps");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0 && eps[i] <= 1.0)) throw std::invalid_argument("eps must lie in (0, 1]");
        if (i > 0 && !(eps[i] < eps[i - 1])) throw std::invalid_argument("eps must be decreasing");
    }
    const std::size_t n = dyn.state_dim();
    const std::size_t d = dyn.noise_dim();
    const std::size_t m = dyn.control_dim();
    const std::size_t ne = eps.size();
    const TimeGrid& grid = noise.grid();
    const std::size_t steps = grid.steps();
    const double dt = grid.dt();
    std::vector<double> sup(noise.paths() * ne, 0.0);

    parallel_for_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        Vec x(n), y(n), u(m), w(m), f(n), fw(n), g1(n), ye(n), fe(n), dev(n);
        Mat sigma(n, d), sw(n, d), g2(n, d), a(n, n), dd(n, n * d), se(n, d);
        std::vector<Vec> xe(ne, Vec(n)), xe_next(ne, Vec(n));
        std::vector<double> increments(steps * d), bw(d);
        const auto ni = static_cast<Eigen::Index>(n);
        for (std::size_t path = begin; path < end; ++path) {
            noise.path_increments(path, increments);
            std::fill(bw.begin(), bw.end(), 0.0);
            x = x0.at(path);
            y.setZero();
            for (auto& v : xe) v = x;
            double* best = sup.data() + path * ne;
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = grid.node(k);
                const ControlQuery q{k, t, path, as_span(x), bw};
                selection.base.evaluate(q, as_span(u));
                selection.direction.evaluate(q, as_span(w));
                dyn.drift(t, x, u, f);
                dyn.diffusion(t, x, u, sigma);
                dyn.drift(t, x, w, fw);
                dyn.diffusion(t, x, w, sw);
                g1 = fw - f;
                g2 = sw - sigma;
                dyn.drift_jacobian(t, x, u, a);
                dyn.diffusion_jacobian(t, x, u, dd);
                Eigen::Map<const Vec> dw(increments.data() + k * d, static_cast<Eigen::Index>(d));

                // Perturbed states use u* along x*, plus eps times the forcing.
                for (std::size_t e = 0; e < ne; ++e) {
                    dyn.drift(t, xe[e], u, fe);
                    dyn.diffusion(t, xe[e], u, se);
                    xe_next[e] = xe[e] + (fe + eps[e] * g1) * dt;
                    xe_next[e].noalias() += (se + eps[e] * g2) * dw;
                }
                // Linearized state.
                ye = y + (a * y + g1) * dt;
                ye.noalias() += g2 * dw;
                for (std::size_t i = 0; i < d; ++i) {
                    ye.noalias() += (dd.middleCols(static_cast<Eigen::Index>(i) * ni, ni) * y) * dw[static_cast<Eigen::Index>(i)];
                }
                x += f * dt;
                x.noalias() += sigma * dw;
                y = ye;
                for (std::size_t e = 0; e < ne; ++e) {
                    xe[e] = xe_next[e];
                    dev = xe[e] - x - eps[e] * y;
                    best[e] = std::max(best[e], dev.norm());
                }
                for (std::size_t c = 0; c < d; ++c) bw[c] += increments[k * d + c];
            }
        }
    });

    RateTable table;
    table.eps = eps;
    table.r.assign(ne, 0.0);
    for (std::size_t path = 0; path < noise.paths(); ++path) {
        for (std::size_t e = 0; e < ne; ++e) table.r[e] += sup[path * ne + e];
    }
    for (std::size_t e = 0; e < ne; ++e) table.r[e] /= static_cast<double>(noise.paths()) * eps[e];

    table.nonincreasing = true;
    for (std::size_t e = 1; e < ne; ++e) table.nonincreasing = table.nonincreasing && table.r[e] <= table.r[e - 1];
    table.halved = table.r.back() < table.r.front() / 2.0;
    table.vanishing = std::all_of(table.r.begin(), table.r.end(), [&](double r) { return r <= vanishing_floor; });
    table.passed = table.vanishing || (table.nonincreasing && table.halved);
    return table;
}

ContinuityReport selection_continuity(const LinearCoefficients& coeffs, const Forcing& a, const Forcing& b,
                                      const BrownianEnsemble& noise) {
    ContinuityReport report;
    const Forcing diff = a - b;
    report.forcing_gap = diff.l2_norm(noise.grid().dt());
    if (report.forcing_gap == 0.0) return report;
    // y is linear in the forcing, so y_a - y_b solves the equation forced by a - b.
    const StateEnsemble y = solve_linearized(coeffs, diff, noise);
    double total = 0.0;
    for (std::size_t path = 0; path < y.paths(); ++path) {
        double best = 0.0;
        for (std::size_t k = 0; k <= y.steps(); ++k) best = std::max(best, y.at(path, k).squaredNorm());
        total += best;
    }
    report.solution_gap = std::sqrt(total / static_cast<double>(y.paths()));
    report.ratio = report.solution_gap / report.forcing_gap;
    return report;
}

bool in_butterfly(double x, double y, double tol) {
    if (x < -tol || x > 1.0 + tol || y < -tol) return false;
    if (x <= 0.5) return y <= 1.0 - 2.0 * x + tol;
    return y <= 2.0 * x - 1.0 + tol;
}

namespace {

using Point = std::array<double, 2>;

double dist_sq(const Point& a, const Point& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

Point nearest_on_segment(const Point& p, const Point& a, const Point& b) {
    const double ex = b[0] - a[0];
    const double ey = b[1] - a[1];
    const double len = ex * ex + ey * ey;
    const double s = std::clamp(((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len, 0.0, 1.0);
    return {a[0] + s * ex, a[1] + s * ey};
}

// Nearest point of a closed triangle: the point itself if inside, otherwise
// the best of the three edge projections.
Point nearest_in_triangle(const Point& p, const std::array<Point, 3>& tri) {
    auto cross = [](const Point& o, const Point& a, const Point& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    const double c0 = cross(tri[0], tri[1], p);
    const double c1 = cross(tri[1], tri[2], p);
    const double c2 = cross(tri[2], tri[0], p);
    const bool inside = (c0 >= 0 && c1 >= 0 && c2 >= 0) || (c0 <= 0 && c1 <= 0 && c2 <= 0);
    if (inside) return p;
    Point best = nearest_on_segment(p, tri[0], tri[1]);
    for (const auto& [i, j] : {std::pair{1, 2}, std::pair{2, 0}}) {
        const Point cand = nearest_on_segment(p, tri[static_cast<std::size_t>(i)], tri[static_cast<std::size_t>(j)]);
        if (dist_sq(p, cand) < dist_sq(p, best)) best = cand;
    }
    return best;
}

}  // namespace

ItoCounterexample ito_counterexample() {
    const Point target{0.5, 1.0};
    const std::array<Point, 3> left{Point{0.0, 0.0}, Point{0.5, 0.0}, Point{0.0, 1.0}};
    const std::array<Point, 3> right{Point{0.5, 0.0}, Point{1.0, 0.0}, Point{1.0, 1.0}};

    ItoCounterexample out;
    const Point a = nearest_in_triangle(target, left);
    const Point b = nearest_in_triangle(target, right);
    out.nearest_point = dist_sq(target, a) <= dist_sq(target, b) ? a : b;
    out.pointwise_distance_sq = std::min(dist_sq(target, a), dist_sq(target, b));
    // The set is the same at every t in [0, 1], so by the isometry the best
    // any selection can do is the pointwise minimum integrated over [0, 1].
    out.ito_gap_lower_bound = out.pointwise_distance_sq * 1.0;

    // f~ = (0, 1) on [0, 1/2], (1, 1) on [1/2, 1].
    const Point first{0.0, 1.0};
    const Point second{1.0, 1.0};
    out.lebesgue_selection_admissible = in_butterfly(first[0], first[1]) && in_butterfly(second[0], second[1]);
    const Point integral{0.5 * first[0] + 0.5 * second[0], 0.5 * first[1] + 0.5 * second[1]};
    out.lebesgue_gap = dist_sq(target, integral);
    return out;
}

}  // namespace riskpmp
