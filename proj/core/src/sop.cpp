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

#include "riskpmp/sop.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "riskpmp/regression.hpp"

namespace riskpmp {

void SopInstance::validate() const {
    if (!(y0 < target)) throw std::invalid_argument("the planner needs y0 < y_T");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (!(noise >= 0.0)) throw std::invalid_argument("noise scale must be nonnegative");
    if (control_points < 2) throw std::invalid_argument("the control grid needs both endpoints");
}

Vec SopInstance::initial_state() const { return Vec{{y0, v0}}; }

DynamicsSpec sop_dynamics(const SopInstance& instance) {
    instance.validate();
    const double noise = instance.noise;
    DynamicsFunctions fns;
    fns.state_dim = 2;
    fns.control_dim = 1;
    fns.noise_dim = 1;
    fns.drift = [](double, ConstVecRef x, ConstVecRef u, VecRef out) {
        out[0] = x[1];
        out[1] = u[0];
    };
    fns.diffusion = [noise](double, ConstVecRef, ConstVecRef, MatRef out) {
        out(0, 0) = noise;
        out(1, 0) = 0.0;
    };
    fns.drift_jacobian = [](double, ConstVecRef, ConstVecRef, MatRef out) {
        out << 0.0, 1.0, 0.0, 0.0;
    };
    fns.diffusion_jacobian = [](double, ConstVecRef, ConstVecRef, MatRef out) { out.setZero(); };
    return DynamicsSpec(std::move(fns), ControlSet::box({-1.0}, {1.0}, instance.control_points), 1.0);
}

ProblemSpec build_sop(const SopInstance& instance) {
    const double target = instance.target;
    TerminalFunction cost{
        "terminal_miss",
        [target](ConstVecRef x) { return 0.5 * (x[0] - target) * (x[0] - target); },
        [target](ConstVecRef x, VecRef g) {
            g[0] = x[0] - target;
            g[1] = 0.0;
        },
    };
    return ProblemSpec(sop_dynamics(instance), std::move(cost), {}, RiskMeasure::avar(instance.alpha),
                       InitialState::fixed(instance.initial_state()), instance.horizon, DiffusionRegime::Uncontrolled);
}

namespace {

double terminal_cost(const SopInstance& instance, const std::vector<double>& terminal_y) {
    std::vector<double> z(terminal_y.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double miss = terminal_y[i] - instance.target;
        z[i] = 0.5 * miss * miss;
    }
    return risk_value(RiskMeasure::avar(instance.alpha), SampledRandomVariable(std::move(z)));
}

}  // namespace

double sop_cost(const SopInstance& instance, const ControlLaw& law, const BrownianEnsemble& noise) {
    const DynamicsSpec dyn = sop_dynamics(instance);
    const TerminalSample sample = simulate_terminal(dyn, law, InitialState::fixed(instance.initial_state()), noise);
    std::vector<double> y(sample.paths);
    for (std::size_t p = 0; p < sample.paths; ++p) y[p] = sample.at(p)[0];
    return terminal_cost(instance, y);
}

double BangBangPolicy::value(double t) const {
    int sign = initial_sign;
    for (double s : switches) {
        if (t >= s) sign = -sign;
    }
    return static_cast<double>(sign);
}

double BangBangPolicy::cell_average(double a, double b) const {
    if (!(b > a)) return value(a);
    std::vector<double> cuts{a};
    for (double s : switches) {
        if (s > a && s < b) cuts.push_back(s);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += value(cuts[i]) * (cuts[i + 1] - cuts[i]);
    return total / (b - a);
}

ControlLaw BangBangPolicy::law(const TimeGrid& grid) const {
    const BangBangPolicy policy = *this;
    return ControlLaw::feedback(1, [policy, grid](const ControlQuery& q, std::span<double> out) {
        out[0] = policy.cell_average(grid.node(q.step), grid.node(q.step + 1));
    });
}

std::string BangBangPolicy::describe() const {
    std::ostringstream out;
    out << "open-loop bang-bang: start " << (initial_sign > 0 ? "+1" : "-1") << ", switches at {";
    for (std::size_t i = 0; i < switches.size(); ++i) out << (i ? ", " : "") << switches[i];
    out << "}";
    return out.str();
}

ControlLaw PredictedMissPolicy::law(const SopInstance& instance) const {
    const double gamma_ = gamma;
    const double delta_ = delta;
    const double target = instance.target;
    const double horizon = instance.horizon;
    return ControlLaw::feedback(1, [=](const ControlQuery& q, std::span<double> out) {
        const double y = q.state[0];
        const double v = q.state[1];
        const double s = target - delta_ - y - gamma_ * v * (horizon - q.time);
        out[0] = s >= 0.0 ? 1.0 : -1.0;
    });
}

std::string PredictedMissPolicy::describe() const {
    std::ostringstream out;
    out << "predicted-miss feedback: gamma " << gamma << ", delta " << delta;
    return out.str();
}

SweepPolicy::Coefficients SweepPolicy::basis(double e, double v) {
    Coefficients b;
    b << 1.0, e, v, e * e, e * v, v * v, e * e * e;
    return b;
}

SweepPolicy SweepPolicy::from_predicted_miss(const PredictedMissPolicy& start, const SopInstance& instance,
                                             const TimeGrid& grid) {
    // y_T - delta - y - gamma v (T - t) = e - delta + (1 - gamma) v (T - t)
    SweepPolicy policy;
    policy.coefficients.resize(grid.steps());
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        Coefficients c = Coefficients::Zero();
        c[0] = -start.delta;
        c[1] = 1.0;
        c[2] = (1.0 - start.gamma) * (instance.horizon - grid.node(k));
        policy.coefficients[k] = c;
    }
    return policy;
}

ControlLaw SweepPolicy::law(const SopInstance& instance) const {
    const auto coefficients_ = std::make_shared<const std::vector<Coefficients>>(coefficients);
    const double target = instance.target;
    const double horizon = instance.horizon;
    return ControlLaw::feedback(1, [=](const ControlQuery& q, std::span<double> out) {
        const double y = q.state[0];
        const double v = q.state[1];
        const double e = target - y - v * (horizon - q.time);
        out[0] = (*coefficients_)[q.step].dot(basis(e, v)) >= 0.0 ? 1.0 : -1.0;
    });
}

ControlLaw ShootResult::law(const SopInstance& instance, const TimeGrid& grid) const {
    if (sweep) return sweep->law(instance);
    if (feedback) return feedback->law(instance);
    if (open_loop) return open_loop->law(grid);
    throw std::logic_error("shoot result holds no policy");
}

namespace {

// Golden-section search for a minimum of fn on [lo, hi]; returns the best
// point evaluated. fn is expected to record its own evaluations.
double golden_section(double lo, double hi, std::size_t iterations, const std::function<double(double)>& fn) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = fn(c), fd = fn(d);
    double best_x = fc <= fd ? c : d;
    double best_f = std::min(fc, fd);
    for (std::size_t i = 0; i < iterations; ++i) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = fn(c);
            if (fc < best_f) {
                best_f = fc;
                best_x = c;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = fn(d);
            if (fd < best_f) {
                best_f = fd;
                best_x = d;
            }
        }
    }
    return best_x;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return out;
}

}  // namespace

ShootResult shoot(const SopInstance& instance, const BrownianEnsemble& noise, const ShootConfig& config) {
    instance.validate();
    if (std::abs(noise.grid().horizon() - instance.horizon) > 1e-12 * instance.horizon) {
        throw std::invalid_argument("Brownian ensemble horizon differs from the instance horizon");
    }
    const TimeGrid& grid = noise.grid();
    ShootResult result;
    result.family = config.family;
    result.cost = std::numeric_limits<double>::infinity();

    auto record = [&](double cost) {
        ++result.evaluations;
        result.history.push_back(std::min(cost, result.history.empty() ? cost : result.history.back()));
        return cost;
    };

    if (config.family == PolicyFamily::OpenLoop) {
        BangBangPolicy best;
        auto evaluate = [&](const BangBangPolicy& p) {
            const double c = record(sop_cost(instance, p.law(grid), noise));
            if (c < result.cost) {
                result.cost = c;
                best = p;
            }
            return c;
        };
        const auto times = linspace(0.0, instance.horizon, config.coarse_points);
        for (int sign : {1, -1}) {
            for (std::size_t i = 0; i < times.size(); ++i) {
                for (std::size_t j = i; j < times.size(); ++j) evaluate({{times[i], times[j]}, sign});
            }
        }
        for (std::size_t round = 0; round < config.sweeps; ++round) {
            for (std::size_t coord = 0; coord < 2; ++coord) {
                const BangBangPolicy base = best;
                const double lo = coord == 0 ? 0.0 : base.switches[0];
                const double hi = coord == 0 ? base.switches[1] : instance.horizon;
                if (!(hi > lo)) continue;
                golden_section(lo, hi, config.golden_iterations, [&](double s) {
                    BangBangPolicy p = base;
                    p.switches[coord] = s;
                    return evaluate(p);
                });
            }
        }
        result.open_loop = best;
        result.description = best.describe();
        return result;
    }

    PredictedMissPolicy best;
    auto evaluate = [&](const PredictedMissPolicy& p) {
        const double c = record(sop_cost(instance, p.law(instance), noise));
        if (c < result.cost) {
            result.cost = c;
            best = p;
        }
        return c;
    };
    for (double g : linspace(config.gamma_range.first, config.gamma_range.second, config.coarse_points)) {
        for (double d : linspace(config.delta_range.first, config.delta_range.second, config.coarse_points)) {
            evaluate({g, d});
        }
    }
    for (std::size_t round = 0; round < config.sweeps; ++round) {
        const PredictedMissPolicy base_g = best;
        golden_section(config.gamma_range.first, config.gamma_range.second, config.golden_iterations,
                       [&](double g) { return evaluate({g, base_g.delta}); });
        const PredictedMissPolicy base_d = best;
        golden_section(config.delta_range.first, config.delta_range.second, config.golden_iterations,
                       [&](double d) { return evaluate({base_d.gamma, d}); });
    }
    result.feedback = best;
    result.description = best.describe();

    if (config.indirect_iterations == 0) return result;

    // Damped indirect sweeps. sign(p_v(t)) = sign(E[xi (y_T - y(T)) | F_t])
    // for this problem, so each sweep fits that conditional expectation on
    // b(e, v) and nudges the switching surface towards it.
    const DynamicsSpec dyn = sop_dynamics(instance);
    const InitialState x0 = InitialState::fixed(instance.initial_state());
    const RiskMeasure rho = RiskMeasure::avar(instance.alpha);
    SweepPolicy current = SweepPolicy::from_predicted_miss(best, instance, grid);
    const std::size_t paths = noise.paths();
    const std::size_t steps = grid.steps();
    for (std::size_t iter = 1; iter <= config.indirect_iterations; ++iter) {
        const StateEnsemble states = euler_maruyama(dyn, current.law(instance), x0, noise);
        std::vector<double> y(paths), z(paths);
        for (std::size_t p = 0; p < paths; ++p) {
            y[p] = states.terminal(p)[0];
            z[p] = 0.5 * (y[p] - instance.target) * (y[p] - instance.target);
        }
        const SampledRandomVariable zs(z);
        const double cost = record(risk_value(rho, zs));
        if (cost < result.cost) {
            result.cost = cost;
            result.sweep = current;
            result.indirect_accepted = iter;
        }
        if (iter == config.indirect_iterations) break;

        const RiskSubgradient xi = risk_subgradient(rho, zs);
        Mat target(static_cast<Eigen::Index>(paths), 1);
        for (std::size_t p = 0; p < paths; ++p) target(static_cast<Eigen::Index>(p), 0) = xi.xi[p] * (instance.target - y[p]);
        Mat design(static_cast<Eigen::Index>(paths), SweepPolicy::kBasis);
        for (std::size_t k = 0; k < steps; ++k) {
            const double t = grid.node(k);
            for (std::size_t p = 0; p < paths; ++p) {
                const auto x = states.at(p, k);
                const double e = instance.target - x[0] - x[1] * (instance.horizon - t);
                design.row(static_cast<Eigen::Index>(p)) = SweepPolicy::basis(e, x[1]).transpose();
            }
            const LeastSquaresProjector projector(design);
            SweepPolicy::Coefficients fit = projector.coefficients(target).col(0);
            fit /= std::max(std::abs(fit[1]), 1e-12);
            current.coefficients[k] += config.damping * (fit - current.coefficients[k]);
        }
    }
    if (result.sweep) {
        std::ostringstream out;
        out << "indirect sweep iterate " << result.indirect_accepted << " from " << best.describe();
        result.description = out.str();
    }
    return result;
}

SafetyReport safety_check(const SopInstance& instance, const std::vector<double>& terminal_y, double sigmas) {
    if (terminal_y.empty()) throw std::invalid_argument("no terminal samples");
    const RiskMeasure rho = RiskMeasure::avar(instance.alpha);
    const SampledRandomVariable z(terminal_y);
    SafetyReport report;
    report.avar_terminal = risk_value(rho, z);
    report.margin = instance.target - report.avar_terminal;
    // Influence function of AV@R: q + (z - q)^+ / alpha - AV@R.
    const double q = risk_subgradient(rho, z).quantile;
    const double m = static_cast<double>(terminal_y.size());
    double s2 = 0.0;
    for (double y : terminal_y) {
        const double inf = q + std::max(y - q, 0.0) / instance.alpha - report.avar_terminal;
        s2 += inf * inf;
    }
    report.stderr_ = terminal_y.size() > 1 ? std::sqrt(s2 / (m - 1.0) / m) : 0.0;
    report.band = sigmas * report.stderr_;
    report.safe = report.margin > report.band;
    return report;
}

BangBangReport bangbang_necessity(const SopInstance& instance, const SafetyReport& safety,
                                  const StateEnsemble& states, const ControlTable& controls,
                                  const CostatePair& costates, const RiskSubgradient& xi,
                                  double fraction_threshold, double sigmas) {
    const std::size_t paths = states.paths();
    const std::size_t steps = states.steps();
    if (controls.paths() != paths || controls.steps() != steps || costates.paths() != paths ||
        xi.xi.size() != paths) {
        throw std::invalid_argument("bang-bang analysis inputs are not on one ensemble");
    }
    BangBangReport report;
    report.fraction_threshold = fraction_threshold;
    const double m = static_cast<double>(paths);

    std::size_t bang = 0;
    for (std::size_t p = 0; p < paths; ++p) {
        for (std::size_t k = 0; k < steps; ++k) {
            if (std::abs(controls.at(p, k)[0]) >= 1.0 - 1e-9) ++bang;
        }
    }
    report.bang_fraction = static_cast<double>(bang) / static_cast<double>(std::max<std::size_t>(1, paths * steps));

    report.mean_p_y.assign(steps + 1, 0.0);
    report.stderr_p_y.assign(steps + 1, 0.0);
    report.mean_p_v.assign(steps + 1, 0.0);
    report.stderr_p_v.assign(steps + 1, 0.0);
    for (std::size_t k = 0; k <= steps; ++k) {
        double sy = 0, sy2 = 0, sv = 0, sv2 = 0;
        for (std::size_t p = 0; p < paths; ++p) {
            const auto pk = costates.p(p, k);
            sy += pk[0];
            sv += pk[1];
        }
        const double my = sy / m, mv = sv / m;
        for (std::size_t p = 0; p < paths; ++p) {
            const auto pk = costates.p(p, k);
            sy2 += (pk[0] - my) * (pk[0] - my);
            sv2 += (pk[1] - mv) * (pk[1] - mv);
        }
        report.mean_p_y[k] = my;
        report.mean_p_v[k] = mv;
        report.stderr_p_y[k] = paths > 1 ? std::sqrt(sy2 / (m - 1.0) / m) : 0.0;
        report.stderr_p_v[k] = paths > 1 ? std::sqrt(sv2 / (m - 1.0) / m) : 0.0;
    }

    // Runs of at least five steps on which both mean costates are
    // indistinguishable from zero.
    const double dt = states.grid().dt();
    std::size_t run = 0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const bool small = k < steps && std::abs(report.mean_p_y[k]) <= sigmas * report.stderr_p_y[k] &&
                           std::abs(report.mean_p_v[k]) <= sigmas * report.stderr_p_v[k];
        if (small) {
            ++run;
            continue;
        }
        if (run >= 5) report.singular_intervals.push_back({static_cast<double>(k - run) * dt, static_cast<double>(k) * dt});
        run = 0;
    }

    double s = 0, s2 = 0;
    std::vector<double> miss(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        miss[p] = xi.xi[p] * (states.terminal(p)[0] - instance.target);
        s += miss[p];
    }
    report.xi_miss = s / m;
    for (double v : miss) s2 += (v - report.xi_miss) * (v - report.xi_miss);
    report.xi_miss_stderr = paths > 1 ? std::sqrt(s2 / (m - 1.0) / m) : 0.0;
    report.xi_miss_away_from_zero = std::abs(report.xi_miss) > sigmas * report.xi_miss_stderr;

    std::ostringstream line;
    line << "safety: AV@R(y(T)) = " << safety.avar_terminal << ", margin " << safety.margin << " vs band " << safety.band
         << (safety.safe ? " (safe)" : " (not safe)");
    report.chain.push_back(line.str());
    if (instance.noise == 0.0) {
        report.reason = "deterministic instance: the bang-bang principle concerns the noisy problem";
    } else if (!safety.safe) {
        report.reason = "trajectory not safe within the Monte Carlo band; the principle makes no claim";
    } else {
        report.applicable = true;
    }
    line.str("");
    line << "|u| = 1 on " << 100.0 * report.bang_fraction << "% of cells (threshold " << 100.0 * fraction_threshold << "%)";
    report.chain.push_back(line.str());
    line.str("");
    line << report.singular_intervals.size()
         << " interval(s) of >= 5 steps with E[p_y] and E[p_v] both within the zero band";
    report.chain.push_back(line.str());
    line.str("");
    line << "E[xi (y(T) - y_T)] = " << report.xi_miss << " +/- " << report.xi_miss_stderr
         << (report.xi_miss_away_from_zero ? " (away from zero)" : " (indistinguishable from zero)");
    report.chain.push_back(line.str());
    if (report.applicable) {
        report.consistent = report.bang_fraction >= fraction_threshold && report.singular_intervals.empty() &&
                            report.xi_miss_away_from_zero;
        report.chain.push_back(report.consistent ? "consistent with the bang-bang principle"
                                                 : "not consistent with the bang-bang principle");
    } else {
        report.chain.push_back("not applicable: " + report.reason);
    }
    return report;
}

SopSolution analyze_sop_policy(const SopInstance& instance, const BrownianEnsemble& noise, ControlLaw law,
                               const SopPipelineOptions& options) {
    const ProblemSpec problem = build_sop(instance);
    AnalysisOptions analysis;
    analysis.adjoint = options.adjoint;
    analysis.tolerances = options.tolerances;
    if (options.expectation_risk) analysis.risk_override = RiskMeasure::expectation();
    analysis.run_certificate = !options.expectation_risk;
    PolicyAnalysis run = analyze_policy(problem, std::move(law), noise, analysis);

    SopSolution out;
    out.law = std::move(run.law);
    out.states = std::move(run.states);
    out.controls = std::move(run.controls);
    out.fundamental = std::move(run.fundamental);
    out.xi = std::move(run.xi);
    out.costates = std::move(run.costates);
    if (run.certificate) out.certificate = std::move(*run.certificate);

    std::vector<double> y(noise.paths());
    for (std::size_t p = 0; p < noise.paths(); ++p) y[p] = out.states->terminal(p)[0];
    out.safety = safety_check(instance, y, options.sigmas);
    out.bangbang = bangbang_necessity(instance, out.safety, *out.states, *out.controls, *out.costates, out.xi,
                                      options.bang_fraction, options.sigmas);
    return out;
}

SopSolution solve_sop(const SopInstance& instance, const BrownianEnsemble& noise, const SopPipelineOptions& options) {
    ShootResult shot = shoot(instance, noise, options.shoot);
    SopSolution out = analyze_sop_policy(instance, noise, shot.law(instance, noise.grid()), options);
    out.shot = std::move(shot);
    return out;
}

}  // namespace riskpmp
