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

#include "riskpmp/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "riskpmp/parallel.hpp"
#include "riskpmp/philox.hpp"
#include "riskpmp/variational.hpp"

namespace riskpmp {

namespace {

double check_gradient(const TerminalFunction& fn, std::size_t n, const ProblemValidation& v, std::uint64_t stream) {
    if (!fn.value || !fn.gradient) throw std::invalid_argument("terminal function '" + fn.name + "' is incomplete");
    CounterRng rng(v.seed, stream);
    Vec x(n), grad(n), fd(n), xp(n), xm(n);
    double worst = 0.0;
    for (std::size_t probe = 0; probe < v.probes; ++probe) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = v.probe_scale * rng.normal();
        fn.gradient(x, grad);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
            xp = x;
            xm = x;
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (fn.value(xp) - fn.value(xm)) / (2.0 * h);
        }
        const double err = (grad - fd).cwiseAbs().maxCoeff() / std::max(1.0, grad.cwiseAbs().maxCoeff());
        worst = std::max(worst, err);
    }
    if (!(worst <= v.tolerance)) {
        std::ostringstream msg;
        msg << "gradient of '" << fn.name << "' disagrees with finite differences (relative error " << worst << ")";
        throw std::invalid_argument(msg.str());
    }
    return worst;
}

std::vector<double> terminal_values(const TerminalFunction& fn, const StateEnsemble& states) {
    std::vector<double> out(states.paths());
    for (std::size_t p = 0; p < states.paths(); ++p) out[p] = fn.value(states.terminal(p));
    return out;
}

void mean_and_stderr(const std::vector<double>& v, double& mean, double& se) {
    const double m = static_cast<double>(v.size());
    double s = 0.0, s2 = 0.0;
    for (double x : v) s += x;
    mean = s / m;
    for (double x : v) s2 += (x - mean) * (x - mean);
    se = v.size() > 1 ? std::sqrt(s2 / (m - 1.0) / m) : 0.0;
}

}  // namespace

ProblemSpec::ProblemSpec(DynamicsSpec dynamics, TerminalFunction cost, std::vector<TerminalFunction> constraints,
                         RiskMeasure risk, InitialState x0, double horizon, DiffusionRegime regime,
                         bool convex_velocities_attested, ProblemValidation validation)
    : dyn_(std::move(dynamics)),
      cost_(std::move(cost)),
      constraints_(std::move(constraints)),
      risk_(std::move(risk)),
      x0_(std::move(x0)),
      horizon_(horizon),
      regime_(regime),
      attested_(convex_velocities_attested) {
    if (!(horizon_ > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (x0_.dim() != dyn_.state_dim()) throw std::invalid_argument("initial state has the wrong dimension");
    if (regime_ == DiffusionRegime::ControlledConvex && !attested_) {
        throw std::invalid_argument("a control-dependent diffusion requires attested convex velocity sets");
    }
    ProblemValidation v = validation;
    gradient_error_ = check_gradient(cost_, dyn_.state_dim(), v, 0);
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
        gradient_error_ = std::max(gradient_error_, check_gradient(constraints_[i], dyn_.state_dim(), v, i + 1));
    }
}

double hamiltonian(const DynamicsSpec& dyn, double t, ConstVecRef x, ConstVecRef u, ConstVecRef p, ConstMatRef q) {
    Vec f(dyn.state_dim());
    Mat sigma(dyn.state_dim(), dyn.noise_dim());
    dyn.drift(t, x, u, f);
    dyn.diffusion(t, x, u, sigma);
    return p.dot(f) + q.cwiseProduct(sigma).sum();
}

SlacknessReport slackness_check(const ProblemSpec& problem, const StateEnsemble& states,
                                const Multipliers& multipliers, const CertificateTolerances& tol) {
    if (multipliers.constraints.size() != problem.constraints().size()) {
        throw std::invalid_argument("one multiplier per constraint is required");
    }
    SlacknessReport report;
    for (std::size_t i = 0; i < problem.constraints().size(); ++i) {
        const auto& fn = problem.constraints()[i];
        const auto values = terminal_values(fn, states);
        SlacknessEntry e;
        e.name = fn.name;
        mean_and_stderr(values, e.mean, e.stderr_);
        double abs_mean = 0.0;
        for (double v : values) abs_mean += std::abs(v);
        const double scale = std::max(1.0, abs_mean / static_cast<double>(values.size()));
        e.multiplier = multipliers.constraints[i];
        e.residual = std::abs(e.multiplier * e.mean);
        e.feasible = e.mean <= tol.feasibility;
        e.active = std::abs(e.mean) <= tol.active * scale;
        if (e.active) report.active_set.push_back(i);
        report.feasible = report.feasible && e.feasible;
        report.passed = report.passed && e.feasible && e.residual <= tol.slackness * scale;
        report.entries.push_back(std::move(e));
    }
    return report;
}

RiskGapReport risk_param_gap(const RiskMeasure& rho, const SampledRandomVariable& z, const std::vector<double>& xi) {
    if (!in_subdifferential_at_zero(rho, z, xi)) {
        throw std::invalid_argument("risk parameter is not in the subdifferential at zero");
    }
    RiskGapReport report;
    report.rho = risk_value(rho, z);
    report.attained = z.weighted_dot(xi);
    report.gap = report.rho - report.attained;
    return report;
}

MaximizationGapReport maximization_gap(const DynamicsSpec& dyn, const StateEnsemble& states,
                                       const ControlTable& controls, const CostatePair& costates,
                                       const std::vector<double>& levels) {
    const std::size_t n = dyn.state_dim();
    const std::size_t d = dyn.noise_dim();
    const std::size_t steps = states.steps();
    const std::size_t paths = states.paths();
    if (controls.paths() != paths || controls.steps() != steps || costates.paths() != paths ||
        costates.grid() != states.grid()) {
        throw std::invalid_argument("maximization gap inputs are not on one ensemble");
    }
    const ControlSet& grid_u = dyn.controls();
    const std::size_t npts = grid_u.size();

    MaximizationGapReport report;
    report.levels = levels;
    report.cells = paths * steps;
    report.control_points = npts;
    report.histogram_edges = {0.0, 1e-3, 1e-2, 1e-1, 0.5, 1.0, 2.0, 5.0};

    std::vector<double> gaps(report.cells);
    parallel_for_chunks(paths, [&](std::size_t begin, std::size_t end) {
        Vec f(n), u(dyn.control_dim());
        Mat sigma(n, d);
        const auto eval = [&](double t, const auto& x, const auto& p, const auto& q) {
            dyn.drift(t, x, u, f);
            dyn.diffusion(t, x, u, sigma);
            return p.dot(f) + q.cwiseProduct(sigma).sum();
        };
        for (std::size_t path = begin; path < end; ++path) {
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = states.grid().node(k);
                const auto x = states.at(path, k);
                const auto p = costates.p(path, k);
                const auto q = costates.q(path, k);
                const auto uk = controls.at(path, k);
                std::copy(uk.begin(), uk.end(), u.data());
                const double at_star = eval(t, x, p, q);
                double best = at_star;
                for (std::size_t j = 0; j < npts; ++j) {
                    const auto pt = grid_u.point(j);
                    std::copy(pt.begin(), pt.end(), u.data());
                    best = std::max(best, eval(t, x, p, q));
                }
                gaps[path * steps + k] = best - at_star;
            }
        }
    });

    report.measures.assign(levels.size(), 0.0);
    report.histogram_counts.assign(report.histogram_edges.size(), 0);
    double total = 0.0;
    for (double g : gaps) {
        total += g;
        report.max = std::max(report.max, g);
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (g > 1.0 / levels[i]) report.measures[i] += 1.0;
        }
        const auto it = std::upper_bound(report.histogram_edges.begin(), report.histogram_edges.end(), g);
        report.histogram_counts[static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - report.histogram_edges.begin() - 1))]++;
    }
    const double cells = static_cast<double>(std::max<std::size_t>(1, report.cells));
    report.mean = total / cells;
    for (double& m : report.measures) m /= cells;
    return report;
}

std::string to_string(NormalityReport::Status status) {
    switch (status) {
        case NormalityReport::Status::Vacuous: return "vacuous";
        case NormalityReport::Status::Found: return "found";
        case NormalityReport::Status::NotFound: return "not_found";
    }
    return "unknown";
}

NormalityReport normality_certificate(const ProblemSpec& problem, const StateEnsemble& states,
                                      const ControlLaw& control, const BrownianEnsemble& noise,
                                      const std::vector<std::size_t>& active_set, double margin) {
    NormalityReport report;
    if (active_set.empty()) return report;
    report.status = NormalityReport::Status::NotFound;

    const DynamicsSpec& dyn = problem.dynamics();
    const ControlSet& uset = dyn.controls();
    const std::size_t m = dyn.control_dim();
    const double horizon = states.grid().horizon();

    // Candidate values: the box vertices (or the whole grid when small).
    std::vector<std::vector<double>> values;
    if (uset.has_box()) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
            std::vector<double> v(m);
            for (std::size_t c = 0; c < m; ++c) v[c] = (mask >> c) & 1 ? uset.upper()[c] : uset.lower()[c];
            values.push_back(std::move(v));
        }
    }
    if (!uset.has_box() || uset.size() <= 5) {
        for (std::size_t i = 0; i < uset.size(); ++i) {
            const auto pt = uset.point(i);
            std::vector<double> v(pt.begin(), pt.end());
            if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(std::move(v));
        }
    }

    struct Candidate {
        std::string label;
        ControlLaw law;
    };
    std::vector<Candidate> candidates;
    auto describe = [](const std::vector<double>& v) {
        std::ostringstream out;
        out << "(";
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
        out << ")";
        return out.str();
    };
    for (const auto& v : values) candidates.push_back({"constant " + describe(v), ControlLaw::constant(v)});
    for (const auto& a : values) {
        for (const auto& b : values) {
            if (a == b) continue;
            for (double frac : {0.25, 0.5, 0.75}) {
                const double s = frac * horizon;
                std::ostringstream label;
                label << describe(a) << " until t=" << s << ", then " << describe(b);
                candidates.push_back({label.str(), ControlLaw::open_loop(m, [a, b, s](double t, std::span<double> out) {
                                          const auto& src = t < s ? a : b;
                                          std::copy(src.begin(), src.end(), out.begin());
                                      })});
            }
        }
    }

    const ControlTable table = realize_controls(control, states, noise);
    const LinearCoefficients coeffs = LinearCoefficients::along_trajectory(dyn, states, table);
    const std::size_t n = dyn.state_dim();
    Vec grad(n);
    for (const auto& cand : candidates) {
        ++report.candidates_tried;
        const TangentSelection sel = tangent_from_control(dyn, states, control, cand.law, noise,
                                                          problem.convex_velocities_attested());
        const StateEnsemble y = solve_linearized(coeffs, *sel.forcing, noise);
        std::vector<double> vals;
        bool all_negative = true;
        for (std::size_t i : active_set) {
            double total = 0.0;
            for (std::size_t path = 0; path < states.paths(); ++path) {
                problem.constraints()[i].gradient(states.terminal(path), grad);
                total += grad.dot(y.terminal(path));
            }
            vals.push_back(total / static_cast<double>(states.paths()));
            all_negative = all_negative && vals.back() < -margin;
        }
        if (all_negative) {
            report.status = NormalityReport::Status::Found;
            report.witness = cand.label;
            report.values = std::move(vals);
            return report;
        }
    }
    return report;
}

std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

PmpCertificate certify(const ProblemSpec& problem, const CandidateBundle& bundle, const CertificateTolerances& tol) {
    if (!bundle.states || !bundle.controls || !bundle.costates) {
        throw std::invalid_argument("candidate bundle needs states, controls and costates");
    }
    PmpCertificate cert;
    cert.multipliers = bundle.multipliers;
    bundle.multipliers.validate();
    auto add = [&](std::string name, Verdict v, std::string detail) {
        cert.conditions.push_back({std::move(name), v, std::move(detail)});
    };
    std::ostringstream detail;

    // Feasibility and complementary slackness.
    cert.slackness = slackness_check(problem, *bundle.states, bundle.multipliers, tol);
    add("feasibility", cert.slackness.feasible ? Verdict::Pass : Verdict::Fail,
        cert.slackness.feasible ? "all constraints hold in mean" : "a constraint mean exceeds the feasibility tolerance");
    if (problem.constraints().empty()) {
        add("complementary_slackness", Verdict::Pass, "no constraints (vacuous)");
    } else {
        double worst = 0.0;
        for (const auto& e : cert.slackness.entries) worst = std::max(worst, e.residual);
        detail.str("");
        detail << "max residual " << worst;
        add("complementary_slackness", cert.slackness.passed ? Verdict::Pass : Verdict::Fail, detail.str());
    }

    // Risk parameter.
    const SampledRandomVariable z(terminal_values(problem.cost(), *bundle.states));
    try {
        cert.risk_gap = risk_param_gap(problem.risk(), z, bundle.xi.xi);
        detail.str("");
        detail << "rho - E[xi Z] = " << cert.risk_gap.gap;
        const bool ok = cert.risk_gap.gap <= tol.risk_gap && cert.risk_gap.gap >= -1e-9;
        add("risk_parameter", ok ? Verdict::Pass : Verdict::Fail, detail.str());
    } catch (const std::invalid_argument& e) {
        add("risk_parameter", Verdict::Fail, e.what());
    }

    // Adjoint equation.
    const AdjointDiagnostics& adj = bundle.costates->diagnostics();
    cert.bsde_residual = adj.bsde_residual;
    cert.bsde_bound = tol.bsde_residual_bound ? tol.bsde_residual_bound : adj.residual_bound;
    detail.str("");
    detail << "max_k E|r_k| = " << cert.bsde_residual;
    if (!cert.bsde_bound) {
        add("adjoint_equation", Verdict::Inconclusive, detail.str() + " (no residual bound configured)");
    } else if (!std::isfinite(cert.bsde_residual) || cert.bsde_residual > *cert.bsde_bound) {
        detail << " > bound " << *cert.bsde_bound;
        add("adjoint_equation", Verdict::Inconclusive, detail.str());
    } else {
        detail << " <= bound " << *cert.bsde_bound;
        add("adjoint_equation", Verdict::Pass, detail.str());
    }

    // Pointwise maximization of the Hamiltonian.
    cert.maximization = maximization_gap(problem.dynamics(), *bundle.states, *bundle.controls, *bundle.costates,
                                         tol.gap_levels);
    {
        const double measure = cert.maximization.measures.empty() ? 0.0 : cert.maximization.measures.front();
        detail.str("");
        detail << "measure of {gap > 1/" << (tol.gap_levels.empty() ? 0.0 : tol.gap_levels.front()) << "} = " << measure
               << " (limit " << tol.gap_measure << ")";
        add("maximization", measure <= tol.gap_measure ? Verdict::Pass : Verdict::Fail, detail.str());
    }

    // Normality of the multipliers.
    if (cert.slackness.active_set.empty()) {
        cert.normality.status = NormalityReport::Status::Vacuous;
        add("normality", Verdict::Pass, "no active constraints (vacuous)");
    } else if (bundle.control_law && bundle.noise) {
        cert.normality = normality_certificate(problem, *bundle.states, *bundle.control_law, *bundle.noise,
                                               cert.slackness.active_set, tol.normality_margin);
        if (cert.normality.status == NormalityReport::Status::Found) {
            add("normality", Verdict::Pass, "descent direction: " + cert.normality.witness);
        } else if (bundle.multipliers.normal()) {
            add("normality", Verdict::Inconclusive, "no common descent direction found among the candidates");
        } else {
            add("normality", Verdict::Pass, "abnormal multipliers supplied; nothing to certify");
        }
    } else {
        cert.normality.status = NormalityReport::Status::NotFound;
        add("normality", Verdict::Inconclusive, "control law or Brownian paths missing from the bundle");
    }

    // Martingale structure of phi' p.
    if (bundle.fundamental) {
        cert.martingale = martingale_check(*bundle.costates, *bundle.fundamental);
        add("costate_martingale", cert.martingale->passed ? Verdict::Pass : Verdict::Inconclusive,
            cert.martingale->passed ? "E[phi' p] flat within 5 stderr" : "E[phi' p] drifts beyond 5 stderr");
    }

    cert.verdict = Verdict::Pass;
    for (const auto& c : cert.conditions) {
        if (c.verdict == Verdict::Fail) cert.verdict = Verdict::Fail;
    }
    if (cert.verdict != Verdict::Fail) {
        for (const auto& c : cert.conditions) {
            if (c.verdict == Verdict::Inconclusive) cert.verdict = Verdict::Inconclusive;
        }
    }
    for (const auto& c : cert.conditions) {
        if (c.verdict != Verdict::Pass) cert.causes.push_back(c.name + ": " + c.detail);
    }
    switch (cert.verdict) {
        case Verdict::Pass:
            cert.summary = "no violation of the necessary conditions detected at the configured tolerances; "
                           "this does not establish optimality";
            break;
        case Verdict::Fail:
            cert.summary = "the candidate violates at least one necessary condition";
            break;
        case Verdict::Inconclusive:
            cert.summary = "no violation found, but at least one check could not be completed reliably";
            break;
    }
    return cert;
}

PolicyAnalysis analyze_policy(const ProblemSpec& problem, ControlLaw law, const BrownianEnsemble& noise,
                              const AnalysisOptions& options) {
    PolicyAnalysis out;
    out.law = std::move(law);
    out.states.emplace(euler_maruyama(problem.dynamics(), *out.law, problem.initial_state(), noise));
    if (!out.states->aborts().empty()) {
        const PathAbort& a = out.states->aborts().front();
        throw std::runtime_error("simulation left the finite range on path " + std::to_string(a.path) + " at step " +
                                 std::to_string(a.step) + ": " + a.reason);
    }
    out.controls.emplace(realize_controls(*out.law, *out.states, noise));

    out.cost_samples.resize(noise.paths());
    for (std::size_t p = 0; p < noise.paths(); ++p) out.cost_samples[p] = problem.cost().value(out.states->terminal(p));
    const RiskMeasure& rho = options.risk_override ? *options.risk_override : problem.risk();
    out.xi = risk_subgradient(rho, SampledRandomVariable(out.cost_samples));

    out.fundamental.emplace(fundamental_matrices(
        LinearCoefficients::along_trajectory(problem.dynamics(), *out.states, *out.controls), noise));
    std::vector<TerminalGradient> constraint_gradients;
    for (const auto& c : problem.constraints()) constraint_gradients.push_back(c.gradient);
    const TerminalCostate terminal = assemble_terminal(out.xi, problem.cost().gradient, constraint_gradients,
                                                       options.multipliers, *out.states);
    out.costates.emplace(solve_adjoint(problem.dynamics(), *out.states, *out.controls, terminal, *out.fundamental,
                                       noise, options.adjoint));

    if (options.run_certificate) {
        CandidateBundle bundle;
        bundle.states = &*out.states;
        bundle.controls = &*out.controls;
        bundle.control_law = &*out.law;
        bundle.noise = &noise;
        bundle.costates = &*out.costates;
        bundle.fundamental = &*out.fundamental;
        bundle.xi = out.xi;
        bundle.multipliers = options.multipliers;
        out.certificate = certify(problem, bundle, options.tolerances);
    }
    return out;
}

std::string certificate_json(const PmpCertificate& c, int indent) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["schema"] = "pmp_certificate_v1";
    j["verdict"] = to_string(c.verdict);
    j["summary"] = c.summary;
    j["causes"] = c.causes;
    ordered_json conditions = ordered_json::array();
    for (const auto& cond : c.conditions) {
        conditions.push_back({{"name", cond.name}, {"verdict", to_string(cond.verdict)}, {"detail", cond.detail}});
    }
    j["conditions"] = conditions;
    j["multipliers"] = {{"cost", c.multipliers.cost}, {"constraints", c.multipliers.constraints}};

    ordered_json entries = ordered_json::array();
    for (const auto& e : c.slackness.entries) {
        entries.push_back({{"name", e.name},
                           {"mean", e.mean},
                           {"stderr", e.stderr_},
                           {"multiplier", e.multiplier},
                           {"residual", e.residual},
                           {"active", e.active},
                           {"feasible", e.feasible}});
    }
    j["slackness"] = {{"feasible", c.slackness.feasible},
                      {"passed", c.slackness.passed},
                      {"active_set", c.slackness.active_set},
                      {"entries", entries}};
    j["risk_parameter"] = {{"rho", c.risk_gap.rho}, {"attained", c.risk_gap.attained}, {"gap", c.risk_gap.gap}};
    j["adjoint"] = {{"bsde_residual", c.bsde_residual},
                    {"bound", c.bsde_bound ? ordered_json(*c.bsde_bound) : ordered_json(nullptr)}};
    j["maximization"] = {{"mean", c.maximization.mean},
                         {"max", c.maximization.max},
                         {"cells", c.maximization.cells},
                         {"control_points", c.maximization.control_points},
                         {"levels", c.maximization.levels},
                         {"measures", c.maximization.measures},
                         {"histogram",
                          {{"edges", c.maximization.histogram_edges}, {"counts", c.maximization.histogram_counts}}}};
    j["normality"] = {{"status", to_string(c.normality.status)},
                      {"witness", c.normality.witness},
                      {"values", c.normality.values},
                      {"candidates_tried", c.normality.candidates_tried}};
    if (c.martingale) {
        auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
        j["martingale"] = {{"passed", c.martingale->passed},
                           {"adjusted_slope", vec(c.martingale->adjusted_slope)},
                           {"adjusted_slope_stderr", vec(c.martingale->adjusted_slope_stderr)},
                           {"raw_slope", vec(c.martingale->raw_slope)},
                           {"raw_slope_stderr", vec(c.martingale->raw_slope_stderr)}};
    } else {
        j["martingale"] = nullptr;
    }
    return j.dump(indent);
}

}  // namespace riskpmp
