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


#include "runners.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <unistd.h>

#include "riskpmp/ensemble_io.hpp"
#include "riskpmp/parallel.hpp"
#include "riskpmp/philox.hpp"
#include "riskpmp/variational.hpp"

namespace riskpmp::cli {

using nlohmann::json;

namespace {

// Independent streams carved out of the scenario seed for the side tasks of
// risk-eval; the Brownian ensemble uses the seed itself.
constexpr std::uint64_t kSampleStream = 0x5a;
constexpr std::uint64_t kOracleStream = 0x0c00;

json to_json(const Vec& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

void fold(RunOutcome& out, Verdict v, const std::string& cause) {
    if (v == Verdict::Fail) {
        out.status = Verdict::Fail;
    } else if (v == Verdict::Inconclusive && out.status == Verdict::Pass) {
        out.status = Verdict::Inconclusive;
    }
    if (v != Verdict::Pass) out.causes.push_back(cause);
}

void add_csv(RunOutcome& out, const std::string& name, const CsvTable& table) {
    out.artifacts.push_back({name, table.render()});
}

// ------------------------------------------------------------ model plumbing

SopInstance sop_instance(const SopModel& m) {
    SopInstance s = m.instance;
    if (m.expectation) s.alpha = 1.0;  // AV@R at level 1 is the expectation
    return s;
}

DynamicsSpec dynamics_of(const Model& model) {
    return std::visit(
        [](const auto& m) -> DynamicsSpec {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ScalarLinearModel>) return scalar_linear(m.a, m.b);
            else if constexpr (std::is_same_v<T, CubicModel>) return cubic_double_integrator(m.c, m.noise);
            else if constexpr (std::is_same_v<T, SopModel>) return sop_dynamics(m.instance);
            else return lq_dynamics(m.example);
        },
        model);
}

Vec initial_state_of(const Model& model) {
    return std::visit(
        [](const auto& m) -> Vec {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ScalarLinearModel>) return Vec::Constant(1, m.x0);
            else if constexpr (std::is_same_v<T, CubicModel>) return Eigen::Map<const Vec>(m.x0.data(), 2);
            else if constexpr (std::is_same_v<T, SopModel>) return m.instance.initial_state();
            else return Vec::Zero(1);
        },
        model);
}

ProblemSpec problem_of(const Model& model) {
    if (const auto* sop = std::get_if<SopModel>(&model)) return build_sop(sop_instance(*sop));
    return build_lq(std::get<LqModel>(model).example);
}

ControlLaw law_of(const Policy& policy, const Model& model, const TimeGrid& grid) {
    if (const auto* c = std::get_if<ConstantPolicy>(&policy)) return ControlLaw::constant(c->value);
    if (const auto* b = std::get_if<BangBangPolicy>(&policy)) return b->law(grid);
    return std::get<PredictedMissPolicy>(policy).law(std::get<SopModel>(model).instance);
}

BrownianEnsemble ensemble_of(const Scenario& s, std::size_t noise_dim) {
    const double horizon = model_horizon(*s.model, s.ensemble);
    return BrownianEnsemble(TimeGrid(horizon, s.ensemble.steps), noise_dim, s.ensemble.paths, s.seed);
}

void add_path_artifacts(RunOutcome& out, const Scenario& s, const StateEnsemble& states, std::size_t noise_dim) {
    if (s.output.paths_csv) {
        std::ostringstream csv;
        write_csv(csv, view_of(states, "x"));
        out.artifacts.push_back({"paths.csv", csv.str()});
    }
    if (s.output.binary_dump) {
        // write_binary works on files; round-trip through a scratch file.
        const auto tmp = std::filesystem::temp_directory_path() /
                         ("riskpmp-dump-" + std::to_string(s.seed) + "-" + std::to_string(::getpid()) + ".bin");
        DumpHeader header{states.dim(), noise_dim, states.steps(), states.paths(), s.seed};
        write_binary(tmp, header, view_of(states, "x"));
        std::ifstream in(tmp, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::filesystem::remove(tmp);
        out.artifacts.push_back({"paths.bin", std::move(bytes)});
    }
}

void add_costate_artifact(RunOutcome& out, const Scenario& s, const CostatePair& costates) {
    if (!s.output.costates_csv) return;
    const std::vector<double> storage = costates.interleaved();
    std::ostringstream csv;
    write_csv(csv, view_of(costates, storage));
    out.artifacts.push_back({"costates.csv", csv.str()});
}

json diagnostics_json(const AdjointDiagnostics& d) {
    json j{{"basis_size", d.basis_size},
           {"rank_deficient_steps", d.rank_deficient_steps},
           {"ridge_flagged_steps", d.ridge_flagged_steps},
           {"max_ridge_effect", d.max_ridge_effect},
           {"max_residual_rms", d.max_residual_rms},
           {"bsde_residual", d.bsde_residual},
           {"residual_bound", d.residual_bound ? json(*d.residual_bound) : json(nullptr)},
           {"within_bound", d.residual_within_bound()}};
    return j;
}

json martingale_json(const MartingaleReport& m) {
    return json{{"passed", m.passed},
                {"adjusted_slope", to_json(m.adjusted_slope)},
                {"adjusted_slope_stderr", to_json(m.adjusted_slope_stderr)},
                {"raw_slope", to_json(m.raw_slope)},
                {"raw_slope_stderr", to_json(m.raw_slope_stderr)}};
}

// Ensemble and time average of q over [0, T), one entry per (state, noise) pair.
json mean_q_json(const CostatePair& c) {
    const std::size_t n = c.state_dim(), d = c.noise_dim(), steps = c.grid().steps();
    Mat mean = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t p = 0; p < c.paths(); ++p) {
        for (std::size_t k = 0; k < steps; ++k) mean += c.q(p, k);
    }
    mean /= static_cast<double>(c.paths() * steps);
    json rows = json::array();
    for (Eigen::Index i = 0; i < mean.rows(); ++i) rows.push_back(to_json(mean.row(i).transpose()));
    return rows;
}

json safety_json(const SafetyReport& s) {
    return json{{"avar_terminal", s.avar_terminal}, {"margin", s.margin}, {"stderr", s.stderr_},
                {"band", s.band},                   {"safe", s.safe}};
}

json bangbang_json(const BangBangReport& b) {
    json intervals = json::array();
    for (const auto& i : b.singular_intervals) intervals.push_back({i.start, i.end});
    return json{{"applicable", b.applicable},
                {"reason", b.reason},
                {"bang_fraction", b.bang_fraction},
                {"fraction_threshold", b.fraction_threshold},
                {"singular_intervals", intervals},
                {"xi_miss", b.xi_miss},
                {"xi_miss_stderr", b.xi_miss_stderr},
                {"xi_miss_away_from_zero", b.xi_miss_away_from_zero},
                {"consistent", b.consistent},
                {"chain", b.chain}};
}

CsvTable costate_mean_table(const BangBangReport& b, const TimeGrid& grid) {
    CsvTable t{{"t", "mean_p_y", "stderr_p_y", "mean_p_v", "stderr_p_v"}, {}};
    for (std::size_t k = 0; k < b.mean_p_y.size(); ++k) {
        t.rows.push_back({grid.node(k), b.mean_p_y[k], b.stderr_p_y[k], b.mean_p_v[k], b.stderr_p_v[k]});
    }
    return t;
}

void fold_certificate(RunOutcome& out, const PmpCertificate& cert) {
    for (const auto& c : cert.conditions) fold(out, c.verdict, c.name + ": " + c.detail);
}

// ------------------------------------------------------------------- kinds

RunOutcome run_counterexample(const Scenario&) {
    RunOutcome out;
    const ItoCounterexample c = ito_counterexample();
    out.results = json{{"pointwise_distance_sq", c.pointwise_distance_sq},
                       {"nearest_point", {c.nearest_point[0], c.nearest_point[1]}},
                       {"ito_gap_lower_bound", c.ito_gap_lower_bound},
                       {"expected_lower_bound", 0.2},
                       {"lebesgue_gap", c.lebesgue_gap},
                       {"lebesgue_selection_admissible", c.lebesgue_selection_admissible}};
    fold(out, std::abs(c.ito_gap_lower_bound - 0.2) <= 1e-9 ? Verdict::Pass : Verdict::Fail,
         "ito_gap_lower_bound differs from 1/5");
    fold(out, c.lebesgue_gap == 0.0 && c.lebesgue_selection_admissible ? Verdict::Pass : Verdict::Fail,
         "the two-piece selection does not reproduce the hull integral");
    return out;
}

RunOutcome run_simulate(const Scenario& s) {
    RunOutcome out;
    const DynamicsSpec dyn = dynamics_of(*s.model);
    const BrownianEnsemble noise = ensemble_of(s, dyn.noise_dim());
    const ControlLaw law = law_of(*s.policy, *s.model, noise.grid());
    const InitialState x0 = InitialState::fixed(initial_state_of(*s.model));
    const StateEnsemble states = euler_maruyama(dyn, law, x0, noise);

    const std::size_t n = states.dim(), paths = states.paths();
    Vec mean = Vec::Zero(static_cast<Eigen::Index>(n)), sq = Vec::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t p = 0; p < paths; ++p) {
        mean += states.terminal(p);
        sq += states.terminal(p).cwiseAbs2();
    }
    mean /= static_cast<double>(paths);
    Vec stderr_ = Vec::Zero(static_cast<Eigen::Index>(n));
    if (paths > 1) {
        const Vec var = (sq / static_cast<double>(paths) - mean.cwiseAbs2()) * (static_cast<double>(paths) /
                                                                                 static_cast<double>(paths - 1));
        stderr_ = (var.cwiseMax(0.0) / static_cast<double>(paths)).cwiseSqrt();
    }
    const AprioriBound bound = a_priori_bound(dyn, law, x0, noise);
    out.results = json{{"model", model_name(*s.model)},
                       {"terminal_mean", to_json(mean)},
                       {"terminal_stderr", to_json(stderr_)},
                       {"aborted_paths", states.aborts().size()},
                       {"a_priori", {{"mean_sup_norm", bound.mean_sup_norm},
                                     {"data_magnitude", bound.data_magnitude},
                                     {"constant", bound.constant}}}};
    fold(out, states.aborts().empty() ? Verdict::Pass : Verdict::Fail, "some paths left the finite range");

    CsvTable order{{"steps", "dt", "error"}, {}};
    if (s.strong_order) {
        if (!dyn.has_closed_form()) throw ConfigError("strong_order: the model has no closed-form solution");
        const StrongOrderResult r =
            strong_convergence_order(dyn, law, initial_state_of(*s.model), noise, s.strong_order->levels);
        for (std::size_t i = 0; i < r.steps.size(); ++i) {
            order.rows.push_back({static_cast<double>(r.steps[i]), r.dt[i], r.errors[i]});
        }
        const auto [lo, hi] = s.strong_order->band;
        out.results["strong_order"] = {{"order", r.order ? json(*r.order) : json(nullptr)}, {"band", {lo, hi}}};
        fold(out, r.order && *r.order >= lo && *r.order <= hi ? Verdict::Pass : Verdict::Fail,
             "strong order estimate outside its band");
    }
    add_csv(out, "order.csv", order);
    add_path_artifacts(out, s, states, dyn.noise_dim());
    return out;
}

std::vector<double> draw_samples(const std::string& distribution, std::size_t size, CounterRng& rng) {
    std::vector<double> z(size);
    for (double& v : z) {
        if (distribution == "normal") v = rng.normal();
        else if (distribution == "uniform") v = rng.uniform();
        else v = std::exp(rng.normal());
    }
    return z;
}

RunOutcome run_risk_eval(const Scenario& s) {
    RunOutcome out;
    const RiskEvalConfig& c = *s.risk_eval;
    const RiskMeasure rho = c.risk.build();
    out.results["risk"] = rho.describe();

    if (c.samples) {
        std::vector<double> values = c.samples->values;
        if (values.empty()) {
            CounterRng rng(s.seed, kSampleStream);
            values = draw_samples(c.samples->distribution, c.samples->size, rng);
        }
        std::optional<SampledRandomVariable> z;
        try {
            z = c.samples->weights.empty() ? SampledRandomVariable(values)
                                           : SampledRandomVariable(values, c.samples->weights);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("samples: ") + e.what());
        }
        const double value = risk_value(rho, *z);
        const RiskSubgradient xi = risk_subgradient(rho, *z);
        double mean_xi = 0.0, e_xi_z = 0.0;
        for (std::size_t i = 0; i < z->size(); ++i) {
            mean_xi += z->weight(i) * xi.xi[i];
            e_xi_z += z->weight(i) * xi.xi[i] * z->value(i);
        }
        json sample{{"size", z->size()},
                    {"value", value},
                    {"mean_xi", mean_xi},
                    {"e_xi_z", e_xi_z},
                    {"in_subdifferential", in_subdifferential_at_zero(rho, *z, xi.xi)},
                    {"non_unique", xi.non_unique}};
        if (xi.has_quantile) {
            sample["quantile"] = xi.quantile;
            sample["quantile_upper"] = xi.quantile_upper;
            sample["boundary_mass"] = xi.boundary_mass;
        }
        if (rho.kind() == RiskMeasure::Kind::AVaR) {
            sample["tail"] = avar_tail(rho.alpha(), *z);
            sample["infimum"] = avar_infimum(rho.alpha(), *z);
        }
        const bool ok = std::abs(mean_xi - 1.0) <= 1e-9 && std::abs(e_xi_z - value) <= 1e-9 * std::max(1.0, std::abs(value));
        fold(out, ok ? Verdict::Pass : Verdict::Fail, "subgradient identities E[xi] = 1, E[xi Z] = rho violated");
        if (c.representation_trials) {
            const RepresentationReport r = representation_check(rho, *z, *c.representation_trials, s.seed);
            sample["representation"] = {{"rho", r.rho},
                                        {"max_sampled", r.max_sampled},
                                        {"subgradient_value", r.subgradient_value},
                                        {"trials", r.trials},
                                        {"passed", r.passed}};
            fold(out, r.passed ? Verdict::Pass : Verdict::Fail, "dual representation check failed");
        }
        out.results["samples"] = sample;
    }

    if (c.oracle) {
        if (rho.kind() != RiskMeasure::Kind::AVaR) throw ConfigError("oracle: needs risk.measure = avar");
        const OracleConfig& o = *c.oracle;
        double worst_value = 0.0, worst_mean = 0.0, worst_dual = 0.0;
        const double log_lo = std::log(static_cast<double>(o.min_size));
        const double log_hi = std::log(static_cast<double>(o.max_size));
        for (std::size_t i = 0; i < o.cases; ++i) {
            CounterRng rng(s.seed, kOracleStream + i);
            const auto size = std::clamp<std::size_t>(
                static_cast<std::size_t>(std::llround(std::exp(rng.uniform(log_lo, log_hi)))), o.min_size, o.max_size);
            std::vector<double> values(size), weights(size);
            double total = 0.0;
            for (std::size_t j = 0; j < size; ++j) {
                // ties on purpose: a coarse lattice makes quantile atoms common
                values[j] = (j % 3 == 0) ? std::round(4.0 * rng.normal()) / 4.0 : rng.normal();
                weights[j] = rng.uniform(0.05, 1.0);
                total += weights[j];
            }
            for (double& w : weights) w /= total;
            const SampledRandomVariable z(values, weights);
            const double tail = avar_tail(rho.alpha(), z);
            const double inf = avar_infimum(rho.alpha(), z);
            const RiskSubgradient xi = risk_subgradient(rho, z);
            double mean_xi = 0.0, dual = 0.0;
            for (std::size_t j = 0; j < size; ++j) {
                mean_xi += weights[j] * xi.xi[j];
                dual += weights[j] * xi.xi[j] * values[j];
            }
            worst_value = std::max(worst_value, std::abs(tail - inf));
            worst_mean = std::max(worst_mean, std::abs(mean_xi - 1.0));
            worst_dual = std::max(worst_dual, std::abs(dual - tail));
        }
        const bool ok = worst_value <= o.tolerance && worst_mean <= o.tolerance && worst_dual <= o.tolerance;
        out.results["oracle"] = {{"cases", o.cases},
                                 {"max_tail_vs_infimum", worst_value},
                                 {"max_mean_xi_error", worst_mean},
                                 {"max_dual_error", worst_dual},
                                 {"tolerance", o.tolerance},
                                 {"passed", ok}};
        fold(out, ok ? Verdict::Pass : Verdict::Fail, "sorted-tail and infimum formulas disagree");
    }

    if (c.coherence) {
        const CoherenceConfig& h = *c.coherence;
        const CoherenceReport r =
            coherence_suite([&rho](const SampledRandomVariable& z) { return risk_value(rho, z); },
                            default_pair_sampler(h.min_size, h.max_size), h.trials, s.seed, h.tolerance);
        json axioms = json::object();
        for (const auto& a : r.axioms) {
            axioms[a.axiom] = {{"trials", a.trials}, {"violations", a.violations}, {"worst_excess", a.worst_excess}};
        }
        out.results["coherence"] = {{"axioms", axioms}, {"passed", r.passed()}};
        fold(out, r.passed() ? Verdict::Pass : Verdict::Fail, "coherence axioms violated");
    }
    return out;
}

RunOutcome run_convergence(const Scenario& s) {
    RunOutcome out;
    const ConvergenceConfig& c = *s.convergence;
    const DynamicsSpec dyn = dynamics_of(*s.model);
    const BrownianEnsemble noise = ensemble_of(s, dyn.noise_dim());
    const ControlLaw law = law_of(*s.policy, *s.model, noise.grid());
    const Vec x0 = initial_state_of(*s.model);
    out.results["test"] = c.test;
    out.results["model"] = model_name(*s.model);

    CsvTable rate{{"eps", "r"}, {}};
    CsvTable order{{"steps", "dt", "error"}, {}};
    if (c.test == "linearization-rate") {
        const RateTable t = linearization_rate(dyn, tangent_laws(law, ControlLaw::constant(c.direction)),
                                               InitialState::fixed(x0), noise, c.eps);
        for (std::size_t i = 0; i < t.eps.size(); ++i) rate.rows.push_back({t.eps[i], t.r[i]});
        std::sort(rate.rows.begin(), rate.rows.end(), [](const auto& a, const auto& b) { return a[0] > b[0]; });
        out.results["rate"] = {{"eps", t.eps},
                               {"r", t.r},
                               {"nonincreasing", t.nonincreasing},
                               {"halved", t.halved},
                               {"vanishing", t.vanishing},
                               {"passed", t.passed}};
        fold(out, t.passed ? Verdict::Pass : Verdict::Fail, "linearization error ratio does not decay");
    } else if (c.test == "strong-order") {
        if (!dyn.has_closed_form()) throw ConfigError("convergence: strong-order needs a model with a closed form");
        const StrongOrderResult r = strong_convergence_order(dyn, law, x0, noise, c.levels);
        for (std::size_t i = 0; i < r.steps.size(); ++i) {
            order.rows.push_back({static_cast<double>(r.steps[i]), r.dt[i], r.errors[i]});
        }
        out.results["strong_order"] = {{"order", r.order ? json(*r.order) : json(nullptr)},
                                       {"errors", r.errors},
                                       {"band", {c.band.first, c.band.second}}};
        fold(out, r.order && *r.order >= c.band.first && *r.order <= c.band.second ? Verdict::Pass : Verdict::Fail,
             "strong order estimate outside its band");
    } else {
        const StateEnsemble states = euler_maruyama(dyn, law, InitialState::fixed(x0), noise);
        const ControlTable controls = realize_controls(law, states, noise);
        const FundamentalMatrices fm =
            fundamental_matrices(LinearCoefficients::along_trajectory(dyn, states, controls), noise);
        const InverseCheck& ic = fm.inverse_check();
        out.results["inverse"] = {{"max_deviation", ic.max_deviation},
                                  {"worst_path", ic.worst_path},
                                  {"worst_step", ic.worst_step},
                                  {"threshold", c.threshold}};
        fold(out, ic.max_deviation <= c.threshold ? Verdict::Pass : Verdict::Fail,
             "psi phi deviates from the identity beyond the threshold");
    }
    add_csv(out, "rate.csv", rate);
    add_csv(out, "order.csv", order);
    return out;
}

// adjoint and certify share everything up to the verdict.
RunOutcome run_policy_analysis(const Scenario& s, bool certify) {
    RunOutcome out;
    const ProblemSpec problem = problem_of(*s.model);
    const BrownianEnsemble noise = ensemble_of(s, problem.dynamics().noise_dim());
    AnalysisOptions options;
    options.adjoint = s.adjoint;
    options.tolerances = s.tolerances;
    options.run_certificate = certify;
    const auto* sop = std::get_if<SopModel>(&*s.model);
    if (sop && sop->expectation) options.risk_override = RiskMeasure::expectation();
    const PolicyAnalysis run = analyze_policy(problem, law_of(*s.policy, *s.model, noise.grid()), noise, options);

    const MartingaleReport martingale = martingale_check(*run.costates, *run.fundamental);
    const SampledRandomVariable z(run.cost_samples);
    out.results["model"] = model_name(*s.model);
    out.results["risk"] = (options.risk_override ? *options.risk_override : problem.risk()).describe();
    out.results["risk_value"] = risk_value(options.risk_override ? *options.risk_override : problem.risk(), z);
    out.results["adjoint"] = diagnostics_json(run.costates->diagnostics());
    out.results["mean_q"] = mean_q_json(*run.costates);
    out.results["martingale"] = martingale_json(martingale);
    out.results["inverse_check"] = run.fundamental->inverse_check().max_deviation;

    if (certify) {
        out.results["certificate"] = json::parse(certificate_json(*run.certificate));
        fold_certificate(out, *run.certificate);
        add_csv(out, "gap_histogram.csv", gap_histogram_table(run.certificate->maximization));
    } else {
        fold(out, martingale.passed ? Verdict::Pass : Verdict::Fail, "costate drift is not flat within the band");
        fold(out, run.costates->diagnostics().residual_within_bound() ? Verdict::Pass : Verdict::Fail,
             "BSDE residual above its bound");
    }
    if (sop) {
        std::vector<double> y(noise.paths());
        for (std::size_t p = 0; p < y.size(); ++p) y[p] = run.states->terminal(p)[0];
        const SopInstance instance = sop_instance(*sop);
        const SafetyReport safety = safety_check(instance, y);
        const BangBangReport bang =
            bangbang_necessity(instance, safety, *run.states, *run.controls, *run.costates, run.xi);
        out.results["safety"] = safety_json(safety);
        out.results["bangbang"] = bangbang_json(bang);
        add_csv(out, "costate_means.csv", costate_mean_table(bang, noise.grid()));
    }
    add_csv(out, "martingale.csv", martingale_table(martingale));
    add_path_artifacts(out, s, *run.states, problem.dynamics().noise_dim());
    add_costate_artifact(out, s, *run.costates);
    return out;
}

RunOutcome run_sop_solve(const Scenario& s) {
    RunOutcome out;
    const SopInstance& instance = std::get<SopModel>(*s.model).instance;
    const BrownianEnsemble noise(TimeGrid(instance.horizon, s.ensemble.steps), 1, s.ensemble.paths, s.seed);
    SopPipelineOptions options;
    options.shoot = s.search;
    options.adjoint = s.adjoint;
    options.tolerances = s.tolerances;
    options.sigmas = s.safety.sigmas;
    options.bang_fraction = s.safety.bang_fraction;
    const SopSolution sol = solve_sop(instance, noise, options);

    json policy{{"family", sol.shot.family == PolicyFamily::OpenLoop ? "open-loop" : "predicted-miss"},
                {"description", sol.shot.description},
                {"cost", sol.shot.cost},
                {"evaluations", sol.shot.evaluations},
                {"indirect_accepted", sol.shot.indirect_accepted}};
    if (sol.shot.open_loop) {
        policy["switches"] = sol.shot.open_loop->switches;
        policy["initial_sign"] = sol.shot.open_loop->initial_sign;
    }
    if (sol.shot.feedback) {
        policy["gamma"] = sol.shot.feedback->gamma;
        policy["delta"] = sol.shot.feedback->delta;
    }
    const MartingaleReport martingale = martingale_check(*sol.costates, *sol.fundamental, s.safety.sigmas);
    out.results["policy"] = policy;
    out.results["certificate"] = json::parse(certificate_json(sol.certificate));
    out.results["adjoint"] = diagnostics_json(sol.costates->diagnostics());
    out.results["safety"] = safety_json(sol.safety);
    out.results["bangbang"] = bangbang_json(sol.bangbang);

    fold_certificate(out, sol.certificate);
    if (sol.bangbang.applicable) {
        fold(out, sol.bangbang.consistent ? Verdict::Pass : Verdict::Fail,
             "safe trajectory but the control is not bang-bang on the required share of cells");
    }

    CsvTable history{{"evaluation", "incumbent_cost"}, {}};
    for (std::size_t i = 0; i < sol.shot.history.size(); ++i) {
        history.rows.push_back({static_cast<double>(i + 1), sol.shot.history[i]});
    }
    add_csv(out, "history.csv", history);
    add_csv(out, "martingale.csv", martingale_table(martingale));
    add_csv(out, "gap_histogram.csv", gap_histogram_table(sol.certificate.maximization));
    add_csv(out, "costate_means.csv", costate_mean_table(sol.bangbang, noise.grid()));
    add_path_artifacts(out, s, *sol.states, 1);
    add_costate_artifact(out, s, *sol.costates);
    return out;
}

}  // namespace

RunOutcome run_scenario(const Scenario& s) {
    switch (s.kind) {
        case Kind::Counterexample: return run_counterexample(s);
        case Kind::Simulate: return run_simulate(s);
        case Kind::RiskEval: return run_risk_eval(s);
        case Kind::Convergence: return run_convergence(s);
        case Kind::Adjoint: return run_policy_analysis(s, false);
        case Kind::Certify: return run_policy_analysis(s, true);
        case Kind::SopSolve: return run_sop_solve(s);
    }
    throw std::logic_error("unhandled scenario kind");
}

}  // namespace riskpmp::cli
