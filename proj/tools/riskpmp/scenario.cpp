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


#include "scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace riskpmp::cli {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxPaths = 10'000'000;
constexpr std::size_t kMaxSteps = 1'000'000;

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        return convert<T>(j_.at(key), at(key));
    }

    template <class T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(at(key) + ": required");
        return convert<T>(j_.at(key), at(key));
    }

    // Sub-object, or nullptr when absent.
    const json* object(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    std::string at(const std::string& key) const { return where_ + "." + key; }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
        }
    }

private:
    template <class T>
    static T convert(const json& v, const std::string& where);

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

template <>
double Fields::convert<double>(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + ": must be finite");
    return x;
}

template <>
std::uint64_t Fields::convert<std::uint64_t>(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(where + ": expected a non-negative integer");
}

template <>
int Fields::convert<int>(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return v.get<int>();
}

template <>
bool Fields::convert<bool>(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
    return v.get<bool>();
}

template <>
std::string Fields::convert<std::string>(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

template <>
std::vector<double> Fields::convert<std::vector<double>>(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<double>(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

template <>
std::vector<std::size_t> Fields::convert<std::vector<std::size_t>>(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<std::size_t>(v[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

template <>
std::pair<double, double> Fields::convert<std::pair<double, double>>(const json& v, const std::string& where) {
    const auto xs = convert<std::vector<double>>(v, where);
    if (xs.size() != 2 || !(xs[0] <= xs[1])) throw ConfigError(where + ": expected [low, high] with low <= high");
    return {xs[0], xs[1]};
}

void check(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

// ---------------------------------------------------------------- sections

EnsembleConfig parse_ensemble(const json& j) {
    Fields f(j, "ensemble");
    EnsembleConfig e;
    e.steps = f.require<std::size_t>("steps");
    e.paths = f.require<std::size_t>("paths");
    if (f.has("horizon")) e.horizon = f.require<double>("horizon");
    f.finish();
    check(e.steps >= 1 && e.steps <= kMaxSteps, "ensemble.steps: must be in [1, 1e6]");
    check(e.paths >= 1 && e.paths <= kMaxPaths, "ensemble.paths: must be in [1, 1e7]");
    check(!e.horizon || *e.horizon > 0.0, "ensemble.horizon: must be positive");
    return e;
}

json echo_ensemble(const EnsembleConfig& e) {
    json j{{"steps", e.steps}, {"paths", e.paths}};
    if (e.horizon) j["horizon"] = *e.horizon;
    return j;
}

SopInstance read_instance_fields(Fields& f) {
    SopInstance s;
    s.y0 = f.get("y0", s.y0);
    s.v0 = f.get("v0", s.v0);
    s.target = f.get("target", s.target);
    s.horizon = f.get("horizon", s.horizon);
    s.alpha = f.get("alpha", s.alpha);
    s.noise = f.get("noise", s.noise);
    s.control_points = f.get("control_points", s.control_points);
    return s;
}

void validate_instance(const SopInstance& s, const std::string& where) {
    try {
        s.validate();
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

json echo_instance(const SopInstance& s) {
    return json{{"y0", s.y0},       {"v0", s.v0},       {"target", s.target}, {"horizon", s.horizon},
                {"alpha", s.alpha}, {"noise", s.noise}, {"control_points", s.control_points}};
}

Model parse_model(const json& j, const std::string& where) {
    Fields f(j, where);
    const std::string name = f.require<std::string>("name");
    Model model;
    if (name == "scalar-linear") {
        ScalarLinearModel m;
        m.a = f.get("a", m.a);
        m.b = f.get("b", m.b);
        m.x0 = f.get("x0", m.x0);
        model = m;
    } else if (name == "cubic-double-integrator") {
        CubicModel m;
        m.c = f.get("c", m.c);
        m.noise = f.get("noise", m.noise);
        m.x0 = f.get("x0", m.x0);
        check(m.x0.size() == 2, f.at("x0") + ": expected two entries (position, velocity)");
        check(m.c >= 0.0, f.at("c") + ": must be non-negative");
        model = m;
    } else if (name == "sop") {
        SopModel m;
        m.instance = read_instance_fields(f);
        const std::string risk = f.get<std::string>("risk", "avar");
        check(risk == "avar" || risk == "expectation", f.at("risk") + ": expected \"avar\" or \"expectation\"");
        m.expectation = risk == "expectation";
        validate_instance(m.instance, where);
        model = m;
    } else if (name == "lq") {
        LqModel m;
        m.example.s = f.get("s", m.example.s);
        m.example.target = f.get("target", m.example.target);
        m.example.horizon = f.get("horizon", m.example.horizon);
        m.example.control_points = f.get("control_points", m.example.control_points);
        check(m.example.horizon > 0.0, f.at("horizon") + ": must be positive");
        check(m.example.control_points >= 2, f.at("control_points") + ": need at least 2");
        model = m;
    } else {
        throw ConfigError(f.at("name") + ": unknown model '" + name +
                          "' (expected scalar-linear, cubic-double-integrator, sop or lq)");
    }
    f.finish();
    return model;
}

json echo_model(const Model& model) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ScalarLinearModel>) {
                return json{{"name", "scalar-linear"}, {"a", m.a}, {"b", m.b}, {"x0", m.x0}};
            } else if constexpr (std::is_same_v<T, CubicModel>) {
                return json{{"name", "cubic-double-integrator"}, {"c", m.c}, {"noise", m.noise}, {"x0", m.x0}};
            } else if constexpr (std::is_same_v<T, SopModel>) {
                json j = echo_instance(m.instance);
                j["name"] = "sop";
                j["risk"] = m.expectation ? "expectation" : "avar";
                return j;
            } else {
                return json{{"name", "lq"},
                            {"s", m.example.s},
                            {"target", m.example.target},
                            {"horizon", m.example.horizon},
                            {"control_points", m.example.control_points}};
            }
        },
        model);
}

// Every built-in model has a scalar control.
std::size_t control_dim(const Model&) { return 1; }

Policy parse_policy(const json& j, const Model& model) {
    Fields f(j, "policy");
    const std::string family = f.require<std::string>("family");
    Policy policy;
    if (family == "constant") {
        ConstantPolicy c;
        c.value = f.require<std::vector<double>>("value");
        check(c.value.size() == control_dim(model), f.at("value") + ": wrong control dimension");
        policy = c;
    } else if (family == "bang-bang" || family == "predicted-miss") {
        check(std::holds_alternative<SopModel>(model), "policy.family: '" + family + "' needs the sop model");
        if (family == "bang-bang") {
            BangBangPolicy b;
            b.switches = f.get("switches", std::vector<double>{});
            b.initial_sign = f.get("initial_sign", 1);
            check(b.initial_sign == 1 || b.initial_sign == -1, f.at("initial_sign") + ": expected 1 or -1");
            check(b.switches.size() <= 2, f.at("switches") + ": at most two switching times");
            const double horizon = std::get<SopModel>(model).instance.horizon;
            double last = 0.0;
            for (double s : b.switches) {
                check(s >= last && s <= horizon, f.at("switches") + ": must be ordered inside [0, horizon]");
                last = s;
            }
            policy = b;
        } else {
            PredictedMissPolicy p;
            p.gamma = f.require<double>("gamma");
            p.delta = f.get("delta", 0.0);
            policy = p;
        }
    } else {
        throw ConfigError(f.at("family") + ": unknown policy family '" + family +
                          "' (expected constant, bang-bang or predicted-miss)");
    }
    f.finish();
    return policy;
}

json echo_policy(const Policy& policy) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ConstantPolicy>) {
                return json{{"family", "constant"}, {"value", p.value}};
            } else if constexpr (std::is_same_v<T, BangBangPolicy>) {
                return json{{"family", "bang-bang"}, {"switches", p.switches}, {"initial_sign", p.initial_sign}};
            } else {
                return json{{"family", "predicted-miss"}, {"gamma", p.gamma}, {"delta", p.delta}};
            }
        },
        policy);
}

AdjointOptions parse_adjoint(const json& j) {
    Fields f(j, "adjoint");
    AdjointOptions a;
    a.basis.degree = f.get("degree", a.basis.degree);
    a.basis.use_state = f.get("use_state", a.basis.use_state);
    a.basis.use_brownian = f.get("use_brownian", a.basis.use_brownian);
    a.basis.ridge = f.get("ridge", a.basis.ridge);
    if (f.has("residual_bound")) a.residual_bound = f.require<double>("residual_bound");
    f.finish();
    check(a.basis.degree >= 1 && a.basis.degree <= 6, "adjoint.degree: must be in [1, 6]");
    check(a.basis.use_state || a.basis.use_brownian, "adjoint: at least one feature source is needed");
    check(a.basis.ridge >= 0.0, "adjoint.ridge: must be non-negative");
    return a;
}

json echo_adjoint(const AdjointOptions& a) {
    json j{{"degree", a.basis.degree},
           {"use_state", a.basis.use_state},
           {"use_brownian", a.basis.use_brownian},
           {"ridge", a.basis.ridge}};
    if (a.residual_bound) j["residual_bound"] = *a.residual_bound;
    return j;
}

CertificateTolerances parse_tolerances(const json& j) {
    Fields f(j, "tolerances");
    CertificateTolerances t;
    t.feasibility = f.get("feasibility", t.feasibility);
    t.slackness = f.get("slackness", t.slackness);
    t.active = f.get("active", t.active);
    t.risk_gap = f.get("risk_gap", t.risk_gap);
    t.gap_levels = f.get("gap_levels", t.gap_levels);
    t.gap_measure = f.get("gap_measure", t.gap_measure);
    if (f.has("bsde_residual_bound")) t.bsde_residual_bound = f.require<double>("bsde_residual_bound");
    t.normality_margin = f.get("normality_margin", t.normality_margin);
    f.finish();
    check(!t.gap_levels.empty(), "tolerances.gap_levels: must not be empty");
    for (double m : t.gap_levels) check(m > 0.0, "tolerances.gap_levels: entries must be positive");
    return t;
}

json echo_tolerances(const CertificateTolerances& t) {
    json j{{"feasibility", t.feasibility}, {"slackness", t.slackness},   {"active", t.active},
           {"risk_gap", t.risk_gap},       {"gap_levels", t.gap_levels}, {"gap_measure", t.gap_measure},
           {"normality_margin", t.normality_margin}};
    if (t.bsde_residual_bound) j["bsde_residual_bound"] = *t.bsde_residual_bound;
    return j;
}

ShootConfig parse_search(const json& j) {
    Fields f(j, "search");
    ShootConfig s;
    const std::string family = f.get<std::string>("family", "predicted-miss");
    if (family == "open-loop") {
        s.family = PolicyFamily::OpenLoop;
    } else if (family == "predicted-miss") {
        s.family = PolicyFamily::PredictedMiss;
    } else {
        throw ConfigError(f.at("family") + ": expected \"open-loop\" or \"predicted-miss\"");
    }
    s.coarse_points = f.get("coarse_points", s.coarse_points);
    s.sweeps = f.get("sweeps", s.sweeps);
    s.golden_iterations = f.get("golden_iterations", s.golden_iterations);
    s.indirect_iterations = f.get("indirect_iterations", s.indirect_iterations);
    s.damping = f.get("damping", s.damping);
    s.gamma_range = f.get("gamma_range", s.gamma_range);
    s.delta_range = f.get("delta_range", s.delta_range);
    f.finish();
    check(s.coarse_points >= 2, "search.coarse_points: need at least 2");
    check(s.damping > 0.0 && s.damping <= 1.0, "search.damping: must be in (0, 1]");
    return s;
}

ShootConfig default_search() {
    ShootConfig s;
    s.family = PolicyFamily::PredictedMiss;
    return s;
}

json echo_search(const ShootConfig& s) {
    return json{{"family", s.family == PolicyFamily::OpenLoop ? "open-loop" : "predicted-miss"},
                {"coarse_points", s.coarse_points},
                {"sweeps", s.sweeps},
                {"golden_iterations", s.golden_iterations},
                {"indirect_iterations", s.indirect_iterations},
                {"damping", s.damping},
                {"gamma_range", {s.gamma_range.first, s.gamma_range.second}},
                {"delta_range", {s.delta_range.first, s.delta_range.second}}};
}

SafetyConfig parse_safety(const json& j) {
    Fields f(j, "safety");
    SafetyConfig s;
    s.sigmas = f.get("sigmas", s.sigmas);
    s.bang_fraction = f.get("bang_fraction", s.bang_fraction);
    f.finish();
    check(s.sigmas > 0.0, "safety.sigmas: must be positive");
    check(s.bang_fraction > 0.0 && s.bang_fraction <= 1.0, "safety.bang_fraction: must be in (0, 1]");
    return s;
}

RiskSpecConfig parse_risk(const json& j) {
    Fields f(j, "risk");
    RiskSpecConfig r;
    r.measure = f.require<std::string>("measure");
    if (r.measure == "avar") {
        r.alpha = f.require<double>("alpha");
    } else if (r.measure == "mixture") {
        r.levels = f.require<std::vector<double>>("levels");
        r.lambdas = f.require<std::vector<double>>("lambdas");
    } else if (r.measure != "expectation") {
        throw ConfigError(f.at("measure") + ": expected avar, expectation or mixture");
    }
    f.finish();
    try {
        (void)r.build();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("risk: ") + e.what());
    }
    return r;
}

json echo_risk(const RiskSpecConfig& r) {
    json j{{"measure", r.measure}};
    if (r.measure == "avar") j["alpha"] = r.alpha;
    if (r.measure == "mixture") {
        j["levels"] = r.levels;
        j["lambdas"] = r.lambdas;
    }
    return j;
}

RiskEvalConfig parse_risk_eval(Fields& top) {
    RiskEvalConfig c;
    const json* risk = top.object("risk");
    check(risk != nullptr, "risk: required for risk-eval");
    c.risk = parse_risk(*risk);
    if (const json* s = top.object("samples")) {
        Fields f(*s, "samples");
        SampleConfig sc;
        sc.values = f.get("values", sc.values);
        sc.weights = f.get("weights", sc.weights);
        sc.distribution = f.get("distribution", sc.distribution);
        sc.size = f.get("size", sc.size);
        f.finish();
        if (sc.values.empty()) {
            check(sc.distribution == "normal" || sc.distribution == "uniform" || sc.distribution == "lognormal",
                  "samples: give values, or a distribution (normal, uniform, lognormal) and a size");
            check(sc.size >= 1 && sc.size <= kMaxPaths, "samples.size: must be in [1, 1e7]");
            check(sc.weights.empty(), "samples.weights: only allowed with explicit values");
        } else {
            check(sc.distribution.empty() && sc.size == 0, "samples: values exclude distribution and size");
            check(sc.weights.empty() || sc.weights.size() == sc.values.size(),
                  "samples.weights: must match the number of values");
        }
        c.samples = sc;
    }
    if (const json* o = top.object("oracle")) {
        Fields f(*o, "oracle");
        OracleConfig oc;
        oc.cases = f.get("cases", oc.cases);
        oc.min_size = f.get("min_size", oc.min_size);
        oc.max_size = f.get("max_size", oc.max_size);
        oc.tolerance = f.get("tolerance", oc.tolerance);
        f.finish();
        check(oc.min_size >= 1 && oc.min_size <= oc.max_size && oc.max_size <= kMaxPaths,
              "oracle: need 1 <= min_size <= max_size <= 1e7");
        c.oracle = oc;
    }
    if (const json* h = top.object("coherence")) {
        Fields f(*h, "coherence");
        CoherenceConfig cc;
        cc.trials = f.get("trials", cc.trials);
        cc.min_size = f.get("min_size", cc.min_size);
        cc.max_size = f.get("max_size", cc.max_size);
        cc.tolerance = f.get("tolerance", cc.tolerance);
        f.finish();
        check(cc.min_size >= 2 && cc.min_size <= cc.max_size, "coherence: need 2 <= min_size <= max_size");
        c.coherence = cc;
    }
    if (const json* r = top.object("representation")) {
        Fields f(*r, "representation");
        c.representation_trials = f.require<std::size_t>("trials");
        f.finish();
        check(c.samples.has_value(), "representation: needs a samples section");
    }
    check(c.samples || c.oracle || c.coherence, "risk-eval: give at least one of samples, oracle, coherence");
    return c;
}

json echo_risk_eval(const RiskEvalConfig& c, json& top) {
    top["risk"] = echo_risk(c.risk);
    if (c.samples) {
        json s;
        if (!c.samples->values.empty()) {
            s["values"] = c.samples->values;
            if (!c.samples->weights.empty()) s["weights"] = c.samples->weights;
        } else {
            s["distribution"] = c.samples->distribution;
            s["size"] = c.samples->size;
        }
        top["samples"] = s;
    }
    if (c.oracle) {
        top["oracle"] = json{{"cases", c.oracle->cases},
                             {"min_size", c.oracle->min_size},
                             {"max_size", c.oracle->max_size},
                             {"tolerance", c.oracle->tolerance}};
    }
    if (c.coherence) {
        top["coherence"] = json{{"trials", c.coherence->trials},
                                {"min_size", c.coherence->min_size},
                                {"max_size", c.coherence->max_size},
                                {"tolerance", c.coherence->tolerance}};
    }
    if (c.representation_trials) top["representation"] = json{{"trials", *c.representation_trials}};
    return top;
}

ConvergenceConfig parse_convergence(const json& j, const Model& model) {
    Fields f(j, "convergence");
    ConvergenceConfig c;
    c.test = f.require<std::string>("test");
    if (c.test == "linearization-rate") {
        c.eps = f.get("eps", c.eps);
        c.direction = f.require<std::vector<double>>("direction");
        check(c.eps.size() >= 2, "convergence.eps: need at least two values");
        for (std::size_t i = 0; i < c.eps.size(); ++i) {
            check(c.eps[i] > 0.0 && (i == 0 || c.eps[i] < c.eps[i - 1]),
                  "convergence.eps: must be positive and strictly decreasing");
        }
        check(c.direction.size() == control_dim(model), "convergence.direction: wrong control dimension");
    } else if (c.test == "strong-order") {
        c.levels = f.require<std::vector<std::size_t>>("levels");
        c.band = f.get("band", c.band);
        check(c.levels.size() >= 2, "convergence.levels: need at least two step counts");
        for (std::size_t i = 0; i < c.levels.size(); ++i) {
            check(c.levels[i] >= 1 && (i == 0 || c.levels[i] > c.levels[i - 1]),
                  "convergence.levels: must be positive and strictly increasing");
        }
    } else if (c.test == "inverse-check") {
        c.threshold = f.get("threshold", c.threshold);
        check(c.threshold > 0.0, "convergence.threshold: must be positive");
    } else {
        throw ConfigError(f.at("test") + ": expected linearization-rate, strong-order or inverse-check");
    }
    f.finish();
    return c;
}

json echo_convergence(const ConvergenceConfig& c) {
    json j{{"test", c.test}};
    if (c.test == "linearization-rate") {
        j["eps"] = c.eps;
        j["direction"] = c.direction;
    } else if (c.test == "strong-order") {
        j["levels"] = c.levels;
        j["band"] = {c.band.first, c.band.second};
    } else {
        j["threshold"] = c.threshold;
    }
    return j;
}

void check_ensemble_against_model(const Scenario& s) {
    if (!s.model) return;
    if (const auto* sop = std::get_if<SopModel>(&*s.model)) {
        check(!s.ensemble.horizon || *s.ensemble.horizon == sop->instance.horizon,
              "ensemble.horizon: conflicts with the model horizon");
    }
    if (const auto* lq = std::get_if<LqModel>(&*s.model)) {
        check(!s.ensemble.horizon || *s.ensemble.horizon == lq->example.horizon,
              "ensemble.horizon: conflicts with the model horizon");
    }
}

}  // namespace

RiskMeasure RiskSpecConfig::build() const {
    if (measure == "avar") return RiskMeasure::avar(alpha);
    if (measure == "mixture") return RiskMeasure::mixture(levels, lambdas);
    return RiskMeasure::expectation();
}

std::string to_string(Kind kind) {
    switch (kind) {
        case Kind::Simulate: return "simulate";
        case Kind::RiskEval: return "risk-eval";
        case Kind::Adjoint: return "adjoint";
        case Kind::Certify: return "certify";
        case Kind::SopSolve: return "sop-solve";
        case Kind::Counterexample: return "counterexample";
        case Kind::Convergence: return "convergence";
    }
    return "?";
}

const std::vector<Kind>& all_kinds() {
    static const std::vector<Kind> kinds{Kind::Simulate, Kind::RiskEval,       Kind::Adjoint,    Kind::Certify,
                                         Kind::SopSolve, Kind::Counterexample, Kind::Convergence};
    return kinds;
}

std::optional<Kind> parse_kind(std::string_view name) {
    for (Kind k : all_kinds()) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

std::string model_name(const Model& model) {
    return echo_model(model).at("name").get<std::string>();
}

double model_horizon(const Model& model, const EnsembleConfig& ensemble) {
    if (const auto* sop = std::get_if<SopModel>(&model)) return sop->instance.horizon;
    if (const auto* lq = std::get_if<LqModel>(&model)) return lq->example.horizon;
    return ensemble.horizon.value_or(1.0);
}

Scenario parse_scenario(const json& config, std::optional<std::uint64_t> seed_override) {
    Fields top(config, "config");
    Scenario s;
    const std::string kind = top.require<std::string>("kind");
    const auto parsed = parse_kind(kind);
    if (!parsed) throw ConfigError("config.kind: unknown kind '" + kind + "'");
    s.kind = *parsed;
    s.seed = top.require<std::uint64_t>("seed");
    if (seed_override) s.seed = *seed_override;
    s.description = top.get<std::string>("description", "");

    if (const json* out = top.object("output")) {
        Fields f(*out, "output");
        s.output.dir = f.get<std::string>("dir", "");
        s.output.paths_csv = f.get("paths_csv", false);
        s.output.costates_csv = f.get("costates_csv", false);
        s.output.binary_dump = f.get("binary_dump", false);
        f.finish();
    }

    json echo{{"kind", to_string(s.kind)}, {"seed", s.seed}};
    if (!s.description.empty()) echo["description"] = s.description;

    const bool needs_model = s.kind != Kind::RiskEval && s.kind != Kind::Counterexample;
    if (needs_model) {
        const json* e = top.object("ensemble");
        check(e != nullptr, "ensemble: required for " + kind);
        s.ensemble = parse_ensemble(*e);
        // sop-solve takes its model from "instance"
        if (s.kind == Kind::SopSolve) {
            const json* inst = top.object("instance");
            check(inst != nullptr, "instance: required for sop-solve");
            Fields f(*inst, "instance");
            SopModel m;
            m.instance = read_instance_fields(f);
            f.finish();
            validate_instance(m.instance, "instance");
            s.model = m;
            echo["instance"] = echo_instance(m.instance);
        } else {
            const json* m = top.object("model");
            check(m != nullptr, "model: required for " + kind);
            s.model = parse_model(*m, "model");
            echo["model"] = echo_model(*s.model);
        }
        check_ensemble_against_model(s);
        echo["ensemble"] = echo_ensemble(s.ensemble);
    }

    const bool takes_policy = s.kind == Kind::Simulate || s.kind == Kind::Adjoint || s.kind == Kind::Certify ||
                              s.kind == Kind::Convergence;
    if (takes_policy) {
        if (const json* p = top.object("policy")) {
            s.policy = parse_policy(*p, *s.model);
        } else {
            s.policy = ConstantPolicy{std::vector<double>(control_dim(*s.model), 0.0)};
        }
        echo["policy"] = echo_policy(*s.policy);
    }

    if (s.kind == Kind::Adjoint || s.kind == Kind::Certify || s.kind == Kind::SopSolve) {
        check(std::holds_alternative<SopModel>(*s.model) || std::holds_alternative<LqModel>(*s.model),
              "model: " + kind + " needs a problem with a terminal cost (sop or lq)");
        if (const json* a = top.object("adjoint")) s.adjoint = parse_adjoint(*a);
        echo["adjoint"] = echo_adjoint(s.adjoint);
    }
    if (s.kind == Kind::Certify || s.kind == Kind::SopSolve) {
        if (const json* t = top.object("tolerances")) s.tolerances = parse_tolerances(*t);
        echo["tolerances"] = echo_tolerances(s.tolerances);
    }
    if (s.kind == Kind::SopSolve) {
        s.search = default_search();
        if (const json* sr = top.object("search")) s.search = parse_search(*sr);
        if (const json* sf = top.object("safety")) s.safety = parse_safety(*sf);
        echo["search"] = echo_search(s.search);
        echo["safety"] = json{{"sigmas", s.safety.sigmas}, {"bang_fraction", s.safety.bang_fraction}};
    }
    if (s.kind == Kind::Simulate) {
        if (const json* so = top.object("strong_order")) {
            Fields f(*so, "strong_order");
            StrongOrderConfig c;
            c.levels = f.require<std::vector<std::size_t>>("levels");
            c.band = f.get("band", c.band);
            f.finish();
            check(c.levels.size() >= 2, "strong_order.levels: need at least two step counts");
            for (std::size_t level : c.levels) {
                check(level >= 1 && s.ensemble.steps % level == 0,
                      "strong_order.levels: each level must divide ensemble.steps");
            }
            s.strong_order = c;
            echo["strong_order"] = json{{"levels", c.levels}, {"band", {c.band.first, c.band.second}}};
        }
    }
    if (s.kind == Kind::RiskEval) {
        s.risk_eval = parse_risk_eval(top);
        echo_risk_eval(*s.risk_eval, echo);
    }
    if (s.kind == Kind::Convergence) {
        const json* c = top.object("convergence");
        check(c != nullptr, "convergence: required for the convergence kind");
        s.convergence = parse_convergence(*c, *s.model);
        if (s.convergence->test == "strong-order") {
            for (std::size_t level : s.convergence->levels) {
                check(s.ensemble.steps % level == 0, "convergence.levels: each level must divide ensemble.steps");
            }
        }
        echo["convergence"] = echo_convergence(*s.convergence);
    }

    echo["output"] = json{{"paths_csv", s.output.paths_csv},
                          {"costates_csv", s.output.costates_csv},
                          {"binary_dump", s.output.binary_dump}};
    top.finish();
    s.echo = std::move(echo);
    return s;
}

Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    json config;
    try {
        config = json::parse(in, nullptr, true, false);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scenario(config, seed_override);
}

}  // namespace riskpmp::cli
