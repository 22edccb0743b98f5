#pragma once

// Command-line front end. Kept in a header so the tests can drive it in-process.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kparab/io.hpp"

namespace kparab::cli {

using io::json;

enum ExitCode { SpecFailure = 10, DomainFailure = 11, NumericFailure = 12, OtherFailure = 13 };

struct PolicyFlags {
    std::string file;
    std::optional<int> k_max;
    std::optional<double> threshold;
    std::optional<double> window_base;
    std::optional<double> p_margin;
};

struct BuiltinFlags {
    BuiltinParams params;
    std::string mu_constant = "first-principles";
};

inline void add_policy_flags(CLI::App* cmd, PolicyFlags& p) {
    cmd->add_option("--policy", p.file, "policy JSON file (overrides KP_POLICY and the spec)");
    cmd->add_option("--k-max", p.k_max, "maximum number of dyadic windows");
    cmd->add_option("--divergence-threshold", p.threshold, "partial integral treated as divergent");
    cmd->add_option("--window-base", p.window_base, "length of the first window");
    cmd->add_option("--p-margin", p.p_margin, "margin around the critical power-law exponent");
}

inline void add_builtin_flags(CLI::App* cmd, BuiltinFlags& b) {
    auto& p = b.params;
    cmd->add_option("--theta0", p.theta0, "sol3:S angle");
    cmd->add_option("--a", p.a, "sol3:S offset");
    cmd->add_option("--t", p.t, "sol3:Q / sol3:R level");
    cmd->add_option("--kappa", p.kappa, "ekt base curvature");
    cmd->add_option("--tau", p.tau, "ekt / penafiel bundle curvature");
    cmd->add_option("--H", p.H, "penafiel mean curvature (0 or 0.5)");
    cmd->add_option("--d", p.d, "penafiel integration constant");
    cmd->add_option("--mu-constant", b.mu_constant, "ekt Killing length constant")
        ->check(CLI::IsMember({"first-principles", "as-printed"}));
}

// Precedence, lowest first: defaults, $KP_POLICY, spec "policy", --policy file, flags.
inline Policy resolve_policy(const PolicyFlags& flags, const std::optional<json>& from_spec) {
    Policy p;
    if (const char* env = std::getenv("KP_POLICY"); env && *env) io::apply_policy(io::read_json_file(env), p);
    if (from_spec) io::apply_policy(*from_spec, p);
    if (!flags.file.empty()) io::apply_policy(io::read_json_file(flags.file), p);
    json over = json::object();
    if (flags.k_max) over["k_max"] = *flags.k_max;
    if (flags.threshold) over["divergence_threshold"] = *flags.threshold;
    if (flags.window_base) over["window_base"] = *flags.window_base;
    if (flags.p_margin) over["p_margin"] = *flags.p_margin;
    io::apply_policy(over, p);
    return p;
}

struct Loaded {
    Problem problem;
    std::optional<json> policy;
    std::optional<Route> route;
};

inline Loaded load(const std::string& spec, const std::string& builtin, const BuiltinFlags& b) {
    if (spec.empty() == builtin.empty()) throw SpecError("give exactly one of --spec and --builtin");
    if (!spec.empty()) {
        auto f = io::parse_spec(io::read_json_file(spec));
        return {std::move(f.problem), std::move(f.policy), f.route};
    }
    auto params = b.params;
    params.mu_constant = b.mu_constant == "as-printed" ? MuConstant::AsPrinted : MuConstant::FirstPrinciples;
    return {builtin_problem(builtin, params), {}, {}};
}

inline json error_json(const char* kind, const std::string& message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

// ---------------------------------------------------------------------------

inline int cmd_classify(const std::string& spec, const std::string& builtin, const BuiltinFlags& b,
                        const std::string& route, const PolicyFlags& pf, std::ostream& out) {
    auto loaded = load(spec, builtin, b);
    std::optional<Route> r = loaded.route;
    if (!route.empty()) r = io::parse_route(json(route));
    const auto policy = resolve_policy(pf, loaded.policy);
    const auto report = classify(loaded.problem, r, policy);
    auto j = io::report_json(report);
    j["problem"] = loaded.problem.name;
    if (report.route) j["route"] = to_string(*report.route);
    out << io::dump(j);
    return io::exit_code(report.verdict);
}

inline MuProfile profile_of(const Problem& p, std::optional<Route> route) {
    if (const auto* s = std::get_if<SurfaceSpec>(&p.body)) return s->mu;
    if (const auto* e = std::get_if<ExtrinsicProblem>(&p.body)) {
        if (route == Route::Conformal) throw SpecError("tabulate works on the arclength profile only");
        return arclength_profile(e->model, e->curve, e->options);
    }
    throw SpecError("'" + p.name + "' is given by its conformal speed and has no Killing length profile");
}

inline int cmd_tabulate(const std::string& spec, const std::string& builtin, const BuiltinFlags& b,
                        const std::vector<double>& range, int samples, double s0, std::ostream& out) {
    auto loaded = load(spec, builtin, b);
    const auto mu = profile_of(loaded.problem, loaded.route);
    out << io::tabulate(mu, {range.at(0), range.at(1)}, samples, s0);
    return 0;
}

inline int cmd_models(std::ostream& out) {
    json list = json::array();
    for (const auto& m : list_builtins()) list.push_back({{"name", m.name}, {"description", m.description}});
    out << io::dump({{"builtins", list}});
    return 0;
}

struct VerifyFlags {
    std::string mu;
    std::string f;
    std::vector<double> xs{0.0};
    double h = 1e-3;
    double tol = -1.0;  // per-kind default
    std::vector<double> range{-5.0, 5.0};
    int samples = 201;
    double s0 = 0.0;
    double a = 0.0, b = 1.0, x0 = 0.5;
    long n = 100000;
    std::uint64_t seed = 1;
    double dt = 0.0;
    int threads = 0;
};

inline int cmd_verify(const std::string& kind, const VerifyFlags& v, std::ostream& out) {
    if (v.mu.empty()) throw SpecError("--mu is required");
    const auto mu = MuProfile::from_source(v.mu);
    json j = {{"kind", kind}, {"mu", v.mu}};
    bool pass = false;
    if (kind == "laplacian") {
        if (v.f.empty()) throw SpecError("--f is required");
        const auto f = parse(v.f, {"x"});
        const double tol = v.tol > 0 ? v.tol : 1e-6;
        json rows = json::array();
        double worst = 0.0;
        for (double x : v.xs) {
            const double r1 = laplacian_residual(mu, f, x, v.h);
            const double r2 = laplacian_residual(mu, f, x, v.h / 2);
            worst = std::max(worst, std::fabs(r1));
            rows.push_back({{"x", x}, {"residual", r1}, {"residual_half_h", r2}});
        }
        pass = worst <= tol;
        j.update({{"f", v.f}, {"h", v.h}, {"tolerance", tol}, {"points", rows}, {"max_abs_residual", worst}});
    } else if (kind == "witness") {
        const double tol = v.tol > 0 ? v.tol : 1e-6;
        const auto w = witness(mu, v.s0);
        json sides = json::object();
        bool bounded = false;
        for (int dir : {-1, +1}) {
            const auto bnd = w.bound(dir);
            bounded = bounded || bnd.has_value();
            sides[dir > 0 ? "+inf" : "-inf"] = bnd ? json(*bnd) : json(nullptr);
        }
        json probes = json::array();
        double worst = 0.0;
        for (double s : {v.s0 - 1.0, v.s0, v.s0 + 1.0}) {
            const double r = w.harmonic_residual(s, v.h);
            worst = std::max(worst, std::fabs(r));
            probes.push_back({{"s", s}, {"value", w(s)}, {"harmonic_residual", r}});
        }
        pass = bounded && worst <= tol;
        j.update({{"s0", v.s0}, {"bounds", sides}, {"bounded", bounded}, {"probes", probes}, {"tolerance", tol},
                  {"max_abs_residual", worst}});
    } else if (kind == "curvature") {
        const double tol = v.tol > 0 ? v.tol : 1e-8;
        if (v.range.size() != 2) throw SpecError("--range takes two numbers");
        const auto r = curvature_flatness_check(mu, {v.range[0], v.range[1]}, v.samples);
        pass = r.max_abs_curvature <= tol;
        j.update({{"range", v.range},
                  {"samples", r.samples},
                  {"tolerance", tol},
                  {"max_abs_curvature", r.max_abs_curvature},
                  {"worst_x", r.worst_x},
                  {"max_abs_original_curvature", r.max_abs_original},
                  {"max_abs_pulled_back_curvature", r.max_abs_pulled_back}});
    } else if (kind == "walk") {
        DiffusionOptions opt;
        opt.walkers = v.n;
        opt.seed = v.seed;
        opt.dt = v.dt;
        opt.threads = v.threads;
        const auto r = simulate_radial_diffusion(mu, v.x0, v.a, v.b, opt);
        const double exact = annulus_harmonic_measure(mu, v.a, v.b, v.x0);
        const double sigma = std::sqrt(exact * (1.0 - exact) / static_cast<double>(r.walkers));
        const double k = v.tol > 0 ? v.tol : 3.0;
        pass = std::fabs(r.probability - exact) <= k * sigma;
        j.update({{"a", v.a},
                  {"b", v.b},
                  {"x0", v.x0},
                  {"walkers", r.walkers},
                  {"seed", v.seed},
                  {"dt", r.dt},
                  {"hits", r.hits},
                  {"probability", r.probability},
                  {"closed_form", exact},
                  {"sigma", sigma},
                  {"sigmas_allowed", k},
                  {"deviation", r.probability - exact}});
    } else {
        throw SpecError("unknown verify kind '" + kind + "'");
    }
    j["pass"] = pass;
    out << io::dump(j);
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Parabolicity of Killing submersion surfaces"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print help");  // -h would clash with --h / --H
    app.set_version_flag("--version", "kparab 1.0");
    const std::string syntax =
        "Expressions: numbers, pi, e, + - * / ^, parentheses, and sin cos tan atan sinh cosh tanh exp log\n"
        "sqrt abs. ^ is right-associative and binds tighter than unary minus,\n"
        "so -x^2 means -(x^2) and 2^3^2 = 512. Multiplication is always explicit (2*x, not 2x).";
    app.footer(syntax);

    std::string spec, builtin, route;
    BuiltinFlags bflags;
    PolicyFlags pflags;

    auto* classify_cmd = app.add_subcommand("classify", "classify a spec file or built-in example");
    classify_cmd->add_option("--spec", spec, "spec JSON file");
    classify_cmd->add_option("--builtin", builtin, "built-in example (see `models`)");
    classify_cmd->add_option("--route", route, "extrinsic route")->check(CLI::IsMember({"arclength", "conformal"}));
    add_builtin_flags(classify_cmd, bflags);
    add_policy_flags(classify_cmd, pflags);
    classify_cmd->footer(syntax);

    std::vector<double> range;
    int samples = 101;
    double s0 = 0.0;
    auto* tab_cmd = app.add_subcommand("tabulate", "write s, mu, 1/mu and the running integral as CSV");
    tab_cmd->add_option("--spec", spec, "spec JSON file");
    tab_cmd->add_option("--builtin", builtin, "built-in example");
    tab_cmd->add_option("--range", range, "sample range")->expected(2)->required();
    tab_cmd->add_option("--samples", samples, "number of rows")->check(CLI::PositiveNumber);
    tab_cmd->add_option("--s0", s0, "base point of the running integral");
    add_builtin_flags(tab_cmd, bflags);
    tab_cmd->footer(syntax);

    auto* models_cmd = app.add_subcommand("models", "list built-in examples");

    VerifyFlags vflags;
    auto* verify_cmd = app.add_subcommand("verify", "numerical checks of the supporting identities");
    verify_cmd->require_subcommand(1);
    std::string verify_kind;
    for (const char* kind : {"laplacian", "witness", "curvature", "walk"}) {
        auto* sub = verify_cmd->add_subcommand(kind);
        sub->add_option("--mu", vflags.mu, "Killing length as an expression in x")->required();
        sub->add_option("--tol", vflags.tol, "tolerance (walk: number of standard errors)");
        sub->callback([&verify_kind, kind] { verify_kind = kind; });
        sub->footer(syntax);
        const std::string k = kind;
        if (k == "laplacian") {
            sub->add_option("--f", vflags.f, "test function of x")->required();
            sub->add_option("--x", vflags.xs, "evaluation points");
            sub->add_option("--h", vflags.h, "stencil spacing");
        } else if (k == "witness") {
            sub->add_option("--s0", vflags.s0, "anchor");
            sub->add_option("--h", vflags.h, "stencil spacing for the residual");
        } else if (k == "curvature") {
            sub->add_option("--range", vflags.range, "interval")->expected(2);
            sub->add_option("--samples", vflags.samples, "sample count")->check(CLI::PositiveNumber);
        } else {
            sub->add_option("--a", vflags.a, "inner radius")->required();
            sub->add_option("--b", vflags.b, "outer radius")->required();
            sub->add_option("--x0", vflags.x0, "start")->required();
            sub->add_option("--n", vflags.n, "walkers");
            sub->add_option("--seed", vflags.seed, "seed");
            sub->add_option("--dt", vflags.dt, "time step (0: automatic)");
            sub->add_option("--threads", vflags.threads, "worker threads (0: all cores)");
        }
    }

    std::vector<const char*> argv{"kparab"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            if (dynamic_cast<const CLI::CallForVersion*>(&e)) {
                out << e.what() << "\n";
                return 0;
            }
            const CLI::App* deepest = &app;
            while (!deepest->get_subcommands().empty()) deepest = deepest->get_subcommands().front();
            out << deepest->help();
            return 0;
        }
        err << io::dump(error_json("usage", e.what()));
        return SpecFailure;
    }

    try {
        if (classify_cmd->parsed()) return cmd_classify(spec, builtin, bflags, route, pflags, out);
        if (tab_cmd->parsed()) return cmd_tabulate(spec, builtin, bflags, range, samples, s0, out);
        if (models_cmd->parsed()) return cmd_models(out);
        return cmd_verify(verify_kind, vflags, out);
    } catch (const ParseError& e) {
        auto j = error_json("parse", e.what());
        j["error"]["offset"] = e.offset();
        err << io::dump(j);
        return SpecFailure;
    } catch (const UnknownIdentifier& e) {
        auto j = error_json("unknown-identifier", e.what());
        j["error"]["identifier"] = e.name();
        j["error"]["offset"] = e.offset();
        err << io::dump(j);
        return SpecFailure;
    } catch (const SpecError& e) {
        err << io::dump(error_json("spec", e.what()));
        return SpecFailure;
    } catch (const DomainError& e) {
        auto j = error_json("domain", e.what());
        j["error"]["subexpression"] = e.subexpression();
        err << io::dump(j);
        return DomainFailure;
    } catch (const NumericError& e) {
        err << io::dump(error_json("numeric", e.what()));
        return NumericFailure;
    } catch (const json::exception& e) {
        err << io::dump(error_json("spec", e.what()));
        return SpecFailure;
    } catch (const std::exception& e) {
        err << io::dump(error_json("internal", e.what()));
        return OtherFailure;
    }
}

}  // namespace kparab::cli
