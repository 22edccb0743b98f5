#pragma once

// Built-in Killing submersions and the example curves classified in them.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kparab/classify.hpp"
#include "kparab/error.hpp"
#include "kparab/expr.hpp"
#include "kparab/geom.hpp"

namespace kparab {

namespace detail {

// Parses `source` over {"t", params...} and binds the parameters to numbers.
inline Expression curve_component(std::string_view source, const std::vector<std::pair<std::string, double>>& params) {
    std::vector<std::string> names{"t"};
    for (const auto& p : params) names.push_back(p.first);
    const auto e = parse(source, names);
    const auto t = parse("t", {"t"});
    std::vector<Expression> args{t};
    for (const auto& p : params) args.push_back(constant(p.second, t));
    return compose(e, args);
}

inline Expression base_field(std::string_view source, const std::vector<std::string>& coords,
                             const std::vector<std::pair<std::string, double>>& params) {
    std::vector<std::string> names = coords;
    for (const auto& p : params) names.push_back(p.first);
    const auto e = parse(source, names);
    const auto u = parse(coords[0], coords);
    std::vector<Expression> args{u, parse(coords[1], coords)};
    for (const auto& p : params) args.push_back(constant(p.second, u));
    return compose(e, args);
}

}  // namespace detail

// Sol3 with metric e^{2z}dx^2 + e^{-2z}dy^2 + dz^2, quotiented by the x-translations.
inline AmbientModel sol3_model() {
    const std::vector<std::string> yz{"y", "z"};
    Metric2D base(parse("exp(-2*z)", yz), parse("0", yz), parse("1", yz), Domain{});
    AmbientModel m{"sol3", std::move(base), parse("exp(z)", yz), Fibers::NonCompact, {}, {}, false};
    m.notes.push_back("Killing field d/dx, base coordinates (y, z)");
    return m;
}

struct Sol3SurfaceParams {
    enum class Family { S, Q, R } family = Family::S;
    double theta0 = M_PI / 4;
    double a = 0.0;
    double t = 0.0;
};

inline Curve2D sol3_minimal_profile(double theta0, double a) {
    if (std::fabs(std::sin(theta0)) < 1e-12)
        throw SpecError("theta0 must not be a multiple of pi");
    if (!(std::tan(theta0) > 0.0))
        throw DomainError("log of a non-positive argument: tan(theta0) must be positive", "log(tan(theta0)*exp(t*sin(theta0)))");
    const std::vector<std::pair<std::string, double>> p{{"theta0", theta0}, {"a", a}};
    return Curve2D(detail::curve_component("a + exp(t*sin(theta0))", p),
                   detail::curve_component("log(tan(theta0)*exp(t*sin(theta0)))", p), {});
}

inline Curve2D sol3_curve(const Sol3SurfaceParams& p) {
    switch (p.family) {
        case Sol3SurfaceParams::Family::S: return sol3_minimal_profile(p.theta0, p.a);
        case Sol3SurfaceParams::Family::Q:
            return Curve2D(detail::curve_component("level", {{"level", p.t}}), parse("t", {"t"}), {});
        case Sol3SurfaceParams::Family::R:
            return Curve2D(parse("t", {"t"}), detail::curve_component("level", {{"level", p.t}}), {});
    }
    throw SpecError("unknown Sol3 family");
}

// A profile with bounded height, standing in for the invariant CMC curves.
inline Curve2D sol3_bounded_profile() { return Curve2D::from_source("t", "sin(t)", {}); }

enum class MuConstant { FirstPrinciples, AsPrinted };

inline double mu_numerator(MuConstant c) { return c == MuConstant::FirstPrinciples ? 4.0 : 2.0; }

inline AmbientModel ekt_model(double kappa, double tau, MuConstant constant = MuConstant::FirstPrinciples) {
    if (!std::isfinite(kappa) || !std::isfinite(tau)) throw SpecError("kappa and tau must be finite");
    const std::vector<std::string> rz{"r", "z"};
    const std::vector<std::pair<std::string, double>> p{{"kappa", kappa}, {"tau", tau}, {"c", mu_numerator(constant)}};
    Domain domain;
    domain.u = {0.0, inf};
    domain.positive.push_back(detail::base_field("4+kappa*r^2", rz, p));
    Metric2D base(detail::base_field("16/(4+kappa*r^2)^2", rz, p), parse("0", rz),
                  detail::base_field("1/(1+r^2*tau^2)", rz, p), domain);
    AmbientModel m{"ekt", std::move(base), detail::base_field("c*r*sqrt(1+r^2*tau^2)/(4+kappa*r^2)", rz, p),
                   Fibers::Compact, {{"kappa", kappa}, {"tau", tau}}, {}, kappa > 0.0};
    m.notes.push_back("rotational Killing field about the z-axis, base coordinates (r, z)");
    if (kappa > 0.0) m.notes.push_back("kappa > 0: Berger sphere, compact total space");
    if (constant == MuConstant::AsPrinted)
        m.notes.push_back("as-printed Killing length constant 2; the metric itself gives 4 (verdicts are unaffected)");
    return m;
}

/// g/mu^2 for the rotational model, written out directly.
inline Metric2D ekt_conformal_metric(double kappa, double tau, MuConstant constant = MuConstant::FirstPrinciples) {
    const std::vector<std::string> rz{"r", "z"};
    const double c = mu_numerator(constant);
    const std::vector<std::pair<std::string, double>> p{{"kappa", kappa}, {"tau", tau}, {"k", 16.0 / (c * c)}};
    Domain domain;
    domain.u = {0.0, inf};
    domain.positive.push_back(detail::base_field("4+kappa*r^2", rz, p));
    return Metric2D(detail::base_field("k/(r^2*(1+r^2*tau^2))", rz, p), parse("0", rz),
                    detail::base_field("k*(4+kappa*r^2)^2/(16*r^2*(1+r^2*tau^2)^2)", rz, p), domain);
}

inline Curve2D umbrella_curve() { return Curve2D::from_source("t", "0", {0.0, inf}); }

// For kappa < 0 the base is a disc r < 2/sqrt(-kappa); the radial line ends on its ideal boundary.
inline Curve2D umbrella_curve(double kappa) {
    return Curve2D::from_source("t", "0", {0.0, kappa < 0.0 ? 2.0 / std::sqrt(-kappa) : inf});
}

struct PenafielParams {
    double H = 0.0;
    double d = 0.0;  // does not enter the printed speeds
    double tau = 1.0;
};

/// Conformal speed of the rotational CMC profiles in E(-1, tau), as printed.
inline Expression penafiel_conformal_speed(const PenafielParams& p) {
    if (!(p.tau > 0.0)) throw SpecError("tau must be positive");
    const std::vector<std::pair<std::string, double>> tau{{"tau", p.tau}};
    if (p.H == 0.0) return detail::curve_component("2*sqrt(1/(sinh(t)^2*(1+tau^2*tanh(t/2))))", tau);
    if (p.H == 0.5)
        return detail::curve_component(
            "sqrt((5+3*cosh(t))^2*(1-4*tau^2+cosh(t)+4*tau^2*cosh(t))/(8*(1-tau^2+(1+tau^2)*cosh(t))^2)"
            " + 4/(sinh(t)^2*(1+4*tau^2*tanh(t/2))))",
            tau);
    throw SpecError("unsupported mean curvature H=" + detail::format_number(p.H) + " (supported: 0, 1/2)");
}

/// Leading-order decay of the H = 0 speed.
inline double penafiel_h0_asymptote(double tau, double t) { return 4.0 * std::sqrt(1.0 / (1.0 + tau * tau)) * std::exp(-t); }

// ---------------------------------------------------------------------------
// Problems: anything the classifier accepts, and the built-in catalogue.

struct ExtrinsicProblem {
    AmbientModel model;
    Curve2D curve;
    ExtrinsicOptions options;
};

struct ConformalSpeedProblem {
    Expression speed;  // in t
    Interval range;
    Fibers fibers = Fibers::Compact;
};

struct Problem {
    std::string name;
    std::variant<SurfaceSpec, ExtrinsicProblem, ConformalSpeedProblem> body;
    std::vector<std::string> notes;
};

inline ClassificationReport classify(const Problem& p, std::optional<Route> route = {}, const Policy& policy = {}) {
    ClassificationReport r;
    if (const auto* s = std::get_if<SurfaceSpec>(&p.body)) {
        r = classify_intrinsic(*s, policy);
    } else if (const auto* e = std::get_if<ExtrinsicProblem>(&p.body)) {
        auto opt = e->options;
        if (route) opt.route = *route;
        try {
            r = classify_extrinsic(e->model, e->curve, opt, policy);
        } catch (const UnresolvedParameterEnd&) {
            if (route) throw;
            opt.route = Route::Conformal;
            r = classify_extrinsic(e->model, e->curve, opt, policy);
            r.warnings.push_back("arc-length route cannot follow the curve to its parameter end; conformal route used");
        }
    } else {
        const auto& c = std::get<ConformalSpeedProblem>(p.body);
        r = classify_conformal_speed([&](double t) { return c.speed(t); }, c.range, c.fibers, policy);
    }
    for (const auto& n : p.notes) r.warnings.push_back(n);
    return r;
}

struct BuiltinParams {
    double theta0 = M_PI / 4;
    double a = 0.0;
    double t = 0.0;
    double kappa = 0.0;
    double tau = 1.0;
    double H = 0.0;
    double d = 0.0;
    MuConstant mu_constant = MuConstant::FirstPrinciples;
};

struct BuiltinInfo {
    std::string name;
    std::string description;
};

inline std::vector<BuiltinInfo> list_builtins() {
    return {
        {"sol3:S", "Sol3 minimal surface S(theta0, a); flags --theta0 --a"},
        {"sol3:Q", "Sol3 leaf Q_t, curve y = t; flag --t"},
        {"sol3:R", "Sol3 leaf R_t, curve z = t; flag --t"},
        {"sol3:cmc", "Sol3 invariant surface over a bounded-height profile (t, sin t)"},
        {"ekt:umbrella", "E(kappa, tau) rotational surface over the curve (t, 0); flags --kappa --tau --mu-constant"},
        {"penafiel", "rotational CMC surface in E(-1, tau) from its printed conformal speed; flags --H --tau"},
    };
}

inline Problem builtin_problem(std::string_view name, const BuiltinParams& p = {}) {
    const std::string id(name);
    if (name == "sol3:S" || name == "sol3:Q" || name == "sol3:R") {
        Sol3SurfaceParams sp;
        sp.family = name == "sol3:S" ? Sol3SurfaceParams::Family::S
                    : name == "sol3:Q" ? Sol3SurfaceParams::Family::Q
                                       : Sol3SurfaceParams::Family::R;
        sp.theta0 = p.theta0;
        sp.a = p.a;
        sp.t = p.t;
        return {id, ExtrinsicProblem{sol3_model(), sol3_curve(sp), {}}, {}};
    }
    if (name == "sol3:cmc") return {id, ExtrinsicProblem{sol3_model(), sol3_bounded_profile(), {}}, {}};
    if (name == "ekt:umbrella") {
        auto model = ekt_model(p.kappa, p.tau, p.mu_constant);
        auto notes = model.notes;
        return {id, ExtrinsicProblem{std::move(model), umbrella_curve(p.kappa), {}}, std::move(notes)};
    }
    if (name == "penafiel")
        return {id, ConformalSpeedProblem{penafiel_conformal_speed({p.H, p.d, p.tau}), {0.0, inf}, Fibers::Compact}, {}};
    throw SpecError("unknown built-in '" + id + "'");
}

}  // namespace kparab
