#pragma once

// JSON spec files in, canonical JSON reports and CSV out.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kparab/classify.hpp"
#include "kparab/error.hpp"
#include "kparab/models.hpp"
#include "kparab/verify.hpp"

namespace kparab::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Canonical writer: sorted keys, %.12g floats, non-finite numbers as strings.

inline std::string format_float(double v) {
    if (std::isnan(v)) return "\"nan\"";
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    if (v == 0.0) return "0";  // no negative zero
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_canonical(const json& j, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    const char* nl = indent > 0 ? "\n" : "";
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{";
            out += nl;
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted
                if (!first) {
                    out += ",";
                    out += nl;
                }
                first = false;
                out += pad;
                out += json(it.key()).dump();
                out += indent > 0 ? ": " : ":";
                write_canonical(it.value(), out, indent, depth + 1);
            }
            out += nl;
            out += close_pad;
            out += "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            // Arrays of scalars stay on one line.
            bool flat = true;
            for (const auto& e : j)
                if (e.is_structured()) flat = false;
            out += "[";
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += ",";
                if (!flat) {
                    out += nl;
                    out += pad;
                } else if (!first && indent > 0) {
                    out += " ";
                }
                first = false;
                write_canonical(e, out, indent, depth + 1);
            }
            if (!flat) {
                out += nl;
                out += close_pad;
            }
            out += "]";
            return;
        }
        case json::value_t::number_float: out += format_float(j.get<double>()); return;
        default: out += j.dump(); return;
    }
}

inline std::string dump(const json& j, int indent = 2) {
    std::string out;
    write_canonical(j, out, indent, 0);
    out += "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Reading numbers that may be the strings "inf" / "-inf".

inline double number(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return inf;
        if (s == "-inf") return -inf;
    }
    throw SpecError(what + ": expected a number or \"inf\"/\"-inf\"");
}

inline double finite_number(const json& j, const std::string& what) {
    const double v = number(j, what);
    if (!std::isfinite(v)) throw SpecError(what + ": must be finite");
    return v;
}

// Typos in a spec should fail loudly rather than fall back to a default.
inline void only_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& what) {
    if (!j.is_object()) throw SpecError(what + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw SpecError("unknown key '" + it.key() + "' in " + what);
}

inline Interval interval(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) throw SpecError(what + ": expected [lo, hi]");
    Interval r{number(j[0], what), number(j[1], what)};
    if (!(r.lo < r.hi)) throw SpecError(what + ": range must be well ordered");
    return r;
}

inline json number_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

// ---------------------------------------------------------------------------
// Policy

inline void apply_policy(const json& j, Policy& p) {
    if (!j.is_object()) throw SpecError("policy must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        if (k == "window_base") p.window_base = finite_number(v, k);
        else if (k == "k_max") p.k_max = static_cast<int>(finite_number(v, k));
        else if (k == "divergence_threshold") p.divergence_threshold = finite_number(v, k);
        else if (k == "p_margin") p.p_margin = finite_number(v, k);
        else if (k == "cauchy_tol") p.cauchy_tol = finite_number(v, k);
        else if (k == "fit_samples") p.fit_samples = static_cast<int>(finite_number(v, k));
        else if (k == "fit_rms_limit") p.fit_rms_limit = finite_number(v, k);
        else if (k == "drift_tol") p.drift_tol = finite_number(v, k);
        else if (k == "drift_span") p.drift_span = static_cast<int>(finite_number(v, k));
        else if (k == "flat_windows") p.flat_windows = static_cast<int>(finite_number(v, k));
        else throw SpecError("unknown policy key '" + k + "'");
    }
    if (!(p.window_base > 0.0) || p.k_max < 1 || p.k_max > 60 || p.fit_samples < 5 || p.drift_span < 2 ||
        p.flat_windows < 2 || !(p.p_margin > 0.0))
        throw SpecError("policy values out of range");
}

inline json policy_json(const Policy& p) {
    return {{"window_base", p.window_base},
            {"k_max", p.k_max},
            {"divergence_threshold", p.divergence_threshold},
            {"p_margin", p.p_margin},
            {"cauchy_tol", p.cauchy_tol},
            {"fit_samples", p.fit_samples},
            {"fit_rms_limit", p.fit_rms_limit},
            {"drift_tol", p.drift_tol},
            {"drift_span", p.drift_span},
            {"flat_windows", p.flat_windows}};
}

// ---------------------------------------------------------------------------
// Spec files

struct SpecFile {
    Problem problem;
    std::optional<json> policy;
    std::optional<Route> route;
};

inline Fibers parse_fibers(const json& j) {
    const auto s = j.get<std::string>();
    if (s == "compact") return Fibers::Compact;
    if (s == "noncompact") return Fibers::NonCompact;
    if (s == "unknown") return Fibers::Unknown;
    throw SpecError("fibers must be compact, noncompact or unknown");
}

inline std::string expr_source(const json& j, const std::string& what) {
    if (!j.is_string()) throw SpecError(what + ": expected an expression string");
    return j.get<std::string>();
}

inline SurfaceSpec parse_intrinsic(const json& j) {
    only_keys(j, {"base", "mu", "domain", "zeros", "fibers"}, "intrinsic");
    Base base;
    if (j.contains("base")) {
        const auto& b = j["base"];
        if (b.is_string() && b.get<std::string>() == "line") base = Base::line();
        else if (b.is_object() && b.size() == 1 && b.contains("circle")) base = Base::circle(finite_number(b["circle"], "base.circle"));
        else if (b.is_object() && b.size() == 1 && b.contains("compact")) base = Base::compact(finite_number(b["compact"], "base.compact"));
        else throw SpecError("base must be \"line\", {\"circle\": R} or {\"compact\": L}");
    }
    std::vector<double> zeros;
    if (j.contains("zeros")) {
        if (!j["zeros"].is_array()) throw SpecError("zeros: expected an array");
        for (const auto& z : j["zeros"]) zeros.push_back(finite_number(z, "zeros"));
    }
    Interval domain;
    if (j.contains("domain")) domain = interval(j["domain"], "domain");
    if (!j.contains("mu")) throw SpecError("intrinsic: missing mu");
    const auto& m = j["mu"];
    std::optional<MuProfile> mu;
    if (m.is_string()) {
        mu = MuProfile::from_source(m.get<std::string>(), domain, zeros);
    } else if (m.is_object() && m.contains("table")) {
        std::vector<std::pair<double, double>> samples;
        for (const auto& row : m["table"]) {
            if (!row.is_array() || row.size() != 2) throw SpecError("mu.table rows must be [s, mu]");
            samples.emplace_back(finite_number(row[0], "mu.table"), finite_number(row[1], "mu.table"));
        }
        mu = MuProfile::from_table(samples, zeros, domain);
    } else {
        throw SpecError("mu must be an expression string or {\"table\": [[s, mu], ...]}");
    }
    const Fibers fibers = j.contains("fibers") ? parse_fibers(j["fibers"]) : Fibers::Unknown;
    SurfaceSpec spec{base, *mu, fibers};
    spec.validate();
    return spec;
}

inline AmbientModel parse_model(const json& m) {
    if (m.is_string()) {
        if (m.get<std::string>() == "sol3") return sol3_model();
        throw SpecError("unknown model '" + m.get<std::string>() + "'");
    }
    if (!m.is_object() || m.size() != 1) throw SpecError("model must be \"sol3\", {\"ekt\": {...}} or {\"custom\": {...}}");
    if (m.contains("ekt")) {
        const auto& e = m["ekt"];
        only_keys(e, {"kappa", "tau", "mu_constant"}, "ekt");
        MuConstant c = MuConstant::FirstPrinciples;
        if (e.contains("mu_constant")) {
            const auto s = e["mu_constant"].get<std::string>();
            if (s == "as-printed") c = MuConstant::AsPrinted;
            else if (s != "first-principles") throw SpecError("mu_constant must be first-principles or as-printed");
        }
        return ekt_model(finite_number(e.value("kappa", json(0.0)), "kappa"), finite_number(e.value("tau", json(0.0)), "tau"), c);
    }
    if (m.contains("custom")) {
        const auto& c = m["custom"];
        only_keys(c, {"name", "coordinates", "domain", "E", "F", "G", "mu", "fibers", "compact"}, "custom");
        std::vector<std::string> coords{"u", "v"};
        if (c.contains("coordinates")) coords = c["coordinates"].get<std::vector<std::string>>();
        if (coords.size() != 2) throw SpecError("custom model needs two coordinates");
        Domain domain;
        if (c.contains("domain")) {
            const auto& d = c["domain"];
            only_keys(d, {"u", "v", "positive"}, "custom.domain");
            if (d.contains("u")) domain.u = interval(d["u"], "domain.u");
            if (d.contains("v")) domain.v = interval(d["v"], "domain.v");
            if (d.contains("positive"))
                for (const auto& p : d["positive"]) domain.positive.push_back(parse(expr_source(p, "domain.positive"), coords));
        }
        auto field = [&](const char* key, const char* fallback) {
            return parse(c.contains(key) ? expr_source(c[key], key) : std::string(fallback), coords);
        };
        if (!c.contains("E") || !c.contains("G") || !c.contains("mu")) throw SpecError("custom model needs E, G and mu");
        Metric2D base(field("E", "1"), field("F", "0"), field("G", "1"), domain);
        const Fibers fibers = c.contains("fibers") ? parse_fibers(c["fibers"]) : Fibers::Unknown;
        return AmbientModel{c.value("name", std::string("custom")), std::move(base), field("mu", "1"), fibers, {}, {}, c.value("compact", false)};
    }
    throw SpecError("model must be \"sol3\", {\"ekt\": {...}} or {\"custom\": {...}}");
}

inline Route parse_route(const json& j) {
    const auto s = j.get<std::string>();
    if (s == "arclength") return Route::ArcLength;
    if (s == "conformal") return Route::Conformal;
    throw SpecError("route must be arclength or conformal");
}

inline SpecFile parse_spec(const json& j) {
    if (!j.is_object()) throw SpecError("spec must be a JSON object");
    const bool in = j.contains("intrinsic"), ex = j.contains("extrinsic");
    if (in == ex) throw SpecError("spec needs exactly one of \"intrinsic\" and \"extrinsic\"");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "intrinsic" && it.key() != "extrinsic" && it.key() != "policy" && it.key() != "name")
            throw SpecError("unknown spec key '" + it.key() + "'");
    SpecFile out{{j.value("name", std::string("spec")), SurfaceSpec{Base::line(), MuProfile::from_source("1"), Fibers::Unknown}, {}}, {}, {}};
    if (j.contains("policy")) out.policy = j["policy"];
    if (in) {
        out.problem.body = parse_intrinsic(j["intrinsic"]);
        return out;
    }
    const auto& e = j["extrinsic"];
    only_keys(e, {"model", "curve", "route"}, "extrinsic");
    if (!e.contains("model") || !e.contains("curve")) throw SpecError("extrinsic: needs model and curve");
    auto model = parse_model(e["model"]);
    const auto& c = e["curve"];
    only_keys(c, {"u", "v", "t_range", "closed", "anchor"}, "curve");
    const Interval range = c.contains("t_range") ? interval(c["t_range"], "t_range") : Interval{};
    Curve2D curve(parse(expr_source(c.at("u"), "curve.u"), {"t"}), parse(expr_source(c.at("v"), "curve.v"), {"t"}), range);
    ExtrinsicOptions opt;
    opt.closed = c.value("closed", false);
    if (c.contains("anchor")) opt.anchor = finite_number(c["anchor"], "anchor");
    if (e.contains("route")) out.route = parse_route(e["route"]);
    out.problem.notes = model.notes;
    out.problem.body = ExtrinsicProblem{std::move(model), std::move(curve), opt};
    return out;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON in '") + path + "': " + e.what(), e.byte);
    }
}

// ---------------------------------------------------------------------------
// Reports

inline json verdict_json(const DivergenceVerdict& v) {
    json trace = json::array();
    for (const auto& p : v.trace) trace.push_back(json::array({p.window_end, p.partial}));
    return {{"verdict", to_string(v.verdict)},
            {"reason", v.reason},
            {"windows", v.windows},
            {"partial", v.partial()},
            {"remainder", v.remainder},
            {"quadrature_warning", v.quadrature_warning},
            {"partial_trace", trace},
            {"tail_model",
             {{"kind", to_string(v.model.kind)},
              {"rate", number_json(v.model.rate)},
              {"drift", number_json(v.model.drift)},
              {"rms", number_json(v.model.rms)}}}};
}

inline json report_json(const ClassificationReport& r) {
    json tails = json::array();
    for (const auto& t : r.tails) {
        auto j = verdict_json(t.evidence);
        j["direction"] = t.direction > 0 ? "+inf" : "-inf";
        j["start"] = t.start;
        j["mirrored"] = t.mirrored;
        tails.push_back(std::move(j));
    }
    json out = {{"verdict", to_string(r.verdict)},
                {"rule", to_string(r.rule)},
                {"tails", tails},
                {"warnings", r.warnings},
                {"policy", policy_json(r.policy)},
                {"scale", r.scale},
                {"zeros", r.zeros}};
    if (r.witness)
        out["witness"] = {{"tail", r.witness->direction > 0 ? "+inf" : "-inf"},
                          {"anchor", r.witness->anchor},
                          {"bound", r.witness->bound}};
    return out;
}

inline int exit_code(Verdict v) {
    switch (v) {
        case Verdict::Parabolic: return 0;
        case Verdict::Hyperbolic: return 1;
        case Verdict::Inconclusive: return 2;
    }
    return 2;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

inline std::string csv_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Columns s, mu, 1/mu, and the cumulative integral of 1/mu from s0.
inline std::string tabulate(const MuProfile& mu, const Interval& range, int samples, double s0) {
    if (!range.finite() || !(range.lo <= range.hi)) throw SpecError("tabulate needs a finite range");
    if (samples < 1) throw SpecError("sample count must be positive");
    std::string out = "s,mu,inv_mu,partial_integral_from_s0\r\n";
    auto inv = [&mu](double s) { return 1.0 / mu(s); };
    double prev = s0, partial = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double s = samples == 1 ? range.lo : range.lo + range.length() * i / (samples - 1);
        partial += integrate(inv, prev, s, 1e-14, 1e-13).value;
        prev = s;
        const double m = mu(s);
        out += csv_field(csv_number(s)) + "," + csv_field(csv_number(m)) + "," + csv_field(csv_number(1.0 / m)) + "," +
               csv_field(csv_number(partial)) + "\r\n";
    }
    return out;
}

}  // namespace kparab::io
