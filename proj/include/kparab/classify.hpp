#pragma once

// Parabolicity decision for surfaces invariant under a Killing field.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kparab/divergence.hpp"
#include "kparab/error.hpp"
#include "kparab/expr.hpp"
#include "kparab/geom.hpp"
#include "kparab/profile.hpp"

namespace kparab {

enum class Verdict { Parabolic, Hyperbolic, Inconclusive };
enum class Fibers { Compact, NonCompact, Unknown };
enum class Route { ArcLength, Conformal };

inline const char* to_string(Route r) { return r == Route::ArcLength ? "arclength" : "conformal"; }

enum class Rule { None, CompactCurve, CircleBase, CompactFiberTwoTails, LineBaseTwoTails, BoundedMu, BergerSphere };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Parabolic: return "parabolic";
        case Verdict::Hyperbolic: return "hyperbolic";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

inline const char* to_string(Fibers f) {
    switch (f) {
        case Fibers::Compact: return "compact";
        case Fibers::NonCompact: return "noncompact";
        case Fibers::Unknown: return "unknown";
    }
    return "?";
}

inline const char* to_string(Rule r) {
    switch (r) {
        case Rule::None: return "none";
        case Rule::CompactCurve: return "compact-curve";
        case Rule::CircleBase: return "circle-base";
        case Rule::CompactFiberTwoTails: return "compact-fiber-two-tails";
        case Rule::LineBaseTwoTails: return "line-base-two-tails";
        case Rule::BoundedMu: return "bounded-mu-shortcut";
        case Rule::BergerSphere: return "berger-sphere-shortcut";
    }
    return "?";
}

struct Base {
    enum class Kind { Line, Circle, CompactCurve } kind = Kind::Line;
    double size = 0.0;  // radius R for Circle, length L for CompactCurve

    static Base line() { return {}; }
    static Base circle(double radius) { return {Kind::Circle, radius}; }
    static Base compact(double length) { return {Kind::CompactCurve, length}; }
};

struct SurfaceSpec {
    Base base;
    MuProfile mu;
    Fibers fibers = Fibers::Unknown;

    void validate() const {
        if (base.kind != Base::Kind::Line) {
            if (!(base.size > 0.0) || !std::isfinite(base.size))
                throw SpecError("compact base size must be positive and finite");
            const double needed = base.kind == Base::Kind::Circle ? 2.0 * M_PI * base.size : base.size;
            if (mu.domain().length() < needed * (1.0 - 1e-12))
                throw SpecError("profile domain does not cover the compact base");
        }
        if (!mu.zeros().empty() && fibers == Fibers::NonCompact)
            throw SpecError("a Killing length with zeros requires compact fibers");
    }
};

struct TailReport {
    int direction = 1;
    double start = 0.0;
    bool mirrored = false;  // copied from the opposite tail across a zero at a domain end
    DivergenceVerdict evidence;
};

struct Witness {
    int direction = 1;
    double anchor = 0.0;
    double bound = 0.0;  // integral of 1/mu over the convergent tail
};

struct ClassificationReport {
    Verdict verdict = Verdict::Inconclusive;
    Rule rule = Rule::None;
    std::vector<TailReport> tails;
    std::optional<Witness> witness;
    std::vector<std::string> warnings;
    Policy policy;
    double scale = 1.0;           // normalisation applied to mu before the tail tests
    std::vector<double> zeros;    // zeros used by the decision
    std::optional<Route> route;   // extrinsic problems only
};

struct ZeroScan {
    std::vector<double> zeros;
    std::vector<std::string> warnings;
};

namespace detail {

// mu at s, with evaluation faults reported as NaN.
inline double safe_mu(const MuProfile& mu, double s) {
    try {
        const double v = mu(s);
        return std::isfinite(v) ? v : std::nan("");
    } catch (const DomainError&) {
        return std::nan("");
    } catch (const NumericError&) {
        return std::nan("");
    }
}

inline double golden_min(const MuProfile& mu, double a, double b) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    auto f = [&](double x) {
        const double v = safe_mu(mu, x);
        return std::isnan(v) ? inf : std::fabs(v);
    };
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 200 && b - a > 1e-15 * std::max(1.0, std::fabs(a)); ++i) {
        if (fc < fd) {
            b = d, d = c, fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c, c = d, fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

// Largest |mu| on a uniform grid of `window`, skipping faults.
inline double probe_scale(const MuProfile& mu, const Interval& window, int samples = 257) {
    double m = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double s = window.lo + (i + 0.5) / samples * window.length();
        const double v = safe_mu(mu, s);
        if (std::isfinite(v)) m = std::max(m, std::fabs(v));
    }
    return m;
}

inline Interval central_window(const Interval& domain, double half_width) {
    Interval w{std::max(domain.lo, -half_width), std::min(domain.hi, half_width)};
    if (!(w.lo < w.hi)) {
        // Domain lies entirely to one side of the origin.
        if (std::isfinite(domain.lo) && domain.lo >= half_width)
            w = {domain.lo, std::isfinite(domain.hi) ? domain.hi : domain.lo + 2.0 * half_width};
        else
            w = {std::isfinite(domain.lo) ? domain.lo : domain.hi - 2.0 * half_width, domain.hi};
    }
    return w;
}

}  // namespace detail

/// Zeros of mu on a finite interval: sign changes refined by bisection, and
/// near-touching minima (|mu| < 1e-10 * scale) refined by golden-section search.
inline ZeroScan detect_zeros(const MuProfile& mu, const Interval& interval, int samples = 4096) {
    if (!interval.finite() || !(interval.lo < interval.hi)) throw SpecError("zero scan needs a finite interval");
    ZeroScan out;
    std::vector<double> s(samples), v(samples);
    double scale = 0.0;
    for (int i = 0; i < samples; ++i) {
        s[i] = interval.lo + interval.length() * i / (samples - 1);
        v[i] = detail::safe_mu(mu, s[i]);
        if (std::isfinite(v[i])) scale = std::max(scale, std::fabs(v[i]));
    }
    if (scale == 0.0) {
        out.warnings.push_back("profile vanishes on the whole scan interval");
        return out;
    }
    const double tiny = 1e-10 * scale;
    const double spacing = interval.length() / (samples - 1);
    auto add = [&](double z) {
        for (double w : out.zeros)
            if (std::fabs(w - z) < 2.0 * spacing) return;
        out.zeros.push_back(z);
    };
    for (int i = 0; i < samples; ++i) {
        if (std::isnan(v[i])) continue;
        if (v[i] == 0.0) {
            add(s[i]);
            continue;
        }
        if (i + 1 < samples && std::isfinite(v[i + 1]) && v[i + 1] != 0.0 && (v[i] > 0.0) != (v[i + 1] > 0.0)) {
            double a = s[i], b = s[i + 1], fa = v[i];
            for (int it = 0; it < 200 && b - a > 4e-16 * std::max(1.0, std::fabs(a)); ++it) {
                const double m = 0.5 * (a + b);
                const double fm = detail::safe_mu(mu, m);
                if (std::isnan(fm)) break;
                if (fm == 0.0) {
                    a = b = m;
                    break;
                }
                if ((fm > 0.0) == (fa > 0.0)) a = m, fa = fm;
                else b = m;
            }
            add(0.5 * (a + b));
            continue;
        }
        if (i > 0 && i + 1 < samples && std::isfinite(v[i - 1]) && std::isfinite(v[i + 1]) &&
            std::fabs(v[i]) <= std::fabs(v[i - 1]) && std::fabs(v[i]) <= std::fabs(v[i + 1]) &&
            std::fabs(v[i]) < 1e-2 * scale) {
            const double z = detail::golden_min(mu, s[i - 1], s[i + 1]);
            const double fz = detail::safe_mu(mu, z);
            if (std::isfinite(fz) && std::fabs(fz) < tiny) add(z);
        }
    }
    std::sort(out.zeros.begin(), out.zeros.end());
    if (out.zeros.size() > 2)
        out.warnings.push_back("found " + std::to_string(out.zeros.size()) +
                               " zeros; a Killing length along a complete profile has at most two");
    return out;
}

namespace detail {

// Evidence that mu is bounded above: a probe of the central window plus the maxima
// over dyadic rings out to 2^12, whose log-log slope must flatten.
inline bool bounded_evidence(const MuProfile& mu, const Interval& window) {
    double central = 0.0;
    for (int i = 0; i < 257; ++i) {
        const double v = safe_mu(mu, window.lo + (i + 0.5) / 257 * window.length());
        if (std::isnan(v)) return false;
        central = std::max(central, v);
    }
    const Interval& d = mu.domain();
    for (int dir : {-1, 1}) {
        if (std::isfinite(dir > 0 ? d.hi : d.lo)) continue;  // compact side, continuity suffices
        const double origin = dir > 0 ? window.hi : window.lo;
        std::vector<double> ring;
        for (int k = 1; k <= 12; ++k) {
            const double r0 = std::ldexp(1.0, k - 1), r1 = std::ldexp(1.0, k);
            double m = 0.0;
            for (int i = 0; i <= 32; ++i) {
                const double v = safe_mu(mu, origin + dir * (r0 + (r1 - r0) * i / 32.0));
                if (std::isnan(v)) return false;
                m = std::max(m, v);
            }
            if (!(m > 0.0)) return false;
            // Running maximum, so sparse sampling of an oscillating mu does not read as growth.
            ring.push_back(ring.empty() ? m : std::max(m, ring.back()));
            if (ring.size() >= 3 && std::log2(ring.back() / ring[ring.size() - 2]) > 0.5) return false;
        }
        const double slope = std::log2(ring.back() / ring[ring.size() - 5]) / 4.0;
        if (slope > 0.01) return false;
        if (!std::isfinite(std::max(central, *std::max_element(ring.begin(), ring.end())))) return false;
    }
    return true;
}

// Moves away from a zero until mu is comfortably positive.
struct Excision {
    double delta;
    double start;
};

inline Excision excise(const MuProfile& mu, double zero, int dir, double scale) {
    double delta = 1e-6 * std::max(1.0, std::fabs(zero));
    for (int i = 0; i < 80; ++i) {
        const double v = safe_mu(mu, zero + dir * delta);
        if (v > 1e-8 * scale) break;
        delta *= 2.0;
    }
    double step = delta;
    double start = zero + dir * delta;
    for (int i = 0; i < 80; ++i) {
        const double v = safe_mu(mu, start);
        if (v >= 1e-3 * scale) break;
        step *= 2.0;
        start = zero + dir * step;
    }
    return {delta, start};
}

inline void finish_tails(ClassificationReport& report, double scale) {
    bool all_divergent = true;
    for (const auto& t : report.tails) {
        if (t.evidence.verdict == Tail::Convergent) {
            report.verdict = Verdict::Hyperbolic;
            report.witness = Witness{t.direction, t.start, t.evidence.total_estimate() / scale};
            return;
        }
        if (t.evidence.verdict != Tail::Divergent) all_divergent = false;
    }
    report.verdict = all_divergent ? Verdict::Parabolic : Verdict::Inconclusive;
}

}  // namespace detail

/// Decision procedure on an intrinsic description (base topology, Killing length, fibers).
inline ClassificationReport classify_intrinsic(const SurfaceSpec& spec, const Policy& policy = {}) {
    spec.validate();
    ClassificationReport report;
    report.policy = policy;

    if (spec.base.kind != Base::Kind::Line) {
        report.rule = spec.base.kind == Base::Kind::Circle ? Rule::CircleBase : Rule::CompactCurve;
        report.verdict = Verdict::Parabolic;
        return report;
    }

    const MuProfile& mu = spec.mu;
    const Interval& domain = mu.domain();
    const Interval window = detail::central_window(domain, 8.0);
    const double scale = detail::probe_scale(mu, window);
    if (!(scale > 0.0) || !std::isfinite(scale)) throw SpecError("Killing length is not positive on the probe window");
    report.scale = scale;
    const MuProfile unit = mu.scaled(1.0 / scale);
    const bool tabulated = mu.table() != nullptr;

    // Zeros: annotated ones plus any the scan finds near the origin.
    std::vector<double> zeros = mu.zeros();
    {
        const Interval scan = detail::central_window(domain, 16.0);
        auto found = detect_zeros(unit, scan);
        for (auto& w : found.warnings) report.warnings.push_back(std::move(w));
        for (double z : found.zeros) {
            const bool known = std::any_of(zeros.begin(), zeros.end(),
                                           [&](double a) { return std::fabs(a - z) < 1e-6 * std::max(1.0, std::fabs(z)); });
            if (!known && z > domain.lo && z < domain.hi) {
                report.warnings.push_back("unannotated zero of mu near s=" + detail::format_number(z));
                zeros.push_back(z);
            }
        }
        for (int i = 0; i < 129; ++i) {
            const double v = detail::safe_mu(unit, scan.lo + (i + 0.5) / 129 * scan.length());
            if (v < -1e-10) throw SpecError("Killing length is negative inside its domain");
        }
    }
    // A finite domain end must be a zero (the axis); otherwise the profile is incomplete.
    for (double end : {domain.lo, domain.hi}) {
        if (!std::isfinite(end)) continue;
        const bool listed = std::any_of(zeros.begin(), zeros.end(),
                                        [&](double a) { return std::fabs(a - end) <= 1e-9 * std::max(1.0, std::fabs(end)); });
        if (listed) continue;
        const double v = detail::safe_mu(unit, end);
        if (!(std::fabs(v) < 1e-8))
            throw SpecError("profile domain ends at s=" + detail::format_number(end) +
                            " where mu does not vanish; the profile curve is incomplete");
        report.warnings.push_back("domain end s=" + detail::format_number(end) + " treated as a zero of mu");
        zeros.push_back(end);
    }
    std::sort(zeros.begin(), zeros.end());
    report.zeros = zeros;
    if (!zeros.empty() && spec.fibers == Fibers::NonCompact)
        throw SpecError("a Killing length with zeros requires compact fibers");
    if (!zeros.empty() && spec.fibers == Fibers::Unknown)
        report.warnings.push_back("fibers assumed compact because mu vanishes");
    if (tabulated) report.warnings.push_back("tail verdicts rely on extrapolation beyond the tabulated samples");

    if (std::isfinite(domain.lo) && std::isfinite(domain.hi)) {
        // Both ends close up on the axis: a compact profile.
        report.rule = Rule::CompactCurve;
        report.verdict = Verdict::Parabolic;
        return report;
    }

    if (detail::bounded_evidence(unit, window)) {
        report.rule = Rule::BoundedMu;
        report.verdict = Verdict::Parabolic;
        return report;
    }

    auto inv = [&unit](double s) { return 1.0 / unit(s); };
    report.rule = zeros.empty() ? Rule::LineBaseTwoTails : Rule::CompactFiberTwoTails;

    double left_start = 0.0, right_start = 0.0;
    if (!zeros.empty()) {
        left_start = detail::excise(unit, zeros.front(), -1, 1.0).start;
        right_start = detail::excise(unit, zeros.back(), +1, 1.0).start;
    } else if (!domain.contains(0.0)) {
        throw SpecError("a line base needs a profile defined on the whole line");
    }

    std::optional<TailReport> left, right;
    if (!std::isfinite(domain.lo)) left = TailReport{-1, left_start, false, tail_integral(inv, left_start, -1, policy)};
    if (!std::isfinite(domain.hi)) right = TailReport{+1, right_start, false, tail_integral(inv, right_start, +1, policy)};
    if (!left) {
        left = *right;
        left->direction = -1;
        left->mirrored = true;
    }
    if (!right) {
        right = *left;
        right->direction = +1;
        right->mirrored = true;
    }
    report.tails = {*left, *right};
    detail::finish_tails(report, 1.0);
    if (report.witness) report.witness->bound /= scale;
    return report;
}

// ---------------------------------------------------------------------------
// Extrinsic form: a curve in the base of a Killing submersion.

struct AmbientModel {
    std::string name;
    Metric2D base;
    Expression mu;  // over the base coordinates
    Fibers fibers = Fibers::Unknown;
    std::map<std::string, double> parameters;
    std::vector<std::string> notes;
    bool compact_total_space = false;  // every Killing length is bounded (Berger spheres)
};


struct ExtrinsicOptions {
    Route route = Route::ArcLength;
    std::optional<double> anchor;
    bool closed = false;  // the curve is a closed loop
    ArcLengthOptions arc{};
};

namespace detail {

// Tail of int f(t) dt towards a parameter end. Finite ends are mapped to an infinite
// tail by t = a + (t0 - a)/(1 + sigma), which keeps the divergence truth value.
template <class F>
DivergenceVerdict parameter_tail(F&& f, double t0, int dir, const Interval& range, const Policy& policy) {
    const double end = dir > 0 ? range.hi : range.lo;
    if (!std::isfinite(end)) return tail_integral(f, t0, dir, policy);
    const double span = t0 - end;
    auto g = [&](double sigma) {
        const double w = 1.0 / (1.0 + sigma);
        const double t = end + span * w;
        if (t == end) throw NumericError("parameter end resolution exhausted");
        return f(t) * std::fabs(span) * w * w;
    };
    return tail_integral(g, 0.0, +1, policy);
}

}  // namespace detail

/// Completeness of a curve in the conformal metric, given its conformal speed in t.
inline ClassificationReport classify_conformal_speed(const std::function<double(double)>& speed, const Interval& range,
                                                     Fibers fibers, const Policy& policy = {},
                                                     std::optional<double> anchor = {}) {
    if (!(range.lo < range.hi)) throw SpecError("curve parameter range must be well ordered");
    Curve2D probe(parse("t", {"t"}), parse("0", {"t"}), range);
    const double t0 = anchor.value_or(probe.default_anchor());
    if (!(t0 > range.lo && t0 < range.hi)) throw SpecError("anchor lies outside the curve range");
    ClassificationReport report;
    report.policy = policy;
    const bool finite_end = std::isfinite(range.lo) || std::isfinite(range.hi);
    report.rule = fibers == Fibers::Compact || finite_end ? Rule::CompactFiberTwoTails : Rule::LineBaseTwoTails;
    auto f = [&](double t) {
        const double v = speed(t);
        if (!std::isfinite(v)) throw NumericError("conformal speed not finite at t=" + detail::format_number(t));
        return v;
    };
    for (int dir : {-1, 1}) report.tails.push_back({dir, t0, false, detail::parameter_tail(f, t0, dir, range, policy)});
    detail::finish_tails(report, 1.0);
    return report;
}

/// The Killing length restricted to the curve, as an expression in t.
inline Expression mu_along(const AmbientModel& model, const Curve2D& c) {
    return compose(model.mu, {c.u(), c.v()});
}

/// mu along the g-arc-length of c, signed from the anchor. Parameter ends reached at
/// finite length must be zeros of mu (the axis); they become finite domain ends.
inline MuProfile arclength_profile(const AmbientModel& model, const Curve2D& c, const ExtrinsicOptions& opt = {}) {
    const Expression mu_t = mu_along(model, c);
    const double t0 = opt.anchor.value_or(c.default_anchor());
    std::shared_ptr<ArcLengthCurve> fwd = arclength_reparam(c, model.base, t0, +1, 0.0, opt.arc);
    std::shared_ptr<ArcLengthCurve> bwd = arclength_reparam(c, model.base, t0, -1, 0.0, opt.arc);
    auto eval_mu = [mu_t](double t) {
        try {
            return mu_t(t);
        } catch (const DomainError&) {
            return 0.0;
        }
    };
    const double mu0 = std::fabs(eval_mu(t0));
    Interval domain;
    std::vector<double> zeros;
    for (auto* arc : {fwd.get(), bwd.get()}) {
        if (!std::isfinite(arc->end_parameter())) continue;
        arc->extend_to(inf);
        if (!arc->end_reached()) continue;
        const double length = arc->end_length();
        const double t_last = arc->parameter_at(arc->reached());
        const double gap = std::fabs(arc->end_parameter() - t_last);
        double tail_speed = 0.0;
        try {
            tail_speed = tangent_norm(model.base, c, t_last);
        } catch (const DomainError&) {
        }
        if (gap * tail_speed > 1e-6 * std::max(1.0, length))
            throw UnresolvedParameterEnd("the curve approaches its parameter end at unbounded arc length; use the conformal route");
        if (!(std::fabs(eval_mu(t_last)) < 1e-6 * std::max(1.0, mu0)))
            throw SpecError("curve reaches its parameter end at finite length where mu does not vanish; it is incomplete");
        const double s_end = arc->direction() * length;
        zeros.push_back(s_end);
        (arc->direction() > 0 ? domain.hi : domain.lo) = s_end;
    }
    auto profile = [fwd, bwd, eval_mu](double s) {
        auto& arc = s >= 0.0 ? *fwd : *bwd;
        const double len = std::fabs(s);
        arc.extend_to(len);
        if (arc.end_reached() && len >= arc.reached()) return eval_mu(arc.parameter_at(arc.reached()));
        return eval_mu(arc.parameter_at(len));
    };
    return MuProfile::from_function(profile, domain, zeros, "mu along the " + model.name + " curve by arc length");
}

/// Decides parabolicity of the surface swept by the fibers over the curve c.
inline ClassificationReport classify_extrinsic(const AmbientModel& model, const Curve2D& c,
                                               const ExtrinsicOptions& opt = {}, const Policy& policy = {}) {
    ClassificationReport report;
    report.policy = policy;
    report.route = opt.route;
    if (model.compact_total_space) {
        report.rule = Rule::BergerSphere;
        report.verdict = Verdict::Parabolic;
        return report;
    }
    if (model.mu.names() != model.base.coordinates())
        throw SpecError("model Killing length must use the base coordinates");
    validate_curve(model.base, c, opt.arc.regularity_floor);
    if (opt.closed) {
        report.rule = Rule::CompactCurve;
        report.verdict = Verdict::Parabolic;
        return report;
    }
    const Expression mu_t = mu_along(model, c);
    const double t0 = opt.anchor.value_or(c.default_anchor());

    if (opt.route == Route::Conformal) {
        auto speed = [&](double t) {
            bool representable = true;
            try {
                const auto p = c.point(t);
                const auto dp = c.velocity(t);
                representable = std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(dp[0]) && std::isfinite(dp[1]);
            } catch (const DomainError&) {
                representable = std::fabs(t - t0) > 1.0;  // near the anchor this is a genuine fault
                if (!representable) throw;
            }
            if (!representable) throw RangeHorizon("curve leaves floating-point range at t=" + detail::format_number(t));
            const double m = mu_t(t);
            if (!(m > 0.0)) throw NumericError("Killing length vanishes on the curve at t=" + detail::format_number(t));
            return tangent_norm(model.base, c, t) / m;
        };
        auto r = classify_conformal_speed(speed, c.range(), model.fibers, policy, t0);
        if (model.fibers == Fibers::NonCompact && r.rule == Rule::CompactFiberTwoTails) r.rule = Rule::LineBaseTwoTails;
        r.route = Route::Conformal;
        return r;
    }

    auto r = classify_intrinsic(SurfaceSpec{Base::line(), arclength_profile(model, c, opt), model.fibers}, policy);
    r.route = Route::ArcLength;
    return r;
}

}  // namespace kparab
