#pragma once

// Two-dimensional Riemannian metrics, curves in them, and the quantities the
// parabolicity criterion needs from them.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kparab/error.hpp"
#include "kparab/expr.hpp"
#include "kparab/ode.hpp"
#include "kparab/profile.hpp"
#include "kparab/quadrature.hpp"

namespace kparab {

/// Coordinate domain of a metric: an open box, optionally cut down by strict
/// positivity constraints such as 4 + kappa*r^2 > 0.
struct Domain {
    Interval u;
    Interval v;
    std::vector<Expression> positive;  // each over the metric's coordinate names
    double probe_extent = 10.0;        // stand-in for infinite bounds when probing

    bool contains(double a, double b) const {
        if (!(a > u.lo && a < u.hi && b > v.lo && b < v.hi)) return false;
        for (const auto& c : positive) {
            try {
                if (!(c(a, b) > 0.0)) return false;
            } catch (const DomainError&) {
                return false;
            }
        }
        return true;
    }

    Interval probe_range(const Interval& i) const {
        Interval r = i;
        if (!std::isfinite(r.lo)) r.lo = std::isfinite(r.hi) ? r.hi - 2.0 * probe_extent : -probe_extent;
        if (!std::isfinite(r.hi)) r.hi = r.lo + (std::isfinite(i.lo) ? probe_extent : 2.0 * probe_extent);
        return r;
    }
};

struct MetricComponents {
    double E, F, G;
};

class Metric2D {
public:
    static constexpr int probe_grid = 64;

    Metric2D(Expression E, Expression F, Expression G, Domain domain)
        : E_(std::move(E)), F_(std::move(F)), G_(std::move(G)), domain_(std::move(domain)) {
        if (E_.names().size() != 2 || E_.names() != F_.names() || E_.names() != G_.names())
            throw SpecError("metric components must share the same two coordinate names");
        for (const auto& c : domain_.positive)
            if (c.names() != E_.names()) throw SpecError("domain constraints must use the metric coordinates");
        validate();
    }

    const std::vector<std::string>& coordinates() const { return E_.names(); }
    const Expression& E() const { return E_; }
    const Expression& F() const { return F_; }
    const Expression& G() const { return G_; }
    const Domain& domain() const { return domain_; }

    MetricComponents at(double u, double v) const {
        if (!domain_.contains(u, v))
            throw DomainError("point leaves the metric domain",
                              "(" + detail::format_number(u) + ", " + detail::format_number(v) + ")");
        return {E_(u, v), F_(u, v), G_(u, v)};
    }

    /// Visits the probe grid points that fall inside the domain.
    template <class Visit>
    void for_each_probe(Visit&& visit) const {
        const Interval ru = domain_.probe_range(domain_.u);
        const Interval rv = domain_.probe_range(domain_.v);
        for (int i = 0; i < probe_grid; ++i) {
            const double a = ru.lo + (i + 0.5) / probe_grid * ru.length();
            for (int j = 0; j < probe_grid; ++j) {
                const double b = rv.lo + (j + 0.5) / probe_grid * rv.length();
                if (domain_.contains(a, b)) visit(a, b);
            }
        }
    }

private:
    Expression E_, F_, G_;
    Domain domain_;

    void validate() const {
        int inside = 0;
        for_each_probe([&](double a, double b) {
            ++inside;
            double e, f, g;
            try {
                e = E_(a, b);
                f = F_(a, b);
                g = G_(a, b);
            } catch (const DomainError& err) {
                throw SpecError(std::string("metric undefined at a probe point: ") + err.what());
            }
            if (!(e > 0.0) || !(g > 0.0) || !(e * g - f * f > 0.0) || !std::isfinite(e * g))
                throw SpecError("metric is not positive definite at (" + detail::format_number(a) + ", " +
                                detail::format_number(b) + ")");
        });
        if (inside == 0) throw SpecError("metric domain contains no probe points");
    }
};

/// Parameterized curve t -> (u(t), v(t)); derivatives are symbolic.
class Curve2D {
public:
    Curve2D(Expression u, Expression v, Interval range)
        : u_(std::move(u)), v_(std::move(v)), range_(range) {
        if (u_.names() != std::vector<std::string>{"t"} || v_.names() != u_.names())
            throw SpecError("curve components must be expressions in 't'");
        if (!(range_.lo < range_.hi)) throw SpecError("curve parameter range must be well ordered");
        du_ = std::make_shared<Expression>(differentiate(u_, "t"));
        dv_ = std::make_shared<Expression>(differentiate(v_, "t"));
    }

    static Curve2D from_source(std::string_view u, std::string_view v, Interval range) {
        return Curve2D(parse(u, {"t"}), parse(v, {"t"}), range);
    }

    const Expression& u() const { return u_; }
    const Expression& v() const { return v_; }
    const Expression& du() const { return *du_; }
    const Expression& dv() const { return *dv_; }
    const Interval& range() const { return range_; }

    std::array<double, 2> point(double t) const { return {u_(t), v_(t)}; }
    std::array<double, 2> velocity(double t) const { return {(*du_)(t), (*dv_)(t)}; }

    /// A parameter strictly inside the range, used as default anchor.
    double default_anchor() const {
        if (range_.contains(0.0) && range_.lo < 0.0 && range_.hi > 0.0) return 0.0;
        if (std::isfinite(range_.lo) && std::isfinite(range_.hi)) return 0.5 * (range_.lo + range_.hi);
        if (std::isfinite(range_.lo)) return range_.lo + 1.0;
        return range_.hi - 1.0;
    }

    /// Sample parameters for validation; infinite ends are clipped.
    std::vector<double> probe_parameters(int count = 257, double extent = 50.0) const {
        Interval r = range_;
        if (!std::isfinite(r.lo)) r.lo = std::isfinite(r.hi) ? r.hi - extent : -extent;
        if (!std::isfinite(r.hi)) r.hi = std::isfinite(range_.lo) ? r.lo + extent : extent;
        std::vector<double> ts;
        for (int i = 0; i < count; ++i) ts.push_back(r.lo + (i + 0.5) / count * r.length());
        return ts;
    }

private:
    Expression u_, v_;
    std::shared_ptr<Expression> du_, dv_;
    Interval range_;
};

inline double tangent_norm(const Metric2D& g, const Curve2D& c, double t) {
    const auto [u, v] = c.point(t);
    const auto [du, dv] = c.velocity(t);
    const auto m = g.at(u, v);
    // Zero velocity components contribute nothing even where a coefficient overflows.
    double q = 0.0;
    if (du != 0.0) q += m.E * du * du;
    if (du != 0.0 && dv != 0.0) q += 2.0 * m.F * du * dv;
    if (dv != 0.0) q += m.G * dv * dv;
    return std::sqrt(std::max(q, 0.0));
}

/// Checks that sampled curve points lie in the domain and that the curve is regular there.
/// Probes where the curve itself cannot be represented (over/underflow of its own
/// formulas, far out on a clipped infinite end) say nothing about the metric and are skipped.
inline void validate_curve(const Metric2D& g, const Curve2D& c, double regularity_floor = 1e-12) {
    int usable = 0;
    for (double t : c.probe_parameters()) {
        std::array<double, 2> p, dp;
        try {
            p = c.point(t);
            dp = c.velocity(t);
        } catch (const DomainError&) {
            continue;
        }
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(dp[0]) || !std::isfinite(dp[1])) continue;
        ++usable;
        double speed;
        try {
            speed = tangent_norm(g, c, t);
        } catch (const DomainError& err) {
            throw SpecError("curve leaves the metric domain at t=" + detail::format_number(t) + ": " + err.what());
        }
        if (!(speed > regularity_floor))
            throw SpecError("curve is not regular at t=" + detail::format_number(t));
    }
    if (usable == 0) throw SpecError("curve cannot be evaluated on its parameter range");
}

struct ArcLengthOptions {
    OdeTolerance tolerance{1e-10, 1e-15, true};
    double regularity_floor = 1e-12;
    double unit_speed_tolerance = 1e-8;
    double end_gap = 1e-12;  // relative distance at which a finite parameter end counts as reached
};

/// Arc-length reparameterization t(s), s >= 0 measured from t0 in the given direction.
/// The solution is extended on demand; queries below reached() are const and reentrant.
class ArcLengthCurve {
public:
    ArcLengthCurve(Curve2D curve, Metric2D metric, double t0, int direction, ArcLengthOptions opt = {})
        : curve_(std::move(curve)), metric_(std::move(metric)), t0_(t0),
          direction_(direction >= 0 ? 1 : -1), opt_(opt),
          stepper_(Rhs{this}, 0.0, t0, initial_step(), opt.tolerance) {
        if (!(t0 > curve_.range().lo && t0 < curve_.range().hi))
            throw SpecError("anchor parameter lies outside the curve range");
        const double speed = tangent_norm(metric_, curve_, t0);
        if (!(speed > opt_.regularity_floor)) throw NumericError("curve is not regular at the anchor");
    }

    ArcLengthCurve(const ArcLengthCurve&) = delete;
    ArcLengthCurve& operator=(const ArcLengthCurve&) = delete;

    const Curve2D& curve() const { return curve_; }
    const Metric2D& metric() const { return metric_; }
    int direction() const { return direction_; }
    double anchor() const { return t0_; }

    double reached() const { return steps_.empty() ? 0.0 : steps_.back().x0 + steps_.back().h; }
    bool end_reached() const { return end_reached_; }
    /// Total length to the finite parameter end, valid once end_reached().
    double end_length() const { return end_length_; }
    double end_parameter() const { return direction_ > 0 ? curve_.range().hi : curve_.range().lo; }

    /// Integrates until arc length `s` is covered or the parameter end is reached.
    void extend_to(double s) {
        const double t_end = end_parameter();
        while (!end_reached_ && reached() < s) {
            const double t = stepper_.y();
            double max_step = inf;
            if (std::isfinite(t_end)) {
                const double gap = std::fabs(t_end - t);
                if (gap <= opt_.end_gap * std::max(1.0, std::fabs(t_end))) {
                    finish_at_end(t, gap);
                    break;
                }
                max_step = 0.5 * gap / std::fabs(stepper_.slope());
            }
            auto step = stepper_.step(max_step);
            upgrade(step);
            steps_.push_back(step);
        }
    }

    /// Curve parameter at arc length s (0 <= s <= reached()).
    double parameter_at(double s) const {
        if (s <= 0.0 || steps_.empty()) return t0_;
        return locate(s).value(s);
    }

    /// |speed(t(s)) * |t'(s)| - 1| using the dense-output derivative.
    double unit_speed_defect(double s) const {
        if (steps_.empty()) return 0.0;
        const auto& step = locate(s);
        const double t = step.value(s);
        return std::fabs(tangent_norm(metric_, curve_, t) * std::fabs(step.derivative(s)) - 1.0);
    }

    const std::vector<DenseStep>& steps() const { return steps_; }

private:
    struct Rhs {
        ArcLengthCurve* self;
        double operator()(double, double t) const {
            try {
                const double speed = tangent_norm(self->metric_, self->curve_, t);
                if (!(speed > self->opt_.regularity_floor)) return std::nan("");
                return self->direction_ / speed;
            } catch (const DomainError&) {
                return std::nan("");
            }
        }
    };

    Curve2D curve_;
    Metric2D metric_;
    double t0_;
    int direction_;
    ArcLengthOptions opt_;
    DormandPrince<Rhs> stepper_;
    std::vector<DenseStep> steps_;
    bool end_reached_ = false;
    double end_length_ = inf;
    double last_acceleration_ = 0.0;

    double initial_step() const { return 1e-3; }

    // t'' = g'(t) g(t) for t' = g(t), g' by central differences; left quartic if that
    // probe leaves the curve's domain.
    double acceleration(double t) const {
        const Rhs g{const_cast<ArcLengthCurve*>(this)};
        const double d = 1e-5 * std::max(1.0, std::fabs(t));
        if (!(t - d > curve_.range().lo && t + d < curve_.range().hi)) return std::nan("");
        return (g(0.0, t + d) - g(0.0, t - d)) / (2.0 * d) * g(0.0, t);
    }

    void upgrade(DenseStep& step) {
        const double a0 = steps_.empty() ? acceleration(step.y0) : last_acceleration_;
        const double a1 = acceleration(step.y1);
        last_acceleration_ = a1;
        if (std::isfinite(a0) && std::isfinite(a1)) step.use_hermite(a0, a1);
    }

    const DenseStep& locate(double s) const {
        if (s > reached() * (1.0 + 1e-15) + 1e-300)
            throw NumericError("arc length " + detail::format_number(s) + " beyond the integrated range");
        const auto it = std::upper_bound(steps_.begin(), steps_.end(), s,
                                         [](double value, const DenseStep& st) { return value < st.x0 + st.h; });
        return it == steps_.end() ? steps_.back() : *it;
    }

    void finish_at_end(double t, double gap) {
        end_reached_ = true;
        double speed = 0.0;
        try {
            speed = tangent_norm(metric_, curve_, t);
        } catch (const DomainError&) {
        }
        end_length_ = reached() + gap * speed;
    }
};

inline std::unique_ptr<ArcLengthCurve> arclength_reparam(const Curve2D& c, const Metric2D& g, double t0,
                                                         int direction, double s_max = 0.0,
                                                         ArcLengthOptions opt = {}) {
    auto curve = std::make_unique<ArcLengthCurve>(c, g, t0, direction, opt);
    if (s_max > 0.0) curve->extend_to(s_max);
    return curve;
}

/// f^2 * g for a positive scalar field f over the same coordinates.
inline Metric2D conformal_scale(const Metric2D& g, const Expression& f) {
    if (f.names() != g.coordinates()) throw SpecError("conformal factor must use the metric coordinates");
    g.for_each_probe([&](double a, double b) {
        double value;
        try {
            value = f(a, b);
        } catch (const DomainError& err) {
            throw SpecError(std::string("conformal factor undefined at a probe point: ") + err.what());
        }
        if (!(value > 0.0)) throw SpecError("conformal factor is not positive on the domain");
    });
    const auto f2 = f * f;
    return Metric2D(g.E() * f2, g.F() * f2, g.G() * f2, g.domain());
}

/// Gaussian curvature -mu''/mu of the warped metric dx^2 + mu(x)^2 dtheta^2.
inline double warped_curvature(const MuProfile& mu, double x, double tolerance = 1e-12) {
    const double m = mu(x);
    if (!(m > tolerance)) throw NumericError("warped profile vanishes at x=" + detail::format_number(x));
    return -mu.second_derivative(x) / m;
}

/// Length of c over [lo, hi] in the metric g.
inline double curve_length(const Curve2D& c, const Metric2D& g, double lo, double hi, double abs_tol = 1e-11) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw SpecError("curve_length needs a finite interval");
    const auto r = integrate([&](double t) { return tangent_norm(g, c, t); }, lo, hi, abs_tol, 1e-13);
    return r.value;
}

}  // namespace kparab
