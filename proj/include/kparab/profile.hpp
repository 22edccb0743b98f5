#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kparab/error.hpp"
#include "kparab/expr.hpp"

namespace kparab {

inline constexpr double inf = std::numeric_limits<double>::infinity();

struct Interval {
    double lo = -inf;
    double hi = inf;

    bool contains(double x) const { return x >= lo && x <= hi; }
    bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
    double length() const { return hi - lo; }
};

namespace detail {

// Step sizes for the finite-difference fallback: eps^(1/3) for first derivatives,
// eps^(1/6) for second derivatives (both Richardson-extrapolated once).
inline double fd_step_first(double x) {
    return std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::fabs(x));
}
inline double fd_step_second(double x) {
    return std::pow(std::numeric_limits<double>::epsilon(), 1.0 / 6.0) * std::max(1.0, std::fabs(x));
}

template <class F>
double richardson_first(const F& f, double x) {
    const double h = fd_step_first(x);
    auto central = [&](double step) { return (f(x + step) - f(x - step)) / (2.0 * step); };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

template <class F>
double richardson_second(const F& f, double x) {
    const double h = fd_step_second(x);
    const double fx = f(x);
    auto central = [&](double step) { return (f(x + step) - 2.0 * fx + f(x - step)) / (step * step); };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

// Least-squares line through (x, y). Returns {intercept, slope, rms residual}.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double rms = inf;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    LineFit fit;
    if (n < 2) return fit;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss += r * r;
    }
    fit.rms = std::sqrt(ss / static_cast<double>(n));
    return fit;
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson / PCHIP slopes).
class MonotoneCubic {
public:
    MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw SpecError("a tabulated profile needs at least two samples");
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(x_[i]) || !std::isfinite(y_[i])) throw SpecError("table values must be finite");
            if (i > 0 && !(x_[i] > x_[i - 1])) throw SpecError("table abscissae must be strictly increasing");
        }
        d_.assign(n, 0.0);
        std::vector<double> h(n - 1), delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            delta[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        if (n == 2) {
            d_[0] = d_[1] = delta[0];
            return;
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (delta[i - 1] * delta[i] <= 0.0) {
                d_[i] = 0.0;
            } else {
                const double w1 = 2.0 * h[i] + h[i - 1];
                const double w2 = h[i] + 2.0 * h[i - 1];
                d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }

    double front() const { return x_.front(); }
    double back() const { return x_.back(); }
    const std::vector<double>& xs() const { return x_; }
    const std::vector<double>& ys() const { return y_; }

    double value(double x) const { return eval(x, 0); }
    double derivative(double x) const { return eval(x, 1); }
    double second_derivative(double x) const { return eval(x, 2); }

private:
    std::vector<double> x_, y_, d_;

    static double end_slope(double h0, double h1, double d0, double d1) {
        double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d * d0 <= 0.0) return 0.0;
        if (d0 * d1 <= 0.0 && std::fabs(d) > std::fabs(3.0 * d0)) return 3.0 * d0;
        return d;
    }

    double eval(double x, int order) const {
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        if (i >= x_.size() - 1) i = x_.size() - 2;
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double y0 = y_[i], y1 = y_[i + 1], m0 = d_[i] * h, m1 = d_[i + 1] * h;
        switch (order) {
            case 0: {
                const double t2 = t * t, t3 = t2 * t;
                return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 +
                       (t3 - t2) * m1;
            }
            case 1: {
                const double t2 = t * t;
                return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 +
                        (3 * t2 - 2 * t) * m1) / h;
            }
            default:
                return ((12 * t - 6) * y0 + (6 * t - 4) * m0 + (-12 * t + 6) * y1 + (6 * t - 2) * m1) / (h * h);
        }
    }
};

/// Tail extension of a table beyond its samples: exponential or power law in |s|,
/// whichever fits the outermost samples better.
struct TableTail {
    enum class Kind { Constant, Exponential, Power } kind = Kind::Constant;
    double intercept = 0.0;
    double slope = 0.0;

    static TableTail fit(const std::vector<double>& s, const std::vector<double>& mu) {
        TableTail tail;
        tail.intercept = mu.back();
        if (s.size() < 3) return tail;
        std::vector<double> ls, lm, xs;
        bool power_ok = true;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!(mu[i] > 0.0)) return tail;
            lm.push_back(std::log(mu[i]));
            xs.push_back(s[i]);
            if (s[i] == 0.0 || (s[i] > 0.0) != (s.back() > 0.0)) power_ok = false;
            else ls.push_back(std::log(std::fabs(s[i])));
        }
        const auto e = fit_line(xs, lm);
        LineFit p;
        if (power_ok) p = fit_line(ls, lm);
        if (power_ok && p.rms <= e.rms) {
            tail.kind = Kind::Power;
            tail.intercept = p.intercept;
            tail.slope = p.slope;
        } else {
            tail.kind = Kind::Exponential;
            tail.intercept = e.intercept;
            tail.slope = e.slope;
        }
        return tail;
    }

    double value(double s) const {
        switch (kind) {
            case Kind::Constant: return intercept;
            case Kind::Exponential: return std::exp(intercept + slope * s);
            case Kind::Power: return std::exp(intercept + slope * std::log(std::fabs(s)));
        }
        return intercept;
    }
};

}  // namespace detail

/// The Killing length along the profile parameter: a closed-form expression in one
/// variable, a sampled table with monotone cubic interpolation, or an opaque callable.
class MuProfile {
public:
    struct Table {
        detail::MonotoneCubic spline;
        detail::TableTail left, right;
    };
    struct Callable {
        std::function<double(double)> f;
        std::string description;
    };

    static MuProfile from_expression(Expression e, Interval domain = {}, std::vector<double> zeros = {}) {
        if (e.names().size() != 1) {
            // Keep only the identifier that is actually used.
            std::string var;
            for (const auto& n : e.names()) {
                if (e.depends_on(n)) {
                    if (!var.empty()) throw SpecError("a profile expression must use a single variable");
                    var = n;
                }
            }
            if (var.empty()) var = "s";
            e = parse(e.to_string(), {var});
        }
        MuProfile p;
        p.domain_ = domain;
        p.zeros_ = std::move(zeros);
        p.derivative_ = std::make_shared<Expression>(differentiate(e, e.names()[0]));
        p.second_ = std::make_shared<Expression>(differentiate(*p.derivative_, e.names()[0]));
        p.repr_ = std::move(e);
        p.finish();
        return p;
    }

    static MuProfile from_source(std::string_view source, Interval domain = {}, std::vector<double> zeros = {}) {
        return from_expression(parse(source, {"s", "x"}), domain, std::move(zeros));
    }

    static MuProfile from_table(const std::vector<std::pair<double, double>>& samples,
                                std::vector<double> zeros = {}, Interval domain = {}) {
        std::vector<double> s, mu;
        for (const auto& [a, b] : samples) {
            s.push_back(a);
            mu.push_back(b);
            if (std::isfinite(b) && b < 0.0) throw SpecError("tabulated Killing length must be non-negative");
        }
        Table table{detail::MonotoneCubic(s, mu), {}, {}};
        const std::size_t m = std::min<std::size_t>(8, s.size());
        table.left = detail::TableTail::fit({s.begin(), s.begin() + static_cast<long>(m)},
                                            {mu.begin(), mu.begin() + static_cast<long>(m)});
        table.right = detail::TableTail::fit({s.end() - static_cast<long>(m), s.end()},
                                             {mu.end() - static_cast<long>(m), mu.end()});
        MuProfile p;
        p.domain_ = domain;
        p.zeros_ = std::move(zeros);
        p.repr_ = std::move(table);
        p.finish();
        return p;
    }

    static MuProfile from_function(std::function<double(double)> f, Interval domain,
                                   std::vector<double> zeros = {}, std::string description = {}) {
        MuProfile p;
        p.domain_ = domain;
        p.zeros_ = std::move(zeros);
        p.repr_ = Callable{std::move(f), std::move(description)};
        p.finish();
        return p;
    }

    double operator()(double s) const {
        const double v = raw(s) * scale_;
        return v;
    }

    double derivative(double s) const {
        if (derivative_) return (*derivative_)(s) * scale_;
        if (const auto* t = std::get_if<Table>(&repr_)) {
            if (s >= t->spline.front() && s <= t->spline.back()) return t->spline.derivative(s) * scale_;
        }
        return detail::richardson_first(*this, s);
    }

    double second_derivative(double s) const {
        if (second_) return (*second_)(s) * scale_;
        if (const auto* t = std::get_if<Table>(&repr_)) {
            if (s >= t->spline.front() && s <= t->spline.back()) return t->spline.second_derivative(s) * scale_;
        }
        return detail::richardson_second(*this, s);
    }

    const Interval& domain() const noexcept { return domain_; }
    const std::vector<double>& zeros() const noexcept { return zeros_; }
    double scale_factor() const noexcept { return scale_; }

    const Expression* expression() const { return std::get_if<Expression>(&repr_); }
    const Expression* derivative_expression() const { return derivative_.get(); }
    const Expression* second_derivative_expression() const { return second_.get(); }
    const Table* table() const { return std::get_if<Table>(&repr_); }
    bool is_callable() const { return std::holds_alternative<Callable>(repr_); }

    /// Interval where values come from data rather than a fitted tail.
    Interval support() const {
        if (const auto* t = table()) return {t->spline.front(), t->spline.back()};
        return domain_;
    }

    MuProfile scaled(double c) const {
        if (!(c > 0.0) || !std::isfinite(c)) throw SpecError("profile scale must be positive and finite");
        MuProfile p = *this;
        p.scale_ *= c;
        return p;
    }

    MuProfile with_zeros(std::vector<double> zeros) const {
        MuProfile p = *this;
        p.zeros_ = std::move(zeros);
        p.finish();
        return p;
    }

    std::string describe() const {
        std::string base;
        if (const auto* e = expression()) base = e->to_string();
        else if (const auto* t = table()) base = "table(" + std::to_string(t->spline.xs().size()) + " samples)";
        else base = std::get<Callable>(repr_).description;
        if (scale_ != 1.0) base = detail::format_number(scale_) + "*(" + base + ")";
        return base;
    }

private:
    std::variant<Expression, Table, Callable> repr_ = Callable{};
    std::shared_ptr<Expression> derivative_, second_;
    Interval domain_;
    std::vector<double> zeros_;
    double scale_ = 1.0;

    MuProfile() = default;

    void finish() {
        std::sort(zeros_.begin(), zeros_.end());
        if (!(domain_.lo < domain_.hi)) throw SpecError("profile domain must be a non-empty interval");
        for (double z : zeros_)
            if (!domain_.contains(z)) throw SpecError("annotated zero lies outside the profile domain");
    }

    double raw(double s) const {
        if (const auto* e = std::get_if<Expression>(&repr_)) return (*e)(s);
        if (const auto* t = std::get_if<Table>(&repr_)) {
            if (s < t->spline.front()) return t->left.value(s);
            if (s > t->spline.back()) return t->right.value(s);
            return t->spline.value(s);
        }
        const auto& c = std::get<Callable>(repr_);
        if (!c.f) throw SpecError("empty profile");
        return c.f(s);
    }
};

}  // namespace kparab
