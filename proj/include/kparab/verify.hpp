#pragma once

// Numerical checks of the harmonic-function facts behind the criterion, and a
// Monte Carlo oracle for the radial diffusion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "kparab/divergence.hpp"
#include "kparab/error.hpp"
#include "kparab/expr.hpp"
#include "kparab/geom.hpp"
#include "kparab/profile.hpp"
#include "kparab/quadrature.hpp"

namespace kparab {

namespace detail {

// Laplace-Beltrami of u(x, theta) on dx^2 + mu(x)^2 dtheta^2 by the conservative
// five-point stencil: (1/mu)[d_x(mu d_x u) + d_theta(d_theta u / mu)].
template <class Mu, class U>
double stencil_laplacian(const Mu& mu, const U& u, double x, double theta, double h) {
    const double m = mu(x), mp = mu(x + 0.5 * h), mm = mu(x - 0.5 * h);
    const double c = u(x, theta);
    const double radial = (mp * (u(x + h, theta) - c) - mm * (c - u(x - h, theta))) / (h * h);
    const double angular = (u(x, theta + h) - 2.0 * c + u(x, theta - h)) / (h * h * m);
    return (radial + angular) / m;
}

}  // namespace detail

/// Stencil Laplacian of f(x) lifted to the warped surface, minus the closed form
/// f'' + mu' f'/mu.
inline double laplacian_residual(const MuProfile& mu, const Expression& f, double x, double h) {
    if (f.names().size() != 1) throw SpecError("f must be an expression in a single variable");
    if (!(h > 0.0)) throw SpecError("stencil spacing must be positive");
    const double m = mu(x);
    if (!(m > 1e-12)) throw NumericError("mu vanishes at x=" + detail::format_number(x));
    const auto df = differentiate(f, f.names()[0]);
    const auto d2f = differentiate(df, f.names()[0]);
    const double closed = d2f(x) + mu.derivative(x) * df(x) / m;
    auto lifted = [&f](double a, double) { return f(a); };
    return detail::stencil_laplacian(mu, lifted, x, 0.3, h) - closed;
}

/// Scale function S(x) = int_x0^x dt/mu(t).
inline double scale_function(const MuProfile& mu, double x0, double x) {
    auto inv = [&mu](double t) {
        const double m = mu(t);
        if (!(m > 0.0)) throw NumericError("mu vanishes at t=" + detail::format_number(t));
        return 1.0 / m;
    };
    return integrate(inv, x0, x, 1e-14, 1e-13).value;
}

/// F(s) = int_s^{s0} dx/mu, the candidate bounded harmonic function.
class WitnessFunction {
public:
    WitnessFunction(MuProfile mu, double s0, const Policy& policy = {}) : mu_(std::move(mu)), s0_(s0) {
        auto inv = [this](double s) { return 1.0 / mu_(s); };
        for (int dir : {-1, 1}) {
            const bool open = dir > 0 ? !std::isfinite(mu_.domain().hi) : !std::isfinite(mu_.domain().lo);
            if (!open) continue;
            auto v = tail_integral(inv, s0_, dir, policy);
            if (v.verdict == Tail::Convergent) (dir > 0 ? plus_bound_ : minus_bound_) = converged_total(dir);
            (dir > 0 ? plus_ : minus_) = std::move(v);
        }
    }

    double anchor() const { return s0_; }
    const MuProfile& mu() const { return mu_; }

    double operator()(double s) const { return -scale_function(mu_, s0_, s); }

    /// sup |F| over the tail in direction dir, when the tail integral converges.
    std::optional<double> bound(int dir) const { return dir > 0 ? plus_bound_ : minus_bound_; }
    const std::optional<DivergenceVerdict>& tail(int dir) const { return dir > 0 ? plus_ : minus_; }

    /// Stencil Laplacian of F on the warped surface (its closed form is zero).
    double harmonic_residual(double s, double h = 1e-3) const {
        auto u = [this](double a, double) { return (*this)(a); };
        return detail::stencil_laplacian(mu_, u, s, 0.0, h);
    }

private:
    MuProfile mu_;
    double s0_;
    std::optional<DivergenceVerdict> plus_, minus_;
    std::optional<double> plus_bound_, minus_bound_;

    // Integrates dyadic windows until they stop contributing, then adds a geometric remainder.
    double converged_total(int dir) const {
        auto inv = [this](double s) { return 1.0 / mu_(s); };
        double total = 0.0, prev_inc = 0.0, d_prev = 0.0;
        for (int k = 0; k <= 60; ++k) {
            const double d = std::ldexp(1.0, k);
            const double a = s0_ + dir * d_prev, b = s0_ + dir * d;
            const double inc = std::fabs(integrate(inv, std::min(a, b), std::max(a, b), 1e-16, 1e-13).value);
            total += inc;
            d_prev = d;
            if (k > 2 && inc <= 1e-14 * total) {
                const double r = prev_inc > 0.0 ? inc / prev_inc : 0.0;
                if (r < 1.0) total += inc * r / (1.0 - r);
                break;
            }
            prev_inc = inc;
        }
        return total;
    }
};

inline WitnessFunction witness(const MuProfile& mu, double s0, const Policy& policy = {}) {
    return WitnessFunction(mu, s0, policy);
}

/// Probability that the radial diffusion started at x0 leaves [a, b] through b.
inline double annulus_harmonic_measure(const MuProfile& mu, double a, double b, double x0) {
    if (!(a < x0 && x0 < b)) throw SpecError("need a < x0 < b");
    double peak = 0.0, low = inf;
    for (int i = 0; i <= 256; ++i) {
        const double m = mu(a + (b - a) * i / 256.0);
        peak = std::max(peak, std::fabs(m));
        low = std::min(low, m);
    }
    if (!(low > 1e-12 * std::max(peak, 1e-300))) throw NumericError("mu vanishes inside the annulus");
    return scale_function(mu, a, x0) / scale_function(mu, a, b);
}

struct DiffusionOptions {
    double dt = 0.0;  // 0 selects 1e-4 * (b - a)^2
    long walkers = 100000;
    std::uint64_t seed = 1;
    int batches = 64;
    int threads = 0;  // 0: hardware concurrency
    int max_steps = 50000000;
};

struct DiffusionResult {
    double probability = 0.0;
    long hits = 0;
    long walkers = 0;
    double dt = 0.0;
    double standard_error = 0.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Drift mu'/(2 mu) tabulated on [a, b] and interpolated linearly.
struct DriftTable {
    double a, h, inv_h;
    std::vector<double> v;

    DriftTable(const MuProfile& mu, double lo, double hi, int n = 8192)
        : a(lo), h((hi - lo) / n), inv_h(n / (hi - lo)), v(n + 1) {
        for (int i = 0; i <= n; ++i) {
            const double x = lo + h * i;
            const double m = mu(x);
            if (!(m > 0.0)) throw NumericError("mu vanishes at x=" + format_number(x));
            v[i] = mu.derivative(x) / (2.0 * m);
            if (!std::isfinite(v[i])) throw NumericError("drift is not finite at x=" + format_number(x));
        }
    }

    double operator()(double x) const {
        const double p = std::clamp((x - a) * inv_h, 0.0, static_cast<double>(v.size() - 1));
        const std::size_t i = std::min(static_cast<std::size_t>(p), v.size() - 2);
        const double w = p - static_cast<double>(i);
        return v[i] + w * (v[i + 1] - v[i]);
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::fabs(x));
        return m;
    }
};

}  // namespace detail

/// Euler-Maruyama for dX = mu'/(2mu) dt + dW, absorbed at a and b. Between steps the
/// path is treated as a Brownian bridge, so crossings inside a step are counted.
inline DiffusionResult simulate_radial_diffusion(const MuProfile& mu, double x0, double a, double b,
                                                 const DiffusionOptions& opt = {}) {
    if (!(a < x0 && x0 < b)) throw SpecError("need a < x0 < b");
    if (opt.walkers < 1 || opt.batches < 1) throw SpecError("walker and batch counts must be positive");
    const double dt = opt.dt > 0.0 ? opt.dt : 1e-4 * (b - a) * (b - a);
    const detail::DriftTable drift(mu, a, b);
    if (drift.max_abs() * dt > (b - a) / 10.0) throw NumericError("time step too large for the drift on [a, b]");
    const double sq = std::sqrt(dt);
    const double near = 6.0 * sq;  // beyond this the crossing probability is below e^-72

    const int batches = static_cast<int>(std::min<long>(opt.batches, opt.walkers));
    std::vector<long> hits(batches, 0);
    auto run_batch = [&](int k) {
        const long begin = opt.walkers * k / batches, end = opt.walkers * (k + 1) / batches;
        std::mt19937_64 rng(detail::splitmix64(opt.seed ^ detail::splitmix64(static_cast<std::uint64_t>(k))));
        boost::random::normal_distribution<double> normal;  // ziggurat; about twice as fast as std's
        std::uniform_real_distribution<double> uniform;
        long h = 0;
        for (long w = begin; w < end; ++w) {
            double x = x0;
            for (int step = 0;; ++step) {
                if (step >= opt.max_steps) throw NumericError("walker did not exit within the step budget");
                const double y = x + drift(x) * dt + sq * normal(rng);
                if (y >= b) {
                    ++h;
                    break;
                }
                if (y <= a) break;
                // Bridge crossing probabilities, only where they are not negligible.
                if (y - a < near && x - a < near) {
                    if (uniform(rng) < std::exp(-2.0 * (x - a) * (y - a) / dt)) break;
                }
                if (b - y < near && b - x < near) {
                    if (uniform(rng) < std::exp(-2.0 * (b - x) * (b - y) / dt)) {
                        ++h;
                        break;
                    }
                }
                x = y;
            }
        }
        hits[k] = h;
    };

    int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, batches);
    if (threads <= 1) {
        for (int k = 0; k < batches; ++k) run_batch(k);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (int k = t; k < batches; k += threads) run_batch(k);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    DiffusionResult r;
    r.walkers = opt.walkers;
    r.dt = dt;
    for (long h : hits) r.hits += h;
    r.probability = static_cast<double>(r.hits) / static_cast<double>(r.walkers);
    r.standard_error = std::sqrt(r.probability * (1.0 - r.probability) / static_cast<double>(r.walkers));
    return r;
}

struct FlatnessReport {
    double max_abs_curvature = 0.0;      // after the 1/mu^2 normalisation
    double worst_x = 0.0;
    double max_abs_original = 0.0;       // of dx^2 + mu^2 dtheta^2, for contrast
    double max_abs_pulled_back = 0.0;    // -nu''/nu for the profile nu(u) of du^2 + nu^2 dtheta^2
    int samples = 0;
};

/// Curvature of (dx^2 + mu^2 dtheta^2)/mu^2 = du^2 + dtheta^2 with u = int dx/mu.
/// Computed pointwise from the conformal change law K' = mu^2 (K + Lap log mu),
/// and separately as -nu''/nu for the profile of the normalised metric in u.
inline FlatnessReport curvature_flatness_check(const MuProfile& mu, const Interval& interval, int samples = 201) {
    if (!interval.finite() || !(interval.lo < interval.hi)) throw SpecError("flatness check needs a finite interval");
    FlatnessReport r;
    r.samples = samples;
    const auto* e = mu.expression();
    std::optional<Expression> lap_log;
    if (e) {
        // Lap log mu = (log mu)'' + mu'/mu (log mu)'
        const auto& var = e->names()[0];
        const auto log_mu = apply(Func::Log, *e);
        const auto d1 = differentiate(log_mu, var);
        const auto d2 = differentiate(d1, var);
        lap_log = d2 + differentiate(*e, var) / *e * d1;
    }
    auto lap_log_at = [&](double x) {
        if (lap_log) return (*lap_log)(x) * 1.0;
        auto lm = [&mu](double t) { return std::log(mu(t)); };
        const double m = mu(x);
        return detail::richardson_second(lm, x) + mu.derivative(x) / m * detail::richardson_first(lm, x);
    };

    // u(x) and its inverse for the pulled-back profile.
    const double x_mid = 0.5 * (interval.lo + interval.hi);
    auto u_of = [&](double x) { return scale_function(mu, x_mid, x); };
    auto x_of = [&](double u) {
        double lo = interval.lo - 1.0, hi = interval.hi + 1.0;
        for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++i) {
            const double m = 0.5 * (lo + hi);
            (u_of(m) < u ? lo : hi) = m;
        }
        return 0.5 * (lo + hi);
    };
    // Killing length of the normalised metric, as a function of u.
    auto nu = MuProfile::from_function([&](double u) { const double x = x_of(u); return mu(x) / mu(x); },
                                       {}, {}, "normalised profile");

    for (int i = 0; i < samples; ++i) {
        const double x = interval.lo + interval.length() * i / (samples - 1);
        const double m = mu(x);
        if (!(m > 1e-12)) throw NumericError("mu vanishes at x=" + detail::format_number(x));
        const double k = warped_curvature(mu, x);
        const double k_hat = m * m * (k + lap_log_at(x));
        r.max_abs_original = std::max(r.max_abs_original, std::fabs(k));
        if (std::fabs(k_hat) > r.max_abs_curvature || i == 0) {
            r.max_abs_curvature = std::fabs(k_hat);
            r.worst_x = x;
        }
        if (i % 20 == 0) r.max_abs_pulled_back = std::max(r.max_abs_pulled_back, std::fabs(warped_curvature(nu, u_of(x))));
    }
    return r;
}

}  // namespace kparab
