#pragma once

// Divergence detection for improper integrals of a positive field over a tail
// [s0, +inf) or (-inf, s0], by integration over dyadically growing windows.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kparab/error.hpp"
#include "kparab/profile.hpp"
#include "kparab/quadrature.hpp"

namespace kparab {

struct Policy {
    double window_base = 1.0;            // w0
    int k_max = 40;                      // last window is [s0, s0 + 2^k_max * w0]
    double divergence_threshold = 1e6;   // partial integral beyond which a tail is divergent
    double p_margin = 0.1;               // Inconclusive band |p - 1| < p_margin
    double cauchy_tol = 1e-12;           // relative window increment counted as converged

    // Fit-stability controls.
    int fit_samples = 17;
    double fit_rms_limit = 0.05;   // log-space residual above which a power/exponential fit is rejected
    double drift_tol = 0.01;       // max change of the fitted exponent over drift_span windows
    int drift_span = 4;
    int flat_windows = 6;          // consecutive non-decreasing increments that establish divergence
};

enum class Tail { Divergent, Convergent, Inconclusive };

inline const char* to_string(Tail t) {
    switch (t) {
        case Tail::Divergent: return "divergent";
        case Tail::Convergent: return "convergent";
        case Tail::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct TailModel {
    enum class Kind { None, Power, Exponential } kind = Kind::None;
    double rate = 0.0;    // p for f ~ s^-p, lambda for f ~ exp(-lambda s)
    double drift = inf;   // change of `rate` over the drift span
    double rms = inf;     // residual of the fit in log space
};

inline const char* to_string(TailModel::Kind k) {
    switch (k) {
        case TailModel::Kind::None: return "none";
        case TailModel::Kind::Power: return "power";
        case TailModel::Kind::Exponential: return "exponential";
    }
    return "?";
}

struct TracePoint {
    double window_end;   // signed end of the window in the integration variable
    double partial;      // integral from s0 to window_end (absolute value)
};

struct DivergenceVerdict {
    Tail verdict = Tail::Inconclusive;
    std::vector<TracePoint> trace;
    TailModel model;
    int windows = 0;              // number of windows integrated
    std::string reason;
    double remainder = 0.0;       // estimate of the integral beyond the last window (Convergent only)
    bool quadrature_warning = false;

    double partial() const { return trace.empty() ? 0.0 : trace.back().partial; }
    double total_estimate() const { return partial() + remainder; }
};

namespace detail {

struct WindowFit {
    LineFit power;        // log f against log x
    LineFit exponential;  // log f against x
    int positive = 0;
    bool underflow = false;
};

template <class F>
WindowFit fit_window(F& f, double s0, int dir, double d_lo, double d_hi, double w0, int samples) {
    WindowFit fit;
    std::vector<double> lx, x, lf;
    const double x_lo = d_lo + w0, x_hi = d_hi + w0;
    int zeros = 0;
    for (int i = 0; i < samples; ++i) {
        const double xi = x_lo * std::pow(x_hi / x_lo, static_cast<double>(i) / (samples - 1));
        const double s = s0 + dir * (xi - w0);
        const double y = static_cast<double>(f(s));
        if (!std::isfinite(y)) throw NumericError("non-finite integrand at " + std::to_string(s));
        if (y > 0.0) {
            lx.push_back(std::log(xi));
            x.push_back(xi);
            lf.push_back(std::log(y));
        } else {
            ++zeros;
        }
    }
    fit.positive = static_cast<int>(lf.size());
    fit.underflow = zeros == samples;
    if (fit.positive >= 5) {
        fit.power = fit_line(lx, lf);
        fit.exponential = fit_line(x, lf);
    }
    return fit;
}

}  // namespace detail

/// Decides whether the integral of f over the tail from s0 in direction `dir` (+1 / -1)
/// diverges. f must be non-negative and finite on the tail.
template <class F>
DivergenceVerdict tail_integral(F&& f, double s0, int dir, const Policy& policy = {}) {
    if (dir != 1 && dir != -1) throw SpecError("tail direction must be +1 or -1");
    if (!(policy.window_base > 0.0) || policy.k_max < 1) throw SpecError("invalid window policy");

    DivergenceVerdict out;
    std::vector<double> increments;
    std::vector<detail::WindowFit> fits;
    const double w0 = policy.window_base;
    double partial = 0.0;
    double d_prev = 0.0;

    auto integrand = [&](double s) {
        const double y = static_cast<double>(f(s));
        if (!std::isfinite(y)) throw NumericError("non-finite integrand at " + std::to_string(s));
        if (y < 0.0) throw NumericError("negative integrand at " + std::to_string(s));
        return y;
    };

    for (int k = 0; k <= policy.k_max; ++k) {
        const double d = std::ldexp(w0, k);
        const double a = s0 + dir * d_prev;
        const double b = s0 + dir * d;
        QuadratureResult q;
        try {
            q = integrate(integrand, std::min(a, b), std::max(a, b), 1e-15 * (1.0 + partial), 1e-11);
        } catch (const RangeHorizon&) {
            // Cannot go further. Accept only increments that were already negligible and shrinking.
            const std::size_t n = increments.size();
            if (n >= 3 && increments[n - 1] < increments[n - 2] && increments[n - 2] < increments[n - 3] &&
                increments[n - 1] <= policy.cauchy_tol * partial) {
                out.verdict = Tail::Convergent;
                out.reason = "window increments fell below the Cauchy tolerance before the range horizon";
                out.remainder = increments[n - 1];
                return out;
            }
            throw;
        }
        if (!q.converged) out.quadrature_warning = true;
        const double inc = std::max(q.value, 0.0);
        partial += inc;
        increments.push_back(inc);
        out.trace.push_back({b, partial});
        out.windows = k + 1;
        fits.push_back(detail::fit_window(integrand, s0, dir, d_prev, d, w0, policy.fit_samples));
        d_prev = d;

        const auto& fit = fits.back();
        if (fit.positive >= 5) {
            const bool exp_better = fit.exponential.rms < 0.5 * fit.power.rms;
            if (exp_better) {
                out.model.kind = TailModel::Kind::Exponential;
                out.model.rate = -fit.exponential.slope;
                out.model.rms = fit.exponential.rms;
            } else {
                out.model.kind = TailModel::Kind::Power;
                out.model.rate = -fit.power.slope;
                out.model.rms = fit.power.rms;
            }
            if (static_cast<int>(fits.size()) > policy.drift_span) {
                const auto& old = fits[fits.size() - 1 - static_cast<std::size_t>(policy.drift_span)];
                if (old.positive >= 5) {
                    const double old_rate = exp_better ? -old.exponential.slope : -old.power.slope;
                    out.model.drift = std::fabs(out.model.rate - old_rate);
                }
            }
        } else if (fit.underflow) {
            out.model = TailModel{};
        }

        if (partial > policy.divergence_threshold) {
            out.verdict = Tail::Divergent;
            out.reason = "partial integral exceeded the divergence threshold";
            return out;
        }
        if (k < policy.drift_span) continue;

        const std::size_t n = increments.size();
        const bool contracting = increments[n - 1] < increments[n - 2] && increments[n - 2] < increments[n - 3];

        // Increments below the Cauchy tolerance while still contracting.
        if (contracting && increments[n - 1] <= policy.cauchy_tol * partial) {
            const auto& prev = fits[fits.size() - 2];
            const bool decaying = fit.underflow || prev.underflow ||
                                  (fit.positive >= 5 && (-fit.exponential.slope > 0.0 || -fit.power.slope > 1.0));
            if (decaying) {
                out.verdict = Tail::Convergent;
                out.reason = "window increments fell below the Cauchy tolerance";
                out.remainder = increments[n - 1];
                return out;
            }
        }

        if (fit.positive < 5) continue;
        const auto& prev = fits[fits.size() - 2];

        if (out.model.kind == TailModel::Kind::Exponential) {
            const double lambda = out.model.rate;
            const double prev_lambda = prev.positive >= 5 ? -prev.exponential.slope : 0.0;
            if (lambda > 0.0 && prev_lambda > 0.0 && lambda >= 0.8 * prev_lambda && contracting) {
                out.verdict = Tail::Convergent;
                out.reason = "exponentially decaying tail";
                out.remainder = integrand(b) / lambda;
                return out;
            }
        }

        if (out.model.kind == TailModel::Kind::Power && fit.power.rms < policy.fit_rms_limit &&
            out.model.drift <= policy.drift_tol) {
            const double p = out.model.rate;
            if (p >= 1.0 + policy.p_margin && contracting) {
                // Tail of the fitted C x^-p beyond x_b, with x = |s - s0| + w0 as in the fit.
                const double x_b = d + w0;
                out.verdict = Tail::Convergent;
                out.reason = "stable power-law tail with exponent above 1";
                out.remainder = integrand(b) * x_b / (p - 1.0);
                return out;
            }
            if (p <= 1.0 - policy.p_margin) {
                out.verdict = Tail::Divergent;
                out.reason = "stable power-law tail with exponent below 1";
                return out;
            }
        }

        if (static_cast<int>(n) > policy.flat_windows) {
            bool flat = true;
            for (std::size_t j = n - static_cast<std::size_t>(policy.flat_windows); j < n; ++j)
                if (increments[j] < increments[j - 1] * (1.0 - 1e-9)) flat = false;
            if (flat) {
                out.verdict = Tail::Divergent;
                out.reason = "window increments stopped decaying";
                return out;
            }
        }
    }
    out.verdict = Tail::Inconclusive;
    out.reason = "no decision within the window budget";
    return out;
}

}  // namespace kparab
