#pragma once

// Scalar Dormand-Prince 5(4) integrator with Hairer's continuous extension.

#include <algorithm>
#include <cmath>
#include <vector>

#include "kparab/error.hpp"

namespace kparab {

struct OdeTolerance {
    double rel = 1e-9;
    double abs = 1e-12;
    // Error per unit step: the local error is measured against rel * h * |y'| instead of
    // rel * |y|, which keeps the dense derivative accurate when |y| is large.
    bool per_unit_step = false;
};

/// One accepted step of a dense solution. By default y(x0 + theta*h) is the quartic
/// continuous extension of the pair; with second derivatives at both ends supplied it
/// becomes the quintic Hermite interpolant, whose derivative is far more accurate.
struct DenseStep {
    double x0 = 0.0;
    double h = 0.0;
    double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0, r5 = 0.0;
    double y0 = 0.0, y1 = 0.0, f0 = 0.0, f1 = 0.0;
    double a0 = 0.0, a1 = 0.0;
    bool hermite = false;

    void use_hermite(double second0, double second1) {
        a0 = second0;
        a1 = second1;
        hermite = true;
    }

    double value(double x) const {
        const double theta = (x - x0) / h;
        if (hermite) {
            const double t2 = theta * theta, t3 = t2 * theta, t4 = t3 * theta, t5 = t4 * theta;
            return (1 - 10 * t3 + 15 * t4 - 6 * t5) * y0 + (theta - 6 * t3 + 8 * t4 - 3 * t5) * h * f0 +
                   0.5 * (t2 - 3 * t3 + 3 * t4 - t5) * h * h * a0 + (10 * t3 - 15 * t4 + 6 * t5) * y1 +
                   (-4 * t3 + 7 * t4 - 3 * t5) * h * f1 + 0.5 * (t3 - 2 * t4 + t5) * h * h * a1;
        }
        const double t1 = 1.0 - theta;
        return r1 + theta * (r2 + t1 * (r3 + theta * (r4 + t1 * r5)));
    }

    double derivative(double x) const {
        const double th = (x - x0) / h;
        if (hermite) {
            const double t2 = th * th, t3 = t2 * th, t4 = t3 * th;
            const double d = (-30 * t2 + 60 * t3 - 30 * t4) * (y0 - y1) + (1 - 18 * t2 + 32 * t3 - 15 * t4) * h * f0 +
                             0.5 * (2 * th - 9 * t2 + 12 * t3 - 5 * t4) * h * h * a0 +
                             (-12 * t2 + 28 * t3 - 15 * t4) * h * f1 + 0.5 * (3 * t2 - 8 * t3 + 5 * t4) * h * h * a1;
            return d / h;
        }
        // d/dtheta of r1 + th r2 + th(1-th) r3 + th^2(1-th) r4 + th^2(1-th)^2 r5
        const double d = r2 + (1.0 - 2.0 * th) * r3 + (2.0 * th - 3.0 * th * th) * r4 +
                         (2.0 * th - 6.0 * th * th + 4.0 * th * th * th) * r5;
        return d / h;
    }
};

/// Advances y' = f(x, y) one accepted step at a time and records dense output.
/// `f` must be callable as double(double x, double y).
template <class F>
class DormandPrince {
public:
    DormandPrince(F f, double x0, double y0, double initial_step, OdeTolerance tol = {})
        : f_(std::move(f)), x_(x0), y_(y0), h_(initial_step), tol_(tol) {
        k1_ = f_(x_, y_);
    }

    double x() const { return x_; }
    double y() const { return y_; }
    double slope() const { return k1_; }

    /// Takes one accepted step with step size at most `max_step` (positive).
    /// The step may be rejected and retried internally; throws if the step size collapses.
    DenseStep step(double max_step) {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                                a75 = -2187.0 / 6784, a76 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                                e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
        static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                                d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                                d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

        double h = std::min(h_, max_step);
        for (int attempt = 0; attempt < 200; ++attempt) {
            if (!(h > std::fabs(x_) * 1e-15 + 1e-300))
                throw NumericError("step size underflow in arc-length integration");
            const double k2 = f_(x_ + c2 * h, y_ + h * a21 * k1_);
            const double k3 = f_(x_ + c3 * h, y_ + h * (a31 * k1_ + a32 * k2));
            const double k4 = f_(x_ + c4 * h, y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3));
            const double k5 = f_(x_ + c5 * h, y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
            const double k6 =
                f_(x_ + h, y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const double y1 = y_ + h * (a71 * k1_ + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            const double k7 = f_(x_ + h, y1);
            const double err = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double scale =
                tol_.per_unit_step ? tol_.abs + tol_.rel * h * std::max(std::fabs(k1_), std::fabs(k7))
                                   : tol_.abs + tol_.rel * std::max(std::fabs(y_), std::fabs(y1));
            const double ratio = std::fabs(err) / scale;
            if (!std::isfinite(y1) || !std::isfinite(ratio)) {
                h *= 0.25;
                continue;
            }
            if (ratio <= 1.0) {
                DenseStep d;
                d.x0 = x_;
                d.h = h;
                d.r1 = y_;
                const double ydiff = y1 - y_;
                const double bspl = h * k1_ - ydiff;
                d.r2 = ydiff;
                d.r3 = bspl;
                d.r4 = ydiff - h * k7 - bspl;
                d.r5 = h * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                d.y0 = y_;
                d.y1 = y1;
                d.f0 = k1_;
                d.f1 = k7;
                x_ += h;
                y_ = y1;
                k1_ = k7;
                const double grow = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
                h_ = h * grow;
                return d;
            }
            h *= std::clamp(0.9 * std::pow(ratio, -0.2), 0.1, 0.9);
        }
        throw NumericError("arc-length integration failed to converge");
    }

private:
    F f_;
    double x_, y_, h_;
    OdeTolerance tol_;
    double k1_ = 0.0;
};

}  // namespace kparab
