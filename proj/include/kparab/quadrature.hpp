#pragma once

#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "kparab/error.hpp"

namespace kparab {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    bool converged = true;
};

namespace detail {

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& other) const { return error < other.error; }
};

// 15-point Kronrod rule with the embedded 7-point Gauss rule.
template <class F>
Segment gauss_kronrod_15(F& f, double a, double b) {
    static constexpr double xgk[8] = {
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.0};
    static constexpr double wgk[8] = {
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr double wg[4] = {
        0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
        0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    auto eval = [&](double x) {
        const double y = static_cast<double>(f(x));
        if (!std::isfinite(y)) throw NumericError("non-finite integrand at " + std::to_string(x));
        return y;
    };

    const double fc = eval(center);
    double kronrod = wgk[7] * fc;
    double gauss = wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = half * xgk[j];
        const double sum = eval(center - dx) + eval(center + dx);
        kronrod += wgk[j] * sum;
        if (j % 2 == 1) gauss += wg[j / 2] * sum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::fabs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature on a finite interval.
/// Stops when the summed error estimate is below max(abs_tol, rel_tol*|value|).
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double abs_tol = 1e-12, double rel_tol = 1e-12,
                           int max_segments = 2000) {
    QuadratureResult result;
    if (a == b) return result;
    if (!std::isfinite(a) || !std::isfinite(b)) throw NumericError("integration bounds must be finite");
    const double sign = b > a ? 1.0 : -1.0;
    if (sign < 0) std::swap(a, b);

    std::priority_queue<detail::Segment> heap;
    heap.push(detail::gauss_kronrod_15(f, a, b));
    result.evaluations = 15;
    double total = heap.top().value;
    double error = heap.top().error;
    int segments = 1;

    while (error > std::max(abs_tol, rel_tol * std::fabs(total))) {
        if (segments >= max_segments) {
            result.converged = false;
            break;
        }
        const auto worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            result.converged = false;
            break;
        }
        heap.pop();
        const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
        const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
        result.evaluations += 30;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++segments;
    }

    // Re-sum to shed the drift of the running updates.
    total = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    result.value = sign * total;
    result.error = error;
    return result;
}

}  // namespace kparab
