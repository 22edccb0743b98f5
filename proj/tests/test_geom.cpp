#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

#include "kparab/geom.hpp"
#include "kparab/models.hpp"

using namespace kparab;

namespace {

Metric2D euclidean() {
    const std::vector<std::string> uv{"u", "v"};
    return Metric2D(parse("1", uv), parse("0", uv), parse("1", uv), Domain{});
}

double oracle(std::function<double(double)> f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate(f, a, b, 1e-14);
}

}  // namespace

TEST(TangentNorm, Examples) {
    EXPECT_DOUBLE_EQ(tangent_norm(euclidean(), Curve2D::from_source("t", "t", {}), 0.0), std::sqrt(2.0));
    const auto sol3 = sol3_model();
    const auto s = sol3_minimal_profile(M_PI / 4, 0.0);
    for (double t : {-3.0, 0.0, 0.4, 5.0}) EXPECT_NEAR(tangent_norm(sol3.base, s, t), 1.0, 1e-10);
    const auto ekt = ekt_model(0.0, 1.0);
    EXPECT_DOUBLE_EQ(tangent_norm(ekt.base, umbrella_curve(), 2.0), 1.0);
}

TEST(TangentNorm, LeavingTheDomainIsAnError) {
    const auto ekt = ekt_model(-1.0, 1.0);  // 4 - r^2 > 0
    const auto c = Curve2D::from_source("t", "0", {0.0, inf});
    EXPECT_THROW(tangent_norm(ekt.base, c, 3.0), DomainError);
}

TEST(Metric2D, RejectsIndefiniteMetrics) {
    const std::vector<std::string> uv{"u", "v"};
    EXPECT_THROW(Metric2D(parse("1", uv), parse("2", uv), parse("1", uv), Domain{}), SpecError);
    EXPECT_THROW(Metric2D(parse("u", uv), parse("0", uv), parse("1", uv), Domain{}), SpecError);
}

TEST(ArcLength, Examples) {
    auto a = arclength_reparam(Curve2D::from_source("2*t", "0", {}), euclidean(), 0.0, +1, 10.0);
    auto b = arclength_reparam(Curve2D::from_source("t", "t", {}), euclidean(), 0.0, +1, 10.0);
    const auto ekt = ekt_model(0.0, 1.0);
    auto c = arclength_reparam(umbrella_curve(), ekt.base, 1.0, +1, 10.0);
    for (double s : {0.0, 0.5, 3.0, 9.5}) {
        EXPECT_NEAR(a->parameter_at(s), s / 2, 1e-9);
        EXPECT_NEAR(b->parameter_at(s), s / std::sqrt(2.0), 1e-9);
        EXPECT_NEAR(c->parameter_at(s), 1.0 + s, 1e-9);
    }
}

TEST(ArcLength, BackwardDirection) {
    auto a = arclength_reparam(Curve2D::from_source("2*t", "0", {}), euclidean(), 1.0, -1, 4.0);
    EXPECT_NEAR(a->parameter_at(4.0), -1.0, 1e-9);
}

TEST(ArcLength, FiniteEndIsDetected) {
    const auto c = Curve2D::from_source("t", "0", {0.0, 3.0});
    auto a = arclength_reparam(c, euclidean(), 1.0, +1);
    a->extend_to(inf);
    EXPECT_TRUE(a->end_reached());
    EXPECT_NEAR(a->end_length(), 2.0, 1e-9);
}

TEST(ArcLength, SingularCurveIsRejected) {
    const auto c = Curve2D::from_source("t^3", "0", {});
    EXPECT_THROW(arclength_reparam(c, euclidean(), 0.0, +1, 1.0), NumericError);
}

// Invariants: unit speed and strictly increasing t(s), checked on the dense output.
TEST(ArcLengthProperty, UnitSpeedAndMonotone) {
    const auto sol3 = sol3_model();
    for (const char* v : {"sin(t)", "t^2/10", "log(1+t^2)"}) {
        const auto c = Curve2D::from_source("t", v, {});
        auto a = arclength_reparam(c, sol3.base, 0.0, +1, 20.0);
        double prev = -inf;
        for (int i = 0; i <= 400; ++i) {
            const double s = 20.0 * i / 400;
            EXPECT_LE(a->unit_speed_defect(s), 1e-8) << v << " s=" << s;
            const double t = a->parameter_at(s);
            if (i > 0) {
                EXPECT_GT(t, prev);
            }
            prev = t;
        }
    }
}

TEST(ArcLengthProperty, LengthOfReparameterizedSegment) {
    const auto sol3 = sol3_model();
    const auto c = Curve2D::from_source("t + sin(t)/2", "cos(t)", {});
    auto a = arclength_reparam(c, sol3.base, 0.0, +1, 12.0);
    for (auto [s1, s2] : {std::pair{0.0, 1.0}, {2.5, 7.0}, {0.1, 12.0}}) {
        EXPECT_NEAR(curve_length(c, sol3.base, a->parameter_at(s1), a->parameter_at(s2)), s2 - s1, 1e-8);
    }
}

TEST(ConformalScale, Examples) {
    const auto g = euclidean();
    const std::vector<std::string> uv{"u", "v"};
    const auto same = conformal_scale(g, parse("1", uv));
    const auto exp_scaled = conformal_scale(g, parse("exp(u)", uv));
    for (auto [u, v] : {std::pair{0.0, 0.0}, {1.0, -2.0}, {-0.5, 3.0}}) {
        const auto a = same.at(u, v);
        EXPECT_EQ(a.E, 1.0);
        EXPECT_EQ(a.F, 0.0);
        EXPECT_EQ(a.G, 1.0);
        const auto b = exp_scaled.at(u, v);
        EXPECT_NEAR(b.E, std::exp(2 * u), 1e-12 * std::exp(2 * u));
        EXPECT_EQ(b.F, 0.0);
        EXPECT_NEAR(b.G, std::exp(2 * u), 1e-12 * std::exp(2 * u));
    }
    EXPECT_THROW(conformal_scale(g, parse("u", uv)), SpecError);
}

TEST(ConformalScale, RotationalModelMatchesTheDirectConformalMetric) {
    for (double kappa : {0.0, -1.0}) {
        for (double tau : {0.0, 1.0, 3.0}) {
            const auto m = ekt_model(kappa, tau);
            const auto scaled = conformal_scale(m.base, parse("1", {"r", "z"}) / m.mu);
            const auto direct = ekt_conformal_metric(kappa, tau);
            for (double r : {0.1, 0.5, 1.0, 1.7}) {
                const auto a = scaled.at(r, 0.3), b = direct.at(r, 0.3);
                EXPECT_NEAR(a.E, b.E, 1e-12 * b.E);
                EXPECT_NEAR(a.G, b.G, 1e-12 * b.G);
                EXPECT_EQ(a.F, 0.0);
            }
        }
    }
}

TEST(ConformalScaleProperty, NormScalesByTheFactor) {
    const auto sol3 = sol3_model();
    const auto f = parse("2+sin(y)*exp(-z^2)", {"y", "z"});
    const auto scaled = conformal_scale(sol3.base, f);
    const auto c = Curve2D::from_source("t^2/3", "cos(t)", {});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pick(-4, 4);
    for (int i = 0; i < 50; ++i) {
        const double t = pick(rng);
        const auto p = c.point(t);
        const double expect = f(p[0], p[1]) * tangent_norm(sol3.base, c, t);
        EXPECT_NEAR(tangent_norm(scaled, c, t), expect, 1e-12 * expect);
    }
}

TEST(WarpedCurvature, Examples) {
    EXPECT_EQ(warped_curvature(MuProfile::from_source("1"), 0.7), 0.0);
    EXPECT_NEAR(warped_curvature(MuProfile::from_source("sin(x)"), 0.3), 1.0, 1e-6);
    for (double x : {-2.0, 0.0, 3.0}) EXPECT_NEAR(warped_curvature(MuProfile::from_source("exp(x)"), x), -1.0, 1e-6);
}

TEST(WarpedCurvature, FiniteDifferenceFallback) {
    const auto mu = MuProfile::from_function([](double x) { return std::sin(x); }, {0.0, M_PI});
    EXPECT_NEAR(warped_curvature(mu, 0.3), 1.0, 1e-6);
    const auto e = MuProfile::from_function([](double x) { return std::exp(x); }, {});
    EXPECT_NEAR(warped_curvature(e, 1.0), -1.0, 1e-6);
}

// After normalising by 1/mu^2 the warped metric dx^2 + mu^2 dtheta^2 becomes
// du^2 + dtheta^2 in u = int dx/mu, whose profile is constant: curvature 0.
TEST(WarpedCurvatureProperty, NormalisedProfileIsFlat) {
    for (const char* src : {"1", "exp(x)", "1+x^2", "2+sin(x)"}) {
        const auto mu = MuProfile::from_source(src);
        // nu(u) = mu(x(u)) / mu(x(u)) = 1 whatever the change of variable.
        const auto nu = MuProfile::from_function([&mu](double x) { return mu(x) / mu(x); }, {});
        for (double x : {-4.0, -1.0, 0.5, 4.0}) EXPECT_LE(std::fabs(warped_curvature(nu, x)), 1e-8) << src;
    }
}

TEST(CurveLength, Examples) {
    EXPECT_NEAR(curve_length(Curve2D::from_source("t", "0", {}), euclidean(), 0, 5), 5.0, 1e-12);
    EXPECT_NEAR(curve_length(Curve2D::from_source("cos(t)", "sin(t)", {}), euclidean(), 0, 2 * M_PI), 2 * M_PI, 1e-9);
}

// The printed umbrella speed 2/(t sqrt(1+t^2 tau^2)) goes with the Killing length
// constant 2; the constant 4 computed from the metric halves it.
TEST(CurveLength, ConformalUmbrellaAgainstIndependentQuadrature) {
    const double ref = oracle([](double t) { return 2.0 / (t * std::sqrt(1.0 + t * t)); }, 1.0, 10.0);
    const auto printed = ekt_conformal_metric(0.0, 1.0, MuConstant::AsPrinted);
    EXPECT_NEAR(curve_length(umbrella_curve(), printed, 1.0, 10.0), ref, 1e-8);
    EXPECT_NEAR(tangent_norm(printed, umbrella_curve(), 1.0), std::sqrt(2.0), 1e-14);
    const auto derived = ekt_conformal_metric(0.0, 1.0);
    EXPECT_NEAR(curve_length(umbrella_curve(), derived, 1.0, 10.0), ref / 2, 1e-8);
}

TEST(CurveLength, Sol3ProfileAgainstIndependentQuadrature) {
    const auto sol3 = sol3_model();
    const auto c = Curve2D::from_source("t", "sin(t)", {});
    const double ours = curve_length(c, sol3.base, -2.0, 3.0);
    const double ref = oracle(
        [](double t) { return std::sqrt(std::exp(-2 * std::sin(t)) + std::cos(t) * std::cos(t)); }, -2.0, 3.0);
    EXPECT_NEAR(ours, ref, 1e-9);
}
