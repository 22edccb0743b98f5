#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "kparab/models.hpp"
#include "kparab/verify.hpp"

using namespace kparab;

namespace {

MuProfile mu_of(const char* src, Interval domain = {}) { return MuProfile::from_source(src, domain); }

Expression fx(const char* src) { return parse(src, {"x"}); }

double gk(std::function<double(double)> f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14);
}

}  // namespace

// ---------------------------------------------------------------------------
// Laplacian on the warped surface

TEST(LaplacianResidual, Examples) {
    EXPECT_LE(std::fabs(laplacian_residual(mu_of("1"), fx("x^2"), 0.7, 1e-3)), 1e-6);
    EXPECT_LE(std::fabs(laplacian_residual(mu_of("x", {0, inf}), fx("log(x)"), 2.0, 1e-3)), 1e-6);
    EXPECT_LE(std::fabs(laplacian_residual(mu_of("exp(x)"), fx("exp(-x)"), 0.0, 1e-3)), 1e-6);
}

TEST(LaplacianResidual, Errors) {
    EXPECT_THROW(laplacian_residual(mu_of("x"), fx("x"), 0.0, 1e-3), NumericError);
    EXPECT_THROW(laplacian_residual(mu_of("1"), fx("x"), 0.0, 0.0), SpecError);
    EXPECT_THROW(laplacian_residual(mu_of("1"), parse("x*y", {"x", "y"}), 0.0, 1e-3), SpecError);
}

// The conservative stencil reproduces these two cases exactly: constant
// coefficients on a quadratic, and a discretely harmonic exponential pair.
// Their residual is rounding only, so the h^2 ratio below is meaningless for them.
TEST(LaplacianResidual, StencilIsExactOnTheTrivialCases) {
    for (double h : {1e-1, 1e-2, 1e-3}) {
        EXPECT_LE(std::fabs(laplacian_residual(mu_of("1"), fx("x^2"), 0.7, h)), 1e-9);
        EXPECT_LE(std::fabs(laplacian_residual(mu_of("exp(x)"), fx("exp(-x)"), 0.0, h)), 1e-9);
    }
}

TEST(LaplacianProperty, SecondOrderDecay) {
    struct Case {
        const char* mu;
        const char* f;
        double x;
    };
    for (const Case& c : {Case{"x", "log(x)", 2.0}, Case{"exp(x)", "sin(x)", 0.3}, Case{"1+x^2", "x^3", -0.8},
                          Case{"2+sin(x)", "cos(x)", 1.1}, Case{"cosh(x)", "exp(x/2)", 0.5}}) {
        const auto mu = mu_of(c.mu, {0, inf});
        const auto f = fx(c.f);
        for (double h : {2e-2, 1e-2}) {
            const double r1 = laplacian_residual(mu, f, c.x, h);
            const double r2 = laplacian_residual(mu, f, c.x, h / 2);
            EXPECT_NEAR(r1 / r2, 4.0, 0.8) << c.mu << " " << c.f << " h=" << h;
        }
    }
}

// ---------------------------------------------------------------------------
// Witness function

TEST(Witness, ConstantProfileIsUnbounded) {
    const auto w = witness(mu_of("1"), 0.0);
    EXPECT_FALSE(w.bound(+1));
    EXPECT_FALSE(w.bound(-1));
    for (double s : {-3.0, 0.0, 2.0, 7.5}) EXPECT_NEAR(w(s), 0.0 - s, 1e-12);
    EXPECT_EQ(w.tail(+1)->verdict, Tail::Divergent);
}

TEST(Witness, ExponentialProfile) {
    const auto w = witness(mu_of("exp(s)"), 0.0);
    ASSERT_TRUE(w.bound(+1));
    EXPECT_NEAR(*w.bound(+1), 1.0, 1e-9);
    EXPECT_FALSE(w.bound(-1));
    for (double s : {0.5, 2.0, 10.0}) EXPECT_NEAR(w(s), std::exp(-s) - 1.0, 1e-12);
}

TEST(Witness, LorentzianProfileBoundedByHalfPi) {
    const auto w = witness(mu_of("1+s^2"), 0.0);
    for (int dir : {-1, 1}) {
        ASSERT_TRUE(w.bound(dir));
        EXPECT_NEAR(*w.bound(dir), M_PI / 2, 1e-9);
    }
    for (double s : {-20.0, -1.0, 0.3, 4.0}) EXPECT_NEAR(w(s), -std::atan(s), 1e-12);
}

TEST(WitnessProperty, MonotoneAnchoredAndHarmonic) {
    for (const char* src : {"1", "exp(s)", "1+s^2", "2+sin(s)", "cosh(s)"}) {
        const auto w = witness(mu_of(src), 0.5);
        EXPECT_EQ(w(0.5), 0.0) << src;
        double prev = inf;
        for (int i = 0; i <= 60; ++i) {
            const double s = -6.0 + 0.2 * i;
            const double v = w(s);
            EXPECT_LT(v, prev) << src << " s=" << s;
            prev = v;
        }
        for (double s : {-0.5, 0.5, 1.5}) EXPECT_LE(std::fabs(w.harmonic_residual(s)), 1e-5) << src;
    }
}

TEST(WitnessProperty, BoundMatchesSupOnTheTail) {
    const auto w = witness(mu_of("1+s^2"), 0.0);
    double sup = 0.0;
    for (double s = 0.0; s < 1e9; s = 2 * s + 1) sup = std::max(sup, std::fabs(w(s)));
    EXPECT_LE(sup, *w.bound(+1) + 1e-12);
    EXPECT_NEAR(sup, *w.bound(+1), 1e-6);
}

// Witness boundedness against classify's tail verdicts on the built-in curves.
TEST(WitnessProperty, AgreesWithClassifyOnBuiltins) {
    int compared = 0;
    for (const auto& b : list_builtins()) {
        const auto problem = builtin_problem(b.name);
        const auto* ex = std::get_if<ExtrinsicProblem>(&problem.body);
        if (!ex || ex->model.compact_total_space) continue;  // no Killing-length profile to integrate
        const auto profile = arclength_profile(ex->model, ex->curve);
        const auto report = classify(problem, Route::ArcLength);
        const auto w = witness(profile, 0.0);
        for (const auto& t : report.tails) {
            if (t.mirrored || t.start != 0.0) continue;
            const auto& ours = w.tail(t.direction);
            if (!ours) continue;
            EXPECT_EQ(ours->verdict, t.evidence.verdict) << b.name << " dir " << t.direction;
            EXPECT_EQ(w.bound(t.direction).has_value(), t.evidence.verdict == Tail::Convergent) << b.name;
            ++compared;
        }
    }
    EXPECT_GE(compared, 6);
}

// ---------------------------------------------------------------------------
// Annulus harmonic measure

TEST(AnnulusHarmonicMeasure, Examples) {
    EXPECT_NEAR(annulus_harmonic_measure(mu_of("1"), 0, 1, 0.5), 0.5, 1e-14);
    EXPECT_NEAR(annulus_harmonic_measure(mu_of("x", {0, inf}), 1, std::exp(2.0), M_E), 0.5, 1e-13);
    const double closed = (1 - std::exp(-0.5)) / (1 - std::exp(-1.0));
    EXPECT_NEAR(annulus_harmonic_measure(mu_of("exp(x)"), 0, 1, 0.5), closed, 1e-14);
    EXPECT_NEAR(closed, 0.6225, 5e-5);
}

TEST(AnnulusHarmonicMeasure, AgainstIndependentQuadrature) {
    const auto mu = mu_of("2+sin(x)*x");
    const auto inv = [](double x) { return 1.0 / (2 + std::sin(x) * x); };
    const double expect = gk(inv, -1.0, 0.7) / gk(inv, -1.0, 1.9);
    EXPECT_NEAR(annulus_harmonic_measure(mu, -1.0, 1.9, 0.7), expect, 1e-12);
}

TEST(AnnulusHarmonicMeasure, Errors) {
    EXPECT_THROW(annulus_harmonic_measure(mu_of("1"), 0, 1, 1.5), SpecError);
    EXPECT_THROW(annulus_harmonic_measure(mu_of("x"), -1, 1, 0.5), NumericError);
}

// ---------------------------------------------------------------------------
// Radial diffusion

namespace {

struct Triple {
    const char* mu;
    double a, b, x0;
};

const Triple kTriples[] = {{"1", 0.0, 1.0, 0.5}, {"x", 1.0, 7.38905609893065, 2.718281828459045}, {"exp(x)", 0.0, 1.0, 0.5}};

}  // namespace

// 3 sigma at n = 20000 here; the full n = 1e5 run is in the acceptance binary.
TEST(RadialDiffusion, AgreesWithHarmonicMeasure) {
    for (const auto& t : kTriples) {
        const auto mu = mu_of(t.mu, {0, inf});
        DiffusionOptions opt;
        opt.walkers = 20000;
        opt.seed = 11;
        const auto r = simulate_radial_diffusion(mu, t.x0, t.a, t.b, opt);
        const double p = annulus_harmonic_measure(mu, t.a, t.b, t.x0);
        EXPECT_LE(std::fabs(r.probability - p), 3.0 * std::sqrt(p * (1 - p) / opt.walkers)) << t.mu;
        EXPECT_EQ(r.walkers, opt.walkers);
    }
}

TEST(RadialDiffusion, DeterministicForAFixedSeed) {
    const auto mu = mu_of("exp(x)");
    DiffusionOptions opt;
    opt.walkers = 3000;
    opt.seed = 99;
    opt.threads = 1;
    const auto a = simulate_radial_diffusion(mu, 0.5, 0.0, 1.0, opt);
    const auto b = simulate_radial_diffusion(mu, 0.5, 0.0, 1.0, opt);
    opt.threads = 3;
    const auto c = simulate_radial_diffusion(mu, 0.5, 0.0, 1.0, opt);
    EXPECT_EQ(a.hits, b.hits);
    EXPECT_EQ(a.hits, c.hits);
    opt.seed = 100;
    EXPECT_NE(simulate_radial_diffusion(mu, 0.5, 0.0, 1.0, opt).hits, a.hits);
}

TEST(RadialDiffusion, Errors) {
    const auto mu = mu_of("1");
    EXPECT_THROW(simulate_radial_diffusion(mu, 2.0, 0.0, 1.0), SpecError);
    DiffusionOptions opt;
    opt.walkers = 0;
    EXPECT_THROW(simulate_radial_diffusion(mu, 0.5, 0.0, 1.0, opt), SpecError);
    opt.walkers = 10;
    opt.dt = 0.5;
    EXPECT_THROW(simulate_radial_diffusion(mu_of("exp(10*x)"), 0.5, 0.0, 1.0, opt), NumericError);
}

// Escape from a core [1, 2] to b, simulated in the natural scale y = S(x) where
// the diffusion is driftless. Parabolic profiles lose the escape probability as b
// grows; hyperbolic ones keep it.
TEST(RadialDiffusionProperty, EscapeProbabilityTracksTheVerdict) {
    struct Spec {
        const char* mu;
        Verdict verdict;
    };
    for (const Spec& sp : {Spec{"1", Verdict::Parabolic}, Spec{"s", Verdict::Parabolic},
                           Spec{"exp(s)", Verdict::Hyperbolic}}) {
        const auto mu = mu_of(sp.mu, {0, inf});
        const auto verdict =
            classify(Problem{sp.mu, SurfaceSpec{Base::line(), mu_of(sp.mu, std::string(sp.mu) == "s" ? Interval{0, inf} : Interval{}),
                                                std::string(sp.mu) == "s" ? Fibers::Compact : Fibers::NonCompact},
                             {}})
                .verdict;
        ASSERT_EQ(verdict, sp.verdict) << sp.mu;
        std::vector<double> p;
        for (double b : {10.0, 100.0, 1000.0}) {
            const double y0 = scale_function(mu, 1.0, 2.0), yb = scale_function(mu, 1.0, b);
            DiffusionOptions opt;
            opt.walkers = 4000;
            opt.seed = 5;
            p.push_back(simulate_radial_diffusion(mu_of("1"), y0, 0.0, yb, opt).probability);
        }
        if (sp.verdict == Verdict::Parabolic) {
            EXPECT_GT(p[0], p[1]) << sp.mu;
            EXPECT_GT(p[1], p[2]) << sp.mu;
            EXPECT_LT(p[2], 0.5 * p[0]) << sp.mu;
        } else {
            for (double q : p) EXPECT_GT(q, 0.5) << sp.mu;
        }
    }
}

// ---------------------------------------------------------------------------
// Flatness after normalisation

TEST(Flatness, Examples) {
    const auto one = curvature_flatness_check(mu_of("1"), {-5, 5});
    EXPECT_EQ(one.max_abs_curvature, 0.0);
    const auto e = curvature_flatness_check(mu_of("exp(x)"), {-5, 5});
    EXPECT_LE(e.max_abs_curvature, 1e-8);
    EXPECT_NEAR(e.max_abs_original, 1.0, 1e-6);
    EXPECT_LE(curvature_flatness_check(mu_of("1+x^2"), {-5, 5}).max_abs_curvature, 1e-8);
}

TEST(Flatness, PulledBackProfileIsFlatToo) {
    for (const char* src : {"exp(x)", "1+x^2", "2+sin(x)"})
        EXPECT_LE(curvature_flatness_check(mu_of(src), {-5, 5}).max_abs_pulled_back, 1e-8) << src;
}

TEST(Flatness, FiniteDifferenceFallback) {
    const auto mu = MuProfile::from_function([](double x) { return 1 + x * x; }, {});
    EXPECT_LE(curvature_flatness_check(mu, {-5, 5}).max_abs_curvature, 1e-6);
}

TEST(Flatness, Errors) {
    EXPECT_THROW(curvature_flatness_check(mu_of("1"), {0, inf}), SpecError);
    EXPECT_THROW(curvature_flatness_check(mu_of("x"), {-1, 1}), NumericError);
}
