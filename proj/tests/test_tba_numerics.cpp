#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "qtmtba/tba_numerics.hpp"

using namespace qtmtba;

namespace {
const double pi = std::numbers::pi;

double integrate_line(const std::function<double(double)>& f, double half_width) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -half_width, half_width, 20, 1e-14);
}
}  // namespace

TEST(Kernels, SAtOriginAndMass) {
    for (double p : {1.0, 0.8, 0.2, 4.8}) {
        EXPECT_DOUBLE_EQ(kernel_s_value(p, 0.0), 1.0 / (4.0 * p));
        double I = integrate_line([p](double v) { return kernel_s_value(p, v); }, 60.0 * p);
        EXPECT_NEAR(I, 0.5, 1e-10) << "p = " << p;
    }
    // p_1 = 1 is the driving kernel 1/(4 cosh(pi v / 2))
    auto ts = build_sequences(RationalP0(24, 5));
    for (double v : {0.0, 0.7, -2.5}) EXPECT_NEAR(kernel_s(1, v, ts), 1.0 / (4.0 * std::cosh(pi * v / 2.0)), 1e-16);
    EXPECT_THROW(kernel_s(4, 0.0, ts), domain_error);
}

TEST(Kernels, DEvenAndNormalized) {
    auto ts = build_sequences(RationalP0(24, 5));
    for (double v : {0.3, 1.7, 4.0}) EXPECT_NEAR(kernel_d(1, v, ts), kernel_d(1, -v, ts), 1e-15);
    for (int r : {1, 2}) {
        double I = integrate_line([&](double v) { return kernel_d(r, v, ts); }, 40.0);
        EXPECT_NEAR(I, 0.5, 1e-10) << "r = " << r;
    }
    EXPECT_NEAR(kernel_d(1, 0.0, ts, 40.0), kernel_d(1, 0.0, ts, 80.0), 1e-10);
    EXPECT_THROW(kernel_d(3, 0.0, ts), domain_error);
    EXPECT_THROW(kernel_d_samples(0.2, 0.8, 0.0, 0.1, 3), domain_error);
}

TEST(Convolver, SampledMassIsHalf) {
    Grid g;
    EXPECT_NEAR(make_s_convolver(g, 1.0)->sampled_integral(), 0.5, 1e-10);
    EXPECT_NEAR(make_d_convolver(g, 1.0, 0.8)->sampled_integral(), 0.5, 1e-10);
}

TEST(Convolver, ConstantsAndZero) {
    Grid g(30.0, 1025);
    auto s = make_s_convolver(g, 0.8);
    std::vector<double> c(static_cast<size_t>(g.M), 3.0), z(static_cast<size_t>(g.M), 0.0);
    for (double x : s->apply(c)) EXPECT_NEAR(x, 1.5, 1e-12);
    for (double x : s->apply(z)) EXPECT_EQ(x, 0.0);
}

TEST(Convolver, SechMatchesDirectQuadrature) {
    Grid g;
    auto s = make_s_convolver(g, 1.0);
    std::vector<double> f(static_cast<size_t>(g.M));
    for (int i = 0; i < g.M; ++i) f[static_cast<size_t>(i)] = 1.0 / std::cosh(pi * g.v(i) / 2.0);
    auto out = s->apply(f);
    double ref = integrate_line([](double y) { return kernel_s_value(1.0, -y) / std::cosh(pi * y / 2.0); }, 40.0);
    EXPECT_NEAR(out[static_cast<size_t>(g.center())], ref, 1e-9);
    EXPECT_NEAR(s->at(0.0, f), ref, 1e-9);
}

TEST(Convolver, LinearAndReflectionSymmetric) {
    Grid g(30.0, 1025);
    auto s = make_s_convolver(g, 1.0);
    std::vector<double> a(static_cast<size_t>(g.M)), b(a.size()), ab(a.size()), ar(a.size());
    for (int i = 0; i < g.M; ++i) {
        double v = g.v(i);
        a[static_cast<size_t>(i)] = std::exp(-0.1 * (v - 1) * (v - 1)) + std::tanh(v);
        b[static_cast<size_t>(i)] = 1.0 / std::cosh(v / 2.0);
        ab[static_cast<size_t>(i)] = 2.0 * a[static_cast<size_t>(i)] - 0.5 * b[static_cast<size_t>(i)];
    }
    for (int i = 0; i < g.M; ++i) ar[static_cast<size_t>(i)] = a[static_cast<size_t>(g.M - 1 - i)];
    auto ca = s->apply(a), cb = s->apply(b), cab = s->apply(ab), car = s->apply(ar);
    for (int i = 0; i < g.M; ++i) {
        EXPECT_NEAR(cab[static_cast<size_t>(i)], 2.0 * ca[static_cast<size_t>(i)] - 0.5 * cb[static_cast<size_t>(i)], 1e-12);
        EXPECT_NEAR(car[static_cast<size_t>(i)], ca[static_cast<size_t>(g.M - 1 - i)], 1e-12);
    }
}

TEST(Convolver, LinearTailHandledInClosedForm) {
    Grid g(30.0, 1025);
    auto s = make_s_convolver(g, 1.0);
    std::vector<double> lin(static_cast<size_t>(g.M));
    for (int i = 0; i < g.M; ++i) lin[static_cast<size_t>(i)] = 0.3 * g.v(i) + 1.0;
    auto out = s->apply(lin, 0.3);
    for (int i = 0; i < g.M; i += 64) EXPECT_NEAR(out[static_cast<size_t>(i)], 0.5 * lin[static_cast<size_t>(i)], 1e-10);
    // |v| has opposite slopes at the two ends, which the tail model rejects
    SampledFunction absv(lin);
    absv.tail.s_lo = -2.0;
    absv.tail.s_hi = 2.0;
    EXPECT_THROW(s->apply(absv), domain_error);
}

TEST(Convolver, NonFlatEdgeIsRejected) {
    Grid g(20.0, 513);
    auto s = make_s_convolver(g, 1.0);
    std::vector<double> f(static_cast<size_t>(g.M));
    for (int i = 0; i < g.M; ++i) f[static_cast<size_t>(i)] = std::exp(-0.1 * std::abs(g.v(i)));
    EXPECT_THROW(s->apply(f), std::runtime_error);
}

TEST(PrincipalValue, ZeroAndOne) {
    Grid g;
    std::vector<double> z(static_cast<size_t>(g.M), 0.0), one(static_cast<size_t>(g.M), 1.0);
    auto a = pv_convolve_shifted(g, z, 1.3);
    EXPECT_EQ(a, std::complex<double>(0.0, 0.0));
    auto b = pv_convolve_shifted(g, one, 1.3);
    EXPECT_NEAR(b.real(), 0.5, 1e-15);
    EXPECT_NEAR(b.imag(), 0.0, 1e-13);
    EXPECT_THROW(pv_convolve_shifted(g, one, g.L), domain_error);
}

TEST(PrincipalValue, SechAgainstSymmetricQuadrature) {
    Grid g;
    auto f = [](double x) { return 1.0 / std::cosh(pi * x / 2.0); };
    std::vector<double> s(static_cast<size_t>(g.M));
    for (int i = 0; i < g.M; ++i) s[static_cast<size_t>(i)] = f(g.v(i));
    const double zeta = 1.0;
    // pairing x = zeta -+ t removes the singularity
    auto pair = [&](double t) {
        if (t < 1e-8) return -(f(zeta + 1e-6) - f(zeta - 1e-6)) / 2e-6 * 2.0 / pi;
        return (f(zeta - t) - f(zeta + t)) / std::sinh(pi * t / 2.0);
    };
    double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(pair, 0.0, 60.0, 25, 1e-14);
    auto r = pv_convolve_shifted(g, s, zeta);
    EXPECT_NEAR(r.real(), f(zeta) / 2.0, 1e-10);  // interpolated to the off-grid zeta
    EXPECT_NEAR(r.imag(), -I / 4.0, 1e-8);
}

TEST(FixedPoint, IdentityConvergesImmediately) {
    auto r = fixed_point_solve([](const std::vector<double>& x) { return x; }, std::vector<double>{1.0, 2.0});
    EXPECT_EQ(r.iterations, 1);
    EXPECT_EQ(r.x, (std::vector<double>{1.0, 2.0}));
}

TEST(FixedPoint, SquareRootOfTwo) {
    auto F = [](const std::vector<double>& x) { return std::vector<double>{(x[0] + 2.0 / x[0]) / 2.0}; };
    for (int depth : {0, 5}) {
        FixedPointConfig c;
        c.anderson_depth = depth;
        auto r = fixed_point_solve(F, std::vector<double>{1.0}, c);
        EXPECT_NEAR(r.x[0], std::sqrt(2.0), 1e-12) << "depth " << depth;
    }
}

TEST(FixedPoint, AndersonAcceleratesLinearMap) {
    // slowly contracting linear map; plain damped iteration needs many more steps
    auto F = [](const std::vector<double>& x) {
        std::vector<double> y(x.size());
        for (size_t i = 0; i < x.size(); ++i) y[i] = 0.98 * x[(i + 1) % x.size()] + 0.01 * static_cast<double>(i);
        return y;
    };
    std::vector<double> x0(6, 0.0);
    FixedPointConfig plain, acc;
    plain.max_iter = 20000;
    acc.anderson_depth = 6;
    auto a = fixed_point_solve(F, x0, plain), b = fixed_point_solve(F, x0, acc);
    EXPECT_LT(b.iterations * 5, a.iterations);
    for (size_t i = 0; i < x0.size(); ++i) EXPECT_NEAR(a.x[i], b.x[i], 1e-9);
}

TEST(FixedPoint, NonConvergenceCarriesHistory) {
    FixedPointConfig c;
    c.max_iter = 20;
    c.adaptive = false;
    c.lambda = 1.0;
    auto F = [](const std::vector<double>& x) { return std::vector<double>{-x[0] + 1.0}; };
    try {
        fixed_point_solve(F, std::vector<double>{0.0}, c);
        FAIL() << "expected a solver_error";
    } catch (const solver_error& e) {
        EXPECT_EQ(e.history.size(), 20u);
        EXPECT_GT(e.last_residual, 0.5);
    }
}

TEST(Newton, TwoByTwo) {
    auto F = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(2);
        f << x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1];
        return f;
    };
    Eigen::VectorXd x0(2);
    x0 << 1.0, 0.5;
    auto r = newton_solve(F, x0);
    EXPECT_NEAR(r.x[0], std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(r.x[1], std::sqrt(2.0), 1e-12);
}

TEST(Helpers, LnAbsTanh) {
    for (double x : {1e-6, 0.01, 0.5, 3.0, 20.0, -2.0})
        EXPECT_NEAR(ln_abs_tanh(x), std::log(std::abs(std::tanh(x))), 1e-13 * std::max(1.0, std::abs(std::log(std::abs(std::tanh(x))))));
    EXPECT_NEAR(ln_abs_tanh(40.0), -2.0 * std::exp(-80.0), 1e-40);
}

TEST(Helpers, IntegrateAgainstS) {
    Grid g;
    std::vector<double> one(static_cast<size_t>(g.M), 1.0);
    EXPECT_NEAR(integrate_against_s(g, 1.0, one), 0.5, 1e-13);
}

TEST(GridTest, RefinedHalvesSpacingDoublesExtent) {
    Grid g;
    Grid r = g.refined();
    EXPECT_DOUBLE_EQ(r.h(), g.h() / 2);
    EXPECT_DOUBLE_EQ(r.L, 2 * g.L);
    EXPECT_THROW(Grid(10.0, 100), domain_error);
}
