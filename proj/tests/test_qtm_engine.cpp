#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qtmtba/qtm_engine.hpp"

using namespace qtmtba;

namespace {
const double pi = std::numbers::pi;

struct Fixture {
    TrotterParams tp;
    BetheState bs;
    TEvaluator ev;
    TSSequences ts;
    Fixture(RationalP0 p0, int N, int k, double u)
        : tp(TrotterParams::from_u(p0.theta(), N, u)),
          bs(solve_bae(tp, k == 2 ? N / 2 - 1 : N / 2, k)),
          ev(bs, tp),
          ts(build_sequences(p0)) {}
};
}  // namespace

TEST(Phi, ZeroOfOrderHalfN) {
    auto tp = TrotterParams::from_u(pi / 5, 8, -0.01);
    EXPECT_EQ(std::abs(phi(0.0, tp)), 0.0);
    // order N/2 = 4: phi(eps) / eps^4 is finite and nonzero
    double e = 1e-3;
    double c = std::abs(phi(e, tp)) / std::pow(e, 4);
    double ref = std::pow(tp.theta / 2 / std::sin(tp.theta), 4);
    EXPECT_NEAR(c / ref, 1.0, 1e-5);
}

TEST(Phi, QuasiPeriodicity) {
    for (int N : {6, 8}) {
        auto tp = TrotterParams::from_u(pi / 5, N, -0.01);
        double s = (N / 2) % 2 ? -1.0 : 1.0;
        for (cd v : sample_points(5.0, 6, 7)) {
            cd a = phi(v + 2.0 * I_unit * 5.0, tp), b = s * phi(v, tp);
            EXPECT_LT(relative_residual(a, b), 1e-12);
        }
    }
}

TEST(Phi, TwoSiteValue) {
    auto tp = TrotterParams::from_u(pi / 5, 2, -0.01);
    EXPECT_NEAR(phi(1.0, tp).real(), std::sinh(pi / 10) / std::sin(pi / 5), 1e-15);
}

TEST(QFunction, EmptyAndRoot) {
    BetheState empty;
    EXPECT_EQ(q_function(cd(0.3, 0.7), empty, pi / 5), cd(1.0));
    auto tp = TrotterParams::from_u(pi / 5, 8, -0.01);
    auto bs = solve_bae(tp, 4, 1);
    EXPECT_LT(std::abs(q_function(bs.roots[0], bs, tp.theta)), 1e-15);
}

TEST(Bae, EmptySector) {
    auto tp = TrotterParams::from_u(pi / 5, 8, -0.01);
    auto bs = solve_bae(tp, 0, 1);
    EXPECT_TRUE(bs.roots.empty());
    EXPECT_TRUE(bae_residual(bs, tp).empty());
}

TEST(Bae, TwoSitesSingleRootAtOrigin) {
    // for N = 2 the one-root equation is solved by w = 0
    auto tp = TrotterParams::from_u(pi / 5, 2, -0.01);
    auto bs = solve_bae(tp, 1, 1);
    ASSERT_EQ(bs.roots.size(), 1u);
    EXPECT_LT(std::abs(bs.roots[0]), 1e-12);
    BetheState exact = bs;
    exact.roots = {0.0};
    EXPECT_LT(std::abs(bae_residual(exact, tp)[0]), 1e-12);
}

TEST(Bae, SixteenSitesRealRoots) {
    auto tp = TrotterParams::from_u(RationalP0(24, 5).theta(), 16, -0.01);
    auto bs = solve_bae(tp, 8, 1);
    EXPECT_LT(bs.max_residual, 1e-12);
    for (const cd& w : bs.roots) EXPECT_LT(std::abs(w.imag()), 1e-10);
}

TEST(Bae, SectorMismatchRejected) {
    auto tp = TrotterParams::from_u(pi / 5, 8, -0.01);
    EXPECT_THROW(solve_bae(tp, 3, 1), domain_error);
    EXPECT_THROW(solve_bae(tp, 4, 2), domain_error);
    EXPECT_THROW(TrotterParams::from_u(pi / 5, 7, -0.01), domain_error);
}

TEST(TEvaluator, LargestEigenvalueTendsToTwo) {
    double prev = 1e9;
    for (double u : {-0.05, -0.01, -0.002}) {
        auto tp = TrotterParams::from_u(pi / 5, 8, u);
        TEvaluator ev(solve_bae(tp, 4, 1), tp);
        double d = std::abs(ev.T(1, 0.0) - 2.0);
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_LT(prev, 0.01);
}

TEST(TEvaluator, ScaledMatchesDirectAwayFromPoles) {
    Fixture s(RationalP0(5), 8, 1, -0.05);
    for (cd v : sample_points(5.0, 8, 3))
        for (int n : {0, 1, 3})
            EXPECT_LT(relative_residual(s.ev.T(n, v), s.ev.T_direct(n, v)), 1e-10);
}

TEST(TEvaluator, CircleAverageNearBaeRoot) {
    // the sum is finite at w + i(n+1) even though single terms are not
    Fixture s(RationalP0(5), 8, 1, -0.05);
    cd v = s.bs.roots[0] + 2.0 * I_unit;
    cd a = s.ev.T(1, v);
    // symmetric difference of the straight sum; its own error is O(1e-8) times the curvature
    cd b = 0.5 * (s.ev.T_direct(1, v + 1e-4) + s.ev.T_direct(1, v - 1e-4));
    EXPECT_LT(relative_residual(a, b), 1e-4);
}

TEST(FunctionalRelations, TSystemFiveRandomPoints) {
    Fixture s(RationalP0(5), 8, 1, -0.05);
    auto rep = verify_t_system(s.ev, s.ts, sample_points(5.0, 20, 99));
    EXPECT_TRUE(rep.all_pass()) << rep.summary();
    EXPECT_LT(rep.worst_residual(), 1e-9);
}

TEST(FunctionalRelations, YDefinitionsAgreeTwentyFourFifths) {
    Fixture s(RationalP0(24, 5), 8, 1, -0.05);
    auto rep = verify_y_system(s.ev, s.ts, sample_points(4.8, 10, 5));
    ASSERT_NE(rep.find("ydef_equivalence"), nullptr);
    EXPECT_LT(rep.find("ydef_equivalence")->max_residual, 1e-9);
    for (const char* n : {"ysystem1", "ysystem2", "ysystem3", "ysystem4"}) {
        ASSERT_NE(rep.find(n), nullptr) << n;
        EXPECT_TRUE(rep.find(n)->pass) << n;
    }
    YFunctions Y(s.ev, s.ts);
    EXPECT_EQ(Y.Y(0, cd(0.4, 0.3)), cd(0.0));
    EXPECT_EQ(Y.one_plus_Y(0, cd(0.4, 0.3)), cd(1.0));
}

TEST(FunctionalRelations, IntegerYSystemClosure) {
    Fixture s(RationalP0(5), 8, 1, -0.05);
    YFunctions Y(s.ev, s.ts);
    for (cd v : sample_points(5.0, 10, 21)) {
        cd lhs = Y.K_int(v + I_unit) * Y.K_int(v - I_unit);
        cd rhs = 1.0 + Y.Y_int(3, v);
        EXPECT_LT(relative_residual(lhs, rhs), 1e-9);
    }
    auto rep = verify_y_system(s.ev, s.ts, sample_points(5.0, 10));
    EXPECT_TRUE(rep.all_pass()) << rep.summary();
}

TEST(FunctionalRelations, InversionIdentity) {
    for (auto [p0, N] : {std::pair{RationalP0(5), 8}, std::pair{RationalP0(24, 5), 16}}) {
        Fixture s(p0, N, 1, -0.05);
        auto rep = verify_inversion(s.ev, s.ts, sample_points(p0.to_double(), 10));
        EXPECT_TRUE(rep.all_pass()) << p0.str() << "\n" << rep.summary();
    }
}

TEST(FunctionalRelations, ExcitedSectors) {
    for (int k : {2, 3}) {
        Fixture s(RationalP0(5), 12, k, -0.1);
        auto samples = sample_points(5.0, 10);
        CheckReport rep;
        rep.merge(verify_t_system(s.ev, s.ts, samples));
        rep.merge(verify_y_system(s.ev, s.ts, samples));
        rep.merge(verify_inversion(s.ev, s.ts, samples));
        EXPECT_TRUE(rep.all_pass()) << "k = " << k << "\n" << rep.summary();
    }
}

TEST(Zeros, ExcitedStatesHaveNegativeT1AtOrigin) {
    for (int k : {2, 3}) {
        Fixture s(RationalP0(5), 16, k, -0.05);
        EXPECT_LT(s.ev.T(1, 0.0).real(), 0.0) << "k = " << k;
    }
}

TEST(Zeros, GroundStateZerosNearLines) {
    Fixture s(RationalP0(24, 5), 16, 1, -0.01);
    for (int n = 2; n <= 5; ++n) {
        auto z = locate_zeros(n, s.ev);
        int count = 0;
        for (const Zero& q : z) {
            count += q.multiplicity;
            double best = 1e9;
            for (double t : {double(n), -double(n)}) {
                double d = q.v.imag() - t;
                d -= 9.6 * std::round(d / 9.6);
                best = std::min(best, std::abs(d));
            }
            EXPECT_LT(best, 0.05) << "n = " << n;
        }
        EXPECT_EQ(count, 16);
    }
}

TEST(Zeros, PositiveRealZerosOfExcitedStates) {
    Fixture s(RationalP0(5), 16, 3, -0.05);
    auto z = positive_real_zeros(1, s.ev);
    ASSERT_FALSE(z.empty());
    for (double x : z) EXPECT_LT(std::abs(s.ev.T_scaled(1, x)), 1e-10 * std::abs(s.ev.T_scaled(1, x + 0.3)));
}
