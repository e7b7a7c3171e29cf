#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "qtmtba/free_energy.hpp"

using namespace qtmtba;

namespace {
const double pi = std::numbers::pi;

ModelParams params(RationalP0 p0, double J, double beta) {
    ModelParams mp;
    mp.p0 = p0;
    mp.J = J;
    mp.beta = beta;
    return mp;
}

// free energy per site of the periodic chain J sum (Sx Sx + Sy Sy + Delta (Sz Sz - 1/4)) by full diagonalization
double ed_free_energy(int L, double J, double Delta, double beta) {
    const int dim = 1 << L;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (int s = 0; s < dim; ++s) {
        for (int i = 0; i < L; ++i) {
            int j = (i + 1) % L;
            int si = (s >> i) & 1, sj = (s >> j) & 1;
            double zz = (si == sj) ? 0.25 : -0.25;
            H(s, s) += J * Delta * (zz - 0.25);
            if (si != sj) H(s ^ (1 << i) ^ (1 << j), s) += 0.5 * J;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    const auto& E = es.eigenvalues();
    double e0 = E.minCoeff(), z = 0.0;
    for (int i = 0; i < dim; ++i) z += std::exp(-beta * (E[i] - e0));
    return (e0 - std::log(z) / beta) / L;
}
}  // namespace

TEST(DrivingTerm, ValueAtOriginAndDecay) {
    auto mp = params(RationalP0(5), 1.0, 2.0);
    const double th = pi / 5;
    EXPECT_NEAR(driving_term(0.0, mp), -2.0 * pi * std::sin(th) / (2.0 * th), 1e-14);
    EXPECT_LT(std::abs(driving_term(40.0, mp)), 1e-25);
}

TEST(DrivingTerm, TrotterLimit) {
    auto mp = params(RationalP0(24, 5), 1.0, 1.0);
    for (double v : {0.0, 0.5, 2.0}) EXPECT_NEAR(driving_term_finite(v, mp, 10000), driving_term(v, mp), 1e-6);
    mp.J = -1.0;
    for (double v : {0.0, 1.5}) EXPECT_NEAR(driving_term_finite(v, mp, 10000), driving_term(v, mp), 1e-6);
}

TEST(GroundNlie, HighTemperatureCompleteness) {
    for (auto p0 : {RationalP0(3), RationalP0(5), RationalP0(24, 5)}) {
        auto mp = params(p0, 1.0, 1e-4);
        auto es = solve_ground_nlie(mp);
        EXPECT_NEAR(-mp.beta * free_energy(es), std::log(2.0), 1e-4) << p0.str();
        // driving term is negligible, so the solution is flat
        for (int j = 1; j <= es.j_max(); ++j) {
            const auto& L = es.L[static_cast<size_t>(j)];
            EXPECT_NEAR(L.front(), L[L.size() / 2], 1e-3);
        }
    }
}

TEST(GroundNlie, FrozenFreeEnergies) {
    EXPECT_NEAR(free_energy(solve_ground_nlie(params(RationalP0(5), 1.0, 1.0))), -0.9855497450149, 1e-10);
    EXPECT_NEAR(free_energy(solve_ground_nlie(params(RationalP0(5), 1.0, 10.0))), -0.6216340348494, 1e-10);
    EXPECT_NEAR(free_energy(solve_ground_nlie(params(RationalP0(3), 1.0, 10.0))), -0.5040686060060, 1e-10);
    EXPECT_NEAR(free_energy(solve_ground_nlie(params(RationalP0(24, 5), 1.0, 10.0))), -0.6155679332343, 1e-10);
}

TEST(GroundNlie, AsymptoticsMatchConstantSolution) {
    auto mp = params(RationalP0(5), 1.0, 1.0);
    auto es = solve_ground_nlie(mp);
    auto c = constant_solution(es.ts);
    for (int j = 1; j <= es.j_max(); ++j) {
        EXPECT_NEAR(es.L[static_cast<size_t>(j)].front(), c[static_cast<size_t>(j)], 1e-8);
        EXPECT_NEAR(es.L[static_cast<size_t>(j)].back(), c[static_cast<size_t>(j)], 1e-8);
    }
}

TEST(GroundNlie, TrotterExtrapolation) {
    auto mp = params(RationalP0(5), 1.0, 1.0);
    std::vector<int> Ns{8, 12, 16};
    std::vector<double> fs;
    for (int N : Ns) fs.push_back(finite_N_free_energy(mp, N));
    EXPECT_NEAR(richardson(Ns, fs), free_energy(solve_ground_nlie(mp)), 1e-4);
}

TEST(GroundNlie, FiniteTrotterNumberMatchesBae) {
    for (double J : {1.0, -1.0}) {
        auto mp = params(RationalP0(5), J, 1.0);
        const int N = J > 0 ? 16 : 8;
        auto eN = solve_finite_N_y1(mp, N);
        auto tp = TrotterParams::from_physical(mp.p0, mp.J, mp.beta, N);
        TEvaluator ev(solve_bae(tp, N / 2, 1), tp);
        YFunctions Y(ev, eN.ts);
        auto y1 = eN.eta(1);
        double worst = 0.0;
        for (int i = 0; i < eN.grid.M; ++i) {
            double v = eN.grid.v(i);
            if (std::abs(v) > 10) continue;
            worst = std::max(worst, std::abs(Y.Y(1, v).real() - y1[static_cast<size_t>(i)]));
        }
        EXPECT_LT(worst, 1e-6) << "J = " << J;
    }
}

TEST(Symmetry, ExactDiagonalizationSpectrumInvariance) {
    const double beta = 0.7, Delta = std::cos(pi / 5);
    EXPECT_NEAR(ed_free_energy(8, 1.0, Delta, beta), ed_free_energy(8, -1.0, -Delta, beta), 1e-12);
}

TEST(Symmetry, NegativeAnisotropyMapsOntoCanonicalPoint) {
    auto [J, p0] = canonicalize(1.0, rational(5, 4));
    EXPECT_EQ(J, -1.0);
    EXPECT_EQ(p0.value(), rational(5));
    EXPECT_NEAR(p0.delta(), -std::cos(pi * 4.0 / 5.0), 1e-15);
    auto [J2, p2] = canonicalize(0.5, rational(24, 5));
    EXPECT_EQ(J2, 0.5);
    EXPECT_EQ(p2.value(), rational(24, 5));
    EXPECT_THROW(canonicalize(1.0, rational(1)), domain_error);
}

TEST(Symmetry, NlieAgreesWithExactDiagonalizationAtHighTemperature) {
    const double beta = 0.2;
    for (double J : {1.0, -1.0}) {
        auto mp = params(RationalP0(5), J, beta);
        double f = free_energy(solve_ground_nlie(mp));
        EXPECT_NEAR(f, ed_free_energy(10, J, mp.delta(), beta), 1e-6) << "J = " << J;
    }
}

TEST(Richardson, RecoversPolynomialLimit) {
    std::vector<int> Ns{8, 12, 16, 20};
    std::vector<double> f;
    for (int N : Ns) f.push_back(1.5 + 2.0 / N - 3.0 / (N * N));
    EXPECT_NEAR(richardson(Ns, f), 1.5, 1e-12);
    EXPECT_THROW(richardson({8}, {1.0}), domain_error);
}

TEST(GroundNlie, RefinedGridChangesFreeEnergyLittle) {
    auto mp = params(RationalP0(5), 1.0, 1.0);
    Grid g;
    double a = free_energy(solve_ground_nlie(mp, g)), b = free_energy(solve_ground_nlie(mp, g.refined()));
    EXPECT_LT(std::abs(a - b), 1e-8);
}
