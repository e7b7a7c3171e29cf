#ifndef QTMTBA_FREE_ENERGY_HPP
#define QTMTBA_FREE_ENERGY_HPP

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "qtm_engine.hpp"
#include "rational_ts.hpp"
#include "tba_numerics.hpp"

namespace qtmtba {

struct ModelParams {
    RationalP0 p0{5};
    double J = 1.0;
    double beta = 1.0;

    double theta() const { return p0.theta(); }
    double delta() const { return p0.delta(); }
    void validate() const {
        if (J == 0.0 || !std::isfinite(J)) throw domain_error("J must be a nonzero real");
        if (!(beta > 0) || !std::isfinite(beta)) throw domain_error("beta must be positive");
    }
};

// (J, Delta) and (-J, -Delta) share one spectrum; Delta < 0 is mapped onto p0 >= 2
inline std::pair<double, RationalP0> canonicalize(double J, const rational& p0_any) {
    if (p0_any <= rational(1)) throw domain_error("p0 must exceed 1");
    if (p0_any >= rational(2)) return {J, RationalP0(p0_any)};
    rational mapped = p0_any / (p0_any - rational(1));
    return {-J, RationalP0(mapped)};
}

inline double log1p_exp(double x) { return x > 30 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double driving_term(double v, const ModelParams& mp) {
    const double th = mp.theta();
    return -mp.beta * std::numbers::pi * mp.J * std::sin(th) / (2.0 * th * std::cosh(std::numbers::pi * v / 2.0));
}

// ln[ tanh(pi/4 (v - i a)) tanh(pi/4 (v + i a)) ] for real v and a
inline double ln_tt(double a, double v) {
    double c = std::cosh(std::numbers::pi * v / 2.0), q = std::cos(std::numbers::pi * a / 2.0);
    return std::log((c - q) / (c + q));
}

// the Trotter-N driving term; tends to driving_term as N grows
inline double driving_term_finite(double v, const ModelParams& mp, int N) {
    const double u = TrotterParams::trotter_u(mp.beta, mp.J, mp.theta(), N);
    if (mp.J > 0) return (N / 2.0) * ln_tt(1.0 + u, v);
    return -(N / 2.0) * ln_tt(1.0 - u, v);
}

struct EtaState {
    ModelParams mp;
    TSSequences ts;
    Grid grid;
    std::vector<std::vector<double>> L;  // L[j] = ln(1 + eta_j), j = 1..j_max; L[0] is zero
    int iterations = 0;
    double residual = 0.0;
    std::optional<int> trotter_N;

    int j_max() const { return ts.j_max; }
    std::vector<double> eta(int j) const {
        std::vector<double> out(L.at(static_cast<size_t>(j)).size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::expm1(L[static_cast<size_t>(j)][i]);
        return out;
    }
    // eta_{j_max} = kappa^2 + 2 kappa
    std::vector<double> kappa() const {
        const auto& l = L.at(static_cast<size_t>(j_max()));
        std::vector<double> out(l.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::expm1(l[i] / 2.0);
        return out;
    }
    std::vector<double> flatten() const {
        std::vector<double> x;
        for (int j = 1; j <= j_max(); ++j) x.insert(x.end(), L[static_cast<size_t>(j)].begin(), L[static_cast<size_t>(j)].end());
        return x;
    }
};

struct NlieConfig {
    FixedPointConfig fp = anderson_defaults();
    double continuation_start = 2.0;  // |beta J| above which beta is continued geometrically
    double continuation_factor = 1.3;

    static FixedPointConfig anderson_defaults() {
        FixedPointConfig c;
        c.anderson_depth = 10;
        return c;
    }
};

// constant (v-independent) solution: the beta -> 0 fixed point and the v -> infinity asymptotics
inline std::vector<double> constant_solution(const TSSequences& ts) {
    const int jm = ts.j_max;
    std::vector<double> L(static_cast<size_t>(jm + 1), std::log(2.0));
    L[0] = 0.0;
    for (int it = 0; it < 200000; ++it) {
        std::vector<double> nw(L);
        for (int j = 1; j < jm; ++j) {
            int r = ts.r_of(j);
            r = r + 1;  // m_{r-1} <= j <= m_r - 1
            double sg = (j == ts.m[r - 1]) ? -1.0 : 1.0;
            double rhs = sg * 0.5 * L[static_cast<size_t>(j - 1)];
            if (j <= ts.m[r] - 2)
                rhs += 0.5 * L[static_cast<size_t>(j + 1)];
            else
                rhs += 0.5 * L[static_cast<size_t>(j)] + 0.5 * L[static_cast<size_t>(j + 1)];
            nw[static_cast<size_t>(j)] = log1p_exp(rhs);
        }
        nw[static_cast<size_t>(jm)] = 2.0 * log1p_exp(0.5 * L[static_cast<size_t>(jm - 1)]);
        double diff = 0.0;
        for (int j = 1; j <= jm; ++j) {
            diff = std::max(diff, std::abs(nw[static_cast<size_t>(j)] - L[static_cast<size_t>(j)]));
            L[static_cast<size_t>(j)] = 0.5 * (L[static_cast<size_t>(j)] + nw[static_cast<size_t>(j)]);
        }
        if (diff < 1e-15) break;
    }
    return L;
}

class GroundSolver {
public:
    GroundSolver(const RationalP0& p0, const Grid& grid)
        : p0_(p0), ts_(build_sequences(p0)), grid_(grid), ks_(std::make_shared<KernelSet>(ts_, grid)) {}

    const TSSequences& sequences() const { return ts_; }
    const Grid& grid() const { return grid_; }
    const KernelSet& kernels() const { return *ks_; }

    // one sweep of the right-hand sides for the given driving samples
    std::vector<std::vector<double>> sweep(const std::vector<std::vector<double>>& L, const std::vector<double>& D) const {
        const int jm = ts_.j_max;
        const int M = grid_.M;
        std::vector<std::vector<double>> nw(static_cast<size_t>(jm + 1));
        nw[0].assign(static_cast<size_t>(M), 0.0);
        for (int j = 1; j < jm; ++j) {
            int r = ts_.r_of(j) + 1;
            double sg = (j == ts_.m[r - 1]) ? -1.0 : 1.0;
            std::vector<double> rhs(static_cast<size_t>(M), 0.0);
            if (j == 1) rhs = D;
            if (j > 1) {
                auto c = ks_->s.at(r)->apply(L[static_cast<size_t>(j - 1)]);
                for (int i = 0; i < M; ++i) rhs[static_cast<size_t>(i)] += sg * c[static_cast<size_t>(i)];
            }
            if (j <= ts_.m[r] - 2) {
                auto c = ks_->s.at(r)->apply(L[static_cast<size_t>(j + 1)]);
                for (int i = 0; i < M; ++i) rhs[static_cast<size_t>(i)] += c[static_cast<size_t>(i)];
            } else {
                auto c1 = ks_->d.at(r)->apply(L[static_cast<size_t>(j)]);
                auto c2 = ks_->s.at(r + 1)->apply(L[static_cast<size_t>(j + 1)]);
                for (int i = 0; i < M; ++i) rhs[static_cast<size_t>(i)] += c1[static_cast<size_t>(i)] + c2[static_cast<size_t>(i)];
            }
            std::vector<double>& out = nw[static_cast<size_t>(j)];
            out.resize(static_cast<size_t>(M));
            for (int i = 0; i < M; ++i) out[static_cast<size_t>(i)] = log1p_exp(rhs[static_cast<size_t>(i)]);
        }
        auto lk = ks_->s.at(ts_.alpha)->apply(L[static_cast<size_t>(jm - 1)]);
        nw[static_cast<size_t>(jm)].resize(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) nw[static_cast<size_t>(jm)][static_cast<size_t>(i)] = 2.0 * log1p_exp(lk[static_cast<size_t>(i)]);
        return nw;
    }

    EtaState solve_with_driving(const ModelParams& mp, const std::vector<double>& D, const FixedPointConfig& fp,
                                const std::optional<EtaState>& init) const {
        const int jm = ts_.j_max;
        const int M = grid_.M;
        EtaState st;
        st.mp = mp;
        st.ts = ts_;
        st.grid = grid_;
        std::vector<double> x;
        if (init && init->grid.M == M && init->ts.j_max == jm) {
            x = init->flatten();
        } else {
            auto c = constant_solution(ts_);
            for (int j = 1; j <= jm; ++j) x.insert(x.end(), static_cast<size_t>(M), c[static_cast<size_t>(j)]);
        }
        auto unpack = [&](const std::vector<double>& flat) {
            std::vector<std::vector<double>> L(static_cast<size_t>(jm + 1));
            L[0].assign(static_cast<size_t>(M), 0.0);
            for (int j = 1; j <= jm; ++j)
                L[static_cast<size_t>(j)].assign(flat.begin() + static_cast<long>(j - 1) * M, flat.begin() + static_cast<long>(j) * M);
            return L;
        };
        auto F = [&](const std::vector<double>& flat) {
            auto nw = sweep(unpack(flat), D);
            std::vector<double> out;
            out.reserve(flat.size());
            for (int j = 1; j <= jm; ++j) out.insert(out.end(), nw[static_cast<size_t>(j)].begin(), nw[static_cast<size_t>(j)].end());
            return out;
        };
        auto res = fixed_point_solve(F, x, fp);
        st.L = unpack(res.x);
        st.iterations = res.iterations;
        st.residual = res.residual;
        return st;
    }

    std::vector<double> driving(const ModelParams& mp, std::optional<int> N = std::nullopt) const {
        std::vector<double> D(static_cast<size_t>(grid_.M));
        for (int i = 0; i < grid_.M; ++i)
            D[static_cast<size_t>(i)] = N ? driving_term_finite(grid_.v(i), mp, *N) : driving_term(grid_.v(i), mp);
        return D;
    }

    EtaState solve(const ModelParams& mp, const NlieConfig& cfg = {}, std::optional<int> N = std::nullopt,
                   const std::optional<EtaState>& init = std::nullopt) const {
        mp.validate();
        if (mp.p0.value() != p0_.value()) throw domain_error("GroundSolver: p0 differs from the solver's p0");
        int total_it = 0;
        std::optional<EtaState> cur = init;
        double bj = std::abs(mp.beta * mp.J);
        if (!init && bj > cfg.continuation_start) {
            double b = cfg.continuation_start / std::abs(mp.J);
            while (b < mp.beta) {
                ModelParams step = mp;
                step.beta = b;
                cur = solve_with_driving(step, driving(step, N), cfg.fp, cur);
                total_it += cur->iterations;
                b *= cfg.continuation_factor;
            }
        }
        EtaState st = solve_with_driving(mp, driving(mp, N), cfg.fp, cur);
        st.iterations += total_it;
        st.trotter_N = N;
        return st;
    }

private:
    RationalP0 p0_;
    TSSequences ts_;
    Grid grid_;
    std::shared_ptr<KernelSet> ks_;
};

inline EtaState solve_ground_nlie(const ModelParams& mp, const Grid& grid = {}, const NlieConfig& cfg = {}) {
    return GroundSolver(mp.p0, grid).solve(mp, cfg);
}

inline EtaState solve_finite_N_y1(const ModelParams& mp, int N, const Grid& grid = {}, const NlieConfig& cfg = {}) {
    if (N <= 0 || N % 2) throw domain_error("N must be even and positive");
    return GroundSolver(mp.p0, grid).solve(mp, cfg, N);
}

// int a_1(v) s_1(v) dv with a_1 = sin(theta)/(2 p0 (cosh(theta v) - cos(theta)))
inline double a1_s1_integral(const RationalP0& p0) {
    const double th = p0.theta(), P = p0.to_double();
    auto f = [&](double v) {
        return std::sin(th) / (2 * P * (std::cosh(th * v) - std::cos(th))) * kernel_s_value(1.0, v);
    };
    const double h = 0.01;
    double acc = 0.5 * f(0.0);
    for (int i = 1;; ++i) {
        double t = f(i * h);
        acc += t;
        if (t < 1e-16 * 1e-3 && i * h > 5) break;
    }
    return 2.0 * acc * h;
}

inline double free_energy(const EtaState& es) {
    const ModelParams& mp = es.mp;
    const double th = mp.theta();
    const double i1 = a1_s1_integral(mp.p0);
    const double i2 = integrate_against_s(es.grid, 1.0, es.L.at(1));
    return -(2 * std::numbers::pi * mp.J * std::sin(th) / th) * i1 - i2 / mp.beta;
}

// free energy from the largest eigenvalue at finite Trotter number
inline double finite_N_free_energy(const ModelParams& mp, int N) {
    auto tp = TrotterParams::from_physical(mp.p0, mp.J, mp.beta, N);
    auto bs = solve_bae(tp, N / 2, 1);
    TEvaluator ev(bs, tp);
    double t1 = ev.T(1, 0.0).real();
    if (!(t1 > 0)) throw solver_error("finite-N eigenvalue is not positive at v = 0", t1);
    return -std::log(t1) / mp.beta - 0.5 * mp.J * mp.delta();
}

// least-squares fit f(N) = sum_k c_k N^{-powers[k]}; returns c_0
inline double richardson(const std::vector<int>& Ns, const std::vector<double>& f, const std::vector<int>& powers = {0, 1, 2}) {
    if (Ns.size() != f.size() || Ns.size() < powers.size()) throw domain_error("richardson: need at least one value per basis term");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(Ns.size()), static_cast<Eigen::Index>(powers.size()));
    Eigen::VectorXd b(static_cast<Eigen::Index>(Ns.size()));
    for (size_t i = 0; i < Ns.size(); ++i) {
        for (size_t k = 0; k < powers.size(); ++k)
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::pow(static_cast<double>(Ns[i]), -powers[k]);
        b[static_cast<Eigen::Index>(i)] = f[i];
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    return c[0];
}

}  // namespace qtmtba

#endif
