#ifndef QTMTBA_EXCITATION_HPP
#define QTMTBA_EXCITATION_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "free_energy.hpp"
#include "qtm_engine.hpp"
#include "rational_ts.hpp"
#include "tba_numerics.hpp"

namespace qtmtba {

inline double ln_h_factor(double v, int k, int p0) {
    if (k != 2 && k != 3) throw domain_error("h_factor: k must be 2 or 3");
    if (k == 3) return 0.0;
    const double pi = std::numbers::pi;
    return 2.0 * pi / p0 * (v * std::tanh(pi * v / 2.0) - 1.0 / std::cosh(pi * v / 2.0));
}
inline double h_factor(double v, int k, int p0) { return std::exp(ln_h_factor(v, k, p0)); }

inline double g_factor(double v, int k, int p0) {
    if (k != 2 && k != 3) throw domain_error("g_factor: k must be 2 or 3");
    if (k == 3) return 1.0;
    const double pi = std::numbers::pi;
    return std::exp(-(pi * v / p0) * std::tanh(pi * v / 4.0));
}

inline double eta_asymptote(int j, int k, int p0) {
    if (k == 3) return j * (j + 2.0);
    const double pi = std::numbers::pi;
    double s = std::sin(pi / p0);
    return std::sin(pi * (j + 2) / p0) * std::sin(pi * j / p0) / (s * s);
}
inline double kappa_asymptote(int k, int p0) { return k == 3 ? p0 - 1.0 : -1.0; }

struct ExcitedConfig {
    double tol = 1e-10;        // sup-norm change of the functions and zero-condition residual
    double lambda = 0.5;
    int max_iter = 6000;
    int newton_max = 50;
    double newton_step = 1e-5;
    double newton_damping = 0.7;
    int seed_N = 16;
    double seed_beta_J = 1.0;
    double seed_extent = 20.0;  // finite-N samples are used for |v| below this, constants beyond
    double continuation_factor = 1.8;
    int anderson_depth = 10;
};

struct ExcitedState {
    int p0 = 5;
    int k = 2;
    double beta = 1.0;
    double J = 1.0;
    Grid grid;
    std::vector<std::vector<double>> L;  // L[j-1] = ln(1 + eta_j), j = 1..p0-2
    std::vector<double> Lk;              // ln((1 + kappa)^2 h)
    std::vector<double> kappa;
    std::vector<double> zeta;  // zeta[j-1], j = 1..p0-2; for k = 3 a fixed double zero sits at 0 as well
    std::vector<long> branch;
    int iterations = 0;
    double residual = 0.0;
    double zeta_residual = 0.0;
    bool seed_t1_negative = true;  // T_1(0) of the seeding finite-N state came out negative

    int n() const { return p0 - 2; }
    double eta(int j, int i) const { return std::expm1(L.at(static_cast<size_t>(j - 1)).at(static_cast<size_t>(i))); }
};

class ExcitedSolver {
public:
    ExcitedSolver(int p0, int k, const Grid& grid) : p0_(p0), k_(k), grid_(grid) {
        if (p0 < 3) throw domain_error("excited-state equations are only set up for integer p0 >= 3");
        if (k != 2 && k != 3) throw domain_error("excited states: k must be 2 or 3");
        s1_ = make_s_convolver(grid_, 1.0);
        // while beta is continued, a change of the asymptotic level of ln((1 + kappa)^2 h) travels outwards
        // slowly and the edges are briefly not flat; the converged state is checked separately
        s1_->edge_tolerance = 5e-2;
        const int M = grid_.M;
        lnh_.resize(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) lnh_[static_cast<size_t>(i)] = ln_h_factor(grid_.v(i), k_, p0_);
        const int W = static_cast<int>(std::ceil(45.0 / grid_.h()));
        s1q_.resize(static_cast<size_t>(W + 1));
        for (int q = 0; q <= W; ++q) s1q_[static_cast<size_t>(q)] = kernel_s_value(1.0, q * grid_.h());
    }

    // s_1 * f by direct summation for an f that decays like exp(-pi |v| / p0); the decay is continued past the
    // grid so the result keeps its relative accuracy up to the edges
    std::vector<double> decaying_source(const std::vector<double>& f) const {
        const int M = grid_.M;
        const int W = static_cast<int>(s1q_.size()) - 1;
        const double h = grid_.h();
        const double damp = std::exp(-std::numbers::pi / p0_ * h);
        std::vector<double> ext(static_cast<size_t>(M + 2 * W));
        for (int i = 0; i < M; ++i) ext[static_cast<size_t>(i + W)] = f[static_cast<size_t>(i)];
        double lo = f.front(), hi = f.back();
        for (int q = 1; q <= W; ++q) {
            lo *= damp;
            hi *= damp;
            ext[static_cast<size_t>(W - q)] = lo;
            ext[static_cast<size_t>(M - 1 + W + q)] = hi;
        }
        std::vector<double> out(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) {
            const double* c = ext.data() + i + W;
            double acc = s1q_[0] * c[0];
            for (int q = 1; q <= W; ++q) acc += s1q_[static_cast<size_t>(q)] * (c[q] + c[-q]);
            out[static_cast<size_t>(i)] = acc * h;
        }
        return out;
    }

    int p0() const { return p0_; }
    int k() const { return k_; }
    int n() const { return p0_ - 2; }
    const Grid& grid() const { return grid_; }

    struct Conv {
        std::vector<std::vector<double>> R;
        std::vector<double> Rk;
    };
    struct Funcs {
        std::vector<std::vector<double>> L;
        std::vector<double> Lk, kappa;
    };

    Conv convolve(const std::vector<std::vector<double>>& L, const std::vector<double>& Lk) const {
        const int nn = n();
        const int M = grid_.M;
        Conv c;
        c.R.resize(static_cast<size_t>(nn));
        for (int j = 1; j <= nn; ++j) {
            std::vector<double> src(static_cast<size_t>(M), 0.0);
            if (j > 1) add_to(src, L[static_cast<size_t>(j - 2)]);
            // ln((1 + kappa)^2 h) stays bounded: the decay of 1 + kappa^(2) cancels the growth of h
            add_to(src, j < nn ? L[static_cast<size_t>(j)] : Lk);
            c.R[static_cast<size_t>(j - 1)] = s1_->apply(src);
        }
        // 1 + kappa^(2) is exponentially small at large |v|, so the source needs relative accuracy there
        c.Rk = k_ == 2 ? decaying_source(L[static_cast<size_t>(nn - 1)]) : s1_->apply(L[static_cast<size_t>(nn - 1)]);
        return c;
    }

    Funcs functions(const Conv& c, const std::vector<double>& zeta, double beta, double J) const {
        const int nn = n();
        const int M = grid_.M;
        const double pi = std::numbers::pi;
        const double th = pi / p0_;
        const double amp = beta * pi * J * std::sin(th) / (2.0 * th);
        Funcs f;
        f.L.assign(static_cast<size_t>(nn), std::vector<double>(static_cast<size_t>(M)));
        f.Lk.resize(static_cast<size_t>(M));
        f.kappa.resize(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) {
            const double x = grid_.v(i);
            for (int j = 1; j <= nn; ++j) {
                double a = c.R[static_cast<size_t>(j - 1)][static_cast<size_t>(i)];
                double sg = 1.0;
                if (j == 1) a -= amp / std::cosh(pi * x / 2.0);
                for (int jj : {j - 1, j + 1})
                    if (jj >= 1 && jj <= nn) tt_term(zeta[static_cast<size_t>(jj - 1)], x, a, sg);
                if (j == nn) {
                    if (k_ == 3) {
                        a += 2.0 * ln_abs_tanh(pi * x / 4.0);
                    } else {
                        a -= pi / p0_ * x * std::tanh(pi * x / 4.0);
                        sg = -sg;
                    }
                }
                double y = sg * std::exp(a);
                if (!(y > -1.0))
                    throw branch_error("excited state: 1 + eta_" + std::to_string(j) + " changed sign at v = " +
                                       std::to_string(x));
                f.L[static_cast<size_t>(j - 1)][static_cast<size_t>(i)] = std::log1p(y);
            }
            double a = c.Rk[static_cast<size_t>(i)];
            double sg = k_ == 2 ? -1.0 : 1.0;
            tt_term(zeta[static_cast<size_t>(nn - 1)], x, a, sg);
            double onepk = sg < 0 ? -std::expm1(a) : 1.0 + std::exp(a);
            f.kappa[static_cast<size_t>(i)] = sg * std::exp(a);
            f.Lk[static_cast<size_t>(i)] = 2.0 * std::log(std::abs(onepk)) + lnh_[static_cast<size_t>(i)];
        }
        return f;
    }

    // the zero conditions; only the imaginary parts are constrained
    std::vector<std::complex<double>> zero_conditions(const Conv& c, const std::vector<double>& zeta, double beta,
                                                      double J) const {
        using cd = std::complex<double>;
        const int nn = n();
        const int M = grid_.M;
        const double pi = std::numbers::pi;
        const double th = pi / p0_;
        const double amp = beta * pi * J * std::sin(th) / (2.0 * th);
        Funcs f = functions(c, zeta, beta, J);
        std::vector<cd> out(static_cast<size_t>(nn));
        std::vector<double> src(static_cast<size_t>(M));
        for (int j = 1; j <= nn; ++j) {
            const double z = zeta[static_cast<size_t>(j - 1)];
            const cd zz(z, 1.0);
            std::fill(src.begin(), src.end(), 0.0);
            if (j > 1) add_to(src, f.L[static_cast<size_t>(j - 2)]);
            add_to(src, j < nn ? f.L[static_cast<size_t>(j)] : f.Lk);
            double gz = (j == nn) ? ln_h_factor(z, k_, p0_) : 0.0;
            cd tot = pv_convolve_shifted(grid_, src, z, gz);
            if (j == 1) tot += cd(0.0, amp / std::sinh(pi * z / 2.0));
            for (int jj : {j - 1, j + 1}) {
                if (jj < 1 || jj > nn) continue;
                double zj = zeta[static_cast<size_t>(jj - 1)];
                tot += std::log(std::tanh(pi / 4.0 * (zz + zj)) * std::tanh(pi / 4.0 * (zz - zj)));
            }
            if (j == nn) {
                if (k_ == 3)
                    tot += 2.0 * std::log(std::tanh(pi * zz / 4.0));
                else
                    tot += cd(0.0, pi) - pi / p0_ * zz * std::tanh(pi * zz / 4.0);
            }
            tot -= cd(0.0, pi);
            out[static_cast<size_t>(j - 1)] = tot;
        }
        return out;
    }

    std::vector<long> branch_integers(const Conv& c, const std::vector<double>& zeta, double beta, double J) const {
        auto z = zero_conditions(c, zeta, beta, J);
        std::vector<long> b;
        for (auto& q : z) b.push_back(std::lround(q.imag() / (2.0 * std::numbers::pi)));
        return b;
    }

    std::vector<double> zero_residuals(const Conv& c, const std::vector<double>& zeta, const std::vector<long>& b,
                                       double beta, double J) const {
        auto z = zero_conditions(c, zeta, beta, J);
        std::vector<double> r(z.size());
        for (size_t q = 0; q < z.size(); ++q) r[q] = z[q].imag() - 2.0 * std::numbers::pi * static_cast<double>(b[q]);
        return r;
    }

    // Newton on the zeros with the convolution parts frozen; the Jacobian is reused while it keeps contracting
    std::vector<double> newton_zeta(std::vector<double> zeta, const Conv& c, const std::vector<long>& b, double beta,
                                    double J, const ExcitedConfig& cfg, double* final_res = nullptr) const {
        const int nn = n();
        Eigen::MatrixXd Jm;
        bool have_jac = false;
        double prev = std::numeric_limits<double>::infinity();
        auto norm = [](const std::vector<double>& r) {
            double m = 0;
            for (double x : r) m = std::max(m, std::abs(x));
            return m;
        };
        auto F = zero_residuals(c, zeta, b, beta, J);
        double fn = norm(F);
        for (int it = 0; it < cfg.newton_max; ++it) {
            if (fn < 1e-12) break;
            if (!have_jac || fn > 0.25 * prev) {
                Jm.resize(nn, nn);
                for (int q = 0; q < nn; ++q) {
                    auto zp = zeta, zm = zeta;
                    zp[static_cast<size_t>(q)] += cfg.newton_step;
                    zm[static_cast<size_t>(q)] -= cfg.newton_step;
                    auto fp = zero_residuals(c, zp, b, beta, J);
                    auto fm = zero_residuals(c, zm, b, beta, J);
                    for (int r = 0; r < nn; ++r)
                        Jm(r, q) = (fp[static_cast<size_t>(r)] - fm[static_cast<size_t>(r)]) / (2.0 * cfg.newton_step);
                }
                have_jac = true;
            }
            Eigen::VectorXd rhs(nn);
            for (int r = 0; r < nn; ++r) rhs(r) = F[static_cast<size_t>(r)];
            Eigen::VectorXd dz = Jm.fullPivLu().solve(rhs);
            if (!dz.allFinite()) throw solver_error("zero conditions: singular Jacobian", fn);
            double damp = it < 3 ? cfg.newton_damping : 1.0;
            for (int q = 0; q < nn; ++q) {
                zeta[static_cast<size_t>(q)] -= damp * dz(q);
                if (!(zeta[static_cast<size_t>(q)] > 0.0))
                    throw solver_error("zero conditions: a zero left the positive axis", fn);
            }
            prev = fn;
            F = zero_residuals(c, zeta, b, beta, J);
            fn = norm(F);
        }
        if (!(fn < 1e-8)) throw solver_error("zero conditions: Newton did not converge, residual " + std::to_string(fn), fn);
        if (final_res) *final_res = fn;
        return zeta;
    }

    // alternate the function sweep with Newton on the zeros at fixed beta
    ExcitedState iterate(ExcitedState st, const ExcitedConfig& cfg) const {
        const int nn = n();
        const size_t M = static_cast<size_t>(grid_.M);
        if (st.branch.empty()) st.branch = branch_integers(convolve(st.L, st.Lk), st.zeta, st.beta, st.J);
        std::vector<double> x;
        for (const auto& f : st.L) x.insert(x.end(), f.begin(), f.end());
        x.insert(x.end(), st.Lk.begin(), st.Lk.end());
        std::vector<std::vector<double>> L(static_cast<size_t>(nn));
        std::vector<double> Lk;
        double zres = 0.0;
        auto map = [&](const std::vector<double>& flat) {
            for (int j = 0; j < nn; ++j)
                L[static_cast<size_t>(j)].assign(flat.begin() + static_cast<long>(j * M), flat.begin() + static_cast<long>((j + 1) * M));
            Lk.assign(flat.begin() + static_cast<long>(nn * M), flat.end());
            Conv c = convolve(L, Lk);
            st.zeta = newton_zeta(st.zeta, c, st.branch, st.beta, st.J, cfg, &zres);
            Funcs f = functions(c, st.zeta, st.beta, st.J);
            st.kappa = std::move(f.kappa);
            std::vector<double> out;
            out.reserve(flat.size());
            for (const auto& g : f.L) out.insert(out.end(), g.begin(), g.end());
            out.insert(out.end(), f.Lk.begin(), f.Lk.end());
            return out;
        };
        FixedPointConfig fp;
        fp.tol = cfg.tol;
        fp.lambda = cfg.lambda;
        fp.max_iter = cfg.max_iter;
        fp.anderson_depth = cfg.anderson_depth;
        auto res = fixed_point_solve(map, std::move(x), fp);
        for (int j = 0; j < nn; ++j)
            st.L[static_cast<size_t>(j)].assign(res.x.begin() + static_cast<long>(j * M), res.x.begin() + static_cast<long>((j + 1) * M));
        st.Lk.assign(res.x.begin() + static_cast<long>(nn * M), res.x.end());
        st.iterations = res.iterations;
        st.residual = res.residual;
        st.zeta_residual = zres;
        return st;
    }

    ExcitedState seed(double beta, double J, const ExcitedConfig& cfg) const {
        const int nn = n();
        const int M = grid_.M;
        const int N = cfg.seed_N;
        const RationalP0 p0(p0_);
        auto tp = TrotterParams::from_physical(p0, J, beta, N);
        int m = k_ == 2 ? N / 2 - 1 : N / 2;
        BetheState bs = solve_bae(tp, m, k_);
        TEvaluator ev(bs, tp);
        TSSequences ts = build_sequences(p0);
        YFunctions yf(ev, ts);

        ExcitedState st;
        st.p0 = p0_;
        st.k = k_;
        st.beta = beta;
        st.J = J;
        st.grid = grid_;
        st.seed_t1_negative = ev.T_scaled(1, cd(0.0, 0.0)).real() < 0.0;
        st.L.assign(static_cast<size_t>(nn), std::vector<double>(static_cast<size_t>(M)));
        st.Lk.resize(static_cast<size_t>(M));
        const double ext = std::min(cfg.seed_extent, grid_.L);
        int ilo = 0, ihi = M - 1;
        while (grid_.v(ilo) < -ext) ++ilo;
        while (grid_.v(ihi) > ext) --ihi;
        for (int i = ilo; i <= ihi; ++i) {
            cd x(grid_.v(i), 0.0);
            for (int j = 1; j <= nn; ++j)
                st.L[static_cast<size_t>(j - 1)][static_cast<size_t>(i)] = std::log(std::abs(1.0 + yf.Y_int(j, x).real()));
            st.Lk[static_cast<size_t>(i)] =
                2.0 * std::log(std::abs(1.0 + yf.K_int(x).real())) + lnh_[static_cast<size_t>(i)];
        }
        auto extend = [&](std::vector<double>& f) {
            for (int i = 0; i < ilo; ++i) f[static_cast<size_t>(i)] = f[static_cast<size_t>(ilo)];
            for (int i = ihi + 1; i < M; ++i) f[static_cast<size_t>(i)] = f[static_cast<size_t>(ihi)];
        };
        for (auto& f : st.L) extend(f);
        extend(st.Lk);
        for (int j = 1; j <= nn; ++j) {
            auto zs = positive_real_zeros(j, ev);
            if (zs.empty()) throw solver_error("seed: T_" + std::to_string(j) + " has no positive real zero", 0.0);
            st.zeta.push_back(zs.front());
        }
        settle_tails(st);
        return st;
    }

    // a converged state from another grid, interpolated and extended by constants, as a starting point here
    ExcitedState transfer(const ExcitedState& from) const {
        if (from.p0 != p0_ || from.k != k_) throw domain_error("transfer: state belongs to another (p0, k)");
        ExcitedState st = from;
        st.grid = grid_;
        const int M = grid_.M;
        auto move = [&](const std::vector<double>& f) {
            std::vector<double> out(static_cast<size_t>(M));
            for (int i = 0; i < M; ++i) {
                double x = grid_.v(i);
                if (x <= -from.grid.L)
                    out[static_cast<size_t>(i)] = f.front();
                else if (x >= from.grid.L)
                    out[static_cast<size_t>(i)] = f.back();
                else
                    out[static_cast<size_t>(i)] = grid_interp(from.grid, f, x);
            }
            return out;
        };
        for (auto& f : st.L) f = move(f);
        st.Lk = move(st.Lk);
        settle_tails(st);
        return st;
    }

    ExcitedState solve(double beta, double J, const ExcitedConfig& cfg = {}) const {
        if (!(J > 0)) throw domain_error("excited states are only available for J > 0");
        if (!(beta > 0)) throw domain_error("beta must be positive");
        double b0 = std::min(cfg.seed_beta_J / J, beta);
        ExcitedState st = seed(b0, J, cfg);
        st = iterate(std::move(st), cfg);
        int total = st.iterations;
        double factor = cfg.continuation_factor;
        while (st.beta < beta) {
            ExcitedState trial = st;
            trial.beta = std::min(beta, st.beta * factor);
            try {
                trial = iterate(std::move(trial), cfg);
            } catch (const std::runtime_error&) {
                // too long a step can push a zero out of its basin; retry from the last state with a shorter one
                factor = std::sqrt(factor);
                if (factor < 1.01) throw;
                continue;
            }
            total += trial.iterations;
            st = std::move(trial);
            factor = std::min(cfg.continuation_factor, factor * factor);
        }
        st.iterations = total;
        return st;
    }

private:
    // two plain sweeps replace constant extensions by the proper exponential tails; the second one matters
    // for k = 2, where ln((1 + kappa)^2 h) is a cancellation between a decay and a linear growth
    void settle_tails(ExcitedState& st) const {
        st.L = functions(convolve(st.L, st.Lk), st.zeta, st.beta, st.J).L;
        Funcs f = functions(convolve(st.L, st.Lk), st.zeta, st.beta, st.J);
        st.L = std::move(f.L);
        st.Lk = std::move(f.Lk);
        st.kappa = std::move(f.kappa);
    }

    static void add_to(std::vector<double>& a, const std::vector<double>& b) {
        for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
    static void tt_term(double z, double x, double& a, double& sg) {
        const double pi = std::numbers::pi;
        double p = pi / 4.0 * (x + z), q = pi / 4.0 * (x - z);
        a += ln_abs_tanh(p) + ln_abs_tanh(q);
        if ((p < 0) != (q < 0)) sg = -sg;
    }

    int p0_, k_;
    Grid grid_;
    std::shared_ptr<Convolver> s1_;
    std::vector<double> lnh_, s1q_;
};

inline ExcitedState seed_from_finite_N(const ModelParams& mp, int k, int N, const Grid& grid = {}) {
    if (!mp.p0.is_integer()) throw domain_error("excited states need an integer p0");
    ExcitedConfig cfg;
    cfg.seed_N = N;
    return ExcitedSolver(static_cast<int>(mp.p0.num()), k, grid).seed(mp.beta, mp.J, cfg);
}

inline ExcitedState solve_excited(const ModelParams& mp, int k, const Grid& grid = {}, const ExcitedConfig& cfg = {}) {
    mp.validate();
    if (!mp.p0.is_integer()) throw domain_error("excited states are only available for integer p0 >= 3");
    if (!(mp.J > 0)) throw domain_error("excited states are only available for J > 0");
    return ExcitedSolver(static_cast<int>(mp.p0.num()), k, grid).solve(mp.beta, mp.J, cfg);
}

inline double inverse_correlation_length(const ExcitedState& ex, const EtaState& ground) {
    if (ex.zeta.empty()) throw domain_error("correlation length: the excited state carries no zeta_1");
    if (ground.grid.M != ex.grid.M || ground.grid.L != ex.grid.L)
        throw domain_error("correlation length: excited and ground states live on different grids");
    const int M = ex.grid.M;
    std::vector<double> d(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) d[static_cast<size_t>(i)] = ex.L[0][static_cast<size_t>(i)] - ground.L[1][static_cast<size_t>(i)];
    return -2.0 * ln_abs_tanh(std::numbers::pi * ex.zeta[0] / 4.0) - integrate_against_s(ex.grid, 1.0, d);
}

inline double correlation_length(const ExcitedState& ex, const EtaState& ground) {
    double inv = inverse_correlation_length(ex, ground);
    if (!(inv > 0)) throw solver_error("correlation length: non-positive inverse " + std::to_string(inv), inv);
    return 1.0 / inv;
}

// known low-temperature limits of xi_k / beta
inline double xi_over_beta_limit(int k, double p0, double J) {
    const double pi = std::numbers::pi;
    const double th = pi / p0;
    if (k == 2) return J * pi * std::sin(th) / (2.0 * (pi - th) * th);
    return J * (pi - th) * std::sin(th) / (2.0 * pi * th);
}

}  // namespace qtmtba

#endif
