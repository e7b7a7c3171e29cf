#ifndef QTMTBA_QTM_ENGINE_HPP
#define QTMTBA_QTM_ENGINE_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/Polynomials>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "check_report.hpp"
#include "errors.hpp"
#include "rational_ts.hpp"

namespace qtmtba {

using cd = std::complex<double>;
inline constexpr cd I_unit{0.0, 1.0};

struct TrotterParams {
    int N = 8;
    double u = -0.01;
    double beta = 0.0;
    double J = 0.0;
    double theta = std::numbers::pi / 5;

    double p0() const { return std::numbers::pi / theta; }

    static double trotter_u(double beta, double J, double theta, int N) {
        return -beta * J * std::sin(theta) / (theta * N);
    }
    static TrotterParams from_physical(const RationalP0& p0, double J, double beta, int N) {
        TrotterParams tp;
        tp.N = N;
        tp.theta = p0.theta();
        tp.beta = beta;
        tp.J = J;
        tp.u = trotter_u(beta, J, tp.theta, N);
        tp.validate();
        return tp;
    }
    static TrotterParams from_u(double theta, int N, double u) {
        TrotterParams tp;
        tp.N = N;
        tp.theta = theta;
        tp.u = u;
        tp.validate();
        return tp;
    }
    void validate() const {
        if (N <= 0 || N % 2 != 0) throw domain_error("Trotter number N must be even and positive");
        if (!(theta > 0 && theta <= std::numbers::pi / 2 + 1e-15)) throw domain_error("theta must lie in (0, pi/2]");
    }
    // the functional-relation conjectures were checked for |u| up to about 0.1
    bool u_is_large() const { return std::abs(u) > 0.5; }
};

struct BetheState {
    int m = 0;
    std::vector<cd> roots;
    std::vector<int> branch;
    int rank = 1;
    int N = 0;
    double max_residual = 0.0;
};

namespace detail {

inline cd ipow(cd z, int n) {
    cd r = 1.0;
    while (n > 0) {
        if (n & 1) r *= z;
        z *= z;
        n >>= 1;
    }
    return r;
}

// sinh(z) * exp(-|Re z|), finite for any z
inline cd sinh_scaled(cd z) {
    const double x = z.real();
    const cd e = std::polar(1.0, z.imag());
    if (x >= 0) return 0.5 * (e - std::exp(-2.0 * x) / e);
    return 0.5 * (std::exp(2.0 * x) * e - 1.0 / e);
}

inline double wrap_pi(double x) {
    x = std::remainder(x, 2 * std::numbers::pi);
    return x;
}

}  // namespace detail

inline cd phi(cd v, const TrotterParams& tp) {
    return detail::ipow(std::sinh(tp.theta * v / 2.0) / std::sin(tp.theta), tp.N / 2);
}

// phi(v) * exp(-N theta |Re v| / 4)
inline cd phi_scaled(cd v, const TrotterParams& tp) {
    return detail::ipow(detail::sinh_scaled(tp.theta * v / 2.0) / std::sin(tp.theta), tp.N / 2);
}

inline cd q_function(cd v, const BetheState& bs, double theta) {
    cd r = 1.0;
    for (const cd& w : bs.roots) r *= std::sinh(theta * (v - w) / 2.0);
    return r;
}

namespace detail {

struct BaeParts {
    cd L, R;  // the two sides of the equation
};

inline BaeParts bae_sides(const std::vector<cd>& w, size_t j, const TrotterParams& tp) {
    const double th2 = tp.theta / 2.0;
    const double u = tp.u;
    const cd x = w[j];
    cd a1 = std::sinh(th2 * (x + I_unit * (u + 2.0)));
    cd a2 = std::sinh(th2 * (x - I_unit * u));
    cd a3 = std::sinh(th2 * (x - I_unit * (u + 2.0)));
    cd a4 = std::sinh(th2 * (x + I_unit * u));
    if (std::abs(a3) < 1e-300 || std::abs(a4) < 1e-300)
        throw singular_evaluation("BAE: root sits on a pole of the vacuum factor");
    BaeParts p;
    p.L = -ipow(a1 * a2 / (a3 * a4), tp.N / 2);
    cd R = 1.0;
    for (size_t k = 0; k < w.size(); ++k) {
        cd num = std::sinh(th2 * (x - w[k] + 2.0 * I_unit));
        cd den = std::sinh(th2 * (x - w[k] - 2.0 * I_unit));
        if (std::abs(den) < 1e-300) throw singular_evaluation("BAE: Q(w - 2i) vanishes at a root");
        R *= num / den;
    }
    p.R = R;
    return p;
}

inline cd coth(cd z) { return std::cosh(z) / std::sinh(z); }

inline Eigen::VectorXcd bae_log_residual(const std::vector<cd>& w, const TrotterParams& tp) {
    Eigen::VectorXcd F(static_cast<Eigen::Index>(w.size()));
    for (size_t j = 0; j < w.size(); ++j) {
        BaeParts p = bae_sides(w, j, tp);
        F[static_cast<Eigen::Index>(j)] = std::log(p.L / p.R);
    }
    return F;
}

inline Eigen::MatrixXcd bae_jacobian(const std::vector<cd>& w, const TrotterParams& tp) {
    const double th2 = tp.theta / 2.0;
    const double u = tp.u;
    const Eigen::Index m = static_cast<Eigen::Index>(w.size());
    Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const cd x = w[static_cast<size_t>(j)];
        cd d = (tp.N / 2.0) * th2 *
               (coth(th2 * (x + I_unit * (u + 2.0))) + coth(th2 * (x - I_unit * u)) -
                coth(th2 * (x - I_unit * (u + 2.0))) - coth(th2 * (x + I_unit * u)));
        for (Eigen::Index k = 0; k < m; ++k) {
            if (k == j) continue;
            cd dx = x - w[static_cast<size_t>(k)];
            cd c = th2 * (coth(th2 * (dx + 2.0 * I_unit)) - coth(th2 * (dx - 2.0 * I_unit)));
            d -= c;
            J(j, k) = c;
        }
        J(j, j) = d;
    }
    return J;
}

// Theta_a(x) = 2 atan(tanh(theta x/2)/tan(theta a/2)) and its derivative
inline double big_theta(double a, double x, double th) {
    return 2.0 * std::atan(std::tanh(th * x / 2.0) / std::tan(th * a / 2.0));
}
inline double big_theta_d(double a, double x, double th) {
    return th * std::sin(th * a) / (std::cosh(th * x) - std::cos(th * a));
}

}  // namespace detail

inline std::vector<cd> bae_residual(const BetheState& bs, const TrotterParams& tp) {
    std::vector<cd> out;
    out.reserve(bs.roots.size());
    for (size_t j = 0; j < bs.roots.size(); ++j) {
        detail::BaeParts p = detail::bae_sides(bs.roots, j, tp);
        cd raw = std::log(p.L) - std::log(p.R);
        int b = j < bs.branch.size() ? bs.branch[j] : 0;
        out.push_back(raw - 2.0 * std::numbers::pi * I_unit * static_cast<double>(b));
    }
    return out;
}

struct BaeOptions {
    std::vector<cd> seed;  // empty: built from the rank pattern
    int lambda_steps = 10;
    double tol = 1e-12;
    int max_iter = 200;
};

namespace detail {

inline std::vector<double> counting_solve(int N, double u, double th, int m, int lambda_steps) {
    std::vector<double> I(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) I[static_cast<size_t>(j)] = j - (m - 1) / 2.0;
    auto single = [&](double x, double Ij) {
        return (N / 2.0) * (big_theta(u, x, th) - big_theta(u + 2.0, x, th)) - 2 * std::numbers::pi * Ij;
    };
    std::vector<double> x(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) {
        double Ij = I[static_cast<size_t>(j)];
        auto f = [&](double t) { return single(t, Ij); };
        double a = -200, b = 200;
        if (f(a) * f(b) > 0) throw solver_error("BAE seed: counting function does not bracket a root", 0.0);
        boost::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(f, a, b, boost::math::tools::eps_tolerance<double>(52), it);
        x[static_cast<size_t>(j)] = 0.5 * (r.first + r.second);
    }
    auto residual = [&](const std::vector<double>& w, double lam, Eigen::VectorXd& F, Eigen::MatrixXd* J) {
        F.resize(m);
        if (J) J->setZero(m, m);
        for (int j = 0; j < m; ++j) {
            double xj = w[static_cast<size_t>(j)];
            double z = single(xj, I[static_cast<size_t>(j)]);
            double dz = (N / 2.0) * (big_theta_d(u, xj, th) - big_theta_d(u + 2.0, xj, th));
            for (int k = 0; k < m; ++k) {
                if (k == j) continue;
                double d = xj - w[static_cast<size_t>(k)];
                z += lam * big_theta(2.0, d, th);
                double t = lam * big_theta_d(2.0, d, th);
                dz += t;
                if (J) (*J)(j, k) = -t;
            }
            F[j] = z;
            if (J) (*J)(j, j) = dz;
        }
    };
    for (int s = 1; s <= lambda_steps; ++s) {
        double lam = static_cast<double>(s) / lambda_steps;
        Eigen::VectorXd F;
        Eigen::MatrixXd J;
        for (int it = 0; it < 100; ++it) {
            residual(x, lam, F, &J);
            double r = F.cwiseAbs().maxCoeff();
            if (r < 1e-13) break;
            Eigen::VectorXd dx = J.partialPivLu().solve(F);
            double t = 1.0;
            std::vector<double> xn(x.size());
            for (int ls = 0; ls < 40; ++ls) {
                for (int j = 0; j < m; ++j) xn[static_cast<size_t>(j)] = x[static_cast<size_t>(j)] - t * dx[j];
                Eigen::VectorXd Fn;
                residual(xn, lam, Fn, nullptr);
                if (Fn.allFinite() && Fn.cwiseAbs().maxCoeff() < r) break;
                t *= 0.5;
            }
            x = xn;
        }
        residual(x, lam, F, nullptr);
        if (F.cwiseAbs().maxCoeff() > 1e-9)
            throw solver_error("BAE seed: homotopy step failed at lambda = " + std::to_string(lam),
                               F.cwiseAbs().maxCoeff());
    }
    return x;
}

inline std::vector<cd> complex_newton(std::vector<cd> w, const TrotterParams& tp, double tol, int max_iter,
                                      double* final_residual) {
    Eigen::VectorXcd F = bae_log_residual(w, tp);
    double r = F.cwiseAbs().maxCoeff();
    for (int it = 0; it < max_iter && r >= tol; ++it) {
        Eigen::MatrixXcd J = bae_jacobian(w, tp);
        Eigen::VectorXcd dx = J.partialPivLu().solve(F);
        double t = 1.0;
        std::vector<cd> wn(w.size());
        double rn = r;
        Eigen::VectorXcd Fn;
        for (int ls = 0; ls < 40; ++ls) {
            for (size_t j = 0; j < w.size(); ++j) wn[j] = w[j] - t * dx[static_cast<Eigen::Index>(j)];
            try {
                Fn = bae_log_residual(wn, tp);
                rn = Fn.allFinite() ? Fn.cwiseAbs().maxCoeff() : INFINITY;
            } catch (const singular_evaluation&) {
                rn = INFINITY;
            }
            if (rn < r || (rn < 10 * tol)) break;
            t *= 0.5;
        }
        if (!std::isfinite(rn)) break;
        w = wn;
        F = Fn;
        r = rn;
    }
    if (final_residual) *final_residual = r;
    return w;
}

}  // namespace detail

// the roots of the rank-k pattern; u > 0 is reached from the mirrored real solution
inline BetheState solve_bae(const TrotterParams& tp, int m, int rank, const BaeOptions& opt = {}) {
    tp.validate();
    if (m < 0 || m > tp.N / 2) throw domain_error("BAE sector m must lie in [0, N/2]");
    BetheState bs;
    bs.m = m;
    bs.rank = rank;
    bs.N = tp.N;
    if (m == 0) return bs;
    const double th = tp.theta;
    std::vector<cd> seed = opt.seed;
    if (seed.empty()) {
        if (rank == 1 || rank == 2) {
            int want = rank == 1 ? tp.N / 2 : tp.N / 2 - 1;
            if (m != want) throw domain_error("BAE: rank " + std::to_string(rank) + " lives in sector m = " +
                                              std::to_string(want));
            if (tp.N == 2 && m == 1) {
                seed = {0.0};
            } else {
                double us = tp.u < 0 ? tp.u : -tp.u;
                auto x = detail::counting_solve(tp.N, us, th, m, opt.lambda_steps);
                for (double t : x) seed.push_back(t);
            }
        } else if (rank == 3) {
            if (m != tp.N / 2) throw domain_error("BAE: rank 3 lives in sector m = N/2");
            if (tp.N < 4) throw domain_error("BAE: rank 3 needs N >= 4");
            double us = tp.u < 0 ? tp.u : -tp.u;
            auto x = detail::counting_solve(tp.N, us, th, m, opt.lambda_steps);
            std::sort(x.begin(), x.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
            x.resize(x.size() - 2);
            for (double t : x) seed.push_back(t);
            const double p0 = tp.p0();
            seed.push_back(1e-3);
            seed.push_back(I_unit * p0 - 1e-3);
        } else {
            throw domain_error("BAE: rank must be 1, 2 or 3");
        }
    }
    if (static_cast<int>(seed.size()) != m) throw domain_error("BAE: seed size differs from sector m");
    double r = 0.0;
    std::vector<cd> w = detail::complex_newton(seed, tp, opt.tol, opt.max_iter, &r);
    if (!(r < opt.tol))
        throw solver_error("BAE: Newton did not converge (residual " + std::to_string(r) + ")", r);
    for (size_t a = 0; a < w.size(); ++a)
        for (size_t b = a + 1; b < w.size(); ++b)
            if (std::abs(w[a] - w[b]) < 1e-10) throw solver_error("BAE: roots collided", r);
    bs.roots = w;
    bs.branch.assign(w.size(), 0);
    for (size_t j = 0; j < w.size(); ++j) {
        detail::BaeParts p = detail::bae_sides(w, j, tp);
        cd raw = std::log(p.L) - std::log(p.R);
        bs.branch[j] = static_cast<int>(std::lround(raw.imag() / (2 * std::numbers::pi)));
    }
    double worst = 0.0;
    for (const cd& x : bae_residual(bs, tp)) worst = std::max(worst, std::abs(x));
    bs.max_residual = worst;
    return bs;
}

// Eigenvalues T_n (n+1 terms of the dressed vacuum form), with a pole-safe scaled variant:
// T_scaled(n, v) = T_n(v) exp(-N theta |Re v| / 2), a positive factor common to all T at fixed Re v.
class TEvaluator {
public:
    TEvaluator(BetheState bs, TrotterParams tp) : bs_(std::move(bs)), tp_(tp) { tp_.validate(); }

    const BetheState& state() const { return bs_; }
    const TrotterParams& params() const { return tp_; }
    double p0() const { return tp_.p0(); }
    int sign_mz(long long z) const { return ((static_cast<long long>(bs_.m) * z) % 2 == 0) ? 1 : -1; }

    // straight sum; individual terms may blow up near shifted roots
    cd T_direct(int n, cd v) const { return sum_scaled(n, v) * std::exp(tp_.N * tp_.theta * std::abs(v.real()) / 2.0); }

    cd T_scaled(int n, cd v) const {
        if (n < 0) return 0.0;
        if (bs_.m == 0 || pole_distance(n, v) >= 0.05) return sum_scaled(n, v);
        // the full sum is analytic: mean over a small circle that keeps clear of the term poles
        static constexpr double radii[] = {0.02, 0.03, 0.045, 0.0675, 0.1, 0.15, 0.225, 0.34, 0.5, 0.75};
        double best_ratio = 0.0, best_r = 0.0, best_phase = 0.0;
        for (double r : radii) {
            const int K = r <= 0.1 ? 16 : 32;
            for (double phase : {0.5, 0.0, 0.25, 0.75}) {
                double md = INFINITY;
                for (int k = 0; k < K; ++k)
                    md = std::min(md, pole_distance(n, v + std::polar(r, 2 * std::numbers::pi * (k + phase) / K)));
                if (md / r > best_ratio) {
                    best_ratio = md / r;
                    best_r = r;
                    best_phase = phase;
                }
            }
            if (best_ratio >= 0.3) break;
        }
        if (best_ratio < 0.08)
            throw singular_evaluation("T evaluation: no pole-free circle around v = (" + std::to_string(v.real()) +
                                      ", " + std::to_string(v.imag()) + ")");
        const int K = best_r <= 0.1 ? 16 : 32;
        cd acc = 0.0;
        for (int k = 0; k < K; ++k) {
            cd z = v + std::polar(best_r, 2 * std::numbers::pi * (k + best_phase) / K);
            // rescale each node to the common factor at Re v
            acc += sum_scaled(n, z) * std::exp(tp_.N * tp_.theta * (std::abs(z.real()) - std::abs(v.real())) / 2.0);
        }
        return acc / static_cast<double>(K);
    }

    cd T(int n, cd v) const {
        return T_scaled(n, v) * std::exp(tp_.N * tp_.theta * std::abs(v.real()) / 2.0);
    }

    double pole_distance(int n, cd v) const {
        if (n < 0) return INFINITY;
        const int nn = n + 1;
        const double period = 2.0 * p0();
        double best = INFINITY;
        for (const cd& w : bs_.roots) {
            double dre = v.real() - w.real();
            for (int l = -nn; l <= nn; l += 2) {
                double dim = v.imag() - w.imag() - l;
                dim = dim - period * std::round(dim / period);
                best = std::min(best, std::hypot(dre, dim));
            }
        }
        return best;
    }

private:
    cd sum_scaled(int n, cd v) const {
        if (n < 0) return 0.0;
        const int nn = n + 1;
        const double u = tp_.u;
        const double th2 = tp_.theta / 2.0;
        cd total = 0.0;
        for (int j = 1; j <= nn; ++j) {
            cd term = phi_scaled(v - I_unit * (u + nn + 2.0 - 2.0 * j), tp_) *
                      phi_scaled(v + I_unit * (u - nn + 2.0 * j), tp_);
            for (const cd& w : bs_.roots) {
                cd x = v - w;
                term *= detail::sinh_scaled(th2 * (x + I_unit * static_cast<double>(nn))) *
                        detail::sinh_scaled(th2 * (x - I_unit * static_cast<double>(nn))) /
                        (detail::sinh_scaled(th2 * (x + I_unit * (2.0 * j - nn))) *
                         detail::sinh_scaled(th2 * (x + I_unit * (2.0 * j - nn - 2.0))));
            }
            total += term;
        }
        return total;
    }

    BetheState bs_;
    TrotterParams tp_;
};

inline cd t_eigenvalue(int n, cd v, const BetheState& bs, const TrotterParams& tp) {
    return TEvaluator(bs, tp).T(n, v);
}

inline double relative_residual(cd lhs, cd rhs, double scale = 0.0) {
    double s = std::max({std::abs(lhs), std::abs(rhs), scale});
    if (s == 0.0) return 0.0;
    return std::abs(lhs - rhs) / s;
}

// samples in the fundamental strip, kept away from integer imaginary parts
inline std::vector<cd> sample_points(double p0, int count, std::uint32_t seed = 12345, double re_span = 2.0) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> re(-re_span, re_span), im(-p0, p0);
    std::vector<cd> out;
    while (static_cast<int>(out.size()) < count) {
        double y = im(gen);
        double x = re(gen);
        if (std::abs(y - std::round(y)) < 0.1) continue;
        if (std::abs(x) < 0.2) continue;
        out.emplace_back(x, y);
    }
    return out;
}

inline CheckReport verify_t_system(const TEvaluator& ev, const TSSequences& ts, const std::vector<cd>& samples) {
    CheckReport rep;
    const long long ntmax = ts.nt[static_cast<int>(ts.m_alpha() + 1)];
    CheckEntry e1;
    e1.name = "tsystem1";
    e1.tolerance = 1e-9;
    for (const cd& v : samples) {
        for (long long n = 1; n <= ntmax; ++n)
            for (long long y = 1; y <= n && n + y <= ntmax + 1; ++y) {
                int ni = static_cast<int>(n), yi = static_cast<int>(y);
                double dn = static_cast<double>(n), dy = static_cast<double>(y);
                cd lhs = ev.T_scaled(ni - 1, v + I_unit * dy) * ev.T_scaled(ni - 1, v - I_unit * dy);
                cd a = ev.T_scaled(ni + yi - 1, v) * ev.T_scaled(ni - yi - 1, v);
                cd b = ev.T_scaled(yi - 1, v + I_unit * dn) * ev.T_scaled(yi - 1, v - I_unit * dn);
                double res = relative_residual(lhs, a + b, std::max(std::abs(a), std::abs(b)));
                e1.max_residual = std::max(e1.max_residual, res);
            }
        e1.samples.push_back(v);
    }
    rep.add(e1);

    CheckEntry e2;
    e2.name = "tsystem2";
    e2.tolerance = 1e-8;
    const int a = ts.alpha;
    const long long ya = ts.y[a], ya1 = ts.y[a - 1];
    const int sgn = ev.sign_mz(ts.z[a]);
    for (const cd& v : samples) {
        cd lhs = ev.T_scaled(static_cast<int>(ya + ya1 - 1), v);
        cd t1 = ev.T_scaled(static_cast<int>(ya - ya1 - 1), v);
        cd t2 = 2.0 * static_cast<double>(sgn) * ev.T_scaled(static_cast<int>(ya1 - 1), v + I_unit * static_cast<double>(ya));
        e2.max_residual =
            std::max(e2.max_residual, relative_residual(lhs, t1 + t2, std::max(std::abs(t1), std::abs(t2))));
        e2.samples.push_back(v);
    }
    rep.add(e2);
    return rep;
}

// Y_j, 1 + Y_j and K built from the T functions; Y_0 = 0 and Y_{-1} = infinity by convention
class YFunctions {
public:
    YFunctions(const TEvaluator& ev, const TSSequences& ts) : ev_(ev), ts_(ts) {}

    int jmax() const { return ts_.j_max; }

    cd Y(int j, cd v) const {
        if (j == 0) return 0.0;
        if (j < 0) throw domain_error("Y_{-1} is infinite by convention");
        check_j(j);
        auto [r, ntj1, yr, shift] = indices(j);
        cd vs = v + I_unit * shift;
        cd num = ev_.T_scaled(static_cast<int>(ntj1 + yr - 1), vs) * ev_.T_scaled(static_cast<int>(ntj1 - yr - 1), vs);
        cd den = ev_.T_scaled(static_cast<int>(yr - 1), vs + I_unit * static_cast<double>(ntj1)) *
                 ev_.T_scaled(static_cast<int>(yr - 1), vs - I_unit * static_cast<double>(ntj1));
        return num / den;
    }

    cd one_plus_Y(int j, cd v) const {
        if (j == 0) return 1.0;
        check_j(j);
        auto [r, ntj1, yr, shift] = indices(j);
        cd vs = v + I_unit * shift;
        cd num = ev_.T_scaled(static_cast<int>(ntj1 - 1), vs + I_unit * static_cast<double>(yr)) *
                 ev_.T_scaled(static_cast<int>(ntj1 - 1), vs - I_unit * static_cast<double>(yr));
        cd den = ev_.T_scaled(static_cast<int>(yr - 1), vs + I_unit * static_cast<double>(ntj1)) *
                 ev_.T_scaled(static_cast<int>(yr - 1), vs - I_unit * static_cast<double>(ntj1));
        return num / den;
    }

    cd K(cd v) const {
        const int a = ts_.alpha;
        const long long nt = ts_.y[a] - ts_.y[a - 1];
        const long long w = ts_.z[a] - ts_.z[a - 1] - 1;
        cd vs = v + I_unit * static_cast<double>(w) * p0();
        cd num = static_cast<double>(ev_.sign_mz(ts_.z[a])) * ev_.T_scaled(static_cast<int>(nt - 1), vs);
        cd den = ev_.T_scaled(static_cast<int>(ts_.y[a - 1] - 1), vs + I_unit * static_cast<double>(ts_.y[a]));
        return num / den;
    }

    // integer p0 forms
    cd Y_int(int j, cd v) const {
        double d = j + 1.0;
        return ev_.T_scaled(j + 1, v) * ev_.T_scaled(j - 1, v) /
               (ev_.T_scaled(0, v + I_unit * d) * ev_.T_scaled(0, v - I_unit * d));
    }
    cd one_plus_Y_int(int j, cd v) const {
        double d = j + 1.0;
        return ev_.T_scaled(j, v + I_unit) * ev_.T_scaled(j, v - I_unit) /
               (ev_.T_scaled(0, v + I_unit * d) * ev_.T_scaled(0, v - I_unit * d));
    }
    cd K_int(cd v) const {
        int P = static_cast<int>(std::lround(p0()));
        double s = (ev_.state().m % 2 == 0) ? 1.0 : -1.0;
        return s * ev_.T_scaled(P - 2, v) / ev_.T_scaled(0, v + I_unit * static_cast<double>(P));
    }

private:
    double p0() const { return to_double(ts_.p0); }
    void check_j(int j) const {
        if (j < 1 || j > ts_.j_max) throw domain_error("Y index out of range");
    }
    struct Idx {
        int r;
        long long ntj1, yr;
        double shift;
    };
    Idx indices(int j) const {
        int r = ts_.r_of(j);
        return {r, ts_.nt[j + 1], ts_.y[r], static_cast<double>(ts_.w[j]) * p0()};
    }

    const TEvaluator& ev_;
    const TSSequences& ts_;
};

inline cd y_function(const TEvaluator& ev, const TSSequences& ts, int j, cd v) { return YFunctions(ev, ts).Y(j, v); }
inline cd one_plus_y(const TEvaluator& ev, const TSSequences& ts, int j, cd v) {
    return YFunctions(ev, ts).one_plus_Y(j, v);
}
inline cd k_function(const TEvaluator& ev, const TSSequences& ts, cd v) { return YFunctions(ev, ts).K(v); }

inline CheckReport verify_y_system(const TEvaluator& ev, const TSSequences& ts, const std::vector<cd>& samples) {
    CheckReport rep;
    YFunctions Y(ev, ts);
    const int a = ts.alpha;
    const long long ma = ts.m_alpha();
    auto pd = [&](int r) { return ts.p_double(r); };

    CheckEntry eq;
    eq.name = "ydef_equivalence";
    eq.tolerance = 1e-9;
    for (const cd& v : samples)
        for (int j = 1; j <= ts.j_max; ++j)
            eq.max_residual = std::max(eq.max_residual, relative_residual(1.0 + Y.Y(j, v), Y.one_plus_Y(j, v)));
    eq.samples = samples;
    rep.add(eq);

    CheckEntry e1;
    e1.name = "ysystem1";
    e1.tolerance = 1e-8;
    for (const cd& v : samples)
        for (int r = 1; r <= a; ++r)
            for (long long j = std::max<long long>(1, ts.m[r - 1]); j <= ts.m[r] - 2; ++j) {
                int ji = static_cast<int>(j);
                cd lhs = Y.Y(ji, v + I_unit * pd(r)) * Y.Y(ji, v - I_unit * pd(r));
                cd left = Y.one_plus_Y(ji - 1, v);
                if (j == ts.m[r - 1]) left = 1.0 / left;
                cd rhs = left * Y.one_plus_Y(ji + 1, v);
                e1.max_residual = std::max(e1.max_residual, relative_residual(lhs, rhs));
            }
    e1.samples = samples;
    rep.add(e1);

    CheckEntry e2;
    e2.name = "ysystem2";
    e2.tolerance = 1e-8;
    for (const cd& v : samples)
        for (int r = 1; r <= a - 1; ++r) {
            int j = static_cast<int>(ts.m[r] - 1);
            double P = pd(r), Pn = pd(r + 1);
            cd lhs = Y.Y(j, v + I_unit * (P + Pn)) * Y.Y(j, v + I_unit * (P - Pn)) * Y.Y(j, v - I_unit * (P - Pn)) *
                     Y.Y(j, v - I_unit * (P + Pn));
            cd left = Y.one_plus_Y(j - 1, v + I_unit * Pn) * Y.one_plus_Y(j - 1, v - I_unit * Pn);
            if (ts.nu(r) == 1) left = 1.0 / left;
            cd rhs = left * Y.one_plus_Y(j + 1, v + I_unit * P) * Y.one_plus_Y(j + 1, v - I_unit * P) *
                     Y.one_plus_Y(j, v + I_unit * (P - Pn)) * Y.one_plus_Y(j, v - I_unit * (P - Pn));
            e2.max_residual = std::max(e2.max_residual, relative_residual(lhs, rhs));
        }
    e2.samples = samples;
    if (a == 1) e2.note = "no j = m_r - 1 with r < alpha";
    rep.add(e2);

    CheckEntry e3;
    e3.name = "ysystem3";
    e3.tolerance = 1e-8;
    for (const cd& v : samples) {
        cd k = Y.K(v);
        e3.max_residual =
            std::max(e3.max_residual, relative_residual(Y.one_plus_Y(static_cast<int>(ma - 1), v), (1.0 + k) * (1.0 + k)));
    }
    e3.samples = samples;
    rep.add(e3);

    CheckEntry e4;
    e4.name = "ysystem4";
    e4.tolerance = 1e-8;
    for (const cd& v : samples) {
        double P = pd(a);
        cd lhs = Y.K(v + I_unit * P) * Y.K(v - I_unit * P);
        e4.max_residual =
            std::max(e4.max_residual, relative_residual(lhs, Y.one_plus_Y(static_cast<int>(ma - 2), v)));
    }
    e4.samples = samples;
    rep.add(e4);

    if (ts.alpha == 1) {
        CheckEntry e5;
        e5.name = "integer_forms_agree";
        e5.tolerance = 1e-9;
        for (const cd& v : samples) {
            for (int j = 1; j <= ts.j_max; ++j) {
                e5.max_residual = std::max(e5.max_residual, relative_residual(Y.Y(j, v), Y.Y_int(j, v)));
                e5.max_residual =
                    std::max(e5.max_residual, relative_residual(Y.one_plus_Y(j, v), Y.one_plus_Y_int(j, v)));
            }
            e5.max_residual = std::max(e5.max_residual, relative_residual(Y.K(v), Y.K_int(v)));
        }
        e5.samples = samples;
        rep.add(e5);
    }
    return rep;
}

// T_1(v+i) T_1(v-i) = T_0(v+2i) T_0(v-2i) (1 + Y_1(v))
inline CheckReport verify_inversion(const TEvaluator& ev, const TSSequences& ts, const std::vector<cd>& samples) {
    CheckReport rep;
    YFunctions Y(ev, ts);
    CheckEntry e;
    e.name = "inversion_identity";
    e.tolerance = 1e-8;
    int skipped = 0;
    for (const cd& v : samples) {
        cd lhs = ev.T_scaled(1, v + I_unit) * ev.T_scaled(1, v - I_unit);
        cd t0 = ev.T_scaled(0, v + 2.0 * I_unit) * ev.T_scaled(0, v - 2.0 * I_unit);
        if (std::abs(t0) < 1e-300) {
            ++skipped;
            continue;
        }
        cd rhs = t0 * (1.0 + Y.Y(1, v));
        e.max_residual = std::max(e.max_residual, relative_residual(lhs, rhs));
        e.samples.push_back(v);
    }
    if (skipped) e.note = std::to_string(skipped) + " samples on a common zero skipped";
    rep.add(e);
    return rep;
}

struct Zero {
    cd v;
    int multiplicity = 1;
};

struct ZeroRegion {
    // real-part window; empty means all finite zeros
    std::optional<double> re_min, re_max;
};

// zeros of T_{n-1} (dressed vacuum form with n terms) in one period strip
inline std::vector<Zero> locate_zeros(int n, const TEvaluator& ev, const ZeroRegion& region = {}) {
    if (n < 1) throw domain_error("locate_zeros: n must be >= 1");
    const TrotterParams& tp = ev.params();
    const double th = tp.theta;
    const double p0 = tp.p0();
    const double period = 2.0 * p0;
    const int N = tp.N;
    const int tindex = n - 1;

    // sampling line away from every root's real part
    std::vector<double> res;
    for (const cd& w : ev.state().roots) res.push_back(w.real());
    double c = 0.37;
    for (int tries = 0; tries < 200; ++tries) {
        bool ok = true;
        for (double x : res) ok = ok && std::abs(x - c) > 0.15;
        if (ok) break;
        c += 0.173;
    }
    // T = sum_q A_q X^q, X = e^{theta v}, q = -N/2..N/2; on the line X = e^{theta c} e^{2 pi i k / K}
    const int K = 4 * N + 8;
    std::vector<cd> samples(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) samples[static_cast<size_t>(k)] = ev.T_scaled(tindex, cd(c, period * k / K));
    const int deg = N;  // powers q + N/2 = 0..N
    Eigen::VectorXcd coeff(deg + 1);
    for (int q = -N / 2; q <= N / 2; ++q) {
        cd acc = 0.0;
        for (int k = 0; k < K; ++k) acc += samples[static_cast<size_t>(k)] * std::polar(1.0, -2 * std::numbers::pi * q * k / K);
        coeff[q + N / 2] = acc / static_cast<double>(K);
    }
    double cmax = coeff.cwiseAbs().maxCoeff();
    int lo = 0, hi = deg;
    while (lo < hi && std::abs(coeff[lo]) < 1e-11 * cmax) ++lo;
    while (hi > lo && std::abs(coeff[hi]) < 1e-11 * cmax) --hi;

    std::vector<cd> cand;
    if (hi > lo) {
        Eigen::VectorXcd poly = coeff.segment(lo, hi - lo + 1);
        Eigen::PolynomialSolver<cd, Eigen::Dynamic> solver;
        solver.compute(poly);
        for (Eigen::Index i = 0; i < solver.roots().size(); ++i) {
            cd Yr = solver.roots()[i];
            if (std::abs(Yr) == 0.0) continue;
            cd v = std::log(Yr) / th + c;  // Y = X e^{-theta c}
            if (std::abs(v.real()) > 200.0) continue;
            cand.push_back(v);
        }
    }

    auto fval = [&](cd v) { return ev.T_scaled(tindex, v); };
    // Newton refinement with a central-difference derivative
    std::vector<cd> refined;
    for (cd v : cand) {
        for (int it = 0; it < 200; ++it) {
            cd f = fval(v);
            double e = 1e-5;
            cd d = (fval(v + e) - fval(v - e)) / (2 * e);
            if (std::abs(d) == 0.0) break;
            cd step = f / d;
            if (std::abs(step) > 0.5) step *= 0.5 / std::abs(step);
            v -= step;
            if (std::abs(step) < 1e-13) break;
        }
        double y = v.imag() - period * std::floor((v.imag() + p0) / period);
        refined.emplace_back(v.real(), y);
    }
    std::vector<Zero> zs;
    for (const cd& v : refined) {
        bool merged = false;
        for (auto& z : zs) {
            cd d = v - z.v;
            double dy = d.imag() - period * std::round(d.imag() / period);
            if (std::hypot(d.real(), dy) < 1e-5) {
                ++z.multiplicity;
                merged = true;
                break;
            }
        }
        if (!merged) zs.push_back({v, 1});
    }

    // argument principle over a full period rectangle
    double R = 2.0;
    for (const auto& z : zs) R = std::max(R, std::abs(z.v.real()) + 2.0);
    double rmin = region.re_min.value_or(-R), rmax = region.re_max.value_or(R);
    double y0 = -p0 + 0.31;
    for (int tries = 0; tries < 100; ++tries) {
        bool ok = true;
        for (const auto& z : zs) {
            double dy = z.v.imag() - y0;
            dy -= period * std::round(dy / period);
            ok = ok && std::abs(dy) > 0.05;
        }
        if (ok) break;
        y0 += 0.0917;
    }
    auto winding_edge = [&](cd a, cd b) {
        double total = 0.0;
        cd prev = fval(a);
        double t = 0.0, dt = 0.01;
        const double len = std::abs(b - a);
        while (t < len) {
            double tn = std::min(len, t + dt);
            cd cur = fval(a + (b - a) * (tn / len));
            double darg = std::arg(cur / prev);
            if (std::abs(darg) > std::numbers::pi / 4 && dt > 1e-9) {
                dt *= 0.5;
                continue;
            }
            total += darg;
            prev = cur;
            t = tn;
            if (std::abs(darg) < std::numbers::pi / 16) dt = std::min(dt * 1.5, 0.2);
        }
        return total;
    };
    cd c1(rmin, y0), c2(rmax, y0), c3(rmax, y0 + period), c4(rmin, y0 + period);
    double wind = winding_edge(c1, c2) + winding_edge(c2, c3) + winding_edge(c3, c4) + winding_edge(c4, c1);
    long long count = std::llround(wind / (2 * std::numbers::pi));
    std::vector<Zero> inside;
    long long found = 0;
    for (const auto& z : zs)
        if (z.v.real() > rmin && z.v.real() < rmax) {
            inside.push_back(z);
            found += z.multiplicity;
        }
    if (count != found)
        throw solver_error("locate_zeros: incomplete search, argument principle counts " + std::to_string(count) +
                               " zeros but " + std::to_string(found) + " were found",
                           static_cast<double>(count - found));
    std::sort(inside.begin(), inside.end(), [](const Zero& a, const Zero& b) {
        return a.v.imag() != b.v.imag() ? a.v.imag() < b.v.imag() : a.v.real() < b.v.real();
    });
    return inside;
}

// real zeros of T_n on (0, xmax] by scanning Re T_scaled
inline std::vector<double> positive_real_zeros(int n, const TEvaluator& ev, double xmax = 12.0, int scan = 1200) {
    auto f = [&](double x) { return ev.T_scaled(n, cd(x, 0.0)).real(); };
    std::vector<double> out;
    double a = 1e-3, fa = f(a);
    for (int i = 1; i <= scan; ++i) {
        double b = 1e-3 + (xmax - 1e-3) * i / scan, fb = f(b);
        if (fa * fb < 0) {
            boost::uintmax_t it = 200;
            auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(50), it);
            out.push_back(0.5 * (r.first + r.second));
        }
        a = b;
        fa = fb;
    }
    return out;
}

}  // namespace qtmtba

#endif
