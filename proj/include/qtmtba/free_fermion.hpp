#ifndef QTMTBA_FREE_FERMION_HPP
#define QTMTBA_FREE_FERMION_HPP

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "check_report.hpp"
#include "errors.hpp"
#include "qtm_engine.hpp"
#include "tba_numerics.hpp"

namespace qtmtba {

struct FreeFermionParams {
    double J = 1.0;
    double beta = 1.0;

    void validate() const {
        if (!(J != 0.0) || !std::isfinite(J)) throw domain_error("free fermion: J must be finite and non-zero");
        if (!(beta > 0.0) || !std::isfinite(beta)) throw domain_error("free fermion: beta must be positive");
    }
    double beta_J() const { return std::abs(J * beta); }
};

namespace detail {
// ln(2 cosh x) for any x
inline double ln_2cosh(double x) {
    double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a));
}
}  // namespace detail

inline double ff_minus_beta_f(const FreeFermionParams& p) {
    p.validate();
    const double a = p.J * p.beta / 2.0;
    auto f = [a](double eta) { return detail::ln_2cosh(a * std::cos(eta)); };
    double err = 0;
    double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi / 2, 15, 1e-14, &err);
    return 2.0 / std::numbers::pi * I;
}

inline double ff_free_energy(const FreeFermionParams& p) { return -ff_minus_beta_f(p) / p.beta; }

namespace detail {
// -(2/pi) int_0^{pi/2} ln(c tanh(a cos eta)) d eta with eta = pi/2 - s^2, which removes the log singularity
inline double ff_xi2_integral(double a, double c) {
    const double smax = std::sqrt(std::numbers::pi / 2.0);
    auto f = [a, c](double s) {
        double x = a * std::sin(s * s);
        if (x <= 0.0) return 0.0;
        return (std::log(c) + ln_abs_tanh(x)) * 2.0 * s;
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    double I = ts.integrate(f, 0.0, smax, 1e-15);
    return -2.0 / std::numbers::pi * I;
}
}  // namespace detail

inline double ff_inv_xi2(const FreeFermionParams& p) {
    p.validate();
    return detail::ff_xi2_integral(p.beta_J() / 2.0, 1.0);
}

// the form with an extra factor 2 inside the logarithm, kept for comparison only
inline double ff_inv_xi2_printed(const FreeFermionParams& p) {
    p.validate();
    return detail::ff_xi2_integral(p.beta_J() / 2.0, 2.0);
}

inline double ff_xi2(const FreeFermionParams& p) { return 1.0 / ff_inv_xi2(p); }

inline double ff_inv_xi3(const FreeFermionParams& p) {
    p.validate();
    return 2.0 * std::asinh(std::numbers::pi / p.beta_J());
}

inline double ff_inv_xi3_tanh_form(const FreeFermionParams& p) {
    p.validate();
    return -2.0 * ln_abs_tanh(0.5 * std::asinh(p.beta_J() / std::numbers::pi));
}

inline double ff_xi3(const FreeFermionParams& p) { return 1.0 / ff_inv_xi3(p); }

// position of the real zero pair that the rank-3 state trades away, in the Trotter limit
inline double ff_zeta(const FreeFermionParams& p) {
    p.validate();
    return 2.0 / std::numbers::pi * std::asinh(p.J * p.beta / std::numbers::pi);
}

// sample points for the identity suite: a sign-indefinite mix away from the lines where T and phi vanish
inline std::vector<cd> ff_sample_points(int count, std::uint32_t seed = 2024) {
    return sample_points(2.0, count, seed, 2.0);
}

inline CheckReport ff_verify_identities(int N, double u, int m, const std::vector<cd>& samples) {
    const double th = std::numbers::pi / 2;
    auto tp = TrotterParams::from_u(th, N, u);
    int rank = (m == N / 2) ? 1 : (m == N / 2 - 1 ? 2 : 0);
    if (rank == 0) throw domain_error("free-fermion identities: m must be N/2 or N/2 - 1");
    BetheState bs = solve_bae(tp, m, rank);
    TEvaluator ev(bs, tp);
    const double sm = (m % 2 == 0) ? 1.0 : -1.0;
    const double sx = ((N / 2 - m) % 2 == 0) ? 1.0 : -1.0;
    auto Q = [&](cd v) { return q_function(v, bs, th); };
    auto ph = [&](cd v) { return phi(v, tp); };
    auto rho = [&](cd v) {
        return ph(v - I_unit * (u + 2.0)) * ph(v + I_unit * u) + sm * ph(v + I_unit * (u + 2.0)) * ph(v - I_unit * u);
    };
    auto T1 = [&](cd v) { return ev.T_direct(1, v); };
    auto Tt = [&](cd v) { return T1(v) / (ph(v + I_unit * (u + 2.0)) * ph(v - I_unit * (u + 2.0))); };
    auto X = [&](cd v) {
        return ph(v + I_unit * (u - 1.0)) * ph(v - I_unit * (u - 1.0)) /
               (ph(v + I_unit * (u + 1.0)) * ph(v - I_unit * (u + 1.0)));
    };

    CheckEntry e1{"ff_T1_factorized", {}, 0.0, 1e-9};
    CheckEntry e2{"ff_T1_product", {}, 0.0, 1e-9};
    CheckEntry e3{"ff_tilde_identity", {}, 0.0, 1e-9};
    for (const cd& v : samples) {
        cd a = T1(v), b = rho(v) * Q(v + 2.0 * I_unit) / Q(v);
        e1.max_residual = std::max(e1.max_residual, relative_residual(a, b));
        cd c = T1(v + I_unit) * T1(v - I_unit), d = sm * rho(v + I_unit) * rho(v - I_unit);
        e2.max_residual = std::max(e2.max_residual, relative_residual(c, d));
        cd x = X(v);
        cd e = Tt(v + I_unit) * Tt(v - I_unit), f = x + 2.0 * sx + 1.0 / x;
        e3.max_residual = std::max(e3.max_residual, relative_residual(e, f));
        e1.samples.push_back(v);
    }
    e2.samples = e1.samples;
    e3.samples = e1.samples;
    CheckReport rep;
    rep.add(e1);
    rep.add(e2);
    rep.add(e3);
    return rep;
}

}  // namespace qtmtba

#endif
