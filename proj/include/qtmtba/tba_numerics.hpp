#ifndef QTMTBA_TBA_NUMERICS_HPP
#define QTMTBA_TBA_NUMERICS_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "rational_ts.hpp"

namespace qtmtba {

struct Grid {
    double L = 40.0;
    int M = 2049;

    Grid() = default;
    Grid(double extent, int points) : L(extent), M(points) {
        if (M < 3 || M % 2 == 0) throw domain_error("grid: point count must be odd and >= 3");
        if (!(L > 0)) throw domain_error("grid: extent must be positive");
    }
    double h() const { return 2.0 * L / (M - 1); }
    double v(int i) const { return -L + i * h(); }
    int center() const { return (M - 1) / 2; }
    std::vector<double> points() const {
        std::vector<double> out(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) out[static_cast<size_t>(i)] = v(i);
        return out;
    }
    // finer grid used for self-consistency checks: half the spacing, twice the extent
    Grid refined() const { return Grid(2.0 * L, 4 * (M - 1) + 1); }
};

// asymptotic model: f(v) ~ c + s*v as v -> +-inf
struct Tail {
    double c_lo = 0.0, c_hi = 0.0;
    double s_lo = 0.0, s_hi = 0.0;
};

struct SampledFunction {
    std::vector<double> values;
    std::vector<signed char> sign;  // empty means every sample is positive
    Tail tail;

    SampledFunction() = default;
    explicit SampledFunction(std::vector<double> vals) : values(std::move(vals)) { refresh_tail_constants(); }

    size_t size() const { return values.size(); }
    double signed_value(size_t i) const { return sign.empty() ? values[i] : sign[i] * values[i]; }

    // constants read off the grid edge, slopes kept as declared
    void refresh_tail_constants() {
        if (values.empty()) return;
        tail.c_lo = values.front();
        tail.c_hi = values.back();
    }
};

inline double kernel_s_value(double p, double v) {
    return 1.0 / (4.0 * p * std::cosh(std::numbers::pi * v / (2.0 * p)));
}

inline double kernel_s(int r, double v, const TSSequences& ts) {
    if (r < 1 || r > ts.alpha) throw domain_error("kernel_s: index r out of range (p_r must be positive)");
    return kernel_s_value(ts.p_double(r), v);
}

// d kernel from its Fourier transform cosh((a-b)k)/(cosh(ak)cosh(bk)) = 1 - tanh(ak)tanh(bk),
// sampled at x_0 + i*dx for i < count
inline std::vector<double> kernel_d_samples(double a, double b, double x0, double dx, int count, double dk = 0.01,
                                            double kmax = 0.0) {
    if (!(a > b) || !(b > 0)) throw domain_error("kernel_d: requires p_r > p_{r+1} > 0");
    if (kmax <= 0.0) kmax = (std::log(2.0) + 14.0 * std::log(10.0)) / (2.0 * b) + 5.0;
    const int nk = static_cast<int>(std::ceil(kmax / dk)) + 1;
    std::vector<double> F(static_cast<size_t>(nk));
    for (int q = 0; q < nk; ++q) {
        double k = q * dk;
        F[static_cast<size_t>(q)] = (q == 0 ? 0.5 : 1.0) * (1.0 - std::tanh(a * k) * std::tanh(b * k));
    }
    std::vector<double> out(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        double x = x0 + i * dx;
        // rotate e^{i k x} forward in k instead of calling cos per node
        std::complex<double> step = std::polar(1.0, x * dk), z = 1.0;
        double acc = 0.0;
        for (int q = 0; q < nk; ++q) {
            acc += F[static_cast<size_t>(q)] * z.real();
            z *= step;
            if ((q & 255) == 255) z = std::polar(1.0, x * dk * (q + 1));
        }
        out[static_cast<size_t>(i)] = acc * dk / (2.0 * std::numbers::pi);
    }
    return out;
}

inline double kernel_d(int r, double v, const TSSequences& ts, double kmax = 0.0) {
    if (r < 1 || r >= ts.alpha) throw domain_error("kernel_d: index r out of range");
    double a = ts.p_double(r), b = ts.p_double(r + 1);
    if (!(a > b)) throw domain_error("kernel_d: p_{r+1} >= p_r, integrand does not decay");
    return kernel_d_samples(a, b, v, 0.0, 1, 0.01, kmax)[0];
}

// Convolution with an even kernel of total mass `mass` on a Grid.
// Inputs are decomposed as f = c_e + c_o tanh(v) + s v + g with g vanishing at the edges;
// g is convolved numerically, the rest in closed form.
class Convolver {
public:
    // kq[q] = K(q h) for q = 0..Q, long enough to cover 2L plus the kernel's decay window
    Convolver(const Grid& grid, const std::vector<double>& kq, double mass, std::function<double(double)> kernel)
        : grid_(grid), mass_(mass), kernel_(std::move(kernel)) {
        const int M = grid_.M;
        const int Q = static_cast<int>(kq.size()) - 1;
        if (Q < 2 * (M - 1)) throw domain_error("Convolver: kernel table shorter than the grid span");
        koff_.resize(static_cast<size_t>(2 * M - 1));
        for (int i = 0; i < 2 * M - 1; ++i) koff_[static_cast<size_t>(i)] = kq[static_cast<size_t>(std::abs(i - (M - 1)))];
        nfft_ = 1;
        while (nfft_ < 3 * M - 2) nfft_ <<= 1;
        std::vector<double> kp(static_cast<size_t>(nfft_), 0.0);
        std::copy(koff_.begin(), koff_.end(), kp.begin());
        fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
        fft_.fwd(kspec_, kp);

        // K * tanh on the grid; beyond the table tanh is +-1 and the kernel negligible
        const double h = grid_.h();
        ktanh_.assign(static_cast<size_t>(M), 0.0);
        int half = 0;
        while (half < Q && std::abs(kq[static_cast<size_t>(half)]) > 1e-18 * std::abs(kq[0])) ++half;
        half = std::min(Q, half + static_cast<int>(20.0 / h));
        for (int i = 0; i < M; ++i) {
            double v = grid_.v(i);
            double acc = kq[0] * std::tanh(v);
            for (int q = 1; q <= half; ++q) acc += kq[static_cast<size_t>(q)] * (std::tanh(v - q * h) + std::tanh(v + q * h));
            ktanh_[static_cast<size_t>(i)] = acc * h;
        }
    }

    double edge_tolerance = 1e-4;  // allowed deviation from the closed-form tail one unit inside the edge

    const Grid& grid() const { return grid_; }
    double mass() const { return mass_; }
    double kernel(double x) const { return kernel_(x); }

    struct Split {
        double ce = 0, co = 0, s = 0;
        std::vector<double> g;
    };

    Split split(const std::vector<double>& f, double slope = 0.0) const {
        const int M = grid_.M;
        if (static_cast<int>(f.size()) != M) throw domain_error("convolve: sample count does not match grid");
        Split sp;
        sp.s = slope;
        double a = f.front() + slope * grid_.L, b = f.back() - slope * grid_.L;
        double tl = std::tanh(grid_.L);
        sp.ce = 0.5 * (a + b);
        sp.co = 0.5 * (b - a) / tl;
        sp.g.resize(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) {
            double v = grid_.v(i);
            sp.g[static_cast<size_t>(i)] = f[static_cast<size_t>(i)] - sp.ce - sp.co * std::tanh(v) - slope * v;
        }
        // the closed-form tail must actually describe the edges
        const int w = std::max(2, static_cast<int>(std::round(1.0 / grid_.h())));
        double dev = std::max(std::abs(sp.g[static_cast<size_t>(w)]), std::abs(sp.g[static_cast<size_t>(M - 1 - w)]));
        if (dev > edge_tolerance)
            throw solver_error("convolve: function not flat at the grid edge (deviation " + std::to_string(dev) +
                                   "); enlarge the grid extent",
                               dev);
        return sp;
    }

    std::vector<double> apply(const SampledFunction& f) const {
        if (f.tail.s_lo != f.tail.s_hi)
            throw domain_error("convolve: only a common linear slope at both ends is supported");
        return apply(f.values, f.tail.s_hi);
    }

    std::vector<double> apply(const std::vector<double>& f, double slope = 0.0) const {
        Split sp = split(f, slope);
        const int M = grid_.M;
        std::vector<double> gp(static_cast<size_t>(nfft_), 0.0);
        std::copy(sp.g.begin(), sp.g.end(), gp.begin());
        std::vector<std::complex<double>> gs;
        fft_.fwd(gs, gp);
        for (size_t q = 0; q < gs.size(); ++q) gs[q] *= kspec_[q];
        std::vector<double> full;
        fft_.inv(full, gs, nfft_);
        std::vector<double> out(static_cast<size_t>(M));
        const double h = grid_.h();
        for (int i = 0; i < M; ++i) {
            double v = grid_.v(i);
            out[static_cast<size_t>(i)] = full[static_cast<size_t>(i + M - 1)] * h + sp.ce * mass_ +
                                          sp.co * ktanh_[static_cast<size_t>(i)] + sp.s * v * mass_;
        }
        return out;
    }

    // O(M^2) sum; keeps relative accuracy where the result is tiny
    std::vector<double> apply_direct(const std::vector<double>& f, double slope = 0.0) const {
        Split sp = split(f, slope);
        const int M = grid_.M;
        const double h = grid_.h();
        std::vector<double> out(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) {
            const double* k = koff_.data() + (i + M - 1);
            double acc = 0.0;
            for (int j = 0; j < M; ++j) acc += k[-j] * sp.g[static_cast<size_t>(j)];
            double v = grid_.v(i);
            out[static_cast<size_t>(i)] =
                acc * h + sp.ce * mass_ + sp.co * ktanh_[static_cast<size_t>(i)] + sp.s * v * mass_;
        }
        return out;
    }

    // value at an arbitrary point by direct quadrature; tails handled as in apply
    double at(double x, const std::vector<double>& f, double slope = 0.0) const {
        Split sp = split(f, slope);
        const int M = grid_.M;
        const double h = grid_.h();
        double acc = 0.0;
        for (int j = 0; j < M; ++j) acc += kernel_(x - grid_.v(j)) * sp.g[static_cast<size_t>(j)];
        // K * tanh at an off-grid point
        double kt = 0.0;
        {
            double W = grid_.L + 60.0;
            int n = static_cast<int>(std::ceil(2 * W / h));
            for (int q = 0; q <= n; ++q) {
                double y = -W + q * h;
                kt += (q == 0 || q == n ? 0.5 : 1.0) * kernel_(x - y) * std::tanh(y);
            }
            kt *= h;
        }
        return acc * h + sp.ce * mass_ + sp.co * kt + sp.s * x * mass_;
    }

    // trapezoid of the sampled kernel over the grid, used for normalization checks
    double sampled_integral() const {
        const int M = grid_.M;
        double acc = 0.0;
        for (int i = 0; i < 2 * M - 1; ++i) acc += koff_[static_cast<size_t>(i)];
        return acc * grid_.h();
    }

private:
    Grid grid_;
    std::vector<double> koff_;  // kernel at offsets (i-(M-1))h, i = 0..2M-2
    double mass_;
    std::function<double(double)> kernel_;
    int nfft_ = 0;
    mutable Eigen::FFT<double> fft_;
    std::vector<std::complex<double>> kspec_;
    std::vector<double> ktanh_;
};

inline int kernel_table_length(const Grid& grid) {
    return 2 * (grid.M - 1) + static_cast<int>(std::ceil(60.0 / grid.h()));
}

inline std::shared_ptr<Convolver> make_s_convolver(const Grid& grid, double p) {
    const int Q = kernel_table_length(grid);
    std::vector<double> kq(static_cast<size_t>(Q + 1));
    for (int q = 0; q <= Q; ++q) kq[static_cast<size_t>(q)] = kernel_s_value(p, q * grid.h());
    return std::make_shared<Convolver>(grid, kq, 0.5, [p](double x) { return kernel_s_value(p, x); });
}

inline std::shared_ptr<Convolver> make_d_convolver(const Grid& grid, double a, double b) {
    const int Q = kernel_table_length(grid);
    std::vector<double> kq = kernel_d_samples(a, b, 0.0, grid.h(), Q + 1);
    // off-grid values are rare; evaluate the Fourier integral on demand
    return std::make_shared<Convolver>(grid, kq, 0.5, [a, b](double x) { return kernel_d_samples(a, b, x, 0.0, 1)[0]; });
}

struct KernelSet {
    Grid grid;
    std::map<int, std::shared_ptr<Convolver>> s;  // 1..alpha
    std::map<int, std::shared_ptr<Convolver>> d;  // 1..alpha-1

    KernelSet(const TSSequences& ts, const Grid& g) : grid(g) {
        for (int r = 1; r <= ts.alpha; ++r) s[r] = make_s_convolver(g, ts.p_double(r));
        for (int r = 1; r < ts.alpha; ++r) {
            double a = ts.p_double(r), b = ts.p_double(r + 1);
            if (!(a > b)) throw domain_error("kernel_d: p_{r+1} >= p_r");
            d[r] = make_d_convolver(g, a, b);
        }
    }
};

// derivative samples by central differences on the grid, used near the singular point
inline double grid_interp(const Grid& grid, const std::vector<double>& f, double x, int order = 8) {
    const int M = grid.M;
    double t = (x + grid.L) / grid.h();
    int i = static_cast<int>(std::floor(t));
    int i0 = std::clamp(i - order / 2 + 1, 0, M - order);
    double acc = 0.0;
    for (int a = 0; a < order; ++a) {
        double w = 1.0;
        for (int b = 0; b < order; ++b)
            if (b != a) w *= (t - (i0 + b)) / static_cast<double>(a - b);
        acc += w * f[static_cast<size_t>(i0 + a)];
    }
    return acc;
}

// p.v. int g(x)/(4i sinh(pi(zeta-x)/2)) dx + g(zeta)/2, i.e. the s_1 convolution continued to zeta + i
inline std::complex<double> pv_convolve_shifted(const Grid& grid, const std::vector<double>& g, double zeta,
                                                std::optional<double> g_at_zeta = std::nullopt) {
    if (!(std::abs(zeta) < grid.L - 1.0)) throw domain_error("pv_convolve_shifted: zeta outside the grid interior");
    const double pi = std::numbers::pi;
    const double h = grid.h();
    const double gz = g_at_zeta ? *g_at_zeta : grid_interp(grid, g, zeta);
    const int M = grid.M;
    double acc = 0.0;  // the integrand is purely imaginary: (g-gz)/(4i sinh) = -i (g-gz)/(4 sinh)
    for (int j = 0; j < M; ++j) {
        double x = grid.v(j);
        double d = x - zeta;
        double term;
        if (std::abs(d) < 1e-5) {
            double e = 1e-3;
            double g1 = (grid_interp(grid, g, zeta + e) - grid_interp(grid, g, zeta - e)) / (2 * e);
            double g2 =
                (grid_interp(grid, g, zeta + e) - 2 * grid_interp(grid, g, zeta) + grid_interp(grid, g, zeta - e)) /
                (e * e);
            term = (g1 + 0.5 * g2 * d) / (2.0 * pi);  // times -(1/i) = i below
            acc += term;
        } else {
            term = (g[static_cast<size_t>(j)] - gz) / (4.0 * std::sinh(pi * (zeta - x) / 2.0));
            acc -= term;
        }
    }
    return {gz / 2.0, acc * h};
}

// ln|tanh x| without cancellation for large |x|
inline double ln_abs_tanh(double x) {
    if (std::abs(x) < 1e-4) return std::log(std::abs(x)) - x * x / 3.0;
    double e = std::exp(-2.0 * std::abs(x));
    return std::log1p(-e) - std::log1p(e);
}

struct FixedPointConfig {
    double tol = 1e-12;
    double lambda = 0.5;
    int max_iter = 2000;
    bool adaptive = true;
    double min_lambda = 0.05;
    int anderson_depth = 0;  // 0: plain damped iteration
};

struct FixedPointResult {
    std::vector<double> x;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> history;
};

// x <- (1-lambda) x + lambda F(x) until the sup-norm change drops below tol, optionally Anderson-mixed
template <class Map>
FixedPointResult fixed_point_solve(Map&& F, std::vector<double> x, const FixedPointConfig& cfg = {}) {
    FixedPointResult res;
    double lam = cfg.lambda;
    double prev = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    int rises = 0;
    const int depth = std::max(0, cfg.anderson_depth);
    std::vector<std::vector<double>> dX, dF;  // differences of iterates and of residuals
    std::vector<double> x_last, f_last, fx_last;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        std::vector<double> fx;
        try {
            fx = F(x);
        } catch (const std::runtime_error&) {
            // an extrapolated point can leave the admissible region; fall back to a plain step
            if (x_last.empty()) throw;
            dX.clear();
            dF.clear();
            for (size_t i = 0; i < x.size(); ++i) x[i] = x_last[i] + lam * (fx_last[i] - x_last[i]);
            x_last.clear();
            continue;
        }
        if (fx.size() != x.size()) throw solver_error("fixed_point_solve: map changed the state size", 0.0);
        double diff = 0.0;
        std::vector<double> f(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            f[i] = fx[i] - x[i];
            if (!std::isfinite(f[i])) throw solver_error("fixed_point_solve: non-finite update", diff, res.history);
            diff = std::max(diff, std::abs(f[i]));
        }
        res.history.push_back(diff);
        res.iterations = it;
        res.residual = diff;
        if (diff < cfg.tol) {
            res.x = std::move(fx);
            return res;
        }
        // Anderson steps are not monotone, so only the plain iteration adapts its damping
        if (cfg.adaptive && depth == 0) {
            rises = diff > prev ? rises + 1 : 0;
            if (rises >= 3 && lam > cfg.min_lambda) {
                lam = std::max(cfg.min_lambda, lam / 2);
                rises = 0;
            }
        }
        prev = diff;
        if (depth > 0 && diff > 100.0 * best) {
            dX.clear();
            dF.clear();
        }
        best = std::min(best, diff);
        std::vector<double> xn(x.size());
        if (depth > 0 && !x_last.empty()) {
            std::vector<double> a(x.size()), b(x.size());
            for (size_t i = 0; i < x.size(); ++i) {
                a[i] = x[i] - x_last[i];
                b[i] = f[i] - f_last[i];
            }
            dX.push_back(std::move(a));
            dF.push_back(std::move(b));
            if (static_cast<int>(dF.size()) > depth) {
                dX.erase(dX.begin());
                dF.erase(dF.begin());
            }
        }
        if (!dF.empty()) {
            const int m = static_cast<int>(dF.size());
            Eigen::MatrixXd A(static_cast<Eigen::Index>(x.size()), m);
            for (int c = 0; c < m; ++c)
                for (size_t i = 0; i < x.size(); ++i) A(static_cast<Eigen::Index>(i), c) = dF[static_cast<size_t>(c)][i];
            Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
            Eigen::VectorXd g = A.colPivHouseholderQr().solve(fv);
            for (size_t i = 0; i < x.size(); ++i) {
                double corr = 0.0;
                for (int c = 0; c < m; ++c) corr += g(c) * (dX[static_cast<size_t>(c)][i] + lam * dF[static_cast<size_t>(c)][i]);
                xn[i] = x[i] + lam * f[i] - corr;
            }
        } else {
            for (size_t i = 0; i < x.size(); ++i) xn[i] = x[i] + lam * f[i];
        }
        x_last = x;
        f_last = f;
        fx_last = std::move(fx);
        x = std::move(xn);
    }
    throw solver_error("fixed_point_solve: no convergence after " + std::to_string(cfg.max_iter) + " iterations",
                       res.residual, res.history);
}

struct NewtonConfig {
    double tol = 1e-12;
    int max_iter = 100;
    double fd_step = 1e-7;
    bool central = false;
    std::vector<double> damping;  // damping[i] applied at iteration i, 1 afterwards
};

struct NewtonResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double residual = 0.0;
};

// Newton with a finite-difference Jacobian and backtracking on the max-norm
template <class Fun>
NewtonResult newton_solve(Fun&& F, Eigen::VectorXd x, const NewtonConfig& cfg = {}) {
    NewtonResult out;
    const Eigen::Index n = x.size();
    Eigen::VectorXd f = F(x);
    for (int it = 0; it < cfg.max_iter; ++it) {
        double r = f.cwiseAbs().maxCoeff();
        out.residual = r;
        out.iterations = it;
        if (r < cfg.tol) {
            out.x = x;
            return out;
        }
        Eigen::MatrixXd J(n, n);
        for (Eigen::Index q = 0; q < n; ++q) {
            double e = cfg.fd_step * std::max(1.0, std::abs(x[q]));
            Eigen::VectorXd xp = x;
            xp[q] += e;
            if (cfg.central) {
                Eigen::VectorXd xm = x;
                xm[q] -= e;
                J.col(q) = (F(xp) - F(xm)) / (2 * e);
            } else {
                J.col(q) = (F(xp) - f) / e;
            }
        }
        Eigen::VectorXd dx = J.fullPivLu().solve(f);
        double damp = it < static_cast<int>(cfg.damping.size()) ? cfg.damping[static_cast<size_t>(it)] : 1.0;
        double t = damp;
        Eigen::VectorXd xn, fn;
        for (int ls = 0; ls < 30; ++ls) {
            xn = x - t * dx;
            fn = F(xn);
            if (fn.allFinite() && fn.cwiseAbs().maxCoeff() < (1.0 - 1e-4 * t) * r) break;
            t *= 0.5;
        }
        if (!fn.allFinite()) throw solver_error("newton_solve: non-finite residual", r);
        x = xn;
        f = fn;
    }
    out.x = x;
    out.residual = f.cwiseAbs().maxCoeff();
    out.iterations = cfg.max_iter;
    if (out.residual >= cfg.tol)
        throw solver_error("newton_solve: no convergence, residual " + std::to_string(out.residual), out.residual);
    return out;
}

// trapezoid on the grid of f*kernel plus the closed-form constant tail beyond it
inline double integrate_against_s(const Grid& grid, double p, const std::vector<double>& f) {
    const double h = grid.h();
    const int M = grid.M;
    double acc = 0.0;
    double c_lo = f.front(), c_hi = f.back();
    for (int i = 0; i < M; ++i) {
        double w = (i == 0 || i == M - 1) ? 0.5 : 1.0;
        acc += w * kernel_s_value(p, grid.v(i)) * f[static_cast<size_t>(i)];
    }
    acc *= h;
    // int_L^inf s_p = (1/2 pi) * 2 atan(exp(-pi L/(2p)))... via the gudermannian
    double tailmass = (1.0 / std::numbers::pi) * std::atan(std::exp(-std::numbers::pi * grid.L / (2.0 * p)));
    return acc + (c_lo + c_hi) * tailmass;
}

}  // namespace qtmtba

#endif
