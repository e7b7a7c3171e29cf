#ifndef QTMTBA_RATIONAL_TS_HPP
#define QTMTBA_RATIONAL_TS_HPP

#include <boost/integer/common_factor.hpp>
#include <boost/rational.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "check_report.hpp"
#include "errors.hpp"

namespace qtmtba {

using rational = boost::rational<long long>;

inline double to_double(const rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline long long floor_div(const rational& r) {
    long long q = r.numerator() / r.denominator();
    if (r.numerator() % r.denominator() != 0 && r.numerator() < 0) --q;
    return q;
}

// vector addressed from an arbitrary first index, so that y[-1] reads like the math
template <class T>
class indexed_vector {
public:
    explicit indexed_vector(int first = 0) : first_(first) {}
    void push_back(const T& x) { data_.push_back(x); }
    const T& operator[](int j) const { return data_.at(static_cast<size_t>(j - first_)); }
    T& operator[](int j) { return data_.at(static_cast<size_t>(j - first_)); }
    int first() const { return first_; }
    int last() const { return first_ + static_cast<int>(data_.size()) - 1; }
    size_t size() const { return data_.size(); }
    const std::vector<T>& raw() const { return data_; }

private:
    int first_;
    std::vector<T> data_;
};

// "24/5", "5", " 7 / 2 "; any nonzero denominator, no range check
inline rational parse_rational(std::string_view s) {
    auto trim = [](std::string_view t) {
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
        return t;
    };
    auto to_ll = [&](std::string_view t) -> long long {
        t = trim(t);
        if (t.empty()) throw domain_error("p0: empty integer field");
        size_t pos = 0;
        long long x = 0;
        try {
            x = std::stoll(std::string(t), &pos);
        } catch (const std::exception&) {
            throw domain_error("p0: not an integer: '" + std::string(t) + "'");
        }
        if (pos != t.size()) throw domain_error("p0: trailing characters in '" + std::string(t) + "'");
        return x;
    };
    auto slash = s.find('/');
    if (slash == std::string_view::npos) return rational(to_ll(s), 1);
    long long d = to_ll(s.substr(slash + 1));
    if (d == 0) throw domain_error("p0: zero denominator");
    return rational(to_ll(s.substr(0, slash)), d);
}

class RationalP0 {
public:
    RationalP0(long long num, long long den = 1) {
        if (den == 0) throw domain_error("p0: zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        if (num <= 0) throw domain_error("p0 must be positive");
        value_ = rational(num, den);
        if (value_ < rational(2)) throw domain_error("p0 must be >= 2 (got " + str() + ")");
    }
    explicit RationalP0(const rational& r) : RationalP0(r.numerator(), r.denominator()) {}

    // "24/5", "5", " 7 / 2 "
    static RationalP0 parse(std::string_view s);

    long long num() const { return value_.numerator(); }
    long long den() const { return value_.denominator(); }
    const rational& value() const { return value_; }
    double to_double() const { return qtmtba::to_double(value_); }
    double theta() const { return std::numbers::pi / to_double(); }
    double delta() const { return std::cos(theta()); }
    bool is_integer() const { return value_.denominator() == 1; }
    std::string str() const {
        return den() == 1 ? std::to_string(num()) : std::to_string(num()) + "/" + std::to_string(den());
    }

private:
    rational value_;
};

inline RationalP0 RationalP0::parse(std::string_view s) { return RationalP0(parse_rational(s)); }

struct ContinuedFraction {
    std::vector<long long> nu;  // nu[0] is nu_1
    int alpha() const { return static_cast<int>(nu.size()); }
    long long term(int j) const { return nu.at(static_cast<size_t>(j - 1)); }

    rational evaluate() const {
        if (nu.empty()) throw domain_error("empty continued fraction");
        rational x(nu.back());
        for (int j = alpha() - 2; j >= 0; --j) x = rational(nu[static_cast<size_t>(j)]) + rational(1) / x;
        return x;
    }
};

inline ContinuedFraction expand_continued_fraction(const RationalP0& p0) {
    if (p0.value() == rational(2))
        throw domain_error("p0 = 2 is the free fermion point; use the free_fermion module");
    ContinuedFraction cf;
    rational x = p0.value();
    for (;;) {
        long long a = floor_div(x);
        cf.nu.push_back(a);
        rational rest = x - rational(a);
        if (rest == rational(0)) break;
        x = rational(1) / rest;
    }
    // Euclid already ends on a term >= 2 unless alpha = 1; keep the canonical form explicit
    if (cf.alpha() >= 2 && cf.nu.back() == 1) {
        cf.nu.pop_back();
        cf.nu.back() += 1;
    }
    return cf;
}

struct TSSequences {
    int alpha = 0;
    ContinuedFraction cf;
    rational p0;
    indexed_vector<long long> m{0};  // m_0..m_alpha; m_{alpha+1} is infinite, see m_at
    indexed_vector<rational> p{0};   // p_0..p_{alpha+1}
    indexed_vector<long long> y{-1};  // y_{-1}..y_alpha
    indexed_vector<long long> z{-1};
    indexed_vector<long long> n{1};   // n_1..n_{m_alpha+1}
    indexed_vector<long long> nt{1};  // tilde n_1..tilde n_{m_alpha+1}
    indexed_vector<long long> w{1};   // w_1..w_{m_alpha}
    int j_max = 0;

    // nullopt plays the role of m_{alpha+1} = infinity
    std::optional<long long> m_at(int r) const {
        if (r == alpha + 1) return std::nullopt;
        return m[r];
    }
    long long m_alpha() const { return m[alpha]; }

    // the unique r with m_r <= j < m_{r+1}
    int r_of(long long j) const {
        int r = 0;
        while (r < alpha && m[r + 1] <= j) ++r;
        return r;
    }
    // the unique r with m_r < j <= m_{r+1}
    int r_tilde_of(long long j) const {
        int r = 0;
        while (r < alpha && m[r + 1] < j) ++r;
        return r;
    }
    long long nu(int j) const { return cf.term(j); }
    double p_double(int j) const { return to_double(p[j]); }
};

inline TSSequences build_sequences(const ContinuedFraction& cf, const RationalP0& p0) {
    if (cf.nu.empty()) throw domain_error("empty continued fraction");
    TSSequences ts;
    ts.cf = cf;
    ts.alpha = cf.alpha();
    ts.p0 = p0.value();
    const int a = ts.alpha;

    ts.m.push_back(0);
    for (int j = 1; j <= a; ++j) ts.m.push_back(ts.m[j - 1] + cf.term(j));

    ts.p.push_back(p0.value());
    ts.p.push_back(rational(1));
    for (int j = 2; j <= a + 1; ++j) ts.p.push_back(ts.p[j - 2] - rational(cf.term(j - 1)) * ts.p[j - 1]);

    ts.y.push_back(0);
    ts.y.push_back(1);
    ts.z.push_back(1);
    ts.z.push_back(0);
    for (int j = 1; j <= a; ++j) {
        ts.y.push_back(ts.y[j - 2] + cf.term(j) * ts.y[j - 1]);
        ts.z.push_back(ts.z[j - 2] + cf.term(j) * ts.z[j - 1]);
    }

    const long long ma = ts.m[a];
    for (long long j = 1; j <= ma + 1; ++j) {
        int r = ts.r_of(j);
        ts.n.push_back(ts.y[r - 1] + (j - ts.m[r]) * ts.y[r]);
        int rt = ts.r_tilde_of(j);
        ts.nt.push_back(ts.y[rt - 1] + (j - ts.m[rt]) * ts.y[rt]);
    }
    for (long long j = 1; j <= ma; ++j) {
        int r = ts.r_of(j);
        ts.w.push_back(ts.z[r - 1] + (j - ts.m[r]) * ts.z[r] - 1);
    }
    ts.j_max = static_cast<int>(ma - 1);
    return ts;
}

inline TSSequences build_sequences(const RationalP0& p0) {
    return build_sequences(expand_continued_fraction(p0), p0);
}

inline CheckReport validate_sequences(const TSSequences& ts, const RationalP0& p0, bool throw_on_failure = true) {
    CheckReport rep;
    const int a = ts.alpha;
    const rational P0 = p0.value();
    const long long ma = ts.m_alpha();

    rep.add_flag("continued_fraction_roundtrip", ts.cf.evaluate() == P0);
    {
        bool canon = a == 1 ? ts.cf.term(1) >= 3 : ts.cf.term(a) >= 2;
        canon = canon && ts.cf.term(1) >= 2;
        for (long long t : ts.cf.nu) canon = canon && t >= 1;
        rep.add_flag("continued_fraction_canonical", canon);
    }
    rep.add_flag("p_alpha_plus_1_zero", ts.p[a + 1] == rational(0));

    // p_j = (p_{j-1} - p_{j+1}) / nu_j, so the bound is strict below alpha and an equality at alpha
    {
        bool ok = true;
        std::string note;
        for (int j = 1; j <= a; ++j) {
            rational bound = ts.p[j - 1] / rational(ts.nu(j));
            bool good = j < a ? ts.p[j] < bound : ts.p[j] == bound;
            if (!good) {
                ok = false;
                note += " j=" + std::to_string(j);
            }
        }
        rep.add_flag("p_j_vs_p_jm1_over_nu_j", ok, note);
    }
    {
        bool ok = true;
        for (int j = 1; j <= a + 1; ++j) ok = ok && ts.p[j] < P0 / rational(2);
        rep.add_flag("p_j_below_half_p0", ok);
    }
    {
        bool ok = true;
        for (int j = 1; j <= a; ++j) {
            if (j == 1 && ts.nu(1) < 3) continue;
            ok = ok && rational(2) * ts.p[j] + rational(2) * ts.p[j + 1] < P0;
        }
        rep.add_flag("two_p_j_plus_two_p_jp1_below_p0", ok);
    }
    {
        bool ok = true;
        for (int j = -1; j <= a; ++j) {
            rational sign = (j % 2 == 0) ? rational(1) : rational(-1);
            ok = ok && rational(ts.y[j]) == rational(ts.z[j]) * P0 + sign * ts.p[j + 1];
        }
        rep.add_flag("y_eq_z_p0_plus_alt_p", ok);
    }
    rep.add_flag("y_alpha_eq_z_alpha_p0", rational(ts.y[a]) == rational(ts.z[a]) * P0);
    rep.add_flag("gcd_y_alpha_z_alpha_is_1", boost::integer::gcd(ts.y[a], ts.z[a]) == 1);
    {
        bool ok = true;
        for (long long j = 2; j <= ma + 1; ++j) ok = ok && ts.nt[static_cast<int>(j)] > ts.nt[static_cast<int>(j - 1)];
        rep.add_flag("tilde_n_strictly_increasing", ok);
    }
    {
        bool ok = true;
        for (int j = 1; j <= ma + 1; ++j) {
            bool at_mr = false;
            int rr = 0;
            for (int r = 1; r <= a; ++r)
                if (ts.m[r] == j) {
                    at_mr = true;
                    rr = r;
                }
            if (at_mr)
                ok = ok && ts.nt[j] == ts.y[rr] && ts.n[j] == ts.y[rr - 1];
            else
                ok = ok && ts.nt[j] == ts.n[j];
        }
        rep.add_flag("tilde_n_vs_n", ok);
    }
    {
        std::vector<long long> lhs, rhs;
        for (int j = 1; j <= ma + 1; ++j) {
            lhs.push_back(ts.nt[j]);
            rhs.push_back(ts.n[j]);
        }
        rhs.push_back(ts.y[a]);
        auto it = std::find(rhs.begin(), rhs.end(), 1LL);
        if (it != rhs.end()) rhs.erase(it);
        std::sort(lhs.begin(), lhs.end());
        std::sort(rhs.begin(), rhs.end());
        rep.add_flag("multiset_tilde_n", lhs == rhs);
    }
    {
        bool ok = true;
        for (int j = 1; j <= ma; ++j) {
            long long lhs = floor_div(rational(ts.n[j] - 1) / P0);
            ok = ok && lhs == ts.w[j] + (j == ts.m[1] ? 1 : 0);
        }
        rep.add_flag("floor_n_minus_1_over_p0_eq_w", ok);
    }
    {
        bool ok = ts.w[1] == 0 && ts.w[static_cast<int>(ts.m[1])] == -1;
        if (a >= 2) ok = ok && ts.w[static_cast<int>(ts.m[2])] == 0;
        rep.add_flag("w_boundary_values", ok);
    }
    {
        // trigonometric form, strict positivity with a 1e-12 guard against roundoff zeros
        CheckEntry e;
        e.name = "ts_condition_sin";
        e.tolerance = 1e-12;
        double worst = 0.0;
        const double P = p0.to_double();
        for (int j = 1; j <= ma; ++j) {
            double sgn = (ts.w[j] % 2 == 0) ? 1.0 : -1.0;
            for (long long k = 1; k <= ts.n[j] - 1; ++k) {
                double val = sgn * std::sin(std::numbers::pi * k / P) * std::sin(std::numbers::pi * (ts.n[j] - k) / P);
                if (val <= 1e-12) worst = std::max(worst, 1.0 + std::abs(val));
            }
        }
        e.max_residual = worst;
        rep.add(e);
    }
    {
        bool ok = true;
        for (int j = 1; j <= ma; ++j) {
            long long rhs = floor_div(rational(ts.n[j] - 1) / P0);
            for (long long k = 1; k <= ts.n[j] - 1; ++k)
                ok = ok && floor_div(rational(k) / P0) + floor_div(rational(ts.n[j] - k) / P0) == rhs;
        }
        rep.add_flag("ts_condition_floor", ok);
    }
    if (throw_on_failure && !rep.all_pass()) {
        auto f = rep.failures();
        throw validation_error(f.front(), "sequence identity failed for p0 = " + p0.str() + ": " + f.front());
    }
    return rep;
}

}  // namespace qtmtba

#endif
