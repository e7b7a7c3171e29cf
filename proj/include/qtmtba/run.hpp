#ifndef QTMTBA_RUN_HPP
#define QTMTBA_RUN_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "check_report.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "excitation.hpp"
#include "free_energy.hpp"
#include "free_fermion.hpp"
#include "qtm_engine.hpp"
#include "rational_ts.hpp"
#include "tba_numerics.hpp"

namespace qtmtba {

enum ExitCode { exit_ok = 0, exit_config = 1, exit_solver = 2, exit_verification = 3 };

struct BetaRange {
    double start = 0.5;
    double stop = 50.0;
    int count = 12;
    bool geometric = true;

    // "a:b:n" or "a:b:n:geom" (also ":lin")
    static BetaRange parse(std::string_view s) {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : s) {
            if (c == ':') {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        parts.push_back(cur);
        if (parts.size() < 3 || parts.size() > 4) throw config_error("beta_range", "expected a:b:n[:geom]");
        BetaRange r;
        try {
            size_t pos = 0;
            r.start = std::stod(parts[0], &pos);
            if (pos != parts[0].size()) throw std::invalid_argument("start");
            r.stop = std::stod(parts[1], &pos);
            if (pos != parts[1].size()) throw std::invalid_argument("stop");
            r.count = std::stoi(parts[2], &pos);
            if (pos != parts[2].size()) throw std::invalid_argument("count");
        } catch (const std::exception&) {
            throw config_error("beta_range", "malformed number in '" + std::string(s) + "'");
        }
        r.geometric = false;
        if (parts.size() == 4) {
            if (parts[3] == "geom")
                r.geometric = true;
            else if (parts[3] != "lin")
                throw config_error("beta_range", "spacing must be 'geom' or 'lin'");
        }
        r.validate();
        return r;
    }

    void validate() const {
        if (!(start > 0) || !(stop > 0) || !std::isfinite(start) || !std::isfinite(stop))
            throw config_error("beta_range", "beta must be positive");
        if (count < 1) throw config_error("beta_range", "count must be >= 1");
    }

    std::vector<double> values() const {
        std::vector<double> v;
        for (int i = 0; i < count; ++i) {
            double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
            v.push_back(geometric ? start * std::pow(stop / start, t) : start + (stop - start) * t);
        }
        return v;
    }
};

struct RunConfig {
    std::string mode;
    std::string p0 = "5";
    double J = 1.0;
    std::optional<double> beta;
    std::optional<BetaRange> beta_range;
    std::vector<int> k{2, 3};
    int N = 16;
    std::optional<double> u;  // finite-check only: spectral parameter instead of the Trotter value
    std::optional<double> grid_extent;
    std::optional<int> grid_points;
    std::optional<double> tol;
    std::string out;
    int threads = 0;

    Grid grid() const { return Grid(grid_extent.value_or(Grid{}.L), grid_points.value_or(Grid{}.M)); }

    std::vector<double> betas() const {
        if (beta_range) return beta_range->values();
        if (beta) return {*beta};
        return {};
    }
};

namespace detail {

inline const std::set<std::string>& known_modes() {
    static const std::set<std::string> m{"ts-check", "finite-check", "free-energy", "correlation", "free-fermion", "sweep"};
    return m;
}

inline double json_number(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number()) throw config_error(key, "expected a number");
    return j.get<double>();
}

inline int json_int(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number_integer()) throw config_error(key, "expected an integer");
    return j.get<int>();
}

}  // namespace detail

inline void validate_config(const RunConfig& c, bool p0_given) {
    if (!detail::known_modes().count(c.mode)) throw config_error("mode", "unknown mode '" + c.mode + "'");
    rational p0r;
    try {
        p0r = parse_rational(c.p0);
    } catch (const domain_error& e) {
        throw config_error("p0", e.what());
    }
    if (p0r <= rational(1)) throw config_error("p0", "p0 must exceed 1");
    if (!(std::isfinite(c.J)) || c.J == 0.0) throw config_error("J", "J must be a nonzero real");
    if (c.beta && !(*c.beta > 0 && std::isfinite(*c.beta))) throw config_error("beta", "beta must be positive");
    if (c.beta && c.beta_range) throw config_error("beta", "give either beta or beta_range, not both");
    if (c.N <= 0 || c.N % 2) throw config_error("N", "N must be even and positive");
    if (c.grid_points && (*c.grid_points < 33 || *c.grid_points % 2 == 0))
        throw config_error("grid_points", "must be odd and >= 33");
    if (c.grid_extent && !(*c.grid_extent >= 5.0)) throw config_error("grid_extent", "must be >= 5");
    if (c.tol && !(*c.tol > 0)) throw config_error("tol", "must be positive");
    if (c.threads < 0) throw config_error("threads", "must be >= 0");
    if (c.k.empty()) throw config_error("k", "at least one rank is needed");

    const std::string& m = c.mode;
    bool needs_beta = m == "free-energy" || m == "correlation" || m == "free-fermion" || m == "sweep";
    if (needs_beta && c.betas().empty()) throw config_error("beta", "mode '" + m + "' needs beta or beta_range");
    if (m == "sweep" && !c.beta_range) throw config_error("beta_range", "sweep needs a beta_range");

    if (m == "correlation" || m == "sweep") {
        bool integer = p0r.denominator() == 1;
        if (m == "correlation" && !(integer && p0r >= rational(3)))
            throw config_error("p0", "correlation lengths are only available for integer p0 >= 3 (unsupported domain)");
        if (m == "correlation" && !(c.J > 0))
            throw config_error("J", "correlation lengths are only available for J > 0 (unsupported domain)");
        for (int k : c.k)
            if (k != 2 && k != 3) throw config_error("k", "ranks must be 2 or 3");
    }
    if (m == "finite-check") {
        for (int k : c.k)
            if (k < 1 || k > 3) throw config_error("k", "ranks must be 1, 2 or 3");
        if (c.N < 4) throw config_error("N", "finite checks need N >= 4");
    }
    if (m == "free-fermion" && p0_given && p0r != rational(2))
        throw config_error("p0", "free-fermion mode is the p0 = 2 point");
    if ((m == "free-energy" || m == "sweep") && p0r == rational(2))
        throw config_error("p0", "p0 = 2 is handled by the free-fermion mode");
}

inline RunConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("", "configuration must be a JSON object");
    static const std::set<std::string> known{"mode", "p0", "J", "beta", "beta_range", "k", "N", "u",
                                             "grid_extent", "grid_points", "tol", "out", "threads"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw config_error(it.key(), "unknown key");
    RunConfig c;
    if (!j.contains("mode") || !j["mode"].is_string()) throw config_error("mode", "missing or not a string");
    c.mode = j["mode"].get<std::string>();
    bool p0_given = j.contains("p0");
    if (p0_given) {
        const auto& p = j["p0"];
        if (p.is_string())
            c.p0 = p.get<std::string>();
        else if (p.is_number_integer())
            c.p0 = std::to_string(p.get<long long>());
        else
            throw config_error("p0", "expected a \"num/den\" string or an integer");
    } else if (c.mode == "free-fermion") {
        c.p0 = "2";
    }
    if (j.contains("J")) c.J = detail::json_number(j["J"], "J");
    if (j.contains("beta")) c.beta = detail::json_number(j["beta"], "beta");
    if (j.contains("beta_range")) {
        const auto& r = j["beta_range"];
        if (r.is_string()) {
            c.beta_range = BetaRange::parse(r.get<std::string>());
        } else if (r.is_object()) {
            BetaRange b;
            for (auto it = r.begin(); it != r.end(); ++it) {
                const std::string& key = it.key();
                if (key == "start")
                    b.start = detail::json_number(*it, "beta_range.start");
                else if (key == "stop")
                    b.stop = detail::json_number(*it, "beta_range.stop");
                else if (key == "count")
                    b.count = detail::json_int(*it, "beta_range.count");
                else if (key == "geometric") {
                    if (!it->is_boolean()) throw config_error("beta_range.geometric", "expected true or false");
                    b.geometric = it->get<bool>();
                } else {
                    throw config_error("beta_range." + key, "unknown key");
                }
            }
            b.validate();
            c.beta_range = b;
        } else {
            throw config_error("beta_range", "expected \"a:b:n[:geom]\" or an object");
        }
    }
    if (j.contains("k")) {
        const auto& k = j["k"];
        c.k.clear();
        if (k.is_array()) {
            for (const auto& x : k) c.k.push_back(detail::json_int(x, "k"));
        } else {
            c.k.push_back(detail::json_int(k, "k"));
        }
    } else if (c.mode == "finite-check") {
        c.k = {1};
    }
    if (j.contains("N")) c.N = detail::json_int(j["N"], "N");
    if (j.contains("u")) c.u = detail::json_number(j["u"], "u");
    if (j.contains("grid_extent")) c.grid_extent = detail::json_number(j["grid_extent"], "grid_extent");
    if (j.contains("grid_points")) c.grid_points = detail::json_int(j["grid_points"], "grid_points");
    if (j.contains("tol")) c.tol = detail::json_number(j["tol"], "tol");
    if (j.contains("out")) {
        if (!j["out"].is_string()) throw config_error("out", "expected a path string");
        c.out = j["out"].get<std::string>();
    }
    if (j.contains("threads")) c.threads = detail::json_int(j["threads"], "threads");
    if (c.mode == "finite-check" && !c.beta && !c.u) c.beta = 1.0;
    validate_config(c, p0_given);
    return c;
}

inline RunConfig parse_config(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error("", std::string("JSON parse error: ") + e.what());
    }
    return parse_config(j);
}
inline RunConfig parse_config(const char* text) { return parse_config(std::string_view(text)); }
inline RunConfig parse_config(const std::string& text) { return parse_config(std::string_view(text)); }

namespace detail {

inline std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

// p0 < 2 is the negative-anisotropy side; it is run as (-J, p0/(p0-1))
inline std::pair<double, RationalP0> physical_point(const RunConfig& c, std::ostream& log) {
    rational r = parse_rational(c.p0);
    auto [J, p0] = canonicalize(c.J, r);
    if (r < rational(2))
        log << "note: p0 = " << c.p0 << " is run as p0 = " << p0.str() << " with J = " << J << "\n";
    return {J, p0};
}

inline NlieConfig nlie_config(const RunConfig& c) {
    NlieConfig n;
    if (c.tol) n.fp.tol = *c.tol;
    n.fp.max_iter = 5000;
    return n;
}

inline ExcitedConfig excited_config(const RunConfig& c) {
    ExcitedConfig e;
    if (c.tol) e.tol = *c.tol;
    return e;
}

inline void emit(const RunConfig& c, const CsvTable& t, std::ostream& log) {
    if (c.out.empty()) {
        t.write(log);
        return;
    }
    std::ofstream f(c.out);
    if (!f) throw config_error("out", "cannot open '" + c.out + "' for writing");
    t.write(f);
    log << "wrote " << t.rows().size() << " rows to " << c.out << "\n";
}

inline std::vector<std::string> free_energy_row(const EtaState& es, double beta, double J_user, bool with_t) {
    double f = free_energy(es);
    std::vector<std::string> r{csv_number(beta)};
    if (with_t) r.push_back(csv_number(1.0 / (beta * J_user)));
    r.push_back(csv_number(J_user));
    r.push_back(csv_number(es.mp.p0.num()));
    r.push_back(csv_number(es.mp.p0.den()));
    r.push_back(csv_number(f));
    r.push_back(csv_number(-beta * f));
    r.push_back(csv_number(es.iterations));
    r.push_back(csv_number(es.residual));
    return r;
}

inline std::vector<std::string> correlation_row(int p0, int k, double beta, double J, const Grid& grid,
                                                const ExcitedConfig& ec, const NlieConfig& nc, bool with_t) {
    ModelParams mp;
    mp.p0 = RationalP0(p0);
    mp.J = J;
    mp.beta = beta;
    ExcitedState ex = ExcitedSolver(p0, k, grid).solve(beta, J, ec);
    EtaState gs = GroundSolver(mp.p0, grid).solve(mp, nc);
    double xi = correlation_length(ex, gs);
    std::vector<std::string> r{csv_number(beta)};
    if (with_t) r.push_back(csv_number(1.0 / (beta * J)));
    r.push_back(csv_number(J));
    r.push_back(csv_number(p0));
    r.push_back(csv_number(k));
    r.push_back(csv_number(xi));
    r.push_back(csv_number(xi / beta));
    for (double z : ex.zeta) r.push_back(csv_number(z));
    r.push_back(csv_number(ex.iterations));
    r.push_back(csv_number(std::max(ex.residual, ex.zeta_residual)));
    return r;
}

// tasks run on a small pool; rows come back in task order so the output does not depend on scheduling
inline std::vector<std::vector<std::string>> run_pool(const std::vector<std::function<std::vector<std::string>()>>& tasks,
                                                     int threads) {
    std::vector<std::vector<std::string>> rows(tasks.size());
    std::vector<std::exception_ptr> errs(tasks.size());
    std::atomic<size_t> next{0};
    int nt = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    nt = std::max(1, std::min<int>(nt, static_cast<int>(tasks.size())));
    auto worker = [&]() {
        for (size_t i = next++; i < tasks.size(); i = next++) {
            try {
                rows[i] = tasks[i]();
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return rows;
}

inline int report_checks(const CheckReport& rep, const RunConfig& c, std::ostream& log, CsvTable* table) {
    log << rep.summary();
    if (table) {
        for (const auto& e : rep.entries)
            table->add_row({e.name, csv_number(e.max_residual), csv_number(e.tolerance), e.pass ? "1" : "0"});
    }
    (void)c;
    return rep.all_pass() ? exit_ok : exit_verification;
}

inline int run_ts_check(const RunConfig& c, std::ostream& log) {
    auto [J, p0] = physical_point(c, log);
    (void)J;
    TSSequences ts = build_sequences(p0);
    CheckReport rep = validate_sequences(ts, p0, false);
    log << "p0 = " << p0.str() << "  alpha = " << ts.alpha << "  j_max = " << ts.j_max << "\n";
    CsvTable t(check_columns());
    int code = report_checks(rep, c, log, &t);
    if (!c.out.empty()) emit(c, t, log);
    log << (code == exit_ok ? "ts-check: all pass\n" : "ts-check: FAILED\n");
    return code;
}

inline int run_finite_check(const RunConfig& c, std::ostream& log) {
    auto [J, p0] = physical_point(c, log);
    TSSequences ts = build_sequences(p0);
    CheckReport all;
    CsvTable zeros(zero_map_columns());
    for (int k : c.k) {
        TrotterParams tp = c.u ? TrotterParams::from_u(p0.theta(), c.N, *c.u)
                               : TrotterParams::from_physical(p0, J, *c.beta, c.N);
        int m = k == 2 ? c.N / 2 - 1 : c.N / 2;
        BetheState bs = solve_bae(tp, m, k);
        TEvaluator ev(bs, tp);
        auto samples = sample_points(p0.to_double(), 10);
        std::string pre = "k" + std::to_string(k) + ".";
        all.merge(verify_t_system(ev, ts, samples), pre);
        all.merge(verify_y_system(ev, ts, samples), pre);
        all.merge(verify_inversion(ev, ts, samples), pre);
        log << "k = " << k << ": N = " << c.N << ", u = " << tp.u << ", BAE residual " << bs.max_residual << "\n";
        int nmax = static_cast<int>(std::ceil(p0.to_double()));
        for (int n = 2; n <= nmax; ++n) {
            for (const Zero& z : locate_zeros(n, ev))
                zeros.add_row({csv_number(k), csv_number(n), csv_number(z.v.real()), csv_number(z.v.imag()),
                               csv_number(z.multiplicity)});
        }
    }
    int code = report_checks(all, c, log, nullptr);
    if (!c.out.empty()) emit(c, zeros, log);
    log << (code == exit_ok ? "finite-check: all relations pass\n" : "finite-check: FAILED\n");
    return code;
}

inline int run_free_energy(const RunConfig& c, std::ostream& log) {
    auto [J, p0] = physical_point(c, log);
    Grid grid = c.grid();
    GroundSolver solver(p0, grid);
    NlieConfig nc = nlie_config(c);
    CsvTable t(free_energy_columns());
    for (double beta : c.betas()) {
        ModelParams mp;
        mp.p0 = p0;
        mp.J = J;
        mp.beta = beta;
        EtaState es = solver.solve(mp, nc);
        auto row = free_energy_row(es, beta, c.J, false);
        log << "beta = " << beta << "  f = " << row[4] << "  -beta f = " << row[5] << "  (" << es.iterations
            << " iterations)\n";
        t.add_row(std::move(row));
    }
    emit(c, t, log);
    return exit_ok;
}

inline int run_correlation(const RunConfig& c, std::ostream& log) {
    const int p0 = static_cast<int>(parse_rational(c.p0).numerator());
    Grid grid = c.grid();
    ExcitedConfig ec = excited_config(c);
    NlieConfig nc = nlie_config(c);
    std::vector<std::function<std::vector<std::string>()>> tasks;
    for (double beta : c.betas())
        for (int k : c.k) tasks.push_back([=] { return correlation_row(p0, k, beta, c.J, grid, ec, nc, false); });
    auto rows = run_pool(tasks, c.threads);
    CsvTable t(correlation_columns(p0));
    for (auto& r : rows) {
        log << "beta = " << r[0] << "  k = " << r[3] << "  xi = " << r[4] << "  xi/beta = " << r[5] << "\n";
        t.add_row(std::move(r));
    }
    emit(c, t, log);
    return exit_ok;
}

inline int run_free_fermion(const RunConfig& c, std::ostream& log) {
    CsvTable t(free_fermion_columns());
    CheckReport rep;
    for (double beta : c.betas()) {
        FreeFermionParams p{c.J, beta};
        double f = ff_free_energy(p);
        t.add_row({csv_number(beta), csv_number(c.J), "2", "1", csv_number(f), csv_number(-beta * f),
                   csv_number(ff_inv_xi2(p)), csv_number(ff_inv_xi2_printed(p)), csv_number(ff_inv_xi3(p)), "0",
                   "0"});
        log << "beta = " << beta << "  f = " << csv_number(f) << "  1/xi2 = " << csv_number(ff_inv_xi2(p))
            << "  (printed form " << csv_number(ff_inv_xi2_printed(p)) << ")  1/xi3 = " << csv_number(ff_inv_xi3(p))
            << "\n";
        double u = TrotterParams::trotter_u(beta, c.J, std::numbers::pi / 2, c.N);
        for (int m : {c.N / 2, c.N / 2 - 1})
            rep.merge(ff_verify_identities(c.N, u, m, ff_sample_points(10)),
                      "beta=" + csv_number(beta) + ".m=" + std::to_string(m) + ".");
    }
    int code = report_checks(rep, c, log, nullptr);
    emit(c, t, log);
    return code;
}

inline int run_sweep(const RunConfig& c, std::ostream& log) {
    rational r = parse_rational(c.p0);
    bool correlations = r.denominator() == 1 && r >= rational(3) && c.J > 0;
    Grid grid = c.grid();
    NlieConfig nc = nlie_config(c);
    std::vector<std::function<std::vector<std::string>()>> tasks;
    std::unique_ptr<CsvTable> t;
    if (correlations) {
        const int p0 = static_cast<int>(r.numerator());
        ExcitedConfig ec = excited_config(c);
        for (double beta : c.betas())
            for (int k : c.k) tasks.push_back([=] { return correlation_row(p0, k, beta, c.J, grid, ec, nc, true); });
        t = std::make_unique<CsvTable>(correlation_columns(p0, true));
    } else {
        log << "sweep: correlation lengths need integer p0 >= 3 and J > 0; emitting free energies only\n";
        auto [J, p0] = physical_point(c, log);
        for (double beta : c.betas())
            tasks.push_back([=, p0 = p0, J = J] {
                ModelParams mp;
                mp.p0 = p0;
                mp.J = J;
                mp.beta = beta;
                return free_energy_row(GroundSolver(p0, grid).solve(mp, nc), beta, c.J, true);
            });
        t = std::make_unique<CsvTable>(free_energy_columns(true));
    }
    auto rows = run_pool(tasks, c.threads);
    for (auto& row : rows) t->add_row(std::move(row));
    log << "sweep: " << t->rows().size() << " points\n";
    emit(c, *t, log);
    return exit_ok;
}

}  // namespace detail

inline int run(const RunConfig& c, std::ostream& log) {
    try {
        validate_config(c, false);
        if (c.mode == "ts-check") return detail::run_ts_check(c, log);
        if (c.mode == "finite-check") return detail::run_finite_check(c, log);
        if (c.mode == "free-energy") return detail::run_free_energy(c, log);
        if (c.mode == "correlation") return detail::run_correlation(c, log);
        if (c.mode == "free-fermion") return detail::run_free_fermion(c, log);
        return detail::run_sweep(c, log);
    } catch (const config_error& e) {
        log << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const validation_error& e) {
        log << "verification failure (" << e.identity << "): " << e.what() << "\n";
        return exit_verification;
    } catch (const solver_error& e) {
        log << "solver failure: " << e.what() << " (last residual " << e.last_residual << ")\n";
        return exit_solver;
    } catch (const domain_error& e) {
        log << "unsupported input: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        log << "solver failure: " << e.what() << "\n";
        return exit_solver;
    }
}

}  // namespace qtmtba

#endif
