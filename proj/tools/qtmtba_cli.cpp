#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "qtmtba/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"qtmtba: XXZ chain thermodynamics and correlation lengths from nonlinear integral equations"};
    std::string config_path, mode, p0, beta_range, k_list, out;
    double J = 0, beta = 0, grid_extent = 0, tol = 0;
    int N = 0, grid_points = 0, threads = 0;

    app.add_option("--config", config_path, "JSON configuration file");
    auto* o_mode = app.add_option("--mode", mode, "ts-check | finite-check | free-energy | correlation | free-fermion | sweep");
    auto* o_p0 = app.add_option("--p0", p0, "anisotropy parameter as num/den");
    auto* o_J = app.add_option("--J", J, "exchange coupling");
    auto* o_beta = app.add_option("--beta", beta, "inverse temperature");
    auto* o_range = app.add_option("--beta-range", beta_range, "a:b:n[:geom]");
    auto* o_k = app.add_option("--k", k_list, "comma-separated ranks, e.g. 2,3");
    auto* o_N = app.add_option("--N", N, "Trotter number for finite checks");
    auto* o_ge = app.add_option("--grid-extent", grid_extent, "half-width of the rapidity grid");
    auto* o_gp = app.add_option("--grid-points", grid_points, "number of grid points (odd)");
    auto* o_tol = app.add_option("--tol", tol, "solver tolerance");
    auto* o_out = app.add_option("--out", out, "CSV output path (stdout if empty)");
    auto* o_threads = app.add_option("--threads", threads, "worker threads for sweeps (0 = hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : qtmtba::exit_config;
    }

    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) {
            std::cerr << "config error: cannot read " << config_path << "\n";
            return qtmtba::exit_config;
        }
        std::stringstream ss;
        ss << f.rdbuf();
        try {
            j = nlohmann::json::parse(ss.str());
        } catch (const nlohmann::json::parse_error& e) {
            std::cerr << "config error: " << config_path << ": " << e.what() << "\n";
            return qtmtba::exit_config;
        }
    }

    // flags override the file
    if (*o_mode) j["mode"] = mode;
    if (*o_p0) j["p0"] = p0;
    if (*o_J) j["J"] = J;
    if (*o_beta) {
        j["beta"] = beta;
        j.erase("beta_range");
    }
    if (*o_range) {
        j["beta_range"] = beta_range;
        j.erase("beta");
    }
    if (*o_k) {
        nlohmann::json ks = nlohmann::json::array();
        std::stringstream ss(k_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                ks.push_back(std::stoi(item));
            } catch (const std::exception&) {
                std::cerr << "config error: k: '" << item << "' is not an integer\n";
                return qtmtba::exit_config;
            }
        }
        j["k"] = ks;
    }
    if (*o_N) j["N"] = N;
    if (*o_ge) j["grid_extent"] = grid_extent;
    if (*o_gp) j["grid_points"] = grid_points;
    if (*o_tol) j["tol"] = tol;
    if (*o_out) j["out"] = out;
    if (*o_threads) j["threads"] = threads;

    qtmtba::RunConfig cfg;
    try {
        cfg = qtmtba::parse_config(j);
    } catch (const qtmtba::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return qtmtba::exit_config;
    }
    return qtmtba::run(cfg, std::cout);
}
