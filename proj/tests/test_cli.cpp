#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "qtmtba/run.hpp"

using namespace qtmtba;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("qtmtba_test_" + name)).string();
}

int cli(const std::string& args) {
    std::string cmd = std::string(QTMTBA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST(ParseConfig, MinimalConfigGetsDefaults) {
    auto c = parse_config(R"({"mode": "free-energy", "p0": "24/5", "J": 1.0, "beta": 2.0})");
    EXPECT_EQ(c.mode, "free-energy");
    EXPECT_EQ(c.p0, "24/5");
    EXPECT_EQ(c.N, 16);
    EXPECT_EQ(c.k, (std::vector<int>{2, 3}));
    EXPECT_EQ(c.grid().M, Grid{}.M);
    EXPECT_FALSE(c.tol.has_value());
    EXPECT_EQ(c.betas(), std::vector<double>{2.0});
}

TEST(ParseConfig, RejectsUnknownKeysWithFieldName) {
    try {
        parse_config(R"({"mode": "free-energy", "p0": "5", "beta": 1, "temprature": 3})");
        FAIL();
    } catch (const config_error& e) {
        EXPECT_EQ(e.field, "temprature");
    }
}

TEST(ParseConfig, RejectsBadRationalAndDomain) {
    EXPECT_THROW(parse_config(R"({"mode": "ts-check", "p0": "24/0"})"), config_error);
    EXPECT_THROW(parse_config(R"({"mode": "ts-check", "p0": "x"})"), config_error);
    EXPECT_THROW(parse_config(R"({"mode": "correlation", "p0": "2", "beta": 1})"), config_error);
    EXPECT_THROW(parse_config(R"({"mode": "correlation", "p0": "24/5", "beta": 1})"), config_error);
    EXPECT_THROW(parse_config(R"({"mode": "correlation", "p0": "5", "J": -1, "beta": 1})"), config_error);
    EXPECT_THROW(parse_config(R"({"mode": "free-energy", "p0": "5", "beta": -1})"), config_error);
    EXPECT_THROW(parse_config(R"({"mode": "free-energy", "p0": "5"})"), config_error);
    EXPECT_THROW(parse_config(R"({"mode": "finite-check", "p0": "5", "N": 7})"), config_error);
    EXPECT_THROW(parse_config(R"({"mode": "bogus"})"), config_error);
    EXPECT_THROW(parse_config("{not json"), config_error);
}

TEST(ParseConfig, BetaRangeForms) {
    auto r = BetaRange::parse("0.5:50:12:geom");
    auto v = r.values();
    ASSERT_EQ(v.size(), 12u);
    EXPECT_DOUBLE_EQ(v.front(), 0.5);
    EXPECT_NEAR(v.back(), 50.0, 1e-12);
    EXPECT_NEAR(v[1] / v[0], v[2] / v[1], 1e-12);
    auto lin = BetaRange::parse("1:3:3").values();
    EXPECT_EQ(lin, (std::vector<double>{1.0, 2.0, 3.0}));
    EXPECT_THROW(BetaRange::parse("1:3"), config_error);
    EXPECT_THROW(BetaRange::parse("1:3:2:log"), config_error);
    auto c = parse_config(R"({"mode": "sweep", "p0": "5", "beta_range": {"start": 1, "stop": 4, "count": 3}})");
    EXPECT_EQ(c.betas().size(), 3u);
}

TEST(Run, FreeFermionRowHasClosedFormXiThree) {
    RunConfig c = parse_config(R"({"mode": "free-fermion", "beta": 3.141592653589793, "N": 8})");
    std::ostringstream os;
    EXPECT_EQ(run(c, os), exit_ok);
    std::string out = os.str();
    EXPECT_NE(out.find("#schema=1"), std::string::npos);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", 2.0 * std::asinh(1.0));
    EXPECT_NE(out.find(buf), std::string::npos) << out;
}

TEST(Run, TsCheckPasses) {
    RunConfig c = parse_config(R"({"mode": "ts-check", "p0": "24/5"})");
    std::ostringstream os;
    EXPECT_EQ(run(c, os), exit_ok);
    EXPECT_NE(os.str().find("all pass"), std::string::npos);
}

TEST(Run, FiniteCheckWritesZeroMap) {
    std::string path = tmp_path("zeros.csv");
    RunConfig c = parse_config(R"({"mode": "finite-check", "p0": "5", "N": 8, "k": [1, 3], "beta": 1})");
    c.out = path;
    std::ostringstream os;
    EXPECT_EQ(run(c, os), exit_ok) << os.str();
    std::string csv = slurp(path);
    EXPECT_EQ(csv.rfind("#schema=1\nk,n,re_v,im_v,multiplicity\n", 0), 0u);
    std::filesystem::remove(path);
}

TEST(Run, SweepIsDeterministic) {
    std::string a = tmp_path("sweep_a.csv"), b = tmp_path("sweep_b.csv");
    RunConfig c = parse_config(R"({"mode": "sweep", "p0": "24/5", "beta_range": "0.5:4:4:geom", "threads": 3})");
    std::ostringstream os;
    c.out = a;
    EXPECT_EQ(run(c, os), exit_ok);
    c.out = b;
    c.threads = 1;
    EXPECT_EQ(run(c, os), exit_ok);
    std::string sa = slurp(a);
    EXPECT_EQ(sa, slurp(b));
    EXPECT_NE(sa.find("beta,T_over_J,J,p0_num,p0_den,f,minus_beta_f,iterations,residual"), std::string::npos);
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST(Run, NegativeAnisotropyIsMapped) {
    RunConfig c = parse_config(R"({"mode": "free-energy", "p0": "5/4", "beta": 1})");
    std::ostringstream os;
    EXPECT_EQ(run(c, os), exit_ok);
    EXPECT_NE(os.str().find("run as p0 = 5"), std::string::npos);
}

TEST(Binary, ExitCodes) {
    EXPECT_EQ(cli("--mode ts-check --p0 24/5"), 0);
    EXPECT_EQ(cli("--mode ts-check --p0 24/0"), 1);
    EXPECT_EQ(cli("--mode correlation --p0 2 --beta 1"), 1);
    EXPECT_EQ(cli("--mode free-energy --p0 5"), 1);
    EXPECT_EQ(cli("--config /nonexistent/config.json"), 1);
    std::string cfg = tmp_path("cfg.json");
    {
        std::ofstream f(cfg);
        f << R"({"mode": "free-fermion", "beta": 2.0, "N": 4})";
    }
    EXPECT_EQ(cli("--config " + cfg), 0);
    // flags override the file
    EXPECT_EQ(cli("--config " + cfg + " --mode correlation --p0 2"), 1);
    std::filesystem::remove(cfg);
}
