#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "entrodiff/cli/commands.hpp"
#include "entrodiff/cli/io.hpp"

using namespace entrodiff::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("entrodiff-cli-test") / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text, const std::string& name = "exp.cfg") {
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "entrodiff");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = run_cli(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

const std::string kSmall = "system.alpha = 1, 1\nsystem.d = 0, 1, 1\ngrid.n = 32\nstepper.dt = 2e-3\n"
                           "stepper.t_end = 6\nstepper.sample_every = 5\n";

} // namespace

TEST_CASE("run writes the trajectory, summary and plot script") {
    auto dir = scratch("run");
    auto cfg = write_config(dir, kSmall + "output.plot = true\n");
    auto r = cli({"run", "--config", cfg.string(), "--out", (dir / "o").string()});
    CHECK(r.code == kAllPassed);
    const std::string csv = slurp(dir / "o" / "trajectory.csv");
    const std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header == "t,E,E_rel,D,D_lower_rhs,M_1,M_2,sup_1,sup_2,sup_3,l1dist_1,l1dist_2,l1dist_3,"
                    "delta2_1,delta2_2,delta2_3,defect");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 1 + 3000 / 5);
    const std::string summary = slurp(dir / "o" / "summary.txt");
    CHECK(summary.find("equilibrium: 1,1,1") != std::string::npos);
    CHECK(summary.find("samples: 601") != std::string::npos);
    CHECK(r.out == summary);
    const std::string plot = slurp(dir / "o" / "plot.gp");
    CHECK(plot.find("trajectory.csv") != std::string::npos);
    auto quiet = cli({"run", "--config", cfg.string(), "--out", (dir / "q").string(), "--quiet"});
    CHECK(quiet.out.empty());
}

TEST_CASE("repeated runs produce byte-identical CSV") {
    auto dir = scratch("determinism");
    auto cfg = write_config(dir, kSmall + "initial.preset = random-smooth\ninitial.seed = 5\n");
    CHECK(cli({"run", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
    CHECK(cli({"run", "--config", cfg.string(), "--out", (dir / "b").string()}).code == 0);
    CHECK(cli({"run", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "6"}).code == 0);
    const auto a = slurp(dir / "a" / "trajectory.csv"), b = slurp(dir / "b" / "trajectory.csv");
    CHECK(!a.empty());
    CHECK(a == b);
    CHECK(a != slurp(dir / "c" / "trajectory.csv"));
}

TEST_CASE("check exit codes") {
    auto dir = scratch("check");
    auto ok = write_config(dir, kSmall + "checks.t_start = 1\n", "ok.cfg");
    auto r = cli({"check", "--config", ok.string(), "--out", (dir / "ok").string()});
    CHECK(r.code == kAllPassed);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("mass_conservation") != std::string::npos);
    CHECK(r.out.find("SKIP") != std::string::npos); // closeness without constants
    const std::string report = slurp(dir / "ok" / "check_report.txt");
    CHECK(report.find("all_passed: true") != std::string::npos);
    CHECK(report.find("entropy_lower_bound_constant.C_LE: ") != std::string::npos);

    auto tight = write_config(dir, kSmall + "checks.select = energy\nchecks.energy_rel_tol = 1e-9\n", "tight.cfg");
    auto f = cli({"check", "--config", tight.string(), "--out", (dir / "tight").string()});
    CHECK(f.code == kCheckFailed);
    CHECK(f.out.find("FAIL") != std::string::npos);

    auto close = write_config(dir, kSmall + "checks.select = closeness\nchecks.c_prc = 1\nchecks.c_sor = 1\n"
                                            "system.d = 0, 1, 4\n",
                              "close.cfg");
    CHECK(cli({"check", "--config", close.string(), "--out", (dir / "close").string()}).code == kConfigError);
    auto close2 = write_config(dir, std::string("system.alpha = 1, 1\nsystem.d = 0, 1, 4\ngrid.n = 16\n"
                                                "stepper.t_end = 0.1\nchecks.select = closeness\n"
                                                "checks.c_prc = 1\nchecks.c_sor = 1\n"),
                               "close2.cfg");
    auto c2 = cli({"check", "--config", close2.string(), "--out", (dir / "close2").string()});
    CHECK(c2.code == kCheckFailed);
    auto close3 = write_config(dir, std::string("system.alpha = 1, 1\nsystem.d = 0, 1, 1.5\ngrid.n = 16\n"
                                                "stepper.t_end = 0.1\nchecks.select = closeness\n"
                                                "checks.c_prc = 1\nchecks.c_sor = 1\n"),
                               "close3.cfg");
    CHECK(cli({"check", "--config", close3.string(), "--out", (dir / "close3").string()}).code == kAllPassed);
}

TEST_CASE("check on a stored trajectory") {
    auto dir = scratch("stored");
    auto cfg = write_config(dir, kSmall + "checks.t_start = 1\n");
    REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "o").string()}).code == 0);
    auto r = cli({"check", "--config", cfg.string(), "--out", (dir / "chk").string(), "--trajectory",
                  (dir / "o" / "trajectory.csv").string()});
    CHECK(r.code == kAllPassed);
    CHECK(r.out.find("entropy_dissipation_bound_constant   SKIP") != std::string::npos);
    auto missing = cli({"check", "--config", cfg.string(), "--out", (dir / "chk").string(), "--trajectory",
                        (dir / "nope.csv").string()});
    CHECK(missing.code == kConfigError);
}

TEST_CASE("configuration and numerical failures map to exit codes") {
    auto dir = scratch("codes");
    auto bad = write_config(dir, "system.alpha = 0, 1\nsystem.d = 0, 1, 1\n", "bad.cfg");
    auto r = cli({"run", "--config", bad.string(), "--out", (dir / "o").string()});
    CHECK(r.code == kConfigError);
    CHECK(r.err.find("system.alpha") != std::string::npos);
    CHECK(r.err.find("line 1") != std::string::npos);
    CHECK(cli({"run", "--config", (dir / "missing.cfg").string()}).code == kConfigError);
    CHECK(cli({"run"}).code == kConfigError);
    CHECK(cli({"bogus", "--config", bad.string()}).code == kConfigError);
    auto help = cli({"--help"});
    CHECK(help.code == kAllPassed);
    CHECK(help.out.find("equilibrium") != std::string::npos);

    auto stiff = write_config(dir, "system.alpha = 4, 4\nsystem.d = 1, 1, 0\ngrid.n = 8\nstepper.dt = 1\n"
                                   "stepper.t_end = 2\nstepper.max_substeps = 2\ninitial.masses = 20, 20\n",
                              "stiff.cfg");
    auto s = cli({"run", "--config", stiff.string(), "--out", (dir / "s").string()});
    CHECK(s.code == kNumericalFailure);
    CHECK(s.err.find("cell") != std::string::npos);
}

TEST_CASE("equilibrium and fit subcommands") {
    auto dir = scratch("eqfit");
    auto cfg = write_config(dir, kSmall);
    auto e = cli({"equilibrium", "--config", cfg.string()});
    CHECK(e.code == 0);
    CHECK(e.out.find("a_inf_1: 1\n") != std::string::npos);
    CHECK(e.out.find("a_inf_3: 1\n") != std::string::npos);
    CHECK(e.out.find("f_residual: 0\n") != std::string::npos);

    auto cubic = write_config(dir, "system.alpha = 2, 1\nsystem.d = 1, 1, 0\n", "cubic.cfg");
    auto c = cli({"equilibrium", "--config", cubic.string()});
    CHECK(c.out.find("a_inf_2: 1\n") != std::string::npos);

    REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "o").string()}).code == 0);
    auto f = cli({"fit", "--config", cfg.string(), "--out", (dir / "o").string(), "--gamma", "0.45"});
    CHECK(f.code == 0);
    CHECK(f.out.find("gamma: 0.45") != std::string::npos);
    const auto pos = f.out.find("lambda2: ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(f.out.substr(pos + 9)) > 0);
    auto f2 = cli({"fit", "--config", cfg.string(), "--trajectory", (dir / "o" / "trajectory.csv").string()});
    CHECK(f2.code == 0);
}

TEST_CASE("sweep output does not depend on the number of jobs") {
    auto dir = scratch("sweep");
    auto cfg = write_config(dir, std::string("system.alpha = 1, 1\nsystem.d = 0, 1, 1\ngrid.n = 16\n"
                                             "stepper.dt = 5e-3\nstepper.t_end = 4\nchecks.t_start = 1\n"
                                             "sweep.system.d = 0,1,1 | 1,1,0\nsweep.grid.n = 16 | 24\n"));
    auto one = cli({"sweep", "--config", cfg.string(), "--out", (dir / "one").string(), "--quiet"});
    auto two = cli({"sweep", "--config", cfg.string(), "--out", (dir / "two").string(), "--jobs", "3", "--quiet"});
    CHECK(one.code == two.code);
    const auto table = slurp(dir / "one" / "sweep.csv");
    CHECK(table == slurp(dir / "two" / "sweep.csv"));
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
    CHECK(table.substr(0, table.find('\n')) == "run,grid.n,system.d,lambda2,r_squared,mu_emp,C_hat,C_LE,all_passed,error");
    for (int k = 0; k < 4; ++k) {
        const fs::path run = dir / "one" / ("run_00" + std::to_string(k));
        CHECK(fs::exists(run / "trajectory.csv"));
        CHECK(fs::exists(run / "check_report.txt"));
        CHECK(slurp(run / "trajectory.csv") == slurp(dir / "two" / ("run_00" + std::to_string(k)) / "trajectory.csv"));
    }
    CHECK(cli({"sweep", "--config", cfg.string(), "--jobs", "0"}).code == kConfigError);
}

TEST_CASE("output directory precedence") {
    auto dir = scratch("precedence");
    ExperimentConfig cfg = parse_config(kSmall);
    CommandOptions opts;
    ::unsetenv("ENTRODIFF_OUT");
    CHECK(resolve_out_dir(cfg, opts) == "entrodiff-out");
    ::setenv("ENTRODIFF_OUT", (dir / "env").c_str(), 1);
    CHECK(resolve_out_dir(cfg, opts) == (dir / "env").string());
    cfg.output.dir = (dir / "cfg").string();
    CHECK(resolve_out_dir(cfg, opts) == (dir / "cfg").string());
    opts.out_dir = (dir / "flag").string();
    CHECK(resolve_out_dir(cfg, opts) == (dir / "flag").string());
    cfg.output.dir.reset();
    auto q = write_config(dir, "system.alpha = 1, 1\nsystem.d = 0, 1, 1\ngrid.n = 16\nstepper.t_end = 0.1\n", "q.cfg");
    CHECK(cli({"run", "--config", q.string(), "--quiet"}).code == 0);
    CHECK(fs::exists(dir / "env" / "trajectory.csv"));
    ::unsetenv("ENTRODIFF_OUT");
}
