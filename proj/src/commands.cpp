#include "entrodiff/cli/commands.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "entrodiff/cli/io.hpp"

namespace entrodiff::cli {
namespace fs = std::filesystem;

namespace {

bool selected(const ExperimentConfig& cfg, const std::string& name) {
    for (const auto& s : cfg.checks.select)
        if (s == "all" || s == name) return true;
    return false;
}

CheckReport skipped(const std::string& name, const std::string& why) {
    CheckReport r{.name = name, .passed = true, .degenerate = true};
    r.details = "skipped: " + why;
    return r;
}

std::string join_doubles(const Vector<double>& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

fs::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("output.dir", 0, "cannot create '" + dir + "': " + ec.message());
    return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("output.dir", 0, "cannot write '" + path.string() + "'");
    os << text;
}

std::string report_table(const std::vector<CheckReport>& reports) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-36s %-8s %14s %14s %12s\n", "check", "status", "value", "margin", "worst_t");
    os << line;
    for (const auto& r : reports) {
        const char* status = r.degenerate ? (r.details.rfind("skipped", 0) == 0 ? "SKIP" : "DEGEN") : (r.passed ? "PASS" : "FAIL");
        std::snprintf(line, sizeof line, "%-36s %-8s %14.6g %14.6g %12.6g\n", r.name.c_str(), status, r.value, r.margin,
                      r.worst_time);
        os << line;
    }
    return os.str();
}

std::string report_summary(const std::vector<CheckReport>& reports) {
    std::ostringstream os;
    std::vector<std::pair<std::string, std::string>> e;
    bool all = true;
    for (const auto& r : reports) {
        all = all && r.passed;
        e.emplace_back(r.name + ".passed", r.passed ? "true" : "false");
        e.emplace_back(r.name + ".degenerate", r.degenerate ? "true" : "false");
        e.emplace_back(r.name + ".value", format_double(r.value));
        e.emplace_back(r.name + ".margin", format_double(r.margin));
        e.emplace_back(r.name + ".worst_time", format_double(r.worst_time));
        for (const auto& [k, v] : r.constants) e.emplace_back(r.name + "." + k, format_double(v));
        e.emplace_back(r.name + ".details", r.details);
    }
    e.emplace_back("all_passed", all ? "true" : "false");
    write_summary(os, e);
    return os.str();
}

bool all_passed(const std::vector<CheckReport>& reports) {
    for (const auto& r : reports)
        if (!r.passed) return false;
    return true;
}

std::string plot_script(const std::string& csv) {
    std::ostringstream os;
    os << "# gnuplot script; columns follow the trajectory CSV header\n"
       << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set logscale y\n"
       << "set xlabel 't'\n"
       << "plot '" << csv << "' using 1:3 with lines title 'E_rel', \\\n"
       << "     '" << csv << "' using 1:4 with lines title 'D', \\\n"
       << "     '" << csv << "' using 1:5 with lines title 'D lower bound'\n";
    return os.str();
}

TrajectoryRecord<double> simulate(const ExperimentConfig& cfg) {
    return run(cfg.system(), cfg.grid(), cfg.stepper(), cfg.initial_state(), cfg.t_end, cfg.sample_every);
}

std::vector<std::pair<std::string, std::string>> run_summary(const ExperimentConfig& cfg,
                                                             const TrajectoryRecord<double>& tr,
                                                             const std::string& csv_path) {
    const auto& last = tr.samples.back();
    std::vector<std::pair<std::string, std::string>> e{
        {"m", std::to_string(cfg.m())},
        {"alpha", join_doubles(Eigen::Map<const Eigen::VectorXi>(tr.spec.alpha.data(), tr.spec.m).cast<double>())},
        {"d", join_doubles(tr.spec.d)},
        {"grid.dim", std::to_string(tr.grid.dim())},
        {"grid.volume", format_double(tr.grid.volume())},
        {"poincare", format_double(tr.poincare)},
        {"equilibrium", join_doubles(tr.eq.a_inf)},
        {"masses", join_doubles(tr.samples.front().masses)},
        {"samples", std::to_string(tr.samples.size())},
        {"t_final", format_double(last.t)},
        {"E_final", format_double(last.E)},
        {"E_rel_final", format_double(last.E_rel)},
        {"D_final", format_double(last.D)},
        {"csv", csv_path},
    };
    return e;
}

} // namespace

std::string resolve_out_dir(const ExperimentConfig& cfg, const CommandOptions& opts) {
    if (opts.out_dir) return *opts.out_dir;
    if (cfg.output.dir) return *cfg.output.dir;
    if (const char* env = std::getenv("ENTRODIFF_OUT"); env && *env) return env;
    return "entrodiff-out";
}

TrajectoryRecord<double> load_trajectory(const ExperimentConfig& cfg, const std::string& path) {
    TrajectoryRecord<double> tr;
    tr.spec = cfg.system();
    tr.grid = cfg.grid();
    tr.poincare = poincare_constant(tr.grid);
    tr.samples = read_trajectory_csv(path);
    if (tr.samples.empty()) throw ConfigError("", 0, "trajectory '" + path + "' has no samples");
    if (tr.samples.front().sup.size() != tr.spec.m)
        throw ConfigError("system.d", 0, "trajectory species count does not match the configuration");
    tr.eq = solve_equilibrium(tr.samples.front().masses, tr.grid.volume(), tr.spec.reactant_alpha());
    return tr;
}

std::vector<CheckReport> run_checks(const ExperimentConfig& cfg, const TrajectoryRecord<double>& tr) {
    const auto& c = cfg.checks;
    std::vector<CheckReport> out;
    if (selected(cfg, "mass")) out.push_back(check_mass_conservation(tr, c.mass_tol));
    if (selected(cfg, "entropy")) out.push_back(check_entropy_monotone(tr, c.entropy_tol));
    if (selected(cfg, "energy")) out.push_back(check_energy_balance(tr, c.energy_rel_tol, c.energy_d_floor));
    if (selected(cfg, "dissipation")) out.push_back(check_dissipation_lower(tr, tr.poincare, c.dissipation_slack));
    if (selected(cfg, "missing_term")) {
        if (tr.spec.degenerate_index) out.push_back(fit_missing_term_constant(tr, cfg.effective_weight_exponent()));
        else out.push_back(skipped("missing_term_constant", "every species diffuses"));
    }
    if (selected(cfg, "decay")) {
        CheckReport r{.name = "subexponential_decay"};
        try {
            const auto fit = fit_subexponential_decay(tr, cfg.effective_gamma(), cfg.effective_t_start());
            r.value = fit.lambda2;
            r.constants = {{"gamma", fit.gamma_exponent}, {"lambda1", fit.lambda1}, {"lambda2", fit.lambda2},
                           {"r_squared", fit.r_squared}, {"t_start", fit.t_start}, {"t_end", fit.t_end},
                           {"points", double(fit.points)}};
            r.margin = std::min(fit.lambda2, fit.r_squared - c.decay_r2_min);
            r.passed = fit.lambda2 > 0 && fit.r_squared > c.decay_r2_min;
            r.worst_time = fit.t_end;
            r.details = "ln E_rel ~ ln lambda1 - lambda2 (1+t)^gamma";
        } catch (const DomainError& e) {
            r.margin = -1;
            r.details = e.what();
        }
        out.push_back(r);
    }
    if (selected(cfg, "growth")) out.push_back(fit_polynomial_growth(tr, cfg.effective_mu_theory(), c.mu_slack));
    if (selected(cfg, "l1")) out.push_back(check_l1_convergence(tr, c.l1_threshold, cfg.effective_t_check()));
    if (selected(cfg, "ckp")) {
        out.push_back(check_ckp_random_pairs(tr.grid, 1000, cfg.initial.seed));
        out.push_back(fit_ckp_constant(tr, c.ckp_stability));
    }
    if (selected(cfg, "ceb")) {
        if (tr.samples.front().has_means) out.push_back(fit_entropy_dissipation_bound_constant(tr));
        else out.push_back(skipped("entropy_dissipation_bound_constant", "species means not stored in CSV"));
    }
    if (selected(cfg, "closeness")) {
        if (!c.c_prc || !c.c_sor) {
            out.push_back(skipped("closeness", "checks.c_prc and checks.c_sor not given"));
        } else {
            const int m = tr.spec.m;
            const double dm = tr.spec.d[m - 1];
            CheckReport r{.name = "closeness"};
            bool any_pair = false;
            double best = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < m - 1 && dm > 0; ++i) {
                if (tr.spec.d[i] == 0) continue;
                const auto cr = closeness_check(double(tr.spec.d[i]), dm, *c.c_prc, *c.c_sor);
                any_pair = true;
                const double margin = std::min(cr.margin_left, cr.margin_right);
                if (margin > best) {
                    best = margin;
                    r.constants["species"] = i + 1;
                    r.constants["margin_left"] = cr.margin_left;
                    r.constants["margin_right"] = cr.margin_right;
                }
            }
            if (!any_pair) {
                r = skipped("closeness", "needs d_m > 0 and another diffusing species");
            } else {
                r.value = best;
                r.margin = best;
                r.passed = best > 0;
                r.details = "best species pair against d_m";
            }
            out.push_back(r);
        }
    }
    if (selected(cfg, "gamma_bound")) out.push_back(check_gamma_bound());
    if (selected(cfg, "algebraic")) out.push_back(check_algebraic_inequality(100000, cfg.initial.seed));
    return out;
}

int cmd_run(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
    const fs::path dir = prepare_dir(resolve_out_dir(cfg, opts));
    const auto tr = simulate(cfg);
    const fs::path csv = dir / cfg.output.csv;
    write_trajectory_csv(csv.string(), tr);
    std::ostringstream summary;
    write_summary(summary, run_summary(cfg, tr, csv.string()));
    write_text(dir / cfg.output.summary, summary.str());
    if (cfg.output.plot) write_text(dir / "plot.gp", plot_script(cfg.output.csv));
    if (!opts.quiet) out << summary.str();
    return kAllPassed;
}

int cmd_check(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
    const fs::path dir = prepare_dir(resolve_out_dir(cfg, opts));
    TrajectoryRecord<double> tr;
    if (opts.trajectory) {
        tr = load_trajectory(cfg, *opts.trajectory);
    } else {
        tr = simulate(cfg);
        write_trajectory_csv((dir / cfg.output.csv).string(), tr);
    }
    const auto reports = run_checks(cfg, tr);
    write_text(dir / "check_report.txt", report_summary(reports));
    if (!opts.quiet) out << report_table(reports);
    return all_passed(reports) ? kAllPassed : kCheckFailed;
}

int cmd_equilibrium(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
    const auto spec = cfg.system();
    const auto grid = cfg.grid();
    const auto masses = conserved_masses(cfg.initial_state(), grid);
    const auto eq = solve_equilibrium(masses, grid.volume(), spec.reactant_alpha());
    const double residual = equilibrium_f(eq.a_inf[spec.m - 1], masses, grid.volume(), spec.reactant_alpha());
    const Vector<double> rates = reaction_rates(eq.a_inf, spec);
    std::vector<std::pair<std::string, std::string>> e{{"masses", join_doubles(masses)},
                                                       {"volume", format_double(grid.volume())}};
    for (int i = 0; i < spec.m; ++i) e.emplace_back("a_inf_" + std::to_string(i + 1), format_double(eq.a_inf[i]));
    e.emplace_back("f_residual", format_double(residual));
    e.emplace_back("rate_residual", format_double(rates.cwiseAbs().maxCoeff()));
    (void)opts;
    write_summary(out, e);
    return kAllPassed;
}

int cmd_fit(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
    const std::string path =
        opts.trajectory ? *opts.trajectory : (fs::path(resolve_out_dir(cfg, opts)) / cfg.output.csv).string();
    const auto tr = load_trajectory(cfg, path);
    const double gamma = opts.gamma ? *opts.gamma : cfg.effective_gamma();
    const auto fit = fit_subexponential_decay(tr, gamma, cfg.effective_t_start());
    write_summary(out, {{"gamma", format_double(fit.gamma_exponent)},
                        {"lambda1", format_double(fit.lambda1)},
                        {"lambda2", format_double(fit.lambda2)},
                        {"r_squared", format_double(fit.r_squared)},
                        {"t_start", format_double(fit.t_start)},
                        {"t_end", format_double(fit.t_end)},
                        {"points", std::to_string(fit.points)}});
    return kAllPassed;
}

int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
    const fs::path dir = prepare_dir(resolve_out_dir(cfg, opts));
    const auto members = expand_sweep(cfg);

    struct Row {
        std::vector<CheckReport> reports;
        std::string error;
        int code = kAllPassed;
    };
    std::vector<Row> rows(members.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < members.size(); k = next++) {
            char name[32];
            std::snprintf(name, sizeof name, "run_%03zu", k);
            try {
                const fs::path sub = prepare_dir((dir / name).string());
                const auto tr = simulate(members[k]);
                write_trajectory_csv((sub / members[k].output.csv).string(), tr);
                rows[k].reports = run_checks(members[k], tr);
                write_text(sub / "check_report.txt", report_summary(rows[k].reports));
                write_text(sub / "config.txt", serialize_config(members[k]));
                rows[k].code = all_passed(rows[k].reports) ? kAllPassed : kCheckFailed;
            } catch (const ConfigError& e) {
                rows[k].error = e.what();
                rows[k].code = kConfigError;
            } catch (const std::exception& e) {
                rows[k].error = e.what();
                rows[k].code = kNumericalFailure;
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(opts.jobs, int(members.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    auto constant = [](const std::vector<CheckReport>& reps, const std::string& check, const std::string& key) {
        for (const auto& r : reps)
            if (r.name == check) {
                auto it = r.constants.find(key);
                if (it != r.constants.end()) return format_double(it->second);
            }
        return std::string("nan");
    };

    std::ostringstream table;
    table << "run";
    for (const auto& [key, _] : cfg.sweep) table << "," << key;
    table << ",lambda2,r_squared,mu_emp,C_hat,C_LE,all_passed,error\n";
    int worst = kAllPassed;
    for (std::size_t k = 0; k < members.size(); ++k) {
        table << k;
        for (const auto& [key, values] : cfg.sweep) {
            std::size_t stride = 1;
            for (auto it = cfg.sweep.rbegin(); it->first != key; ++it) stride *= it->second.size();
            table << ",\"" << values[(k / stride) % values.size()] << "\"";
        }
        const auto& reps = rows[k].reports;
        table << "," << constant(reps, "subexponential_decay", "lambda2") << ","
              << constant(reps, "subexponential_decay", "r_squared") << "," << constant(reps, "polynomial_growth", "mu_emp")
              << "," << constant(reps, "missing_term_constant", "C_hat") << ","
              << constant(reps, "entropy_lower_bound_constant", "C_LE") << ","
              << (rows[k].code == kAllPassed ? "true" : "false") << ",\"" << rows[k].error << "\"\n";
        worst = std::max(worst, rows[k].code);
    }
    write_text(dir / "sweep.csv", table.str());
    if (!opts.quiet) out << table.str();
    return worst;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"entrodiff: degenerate triangular reaction-diffusion laboratory"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    CommandOptions opts;
    std::optional<long long> seed;
    app.add_option("--config", config_path, "experiment configuration file")->required();
    app.add_option("--out", opts.out_dir, "output directory");
    app.add_option("--gamma", opts.gamma, "decay exponent for fit");
    app.add_option("--seed", seed, "initial-condition seed override");
    app.add_option("--jobs", opts.jobs, "concurrent sweep members")->check(CLI::PositiveNumber);
    app.add_option("--trajectory", opts.trajectory, "stored trajectory CSV for check/fit");
    app.add_flag("--quiet", opts.quiet, "suppress tables on stdout");
    auto* run_cmd = app.add_subcommand("run", "simulate and write trajectory CSV + summary");
    auto* check_cmd = app.add_subcommand("check", "run the checker suite; exit 0 iff all pass");
    auto* eq_cmd = app.add_subcommand("equilibrium", "print the equilibrium state and f residual");
    auto* fit_cmd = app.add_subcommand("fit", "fit sub-exponential decay to a stored trajectory");
    auto* sweep_cmd = app.add_subcommand("sweep", "run the sweep grid and aggregate fitted exponents");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kAllPassed : kConfigError;
    }

    try {
        std::ifstream is(config_path, std::ios::binary);
        if (!is) throw ConfigError("", 0, "cannot read config '" + config_path + "'");
        std::stringstream buf;
        buf << is.rdbuf();
        ExperimentConfig cfg = parse_config(buf.str());
        if (seed) {
            if (*seed < 0) throw ConfigError("--seed", 0, "seed must be non-negative");
            cfg.initial.seed = std::uint64_t(*seed);
        }
        if (run_cmd->parsed()) return cmd_run(cfg, opts, out);
        if (check_cmd->parsed()) return cmd_check(cfg, opts, out);
        if (eq_cmd->parsed()) return cmd_equilibrium(cfg, opts, out);
        if (fit_cmd->parsed()) return cmd_fit(cfg, opts, out);
        if (sweep_cmd->parsed()) return cmd_sweep(cfg, opts, out);
        return kConfigError;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    }
}

} // namespace entrodiff::cli
