#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "entrodiff/grid.hpp"
#include "entrodiff/integrator.hpp"
#include "entrodiff/model.hpp"

namespace entrodiff::cli {

/// Configuration problem; carries the offending key path and source line
/// (0 when unknown, e.g. for JSON input).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& message)
        : std::runtime_error(format(key, line, message)), key_(std::move(key)), line_(line), message_(message) {}

    const std::string& key() const { return key_; }
    int line() const { return line_; }
    const std::string& message() const { return message_; }

private:
    static std::string format(const std::string& key, int line, const std::string& message) {
        std::string s;
        if (line > 0) s += "line " + std::to_string(line) + ": ";
        if (!key.empty()) s += key + ": ";
        return s + message;
    }

    std::string key_;
    int line_;
    std::string message_;
};

struct InitialSettings {
    std::string preset = "equilibrium-cosine"; // constant | equilibrium-cosine | random-smooth
    std::vector<double> masses{2.0, 2.0};      // equilibrium-cosine
    std::vector<double> values;                // constant, random-smooth base (defaults to ones)
    int species = 2;                           // one-based perturbed species
    double amplitude = 0.3;
    int mode = 1;
    int modes = 3;                             // random-smooth
    std::uint64_t seed = 1;

    bool operator==(const InitialSettings&) const = default;
};

struct CheckSettings {
    std::vector<std::string> select{"all"};
    double mass_tol = 1e-8;
    double entropy_tol = 1e-8;
    double energy_rel_tol = 0.05;
    double energy_d_floor = 1e-10;
    double dissipation_slack = 0.05;
    std::optional<double> gamma;           // decay exponent; default from degeneracy
    std::optional<double> t_start;         // default 20% of t_end
    double decay_r2_min = 0.9;
    std::optional<double> weight_exponent; // missing-term time weight; default from degeneracy
    double l1_threshold = 1e-3;
    std::optional<double> t_check;         // default t_end
    std::optional<double> mu_theory;       // default from degeneracy
    double mu_slack = 0.1;
    double ckp_stability = 0.1;
    std::optional<double> c_prc;
    std::optional<double> c_sor;

    bool operator==(const CheckSettings&) const = default;
};

struct OutputSettings {
    std::optional<std::string> dir;
    std::string csv = "trajectory.csv";
    std::string summary = "summary.txt";
    bool plot = false;

    bool operator==(const OutputSettings&) const = default;
};

struct ExperimentConfig {
    std::vector<int> alpha;   // alpha_1..alpha_{m-1}
    std::vector<double> d;    // d_1..d_m
    int dim = 1;
    std::vector<double> lengths{1.0};
    std::vector<int> n{256};
    double dt = 1e-3;
    double t_end = 50.0;
    int sample_every = 10;
    int max_substeps = 10000;
    double positivity_floor = 0.0;
    double reaction_tol = 1e-10;
    std::string scheme = "strang";
    InitialSettings initial;
    CheckSettings checks;
    OutputSettings output;
    /// Parameter grid for `sweep`: key -> candidate values (cartesian product).
    std::vector<std::pair<std::string, std::vector<std::string>>> sweep;

    bool operator==(const ExperimentConfig&) const = default;

    int m() const { return static_cast<int>(d.size()); }
    SystemSpec<double> system() const;
    Grid<double> grid() const;
    StepperConfig<double> stepper() const;
    StateFields<double> initial_state() const;

    double effective_gamma() const;
    double effective_t_start() const;
    double effective_weight_exponent() const;
    double effective_t_check() const;
    double effective_mu_theory() const;
};

/// Parses the flat `dotted.key = value` format (with `#` comments), or a
/// JSON object when the text starts with `{`. Unknown keys, malformed values
/// and invariant violations raise ConfigError.
ExperimentConfig parse_config(const std::string& text);

/// Flat-format text that parses back to an equal configuration.
std::string serialize_config(const ExperimentConfig& cfg);

/// Applies one `key = value` assignment (used by sweeps and overrides).
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value, int line = 0);

/// Range and cross-field validation; parse_config calls this.
void validate_config(const ExperimentConfig& cfg);

/// Every expanded member of the sweep grid, in lexicographic order.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg);

} // namespace entrodiff::cli
