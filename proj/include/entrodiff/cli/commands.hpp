#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "entrodiff/analysis.hpp"
#include "entrodiff/cli/config.hpp"

namespace entrodiff::cli {

enum ExitCode : int {
    kAllPassed = 0,
    kCheckFailed = 1,
    kConfigError = 2,
    kNumericalFailure = 3,
};

struct CommandOptions {
    std::optional<std::string> out_dir;    // --out
    std::optional<std::string> trajectory; // stored CSV for check / fit
    std::optional<double> gamma;           // --gamma
    int jobs = 1;
    bool quiet = false;
};

/// Output directory: --out, then output.dir, then $ENTRODIFF_OUT, then "entrodiff-out".
std::string resolve_out_dir(const ExperimentConfig& cfg, const CommandOptions& opts);

/// Runs every selected checker on a trajectory, in a fixed order.
std::vector<CheckReport> run_checks(const ExperimentConfig& cfg, const TrajectoryRecord<double>& traj);

/// Rebuilds a trajectory from a stored CSV using the config's system and grid.
TrajectoryRecord<double> load_trajectory(const ExperimentConfig& cfg, const std::string& path);

int cmd_run(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_check(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_equilibrium(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_fit(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);

/// Full command-line entry point; maps exceptions onto exit codes.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace entrodiff::cli
