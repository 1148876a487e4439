#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "entrodiff/analysis.hpp"
#include "entrodiff/integrator.hpp"

namespace entrodiff::cli {

/// Column names in output order:
/// t, E, E_rel, D, D_lower_rhs, M_1..M_{m-1}, sup_1..sup_m,
/// l1dist_1..l1dist_m, delta2_1..delta2_m, defect.
std::vector<std::string> csv_header(int m);

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord<double>& traj);
void write_trajectory_csv(const std::string& path, const TrajectoryRecord<double>& traj);

/// Reads samples back. Spec and grid are not stored in the file and must be
/// filled in by the caller; samples are marked as lacking species means.
std::vector<FunctionalSample<double>> read_trajectory_csv(std::istream& is);
std::vector<FunctionalSample<double>> read_trajectory_csv(const std::string& path);

/// `key: value` lines for scripting.
void write_summary(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& entries);

std::string format_double(double v);

} // namespace entrodiff::cli
