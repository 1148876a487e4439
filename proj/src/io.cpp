#include "entrodiff/cli/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "entrodiff/cli/config.hpp"

namespace entrodiff::cli {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> csv_header(int m) {
    std::vector<std::string> h{"t", "E", "E_rel", "D", "D_lower_rhs"};
    for (int i = 1; i < m; ++i) h.push_back("M_" + std::to_string(i));
    for (const char* prefix : {"sup_", "l1dist_", "delta2_"})
        for (int i = 1; i <= m; ++i) h.push_back(prefix + std::to_string(i));
    h.push_back("defect");
    return h;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord<double>& traj) {
    const int m = traj.spec.m;
    const auto header = csv_header(m);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& s : traj.samples) {
        std::string row = format_double(s.t);
        auto add = [&](double v) {
            row += ',';
            row += format_double(v);
        };
        add(s.E);
        add(s.E_rel);
        add(s.D);
        add(s.D_lower_rhs);
        for (int i = 0; i < m - 1; ++i) add(s.masses[i]);
        for (int i = 0; i < m; ++i) add(s.sup[i]);
        for (int i = 0; i < m; ++i) add(s.l1dist[i]);
        for (int i = 0; i < m; ++i) add(s.delta2[i]);
        add(s.defect);
        os << row << "\n";
    }
}

void write_trajectory_csv(const std::string& path, const TrajectoryRecord<double>& traj) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_trajectory_csv(os, traj);
    if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<FunctionalSample<double>> read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("", 1, "trajectory CSV is empty");
    std::vector<std::string> cols;
    {
        std::istringstream hs(line);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    // header length is 5 + (m-1) + 3m + 1 = 4m + 5
    if (cols.size() < 13 || (cols.size() - 5) % 4 != 0) throw ConfigError("", 1, "unrecognised trajectory CSV header");
    const int m = int(cols.size() - 5) / 4;
    if (cols != csv_header(m)) throw ConfigError("", 1, "unrecognised trajectory CSV header");

    std::vector<FunctionalSample<double>> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::istringstream rs(line);
        std::string cell;
        while (std::getline(rs, cell, ',')) {
            try {
                std::size_t pos = 0;
                v.push_back(std::stod(cell, &pos));
                if (pos != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError("", lineno, "malformed number '" + cell + "' in trajectory CSV");
            }
        }
        if (v.size() != cols.size()) throw ConfigError("", lineno, "wrong column count in trajectory CSV");
        FunctionalSample<double> s;
        std::size_t c = 0;
        s.t = v[c++];
        s.E = v[c++];
        s.E_rel = v[c++];
        s.D = v[c++];
        s.D_lower_rhs = v[c++];
        s.masses.resize(m - 1);
        s.sup.resize(m);
        s.l1dist.resize(m);
        s.delta2.resize(m);
        for (int i = 0; i < m - 1; ++i) s.masses[i] = v[c++];
        for (int i = 0; i < m; ++i) s.sup[i] = v[c++];
        for (int i = 0; i < m; ++i) s.l1dist[i] = v[c++];
        for (int i = 0; i < m; ++i) s.delta2[i] = v[c++];
        s.defect = v[c++];
        s.has_means = false;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<FunctionalSample<double>> read_trajectory_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("", 0, "cannot open trajectory '" + path + "'");
    return read_trajectory_csv(is);
}

void write_summary(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& entries) {
    for (const auto& [k, v] : entries) os << k << ": " << v << "\n";
}

} // namespace entrodiff::cli
