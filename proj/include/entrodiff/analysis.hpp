#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "functionals.hpp"
#include "initial.hpp"
#include "integrator.hpp"

namespace entrodiff {

/// Samples with E_rel (or a deviation sum) below this are quadrature noise.
inline constexpr double kRelativeEntropyFloor = 1e-14;

/// Verdict of one checker. `value` is the observed quantity (drift, worst
/// ratio, fitted constant); `margin` is signed: >= 0 exactly when passed,
/// except for degenerate reports, which pass with zero margin.
struct CheckReport {
    std::string name;
    bool passed = false;
    bool degenerate = false;
    double value = 0;
    double margin = 0;
    double worst_time = 0;
    double worst_value = 0;
    std::map<std::string, double> constants;
    std::string details;
};

struct DecayFit {
    double gamma_exponent = 0;
    double lambda1 = 0;
    double lambda2 = 0;
    double r_squared = 0;
    double t_start = 0;
    double t_end = 0;
    std::size_t points = 0;
};

namespace detail {

struct LineFit {
    double intercept = 0;
    double slope = 0;
    double r_squared = 0;
};

/// Ordinary least squares y ~ c0 + c1 x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("least squares fit needs at least two points");
    const Eigen::Index n = Eigen::Index(x.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        A(k, 0) = 1.0;
        A(k, 1) = x[std::size_t(k)];
        b[k] = y[std::size_t(k)];
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
    const double ss_res = (A * c - b).squaredNorm();
    const double ss_tot = (b.array() - b.mean()).square().sum();
    LineFit f{c[0], c[1], 1.0};
    if (ss_tot > 0) f.r_squared = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
    else f.r_squared = ss_res <= 1e-24 * double(n) ? 1.0 : 0.0;
    return f;
}

template <typename Scalar>
double total(const Vector<Scalar>& v) {
    return static_cast<double>(v.sum());
}

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

} // namespace detail

/// Max relative drift of every conserved mass from its initial value.
template <typename Scalar>
CheckReport check_mass_conservation(const TrajectoryRecord<Scalar>& traj, double tol = 1e-8) {
    CheckReport r{.name = "mass_conservation"};
    if (traj.samples.empty()) throw DomainError("empty trajectory");
    const auto& M0 = traj.samples.front().masses;
    for (const auto& s : traj.samples) {
        for (Eigen::Index i = 0; i < M0.size(); ++i) {
            const double drift = std::abs(double(s.masses[i] - M0[i])) / double(M0[i]);
            if (drift > r.value) {
                r.value = drift;
                r.worst_time = double(s.t);
                r.worst_value = double(s.masses[i]);
            }
        }
    }
    r.margin = tol - r.value;
    r.passed = r.value < tol;
    r.details = "max relative mass drift";
    return r;
}

/// E(t_{k+1}) <= E(t_k) + tol (1 + |E(t_k)|) for every consecutive pair.
template <typename Scalar>
CheckReport check_entropy_monotone(const TrajectoryRecord<Scalar>& traj, double tol = 1e-8) {
    CheckReport r{.name = "entropy_monotone"};
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
        const double Ek = double(traj.samples[k].E), En = double(traj.samples[k + 1].E);
        const double excess = (En - Ek) - tol * (1.0 + std::abs(Ek));
        if (excess > worst) {
            worst = excess;
            r.worst_time = double(traj.samples[k + 1].t);
            r.worst_value = En - Ek;
        }
    }
    if (traj.samples.size() < 2) worst = 0;
    r.value = r.worst_value;
    r.margin = -worst;
    r.passed = worst <= 0;
    r.details = "largest entropy increase between samples";
    return r;
}

/// Centred (E_{k+1} - E_{k-1}) / (t_{k+1} - t_{k-1}) against -D(t_k), over
/// samples with D above `d_floor`.
template <typename Scalar>
CheckReport check_energy_balance(const TrajectoryRecord<Scalar>& traj, double rel_tol = 0.05, double d_floor = 1e-10) {
    CheckReport r{.name = "energy_balance"};
    std::size_t used = 0;
    for (std::size_t k = 1; k + 1 < traj.samples.size(); ++k) {
        const auto& s = traj.samples[k];
        const double D = double(s.D);
        if (!(D > d_floor)) continue;
        const double rate = double(traj.samples[k + 1].E - traj.samples[k - 1].E) /
                            double(traj.samples[k + 1].t - traj.samples[k - 1].t);
        const double rel = std::abs(rate + D) / D;
        ++used;
        if (rel > r.value) {
            r.value = rel;
            r.worst_time = double(s.t);
            r.worst_value = rate;
        }
    }
    r.margin = rel_tol - r.value;
    r.passed = used > 0 && r.value < rel_tol;
    r.constants["samples_used"] = double(used);
    r.details = used ? "max relative mismatch of dE/dt and -D" : "no samples with D above floor";
    return r;
}

/// D >= (1 - slack) [sum_{d_i>0} (alpha_i d_i / P) ||delta_{A_i}||^2 + defect] at every sample.
template <typename Scalar>
CheckReport check_dissipation_lower(const TrajectoryRecord<Scalar>& traj, double poincare, double slack = 0.05) {
    CheckReport r{.name = "dissipation_lower_bound"};
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (const auto& s : traj.samples) {
        SqrtDeviations<Scalar> dev{s.delta2, s.defect};
        const double rhs = double(dissipation_lower_bound_rhs(dev, traj.spec, Scalar(poincare)));
        if (!(rhs > 0)) continue;
        const double ratio = double(s.D) / rhs;
        if (ratio < worst_ratio) {
            worst_ratio = ratio;
            r.worst_time = double(s.t);
            r.worst_value = rhs;
        }
    }
    if (std::isinf(worst_ratio)) {
        r.passed = true;
        r.degenerate = true;
        r.details = "lower bound vanishes on every sample";
        return r;
    }
    r.value = worst_ratio;
    r.margin = worst_ratio - (1.0 - slack);
    r.passed = r.margin >= 0;
    r.details = "min of D / lower-bound rhs";
    return r;
}

/// Hat-C = min_t D(t) / ((1+t)^w (sum_i ||delta_{A_i}||^2 + defect)), the sum
/// including the non-diffusing species. Passes iff positive and the
/// second-half minimum is at least half the first-half minimum.
template <typename Scalar>
CheckReport fit_missing_term_constant(const TrajectoryRecord<Scalar>& traj, double weight_exponent,
                                      double floor = kRelativeEntropyFloor) {
    CheckReport r{.name = "missing_term_constant"};
    std::vector<double> ratios, times;
    for (const auto& s : traj.samples) {
        const double denom = detail::total(s.delta2) + double(s.defect);
        if (!(denom > floor)) continue;
        ratios.push_back(double(s.D) / (std::pow(1.0 + double(s.t), weight_exponent) * denom));
        times.push_back(double(s.t));
    }
    r.constants["weight_exponent"] = weight_exponent;
    if (ratios.empty()) {
        r.passed = true;
        r.degenerate = true;
        r.details = "degenerate: at equilibrium";
        return r;
    }
    const std::size_t half = ratios.size() / 2;
    auto argmin = std::min_element(ratios.begin(), ratios.end());
    const double first = half ? *std::min_element(ratios.begin(), ratios.begin() + half) : *argmin;
    const double second = *std::min_element(ratios.begin() + half, ratios.end());
    r.value = *argmin;
    r.worst_time = times[std::size_t(argmin - ratios.begin())];
    r.worst_value = *argmin;
    r.constants["C_hat"] = *argmin;
    r.constants["first_half_min"] = first;
    r.constants["second_half_min"] = second;
    const bool stable = second >= 0.5 * first;
    r.margin = std::min(r.value, second - 0.5 * first);
    r.passed = r.value > 0 && stable;
    r.details = stable ? "empirical missing-term constant" : "missing-term constant collapses in second half";
    return r;
}

/// Least squares of ln E_rel against -(1+t)^gamma on t >= t_start; the
/// window ends at the first sample below the numerical floor.
inline DecayFit fit_subexponential_decay(std::span<const double> times, std::span<const double> e_rel, double gamma,
                                         double t_start, double floor = kRelativeEntropyFloor) {
    if (times.size() != e_rel.size()) throw DomainError("decay fit: series length mismatch");
    std::vector<double> x, y;
    DecayFit fit{.gamma_exponent = gamma, .t_start = t_start};
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < t_start) continue;
        if (!(e_rel[k] > floor)) break;
        x.push_back(std::pow(1.0 + times[k], gamma));
        y.push_back(std::log(e_rel[k]));
        fit.t_end = times[k];
    }
    if (x.size() < 3) throw DomainError("decay fit: fewer than 3 samples above the floor after t_start");
    const auto line = detail::fit_line(x, y);
    fit.lambda1 = std::exp(line.intercept);
    fit.lambda2 = -line.slope;
    if (fit.lambda2 == 0.0) fit.lambda2 = 0.0; // fold -0
    fit.r_squared = line.r_squared;
    fit.points = x.size();
    return fit;
}

template <typename Scalar>
DecayFit fit_subexponential_decay(const TrajectoryRecord<Scalar>& traj, double gamma, double t_start,
                                  double floor = kRelativeEntropyFloor) {
    std::vector<double> t, e;
    for (const auto& s : traj.samples) {
        t.push_back(double(s.t));
        e.push_back(double(s.E_rel));
    }
    return fit_subexponential_decay(t, e, gamma, t_start, floor);
}

/// Log-log slope of a sup-norm series against 1+t; passes iff the slope does
/// not exceed the theoretical growth exponent by more than `slack`.
inline CheckReport fit_polynomial_growth(std::span<const double> times, std::span<const double> sup_norms,
                                         double mu_theory, double slack = 0.1) {
    if (times.size() != sup_norms.size()) throw DomainError("growth fit: series length mismatch");
    std::vector<double> x, y;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(sup_norms[k] > 0)) throw DomainError("growth fit: sup norms must be positive");
        x.push_back(std::log1p(times[k]));
        y.push_back(std::log(sup_norms[k]));
    }
    CheckReport r{.name = "polynomial_growth"};
    const auto line = detail::fit_line(x, y);
    r.value = line.slope;
    r.constants["mu_emp"] = line.slope;
    r.constants["mu_theory"] = mu_theory;
    r.constants["K_pol"] = std::exp(line.intercept);
    r.margin = mu_theory + slack - line.slope;
    r.passed = r.margin >= 0;
    r.details = "fitted sup-norm growth exponent";
    return r;
}

/// Growth of max_i ||a_i||_inf along a trajectory.
template <typename Scalar>
CheckReport fit_polynomial_growth(const TrajectoryRecord<Scalar>& traj, double mu_theory, double slack = 0.1) {
    std::vector<double> t, sup;
    for (const auto& s : traj.samples) {
        t.push_back(double(s.t));
        sup.push_back(double(s.sup.maxCoeff()));
    }
    return fit_polynomial_growth(t, sup, mu_theory, slack);
}

enum class L1Measure { Sum, SumOfSquares };

/// sum_i ||a_i - a_i_inf||_1 (or its squared-norm variant) at the sample
/// nearest to t_check, compared against `threshold`.
template <typename Scalar>
CheckReport check_l1_convergence(const TrajectoryRecord<Scalar>& traj, double threshold, double t_check,
                                 L1Measure measure = L1Measure::Sum) {
    if (traj.samples.empty()) throw DomainError("empty trajectory");
    CheckReport r{.name = "l1_convergence"};
    const auto best = std::min_element(traj.samples.begin(), traj.samples.end(), [&](const auto& a, const auto& b) {
        return std::abs(double(a.t) - t_check) < std::abs(double(b.t) - t_check);
    });
    double v = 0;
    for (Eigen::Index i = 0; i < best->l1dist.size(); ++i) {
        const double l = double(best->l1dist[i]);
        v += measure == L1Measure::Sum ? l : l * l;
    }
    r.value = v;
    r.worst_time = double(best->t);
    r.worst_value = v;
    r.margin = threshold - v;
    r.passed = v < threshold;
    r.details = measure == L1Measure::Sum ? "sum of L1 distances to equilibrium" : "sum of squared L1 distances";
    return r;
}

/// C_LE = min_t E_rel / sum_i ||a_i - a_i_inf||_1^2 over samples above the
/// floor. `stable` compares the minima over the two halves of those samples.
template <typename Scalar>
CheckReport fit_ckp_constant(const TrajectoryRecord<Scalar>& traj, double stability_tol = 0.1,
                             double floor = kRelativeEntropyFloor) {
    CheckReport r{.name = "entropy_lower_bound_constant"};
    std::vector<double> ratios, times;
    for (const auto& s : traj.samples) {
        const double denom = (s.l1dist.array() * s.l1dist.array()).sum();
        if (!(double(s.E_rel) > floor) || !(denom > 0)) continue;
        ratios.push_back(double(s.E_rel) / denom);
        times.push_back(double(s.t));
    }
    if (ratios.empty()) {
        r.passed = true;
        r.degenerate = true;
        r.details = "degenerate: at equilibrium";
        return r;
    }
    const std::size_t half = ratios.size() / 2;
    auto argmin = std::min_element(ratios.begin(), ratios.end());
    const double first = half ? *std::min_element(ratios.begin(), ratios.begin() + half) : *argmin;
    const double second = *std::min_element(ratios.begin() + half, ratios.end());
    const double spread = std::abs(second - first) / std::max(first, second);
    r.value = *argmin;
    r.worst_time = times[std::size_t(argmin - ratios.begin())];
    r.worst_value = *argmin;
    r.constants["C_LE"] = *argmin;
    r.constants["first_half_min"] = first;
    r.constants["second_half_min"] = second;
    r.constants["half_spread"] = spread;
    r.constants["stable"] = spread < stability_tol ? 1.0 : 0.0;
    r.margin = std::min(r.value, stability_tol - spread);
    r.passed = r.value > 0 && spread < stability_tol;
    r.details = "empirical entropy lower-bound constant";
    return r;
}

/// C_EB = max_t sum_i ||sqrt(mean a_i) - A_i_inf||_2^2 / (sum_i ||delta_{A_i}||^2 + defect).
template <typename Scalar>
CheckReport fit_entropy_dissipation_bound_constant(const TrajectoryRecord<Scalar>& traj,
                                                   double floor = kRelativeEntropyFloor) {
    CheckReport r{.name = "entropy_dissipation_bound_constant"};
    const double vol = double(traj.grid.volume());
    double worst = 0;
    bool any = false;
    for (const auto& s : traj.samples) {
        if (!s.has_means) throw DomainError("C_EB fit needs per-species means, unavailable for stored trajectories");
        const double denom = detail::total(s.delta2) + double(s.defect);
        if (!(denom > floor)) continue;
        double num = 0;
        for (Eigen::Index i = 0; i < s.mean.size(); ++i) {
            const double g = std::sqrt(double(s.mean[i])) - std::sqrt(double(traj.eq.a_inf[i]));
            num += vol * g * g;
        }
        any = true;
        const double ratio = num / denom;
        if (ratio > worst) {
            worst = ratio;
            r.worst_time = double(s.t);
            r.worst_value = ratio;
        }
    }
    if (!any) {
        r.passed = true;
        r.degenerate = true;
        r.details = "degenerate: at equilibrium";
        return r;
    }
    r.value = worst;
    r.constants["C_EB"] = worst;
    r.passed = std::isfinite(worst);
    r.margin = r.passed ? 0.0 : -1.0;
    r.details = "empirical entropy-dissipation bound constant";
    return r;
}

/// Smallest C with gamma(x, y) <= C max{1, ln(x/y)} on a log-spaced square.
inline double fit_gamma_constant(double lo = 1e-3, double hi = 1e3, int points = 121) {
    if (!(lo > 0) || !(hi > lo) || points < 2) throw DomainError("fit_gamma_constant: bad sweep range");
    double c = 0;
    const double step = std::log(hi / lo) / double(points - 1);
    for (int i = 0; i < points; ++i) {
        const double x = lo * std::exp(step * i);
        for (int j = 0; j < points; ++j) {
            const double y = lo * std::exp(step * j);
            c = std::max(c, gamma(x, y) / std::max(1.0, std::log(x / y)));
        }
    }
    return c;
}

/// Every `stride`-th sample, always keeping the last one.
template <typename Scalar>
TrajectoryRecord<Scalar> subsample(const TrajectoryRecord<Scalar>& traj, std::size_t stride) {
    if (stride < 1) throw DomainError("subsample: stride must be >= 1");
    TrajectoryRecord<Scalar> out = traj;
    out.samples.clear();
    out.snapshots.clear();
    for (std::size_t k = 0; k < traj.samples.size(); k += stride) {
        out.samples.push_back(traj.samples[k]);
        if (!traj.snapshots.empty()) out.snapshots.push_back(traj.snapshots[k]);
    }
    if (!traj.samples.empty() && (traj.samples.size() - 1) % stride != 0) {
        out.samples.push_back(traj.samples.back());
        if (!traj.snapshots.empty()) out.snapshots.push_back(traj.snapshots.back());
    }
    return out;
}

/// CKP inequality on `count` seeded random unit-mass pairs; some pairs vanish
/// on part of the grid so the 0 log 0 convention is exercised.
inline CheckReport check_ckp_random_pairs(const Grid<double>& grid, int count = 1000, std::uint64_t seed = 7,
                                          double tol = 1e-10) {
    CheckReport r{.name = "ckp_inequality"};
    std::mt19937_64 rng(seed);
    double worst = std::numeric_limits<double>::infinity();
    for (int p = 0; p < count; ++p) {
        Field<double> f(grid.cells()), g(grid.cells());
        for (Eigen::Index k = 0; k < grid.cells(); ++k) {
            f[k] = unit_uniform(rng);
            g[k] = unit_uniform(rng) + 1e-3;
            if (p % 4 == 0 && f[k] < 0.3) f[k] = 0; // sparse support for f
        }
        f /= integrate(f, grid);
        g /= integrate(g, grid);
        const auto [lhs, rhs] = ckp_sides(f, g, grid);
        if (rhs - lhs < worst) {
            worst = rhs - lhs;
            r.worst_value = lhs;
        }
    }
    r.value = worst;
    r.margin = worst + tol;
    r.passed = r.margin >= 0;
    r.constants["pairs"] = count;
    r.details = "min of rhs - lhs over random normalized pairs";
    return r;
}

/// (x-y)(ln x - ln y) >= 4 (sqrt x - sqrt y)^2 on `count` seeded random
/// pairs drawn log-uniformly from [1e-6, 1e6], plus zeros on the boundary.
inline CheckReport check_algebraic_inequality(int count = 100000, std::uint64_t seed = 11, double tol = 1e-12) {
    CheckReport r{.name = "algebraic_inequality"};
    std::mt19937_64 rng(seed);
    double worst = std::numeric_limits<double>::infinity();
    const double span = std::log(1e12);
    for (int p = 0; p < count; ++p) {
        double x = 1e-6 * std::exp(span * unit_uniform(rng));
        double y = 1e-6 * std::exp(span * unit_uniform(rng));
        if (p % 1000 == 0) x = 0;
        if (p % 1000 == 500) y = x;
        const double res = algebraic_inequality_residual(x, y);
        if (res < worst) {
            worst = res;
            r.worst_value = x;
            r.worst_time = y;
        }
    }
    r.value = worst;
    r.margin = worst + tol;
    r.passed = r.margin >= 0;
    r.details = "min residual; worst_value/worst_time hold the offending (x, y)";
    return r;
}

/// Fits C_Gamma on the log-spaced square and confirms the bound there and
/// the diagonal value gamma(x, x) = 2.
inline CheckReport check_gamma_bound(double lo = 1e-3, double hi = 1e3, int points = 121) {
    CheckReport r{.name = "gamma_bound"};
    const double c = fit_gamma_constant(lo, hi, points);
    double worst = std::numeric_limits<double>::infinity();
    bool diagonal_exact = true;
    const double step = std::log(hi / lo) / double(points - 1);
    for (int i = 0; i < points; ++i) {
        const double x = lo * std::exp(step * i);
        diagonal_exact = diagonal_exact && gamma(x, x) == 2.0;
        for (int j = 0; j < points; ++j) {
            const double y = lo * std::exp(step * j);
            worst = std::min(worst, gamma_bound_residual(x, y, c));
        }
    }
    r.value = worst;
    r.margin = worst;
    r.constants["C_gamma"] = c;
    r.constants["diagonal_exact"] = diagonal_exact ? 1.0 : 0.0;
    r.passed = worst >= 0 && diagonal_exact;
    r.details = "min of C_gamma max{1, ln(x/y)} - gamma(x, y) over the sweep";
    return r;
}

} // namespace entrodiff
