#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace entrodiff {

/// Cells at or below this value are flagged as numerically touching zero.
inline constexpr double kNearZeroFlag = 1e-14;
/// Arguments of logarithms are clamped here to avoid -inf.
inline constexpr double kLogFloor = 1e-300;

namespace detail {

/// phi(u) / u^2 where phi(u) = (1+u) ln(1+u) - u, valid for |u| < 1e-2.
template <typename Scalar>
Scalar phi_over_u2_series(Scalar u) {
    // sum_{k>=2} (-1)^k u^{k-2} / (k (k-1)), Horner from k = 10 down.
    Scalar acc(0);
    for (int k = 10; k >= 2; --k) {
        const Scalar c = Scalar((k % 2 == 0) ? 1 : -1) / Scalar(k * (k - 1));
        acc = acc * u + c;
    }
    return acc;
}

} // namespace detail

/// x ln(x/y) - x + y, the relative entropy density; x >= 0, y > 0.
template <typename Scalar>
Scalar relative_entropy_density(Scalar x, Scalar y) {
    using std::abs;
    using std::log;
    const Scalar u = (x - y) / y;
    if (abs(u) < Scalar(1e-2)) return y * u * u * detail::phi_over_u2_series(u);
    if (x <= Scalar(kLogFloor)) return y;
    return x * log(x / y) - x + y;
}

/// (x - y)(ln x - ln y) with the continuous extension at zero.
template <typename Scalar>
Scalar log_difference_product(Scalar x, Scalar y) {
    using std::abs;
    using std::log1p;
    if (x == y) return Scalar(0);
    if (x <= Scalar(0) || y <= Scalar(0)) {
        if (x <= Scalar(0) && y <= Scalar(0)) return Scalar(0);
        return std::numeric_limits<Scalar>::infinity();
    }
    const Scalar lo = std::min(x, y);
    const Scalar dx = abs(x - y);
    return dx * log1p(dx / lo);
}

/// (x ln(x/y) - x + y) / (sqrt x - sqrt y)^2, continuously extended by 2 on x = y.
template <typename Scalar>
Scalar gamma(Scalar x, Scalar y) {
    using std::abs;
    using std::sqrt;
    if (!(x > Scalar(0)) || !(y > Scalar(0))) throw DomainError("gamma: arguments must be positive");
    const Scalar u = (x - y) / y;
    if (abs(u) < Scalar(1e-2)) {
        const Scalar s = sqrt(x / y) + Scalar(1);
        return detail::phi_over_u2_series(u) * s * s;
    }
    const Scalar diff = sqrt(x) - sqrt(y);
    return relative_entropy_density(x, y) / (diff * diff);
}

/// C * max{1, ln(x/y)} - gamma(x, y); non-negative iff the bound holds.
template <typename Scalar>
Scalar gamma_bound_residual(Scalar x, Scalar y, Scalar c_gamma) {
    using std::log;
    return c_gamma * std::max(Scalar(1), log(x / y)) - gamma(x, y);
}

/// (x - y)(ln x - ln y) - 4 (sqrt x - sqrt y)^2 >= 0 for x, y >= 0.
template <typename Scalar>
Scalar algebraic_inequality_residual(Scalar x, Scalar y) {
    using std::sqrt;
    if (!(x >= Scalar(0)) || !(y >= Scalar(0))) throw DomainError("algebraic inequality: arguments must be non-negative");
    const Scalar lhs = log_difference_product(x, y);
    const Scalar diff = sqrt(x) - sqrt(y);
    return lhs - Scalar(4) * diff * diff;
}

namespace detail {

template <typename Scalar>
void require_nonnegative(const StateFields<Scalar>& state, const char* what) {
    for (int i = 0; i < state.m(); ++i) {
        const Scalar lo = state.species[i].minCoeff();
        if (lo < Scalar(0) && -lo > Scalar(kNearZeroFlag))
            throw DomainError(std::string(what) + ": species " + std::to_string(i + 1) + " has negative value " +
                              std::to_string(static_cast<double>(lo)));
    }
}

template <typename Scalar>
void require_positive(const StateFields<Scalar>& state, const char* what) {
    for (int i = 0; i < state.m(); ++i)
        if (!(state.species[i].minCoeff() > Scalar(0)))
            throw DomainError(std::string(what) + ": species " + std::to_string(i + 1) + " is not strictly positive");
}

} // namespace detail

/// E = sum_i alpha_i int (a_i (ln a_i - 1) + 1).
template <typename Scalar>
Scalar entropy(const StateFields<Scalar>& state, const SystemSpec<Scalar>& spec, const Grid<Scalar>& grid) {
    require_matches(state, spec, grid);
    detail::require_nonnegative(state, "entropy");
    Scalar total(0);
    for (int i = 0; i < spec.m; ++i) {
        Scalar acc(0);
        for (Eigen::Index k = 0; k < grid.cells(); ++k)
            acc += relative_entropy_density(std::max(state.species[i][k], Scalar(0)), Scalar(1));
        total += Scalar(spec.alpha[i]) * acc;
    }
    return total * grid.cell_volume();
}

/// sum_i alpha_i int (a_i ln(a_i / a_i_inf) - a_i + a_i_inf).
template <typename Scalar>
Scalar relative_entropy(const StateFields<Scalar>& state, const EquilibriumState<Scalar>& eq,
                        const SystemSpec<Scalar>& spec, const Grid<Scalar>& grid) {
    require_matches(state, spec, grid);
    detail::require_nonnegative(state, "relative_entropy");
    if (eq.a_inf.size() != spec.m) throw DomainError("relative_entropy: equilibrium size mismatch");
    Scalar total(0);
    for (int i = 0; i < spec.m; ++i) {
        if (!(eq.a_inf[i] > Scalar(0))) throw DomainError("relative_entropy: equilibrium must be positive");
        Scalar acc(0);
        for (Eigen::Index k = 0; k < grid.cells(); ++k)
            acc += relative_entropy_density(std::max(state.species[i][k], Scalar(0)), eq.a_inf[i]);
        total += Scalar(spec.alpha[i]) * acc;
    }
    return total * grid.cell_volume();
}

/// Split entropy dissipation: diffusive Fisher part and reaction part.
template <typename Scalar>
struct DissipationParts {
    Scalar gradient{};
    Scalar reaction{};
    Scalar total() const { return gradient + reaction; }
};

/// D = sum_{d_i>0} alpha_i d_i int |grad a_i|^2 / a_i + int (a_m - P) ln(a_m / P).
///
/// On the grid, |grad a|^2 / a is evaluated per face as
/// (a_+ - a_-)(ln a_+ - ln a_-) / h^2, the discretisation that makes the
/// semi-discrete entropy identity exact.
template <typename Scalar>
DissipationParts<Scalar> dissipation_parts(const StateFields<Scalar>& state, const SystemSpec<Scalar>& spec,
                                           const Grid<Scalar>& grid) {
    require_matches(state, spec, grid);
    detail::require_positive(state, "dissipation");
    DissipationParts<Scalar> parts;
    for (int i = 0; i < spec.m; ++i) {
        if (spec.d[i] == Scalar(0)) continue;
        const Field<Scalar>& a = state.species[i];
        Scalar acc(0);
        for (int axis = 0; axis < grid.dim(); ++axis) {
            const Scalar inv_h2 = Scalar(1) / (grid.h(axis) * grid.h(axis));
            Scalar axis_acc(0);
            for_each_face(grid, axis, [&](Eigen::Index k, Eigen::Index kp) {
                axis_acc += log_difference_product(a[kp], a[k]);
            });
            acc += axis_acc * inv_h2;
        }
        parts.gradient += Scalar(spec.alpha[i]) * spec.d[i] * acc;
    }
    const auto alpha = spec.reactant_alpha();
    const Field<Scalar>& last = state.species[spec.m - 1];
    Scalar react(0);
    Vector<Scalar> a(spec.m);
    for (Eigen::Index k = 0; k < grid.cells(); ++k) {
        for (int i = 0; i < spec.m; ++i) a[i] = state.species[i][k];
        react += log_difference_product(last[k], reactant_product<Scalar>(a, alpha));
    }
    parts.gradient *= grid.cell_volume();
    parts.reaction = react * grid.cell_volume();
    return parts;
}

template <typename Scalar>
Scalar dissipation(const StateFields<Scalar>& state, const SystemSpec<Scalar>& spec, const Grid<Scalar>& grid) {
    return dissipation_parts(state, spec, grid).total();
}

template <typename Scalar>
struct SqrtDeviations {
    Vector<Scalar> delta2; // ||sqrt(a_i) - mean(sqrt(a_i))||_2^2 per species
    Scalar defect{};       // ||A_m - prod_j A_j^{alpha_j}||_2^2
};

template <typename Scalar>
SqrtDeviations<Scalar> sqrt_deviation_norms(const StateFields<Scalar>& state, const SystemSpec<Scalar>& spec,
                                            const Grid<Scalar>& grid) {
    require_matches(state, spec, grid);
    detail::require_nonnegative(state, "sqrt_deviation_norms");
    SqrtDeviations<Scalar> out;
    out.delta2.resize(spec.m);
    std::vector<Field<Scalar>> roots;
    roots.reserve(spec.m);
    for (int i = 0; i < spec.m; ++i) {
        roots.push_back(state.species[i].max(Scalar(0)).sqrt());
        const Scalar avg = mean(roots.back(), grid);
        out.delta2[i] = (roots.back() - avg).square().sum() * grid.cell_volume();
    }
    const auto alpha = spec.reactant_alpha();
    Scalar acc(0);
    Vector<Scalar> A(spec.m);
    for (Eigen::Index k = 0; k < grid.cells(); ++k) {
        for (int i = 0; i < spec.m; ++i) A[i] = roots[i][k];
        const Scalar r = A[spec.m - 1] - reactant_product<Scalar>(A, alpha);
        acc += r * r;
    }
    out.defect = acc * grid.cell_volume();
    return out;
}

/// sum_{d_i>0} (alpha_i d_i / P) ||delta_{A_i}||^2 + defect, from precomputed deviations.
template <typename Scalar>
Scalar dissipation_lower_bound_rhs(const SqrtDeviations<Scalar>& dev, const SystemSpec<Scalar>& spec, Scalar poincare) {
    if (!(poincare > Scalar(0))) throw DomainError("dissipation lower bound: Poincare constant must be positive");
    Scalar rhs(0);
    for (int i = 0; i < spec.m; ++i)
        if (spec.d[i] > Scalar(0)) rhs += Scalar(spec.alpha[i]) * spec.d[i] / poincare * dev.delta2[i];
    return rhs + dev.defect;
}

template <typename Scalar>
Scalar dissipation_lower_bound_rhs(const StateFields<Scalar>& state, const SystemSpec<Scalar>& spec,
                                   const Grid<Scalar>& grid, Scalar poincare) {
    return dissipation_lower_bound_rhs(sqrt_deviation_norms(state, spec, grid), spec, poincare);
}

/// Both sides of 1/2 ||f - g||_1^2 <= int f ln(f/g) for unit-mass densities.
template <typename Scalar>
std::pair<Scalar, Scalar> ckp_sides(const Field<Scalar>& f, const Field<Scalar>& g, const Grid<Scalar>& grid) {
    require_matches(f, grid);
    require_matches(g, grid);
    using std::abs;
    using std::log;
    if (f.minCoeff() < Scalar(0) || g.minCoeff() < Scalar(0)) throw DomainError("ckp_sides: densities must be non-negative");
    if (abs(integrate(f, grid) - Scalar(1)) >= Scalar(1e-8) || abs(integrate(g, grid) - Scalar(1)) >= Scalar(1e-8))
        throw DomainError("ckp_sides: densities must have unit mass");
    const Scalar l1 = lp_norm<Scalar>(f - g, Scalar(1), grid);
    Scalar rhs(0);
    for (Eigen::Index k = 0; k < f.size(); ++k) {
        if (f[k] == Scalar(0)) continue;
        if (g[k] == Scalar(0)) return {Scalar(0.5) * l1 * l1, std::numeric_limits<Scalar>::infinity()};
        rhs += f[k] * log(f[k] / g[k]);
    }
    return {Scalar(0.5) * l1 * l1, rhs * grid.cell_volume()};
}

/// Everything recorded about one state along a trajectory.
template <typename Scalar>
struct FunctionalSample {
    Scalar t{};
    Scalar E{};
    Scalar E_rel{};
    Scalar D{};
    Scalar D_gradient{};
    Scalar D_reaction{};
    Scalar D_lower_rhs{};
    Vector<Scalar> masses; // m - 1
    Vector<Scalar> mean;   // per species
    Vector<Scalar> l1;
    Vector<Scalar> l2;
    Vector<Scalar> sup;
    Vector<Scalar> l1dist; // ||a_i - a_i_inf||_1
    Vector<Scalar> delta2;
    Scalar defect{};
    Eigen::Index near_zero_cells = 0;
    bool has_means = true; // false when reconstructed from CSV
};

template <typename Scalar>
FunctionalSample<Scalar> compute_sample(const StateFields<Scalar>& state, const SystemSpec<Scalar>& spec,
                                        const Grid<Scalar>& grid, const EquilibriumState<Scalar>& eq,
                                        Scalar poincare) {
    FunctionalSample<Scalar> s;
    s.t = state.t;
    s.E = entropy(state, spec, grid);
    s.E_rel = relative_entropy(state, eq, spec, grid);
    const auto parts = dissipation_parts(state, spec, grid);
    s.D_gradient = parts.gradient;
    s.D_reaction = parts.reaction;
    s.D = parts.total();
    const auto dev = sqrt_deviation_norms(state, spec, grid);
    s.delta2 = dev.delta2;
    s.defect = dev.defect;
    s.D_lower_rhs = dissipation_lower_bound_rhs(dev, spec, poincare);
    s.masses = conserved_masses(state, grid);
    s.mean.resize(spec.m);
    s.l1.resize(spec.m);
    s.l2.resize(spec.m);
    s.sup.resize(spec.m);
    s.l1dist.resize(spec.m);
    for (int i = 0; i < spec.m; ++i) {
        const Field<Scalar>& a = state.species[i];
        s.mean[i] = mean(a, grid);
        s.l1[i] = lp_norm(a, Scalar(1), grid);
        s.l2[i] = lp_norm(a, Scalar(2), grid);
        s.sup[i] = sup_norm(a);
        s.l1dist[i] = lp_norm<Scalar>(a - eq.a_inf[i], Scalar(1), grid);
        s.near_zero_cells += (a <= Scalar(kNearZeroFlag)).count();
    }
    return s;
}

} // namespace entrodiff
