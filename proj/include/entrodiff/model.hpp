#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace entrodiff {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// The reversible reaction a_1 X_1 + ... + a_{m-1} X_{m-1} <=> X_m with
/// per-species diffusion. Indices are zero-based; alpha has m entries and the
/// last one is always 1.
template <typename Scalar>
struct SystemSpec {
    int m = 0;
    std::vector<int> alpha;
    Vector<Scalar> d;
    std::optional<int> degenerate_index;

    /// Builds and validates a spec from the reactant coefficients
    /// alpha_1..alpha_{m-1} and all m diffusion coefficients.
    static SystemSpec make(std::vector<int> reactant_alpha, Vector<Scalar> diffusion) {
        SystemSpec s;
        s.m = static_cast<int>(diffusion.size());
        s.alpha = std::move(reactant_alpha);
        if (static_cast<int>(s.alpha.size()) != s.m - 1)
            throw DomainError("alpha needs m-1 = " + std::to_string(s.m - 1) + " entries, got " +
                              std::to_string(s.alpha.size()));
        s.alpha.push_back(1);
        s.d = std::move(diffusion);
        for (int i = 0; i < s.m; ++i)
            if (s.d[i] == Scalar(0)) s.degenerate_index = i;
        s.validate();
        return s;
    }

    void validate() const {
        if (m < 2) throw DomainError("system needs m >= 2 species");
        if (static_cast<int>(alpha.size()) != m || d.size() != m)
            throw DomainError("alpha and d must both have m entries");
        for (int i = 0; i < m; ++i)
            if (alpha[i] < 1) throw DomainError("alpha_" + std::to_string(i + 1) + " must be an integer >= 1");
        if (alpha[m - 1] != 1) throw DomainError("alpha_m must equal 1");
        int zeros = 0;
        for (int i = 0; i < m; ++i) {
            if (!(d[i] >= Scalar(0)) || !std::isfinite(static_cast<double>(d[i])))
                throw DomainError("d_" + std::to_string(i + 1) + " must be finite and non-negative");
            if (d[i] == Scalar(0)) ++zeros;
        }
        if (zeros > 1) throw DomainError("at most one diffusion coefficient may vanish");
        if (zeros == 1 && !degenerate_index) throw DomainError("degenerate_index not set for the zero d_i");
        if (degenerate_index) {
            const int k = *degenerate_index;
            if (k < 0 || k >= m || d[k] != Scalar(0))
                throw DomainError("degenerate_index does not point at a zero diffusion coefficient");
            if (k == 0 && alpha[0] != 1)
                throw DomainError("alpha_1 must be 1 when species 1 does not diffuse");
        }
    }

    std::span<const int> reactant_alpha() const { return {alpha.data(), alpha.size() - 1}; }
};

/// x^n for integer n >= 0 by repeated multiplication.
template <typename Scalar>
Scalar int_power(Scalar x, int n) {
    Scalar r(1);
    for (int k = 0; k < n; ++k) r *= x;
    return r;
}

/// prod_{j<m} a_j^{alpha_j}, accumulated left to right.
template <typename Scalar, typename Derived>
Scalar reactant_product(const Eigen::DenseBase<Derived>& a, std::span<const int> reactant_alpha) {
    Scalar p(1);
    for (std::size_t j = 0; j < reactant_alpha.size(); ++j) p *= int_power<Scalar>(a[Eigen::Index(j)], reactant_alpha[j]);
    return p;
}

/// Pointwise reaction rates. r_i = a_m - prod for i < m, r_m = -r_1.
template <typename Scalar, typename Derived>
Vector<Scalar> reaction_rates(const Eigen::MatrixBase<Derived>& a, const SystemSpec<Scalar>& spec) {
    if (a.size() != spec.m) throw DomainError("reaction_rates: expected " + std::to_string(spec.m) + " species");
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (!(a[i] >= Scalar(0))) throw DomainError("reaction_rates: negative concentration");
    const Scalar r = a[spec.m - 1] - reactant_product<Scalar>(a, spec.reactant_alpha());
    Vector<Scalar> out = Vector<Scalar>::Constant(spec.m, r);
    out[spec.m - 1] = -r;
    return out;
}

/// Conserved quantities M_i = int (a_i + a_m), i < m.
template <typename Scalar>
using MassVector = Vector<Scalar>;

template <typename Scalar>
struct EquilibriumState {
    Vector<Scalar> a_inf;
};

/// f(x) = prod_j (M_j/|Omega| - x)^{alpha_j} - x on [0, min_j M_j/|Omega|].
/// Its unique root is the equilibrium value of the last species.
template <typename Scalar>
Scalar equilibrium_f(Scalar x, const MassVector<Scalar>& masses, Scalar volume, std::span<const int> reactant_alpha) {
    if (masses.size() == 0 || static_cast<std::size_t>(masses.size()) > reactant_alpha.size())
        throw DomainError("equilibrium_f: masses/alpha size mismatch");
    if (!(volume > Scalar(0))) throw DomainError("equilibrium_f: volume must be positive");
    Scalar upper = masses.minCoeff() / volume;
    if (!(x >= Scalar(0)) || x > upper) throw DomainError("equilibrium_f: x outside [0, min M/|Omega|]");
    Scalar p(1);
    for (Eigen::Index j = 0; j < masses.size(); ++j) p *= int_power<Scalar>(masses[j] / volume - x, reactant_alpha[j]);
    return p - x;
}

/// Bisection for a sign change of `f` on the bracket {a, b}; the bracket
/// may be given in either order. Stops when the bracket is narrower than
/// `tol` and |f(mid)| < tol, or when the bracket stops shrinking.
template <typename Scalar, typename Fn>
Scalar bisect_root(Fn&& f, Scalar a, Scalar b, Scalar tol, int max_iter = 200) {
    if (b < a) std::swap(a, b);
    Scalar fa = f(a), fb = f(b);
    if (fa == Scalar(0)) return a;
    if (fb == Scalar(0)) return b;
    if ((fa > Scalar(0)) == (fb > Scalar(0))) throw InternalError("bisect_root: no sign change on bracket");
    Scalar mid = Scalar(0.5) * (a + b);
    for (int it = 0; it < max_iter; ++it) {
        mid = Scalar(0.5) * (a + b);
        const Scalar fm = f(mid);
        using std::abs;
        if (fm == Scalar(0) || ((b - a) < tol && abs(fm) < tol)) return mid;
        if (mid <= a || mid >= b) break;
        if ((fm > Scalar(0)) == (fa > Scalar(0))) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    // At machine resolution the bracket ends may beat the midpoint.
    using std::abs;
    const Scalar fm = f(mid);
    if (abs(fa) < abs(fm) && abs(fa) <= abs(fb)) return a;
    if (abs(fb) < abs(fm)) return b;
    return mid;
}

/// Unique constant steady state compatible with the given masses.
template <typename Scalar>
EquilibriumState<Scalar> solve_equilibrium(const MassVector<Scalar>& masses, Scalar volume,
                                           std::span<const int> reactant_alpha, Scalar tol = Scalar(1e-12)) {
    if (!(tol > Scalar(0))) throw DomainError("solve_equilibrium: tol must be positive");
    if (!(volume > Scalar(0))) throw DomainError("solve_equilibrium: volume must be positive");
    if (masses.size() == 0 || static_cast<std::size_t>(masses.size()) > reactant_alpha.size())
        throw DomainError("solve_equilibrium: masses/alpha size mismatch");
    for (Eigen::Index j = 0; j < masses.size(); ++j)
        if (!(masses[j] > Scalar(0)) || !std::isfinite(static_cast<double>(masses[j])))
            throw DomainError("solve_equilibrium: masses must be positive");

    const Scalar upper = masses.minCoeff() / volume;
    auto f = [&](Scalar x) { return equilibrium_f(x, masses, volume, reactant_alpha); };
    const Scalar x = bisect_root(f, Scalar(0), upper, tol);

    EquilibriumState<Scalar> eq;
    eq.a_inf.resize(masses.size() + 1);
    for (Eigen::Index j = 0; j < masses.size(); ++j) eq.a_inf[j] = masses[j] / volume - x;
    eq.a_inf[masses.size()] = x;
    return eq;
}

/// Per-cell concentrations of all species at time t on one grid.
template <typename Scalar>
struct StateFields {
    Scalar t = Scalar(0);
    std::vector<Field<Scalar>> species;

    int m() const { return static_cast<int>(species.size()); }

    /// Concentrations of every species in cell k.
    Vector<Scalar> cell(Eigen::Index k) const {
        Vector<Scalar> a(m());
        for (int i = 0; i < m(); ++i) a[i] = species[i][k];
        return a;
    }

    Scalar min_value() const {
        Scalar lo = species.empty() ? Scalar(0) : species[0].minCoeff();
        for (const auto& s : species) lo = std::min(lo, s.minCoeff());
        return lo;
    }

    bool operator==(const StateFields& o) const {
        if (t != o.t || species.size() != o.species.size()) return false;
        for (std::size_t i = 0; i < species.size(); ++i)
            if (species[i].size() != o.species[i].size() || !(species[i] == o.species[i]).all()) return false;
        return true;
    }
};

template <typename Scalar>
void require_matches(const StateFields<Scalar>& state, const SystemSpec<Scalar>& spec, const Grid<Scalar>& grid) {
    if (state.m() != spec.m)
        throw DomainError("state has " + std::to_string(state.m()) + " species, system has " + std::to_string(spec.m));
    for (const auto& s : state.species) require_matches(s, grid);
}

template <typename Scalar>
MassVector<Scalar> conserved_masses(const StateFields<Scalar>& state, const Grid<Scalar>& grid) {
    if (state.m() < 2) throw DomainError("conserved_masses: need at least 2 species");
    const int m = state.m();
    for (const auto& s : state.species) require_matches(s, grid);
    MassVector<Scalar> M(m - 1);
    const Scalar last = integrate(state.species[m - 1], grid);
    for (int i = 0; i < m - 1; ++i) M[i] = integrate(state.species[i], grid) + last;
    return M;
}

template <typename Scalar>
MassVector<Scalar> conserved_masses(const StateFields<Scalar>& state, const SystemSpec<Scalar>& spec,
                                    const Grid<Scalar>& grid) {
    require_matches(state, spec, grid);
    return conserved_masses(state, grid);
}

/// Spatially constant state with the given per-species values.
template <typename Scalar>
StateFields<Scalar> constant_state(const Vector<Scalar>& values, const Grid<Scalar>& grid, Scalar t = Scalar(0)) {
    StateFields<Scalar> s;
    s.t = t;
    for (Eigen::Index i = 0; i < values.size(); ++i) s.species.push_back(Field<Scalar>::Constant(grid.cells(), values[i]));
    return s;
}

template <typename Scalar>
struct ClosenessReport {
    bool satisfied = false;
    Scalar margin_left{};  // 1/C_PRC - |d_i - d_m|
    Scalar margin_right{}; // 1/C_SOR - |d_i - d_m|/(d_i + d_m)
};

/// Smallness condition between two non-zero diffusion coefficients, with the
/// regularity constants supplied by the caller.
template <typename Scalar>
ClosenessReport<Scalar> closeness_check(Scalar d_i, Scalar d_m, Scalar c_prc, Scalar c_sor) {
    if (!(d_i > Scalar(0)) || !(d_m > Scalar(0))) throw DomainError("closeness_check: diffusion coefficients must be positive");
    if (!(c_prc > Scalar(0)) || !(c_sor > Scalar(0))) throw DomainError("closeness_check: C_PRC and C_SOR must be positive");
    using std::abs;
    const Scalar diff = abs(d_i - d_m);
    ClosenessReport<Scalar> r;
    r.margin_left = Scalar(1) / c_prc - diff;
    r.margin_right = Scalar(1) / c_sor - diff / (d_i + d_m);
    r.satisfied = r.margin_left > Scalar(0) && r.margin_right > Scalar(0);
    return r;
}

} // namespace entrodiff
