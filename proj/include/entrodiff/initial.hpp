#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace entrodiff {

/// Uniform on [0, 1) from the top 53 bits; the mt19937_64 stream itself is
/// fixed by the standard, so this is reproducible across library vendors.
inline double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

template <typename Scalar>
Field<Scalar> cosine_mode(const Grid<Scalar>& grid, int mode_x, int mode_y = 0) {
    const Scalar pi = std::numbers::pi_v<Scalar>;
    return sample_field(grid, [&](Scalar x, Scalar y) {
        using std::cos;
        Scalar v = cos(Scalar(mode_x) * pi * x / grid.length(0));
        if (grid.dim() == 2) v *= cos(Scalar(mode_y) * pi * y / grid.length(1));
        return v;
    });
}

/// Equilibrium for `masses` with a cosine bump of the given amplitude added
/// to one species (zero-based). The bump is clipped to 90% of the base value
/// and its discrete mean removed, so the masses are exactly the requested ones.
template <typename Scalar>
StateFields<Scalar> equilibrium_cosine(const SystemSpec<Scalar>& spec, const Grid<Scalar>& grid,
                                       const MassVector<Scalar>& masses, int species, Scalar amplitude, int mode = 1) {
    if (species < 0 || species >= spec.m) throw DomainError("equilibrium_cosine: species index out of range");
    if (mode < 1) throw DomainError("equilibrium_cosine: mode must be >= 1");
    const auto eq = solve_equilibrium(masses, grid.volume(), spec.reactant_alpha());
    StateFields<Scalar> s = constant_state(eq.a_inf, grid);
    using std::abs;
    const Scalar base = eq.a_inf[species];
    const Scalar amp = std::min(abs(amplitude), Scalar(0.9) * base) * (amplitude < Scalar(0) ? Scalar(-1) : Scalar(1));
    Field<Scalar> bump = amp * cosine_mode(grid, mode, grid.dim() == 2 ? mode : 0);
    bump -= mean(bump, grid);
    s.species[species] += bump;
    if (!(s.min_value() > Scalar(0))) throw DomainError("equilibrium_cosine: perturbation destroys positivity");
    return s;
}

/// Seeded low-frequency positive profile around `base`: each species gets
/// base_i (1 + sum_k c_k cos(k pi x / L)) with c_k ~ 1/k^2 and
/// sum_k |c_k| <= amplitude, so every cell stays above base_i / 2.
template <typename Scalar>
StateFields<Scalar> random_smooth(const Grid<Scalar>& grid, const Vector<Scalar>& base, Scalar amplitude, int modes,
                                  std::uint64_t seed) {
    if (!(amplitude >= Scalar(0)) || amplitude > Scalar(0.5))
        throw DomainError("random_smooth: amplitude must lie in [0, 0.5]");
    if (modes < 1) throw DomainError("random_smooth: need at least one mode");
    for (Eigen::Index i = 0; i < base.size(); ++i)
        if (!(base[i] > Scalar(0))) throw DomainError("random_smooth: base values must be positive");
    const int ky_max = grid.dim() == 2 ? modes : 0;
    Scalar weight_sum(0);
    for (int kx = 1; kx <= modes; ++kx)
        for (int ky = 0; ky <= ky_max; ++ky) weight_sum += Scalar(1) / Scalar(kx * kx + ky * ky);
    std::mt19937_64 rng(seed);
    StateFields<Scalar> s;
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        Field<Scalar> f = Field<Scalar>::Ones(grid.cells());
        for (int kx = 1; kx <= modes; ++kx) {
            for (int ky = 0; ky <= ky_max; ++ky) {
                const Scalar c =
                    Scalar(2 * unit_uniform(rng) - 1) * amplitude / (Scalar(kx * kx + ky * ky) * weight_sum);
                f += c * cosine_mode(grid, kx, ky);
            }
        }
        s.species.push_back(base[i] * f);
    }
    if (!(s.min_value() > Scalar(0))) throw InternalError("random_smooth: produced a non-positive cell");
    return s;
}

} // namespace entrodiff
