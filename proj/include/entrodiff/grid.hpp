#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <type_traits>

#include "errors.hpp"

namespace entrodiff {

template <typename Scalar>
using Field = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Uniform cell-centred grid on an interval or rectangle [0,L0]x[0,L1].
///
/// Cells are flattened row-major with axis 0 varying fastest: the cell
/// (i, j) lives at k = j * n(0) + i. Cell centres sit at (k + 1/2) h.
template <typename Scalar>
class Grid {
public:
    Grid() = default;

    static Grid line(Scalar length, int cells) { return Grid(1, {length, Scalar(1)}, {cells, 1}); }

    static Grid rectangle(Scalar lx, Scalar ly, int nx, int ny) { return Grid(2, {lx, ly}, {nx, ny}); }

    Grid(int dim, std::array<Scalar, 2> lengths, std::array<int, 2> cells)
        : dim_(dim), lengths_(lengths), n_(cells) {
        if (dim != 1 && dim != 2)
            throw DomainError("grid dimension must be 1 or 2, got " + std::to_string(dim));
        if (dim == 1) {
            lengths_[1] = Scalar(1);
            n_[1] = 1;
        }
        for (int a = 0; a < dim; ++a) {
            if (!(lengths_[a] > Scalar(0)) || !std::isfinite(static_cast<double>(lengths_[a])))
                throw DomainError("grid length along axis " + std::to_string(a) + " must be positive");
            if (n_[a] < 4)
                throw DomainError("grid needs at least 4 cells per axis, got " + std::to_string(n_[a]));
        }
    }

    int dim() const { return dim_; }
    int n(int axis) const { return n_[axis]; }
    Scalar length(int axis) const { return lengths_[axis]; }
    Scalar h(int axis) const { return lengths_[axis] / Scalar(n_[axis]); }
    Eigen::Index cells() const { return Eigen::Index(n_[0]) * n_[1]; }
    Eigen::Index stride(int axis) const { return axis == 0 ? 1 : n_[0]; }

    Scalar volume() const { return dim_ == 1 ? lengths_[0] : lengths_[0] * lengths_[1]; }
    Scalar cell_volume() const { return dim_ == 1 ? h(0) : h(0) * h(1); }

    /// Coordinate of cell centre `k` along `axis`.
    Scalar center(int axis, Eigen::Index k) const {
        const Eigen::Index idx = axis == 0 ? k % n_[0] : k / n_[0];
        return (Scalar(idx) + Scalar(0.5)) * h(axis);
    }

    Scalar max_length() const { return dim_ == 1 ? lengths_[0] : std::max(lengths_[0], lengths_[1]); }

    bool operator==(const Grid&) const = default;

private:
    int dim_ = 1;
    std::array<Scalar, 2> lengths_{Scalar(1), Scalar(1)};
    std::array<int, 2> n_{4, 1};
};

template <typename Scalar>
void require_matches(const Field<Scalar>& u, const Grid<Scalar>& grid) {
    if (u.size() != grid.cells())
        throw DomainError("field has " + std::to_string(u.size()) + " values, grid has " +
                          std::to_string(grid.cells()) + " cells");
}

/// Visits every interior face along `axis` as fn(lower_cell, upper_cell).
/// Boundary faces carry zero flux and are never visited.
template <typename Scalar, typename Fn>
void for_each_face(const Grid<Scalar>& grid, int axis, Fn&& fn) {
    const Eigen::Index n0 = grid.n(0), n1 = grid.n(1);
    if (axis == 0) {
        for (Eigen::Index j = 0; j < n1; ++j)
            for (Eigen::Index i = 0; i + 1 < n0; ++i) fn(j * n0 + i, j * n0 + i + 1);
    } else {
        for (Eigen::Index j = 0; j + 1 < n1; ++j)
            for (Eigen::Index i = 0; i < n0; ++i) fn(j * n0 + i, (j + 1) * n0 + i);
    }
}

/// Second-order Laplacian with mirror ghost cells (homogeneous Neumann).
template <typename Scalar>
Field<Scalar> neumann_laplacian(const Field<Scalar>& u, const Grid<Scalar>& grid) {
    require_matches(u, grid);
    Field<Scalar> out = Field<Scalar>::Zero(u.size());
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const Scalar inv_h2 = Scalar(1) / (grid.h(axis) * grid.h(axis));
        for_each_face(grid, axis, [&](Eigen::Index k, Eigen::Index kp) {
            const Scalar flux = (u[kp] - u[k]) * inv_h2;
            out[k] += flux;
            out[kp] -= flux;
        });
    }
    return out;
}

/// Cell-wise |grad u|^2: squared face differences, each face shared equally
/// between its two cells. Integrates exactly to <u, -Lap u>.
template <typename Scalar>
Field<Scalar> grad_sq(const Field<Scalar>& u, const Grid<Scalar>& grid) {
    require_matches(u, grid);
    Field<Scalar> out = Field<Scalar>::Zero(u.size());
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const Scalar inv_h = Scalar(1) / grid.h(axis);
        for_each_face(grid, axis, [&](Eigen::Index k, Eigen::Index kp) {
            const Scalar g = (u[kp] - u[k]) * inv_h;
            const Scalar half = Scalar(0.5) * g * g;
            out[k] += half;
            out[kp] += half;
        });
    }
    return out;
}

template <typename Scalar>
Scalar integrate(const Field<Scalar>& u, const Grid<Scalar>& grid) {
    require_matches(u, grid);
    return u.sum() * grid.cell_volume();
}

template <typename Scalar>
Scalar mean(const Field<Scalar>& u, const Grid<Scalar>& grid) {
    require_matches(u, grid);
    return u.sum() / Scalar(u.size());
}

template <typename Scalar>
Scalar lp_norm(const Field<Scalar>& u, Scalar p, const Grid<Scalar>& grid) {
    require_matches(u, grid);
    if (!(p >= Scalar(1))) throw DomainError("lp_norm requires p >= 1");
    using std::pow;
    if (p == Scalar(1)) return u.abs().sum() * grid.cell_volume();
    if (p == Scalar(2)) return std::sqrt(static_cast<Scalar>(u.square().sum() * grid.cell_volume()));
    return pow(static_cast<Scalar>(u.abs().pow(p).sum() * grid.cell_volume()), Scalar(1) / p);
}

template <typename Scalar>
Scalar sup_norm(const Field<Scalar>& u) {
    return u.size() == 0 ? Scalar(0) : u.abs().maxCoeff();
}

/// Inverse of the first non-zero Neumann eigenvalue, (L_max / pi)^2.
template <typename Scalar>
Scalar poincare_constant(const Grid<Scalar>& grid) {
    const Scalar r = grid.max_length() / std::numbers::pi_v<Scalar>;
    return r * r;
}

/// Samples fn(x) or fn(x, y) at the cell centres.
template <typename Scalar, typename Fn>
Field<Scalar> sample_field(const Grid<Scalar>& grid, Fn&& fn) {
    Field<Scalar> out(grid.cells());
    for (Eigen::Index k = 0; k < grid.cells(); ++k) {
        if constexpr (std::is_invocable_v<Fn, Scalar, Scalar>)
            out[k] = fn(grid.center(0, k), grid.center(1, k));
        else
            out[k] = fn(grid.center(0, k));
    }
    return out;
}

} // namespace entrodiff
