#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "functionals.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace entrodiff {

enum class Splitting {
    Lie,    // D(dt) after R(dt)
    Strang, // R(dt/2) D(dt) R(dt/2)
};

template <typename Scalar>
struct StepperConfig {
    Scalar dt = Scalar(1e-3);
    int max_substeps = 10000;              // per cell and reaction stage
    Scalar positivity_floor = Scalar(0);   // reaction substeps landing below are rejected
    Scalar reaction_tol = Scalar(1e-10);   // step-doubling error per substep
    Splitting scheme = Splitting::Strang;
    bool reaction = true;                  // false: diffusion only

    void validate() const {
        if (!(dt > Scalar(0))) throw DomainError("stepper: dt must be positive");
        if (max_substeps < 1) throw DomainError("stepper: max_substeps must be >= 1");
        if (!(reaction_tol > Scalar(0))) throw DomainError("stepper: reaction_tol must be positive");
        if (!(positivity_floor >= Scalar(0))) throw DomainError("stepper: positivity_floor must be >= 0");
    }
};

namespace detail {

/// Solves (I - r L) x = b in place, L the 1D Neumann stencil
/// [1 -1; -1 2 -1; ...; -1 1]. `c` is scratch of the same length.
template <typename Scalar>
void solve_neumann_line(Scalar* b, Eigen::Index n, Eigen::Index stride, Scalar r, Scalar* c) {
    // Thomas algorithm; the matrix is symmetric and strictly diagonally dominant.
    const Scalar off = -r;
    Scalar diag = Scalar(1) + r;
    Scalar inv = Scalar(1) / diag;
    c[0] = off * inv;
    b[0] *= inv;
    for (Eigen::Index i = 1; i < n; ++i) {
        diag = (i + 1 == n ? Scalar(1) + r : Scalar(1) + Scalar(2) * r) - off * c[i - 1];
        if (!(diag > Scalar(0))) throw InternalError("diffusion solve: non-positive pivot");
        inv = Scalar(1) / diag;
        c[i] = off * inv;
        b[i * stride] = (b[i * stride] - off * b[(i - 1) * stride]) * inv;
    }
    for (Eigen::Index i = n - 1; i > 0; --i) b[(i - 1) * stride] -= c[i - 1] * b[i * stride];
}

} // namespace detail

/// Backward Euler step of u_t = d Lap u with Neumann walls. In 2-D the
/// implicit operator is factored into an x sweep followed by a y sweep.
template <typename Scalar>
Field<Scalar> diffusion_step(const Field<Scalar>& u, Scalar d, Scalar dt, const Grid<Scalar>& grid) {
    require_matches(u, grid);
    if (!(d >= Scalar(0))) throw DomainError("diffusion_step: d must be non-negative");
    if (!(dt > Scalar(0))) throw DomainError("diffusion_step: dt must be positive");
    if (d == Scalar(0)) return u;
    // Solving for the excess over min(u) keeps constants exact fixed points
    // and the result bounded below by min(u) without rounding.
    const Scalar floor = u.minCoeff();
    Field<Scalar> out = u - floor;
    std::vector<Scalar> scratch(std::max(grid.n(0), grid.n(1)));
    const Eigen::Index n0 = grid.n(0), n1 = grid.n(1);
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const Scalar r = d * dt / (grid.h(axis) * grid.h(axis));
        if (axis == 0) {
            for (Eigen::Index j = 0; j < n1; ++j) detail::solve_neumann_line(out.data() + j * n0, n0, 1, r, scratch.data());
        } else {
            for (Eigen::Index i = 0; i < n0; ++i) detail::solve_neumann_line(out.data() + i, n1, n0, r, scratch.data());
        }
    }
    out += floor;
    return out;
}

/// Pointwise reaction ODE integrator: classical RK4 with step doubling.
/// A substep is rejected and halved when the two-half-step and one-step
/// results disagree by more than `tol`, or when any component lands below
/// the positivity floor. The reaction field lies in every hyperplane
/// a_i + a_m = const, so each accepted substep preserves those sums.
template <typename Scalar>
class ReactionIntegrator {
public:
    explicit ReactionIntegrator(const SystemSpec<Scalar>& spec, Scalar tol = Scalar(1e-10),
                                Scalar positivity_floor = Scalar(0), int max_substeps = 10000)
        : alpha_(spec.reactant_alpha().begin(), spec.reactant_alpha().end()),
          m_(spec.m),
          tol_(tol),
          floor_(positivity_floor),
          max_substeps_(max_substeps),
          k1_(m_), k2_(m_), k3_(m_), k4_(m_), tmp_(m_), full_(m_), half_(m_), mid_(m_) {}

    /// Advances `a` by dt in place. Returns the number of attempted substeps.
    int advance(Eigen::Ref<Vector<Scalar>> a, Scalar dt) {
        if (a.size() != m_) throw DomainError("reaction_substep: species count mismatch");
        if (!(dt > Scalar(0))) throw DomainError("reaction_substep: dt must be positive");
        for (int i = 0; i < m_; ++i)
            if (!(a[i] >= Scalar(0))) throw DomainError("reaction_substep: negative input concentration");

        Scalar t(0);
        Scalar h = dt;
        int attempts = 0;
        while (t < dt) {
            const bool last = h >= dt - t;
            if (last) h = dt - t;
            if (++attempts > max_substeps_) {
                std::ostringstream os;
                os << "reaction substep limit " << max_substeps_ << " exceeded at cell values (";
                for (int i = 0; i < m_; ++i) os << (i ? ", " : "") << static_cast<double>(a[i]);
                os << ")";
                throw StiffnessError(os.str());
            }
            rk4(a, h, full_);
            rk4(a, Scalar(0.5) * h, mid_);
            rk4(mid_, Scalar(0.5) * h, half_);

            Scalar err(0);
            bool admissible = true;
            for (int i = 0; i < m_; ++i) {
                using std::abs;
                const Scalar v = half_[i];
                if (!std::isfinite(static_cast<double>(v)) || v < floor_ || (v <= Scalar(0) && a[i] > Scalar(0)) ||
                    mid_[i] < Scalar(0) || full_[i] < Scalar(0))
                    admissible = false;
                err = std::max(err, abs(full_[i] - v) / (Scalar(1) + abs(v)));
            }
            if (!admissible || err > tol_) {
                h *= Scalar(0.5);
                continue;
            }
            a = half_;
            t = last ? dt : t + h;
            if (err < tol_ / Scalar(64)) h *= Scalar(2);
        }
        return attempts;
    }

private:
    void rates(const Vector<Scalar>& a, Vector<Scalar>& r) const {
        Scalar p(1);
        for (std::size_t j = 0; j < alpha_.size(); ++j) p *= int_power(a[Eigen::Index(j)], alpha_[j]);
        const Scalar v = a[m_ - 1] - p;
        r.setConstant(v);
        r[m_ - 1] = -v;
    }

    template <typename In>
    void rk4(const In& a, Scalar h, Vector<Scalar>& out) {
        const Scalar half = Scalar(0.5) * h;
        tmp_ = a;
        rates(tmp_, k1_);
        tmp_ = a + half * k1_;
        rates(tmp_, k2_);
        tmp_ = a + half * k2_;
        rates(tmp_, k3_);
        tmp_ = a + h * k3_;
        rates(tmp_, k4_);
        out = a + (h / Scalar(6)) * (k1_ + Scalar(2) * k2_ + Scalar(2) * k3_ + k4_);
    }

    std::vector<int> alpha_;
    int m_;
    Scalar tol_;
    Scalar floor_;
    int max_substeps_;
    Vector<Scalar> k1_, k2_, k3_, k4_, tmp_, full_, half_, mid_;
};

template <typename Scalar>
Vector<Scalar> reaction_substep(const Vector<Scalar>& a, Scalar dt, const SystemSpec<Scalar>& spec,
                                const StepperConfig<Scalar>& cfg = {}) {
    ReactionIntegrator<Scalar> integ(spec, cfg.reaction_tol, cfg.positivity_floor, cfg.max_substeps);
    Vector<Scalar> out = a;
    integ.advance(out, dt);
    return out;
}

namespace detail {

template <typename Scalar>
void react_all_cells(StateFields<Scalar>& state, Scalar dt, ReactionIntegrator<Scalar>& integ) {
    const int m = state.m();
    const Eigen::Index cells = state.species[0].size();
    Vector<Scalar> a(m);
    for (Eigen::Index k = 0; k < cells; ++k) {
        for (int i = 0; i < m; ++i) a[i] = state.species[i][k];
        try {
            integ.advance(a, dt);
        } catch (const StiffnessError& e) {
            throw StiffnessError(std::string(e.what()) + " in cell " + std::to_string(k));
        }
        for (int i = 0; i < m; ++i) state.species[i][k] = a[i];
    }
}

template <typename Scalar>
void diffuse_all_species(StateFields<Scalar>& state, Scalar dt, const SystemSpec<Scalar>& spec,
                         const Grid<Scalar>& grid) {
    for (int i = 0; i < spec.m; ++i)
        if (spec.d[i] > Scalar(0)) state.species[i] = diffusion_step(state.species[i], spec.d[i], dt, grid);
}

} // namespace detail

/// One split step of length cfg.dt (or `dt_override` when positive).
template <typename Scalar>
StateFields<Scalar> step(const StateFields<Scalar>& state, const StepperConfig<Scalar>& cfg,
                         const SystemSpec<Scalar>& spec, const Grid<Scalar>& grid, Scalar dt_override = Scalar(0)) {
    cfg.validate();
    require_matches(state, spec, grid);
    const Scalar dt = dt_override > Scalar(0) ? dt_override : cfg.dt;
    StateFields<Scalar> next = state;
    ReactionIntegrator<Scalar> integ(spec, cfg.reaction_tol, cfg.positivity_floor, cfg.max_substeps);
    if (!cfg.reaction) {
        detail::diffuse_all_species(next, dt, spec, grid);
    } else if (cfg.scheme == Splitting::Strang) {
        detail::react_all_cells(next, Scalar(0.5) * dt, integ);
        detail::diffuse_all_species(next, dt, spec, grid);
        detail::react_all_cells(next, Scalar(0.5) * dt, integ);
    } else {
        detail::react_all_cells(next, dt, integ);
        detail::diffuse_all_species(next, dt, spec, grid);
    }
    next.t = state.t + dt;
    return next;
}

/// Sampled history of a run together with what is needed to interpret it.
template <typename Scalar>
struct TrajectoryRecord {
    SystemSpec<Scalar> spec;
    Grid<Scalar> grid;
    EquilibriumState<Scalar> eq;
    Scalar poincare{};
    std::vector<FunctionalSample<Scalar>> samples;
    std::vector<StateFields<Scalar>> snapshots; // only when requested

    std::vector<Scalar> times() const {
        std::vector<Scalar> t;
        t.reserve(samples.size());
        for (const auto& s : samples) t.push_back(s.t);
        return t;
    }
};

/// Integrates from `initial` to t_end, sampling every `sample_every` steps
/// and at the final time. The equilibrium is the one matching the initial masses.
template <typename Scalar>
TrajectoryRecord<Scalar> run(const SystemSpec<Scalar>& spec, const Grid<Scalar>& grid, const StepperConfig<Scalar>& cfg,
                             const StateFields<Scalar>& initial, Scalar t_end, int sample_every,
                             bool keep_snapshots = false) {
    spec.validate();
    cfg.validate();
    require_matches(initial, spec, grid);
    if (!(t_end >= Scalar(0))) throw DomainError("run: t_end must be non-negative");
    if (sample_every < 1) throw DomainError("run: sample_every must be >= 1");
    if (!(initial.min_value() > Scalar(0))) throw DomainError("run: initial data must be strictly positive");

    TrajectoryRecord<Scalar> rec;
    rec.spec = spec;
    rec.grid = grid;
    rec.poincare = poincare_constant(grid);
    rec.eq = solve_equilibrium(conserved_masses(initial, grid), grid.volume(), spec.reactant_alpha());

    StateFields<Scalar> state = initial;
    const Scalar t0 = initial.t;
    auto record = [&](const StateFields<Scalar>& s) {
        rec.samples.push_back(compute_sample(s, spec, grid, rec.eq, rec.poincare));
        if (keep_snapshots) rec.snapshots.push_back(s);
    };
    record(state);

    using std::ceil;
    const Scalar ratio = t_end / cfg.dt;
    auto steps = static_cast<long long>(std::llround(static_cast<double>(ratio)));
    if (std::abs(static_cast<double>(ratio) - double(steps)) > 1e-9 * std::max(1.0, static_cast<double>(ratio)))
        steps = static_cast<long long>(ceil(ratio));
    for (long long k = 1; k <= steps; ++k) {
        const Scalar target = k == steps ? t0 + t_end : t0 + Scalar(k) * cfg.dt;
        state = step(state, cfg, spec, grid, target - state.t);
        state.t = target;
        if (k % sample_every == 0 || k == steps) record(state);
    }
    return rec;
}

} // namespace entrodiff
