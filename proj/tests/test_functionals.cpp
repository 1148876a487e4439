#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "entrodiff/functionals.hpp"
#include "entrodiff/initial.hpp"

using namespace entrodiff;
using G = Grid<double>;
using F = Field<double>;
using Vec = Vector<double>;
using State = StateFields<double>;
constexpr double pi = std::numbers::pi;

namespace {

Vec vec(std::initializer_list<double> v) {
    Vec out(v.size());
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

SystemSpec<double> spec(std::vector<int> alpha, Vec d) { return SystemSpec<double>::make(std::move(alpha), d); }

EquilibriumState<double> equilibrium_of(const State& s, const SystemSpec<double>& sp, const G& g) {
    return solve_equilibrium(conserved_masses(s, g), g.volume(), sp.reactant_alpha());
}

/// Composite Simpson on [0, L] with 2n panels.
template <typename Fn>
double simpson(Fn&& f, double L, int n = 20000) {
    const double h = L / (2 * n);
    double acc = f(0) + f(L);
    for (int k = 1; k < 2 * n; ++k) acc += (k % 2 ? 4 : 2) * f(k * h);
    return acc * h / 3;
}

} // namespace

TEST_CASE("entropy of unit and constant states") {
    auto g = G::line(1.0, 16);
    auto s3 = spec({1, 1}, vec({1, 1, 1}));
    CHECK(entropy(constant_state(vec({1, 1, 1}), g), s3, g) == 0);
    auto s2 = spec({1}, vec({1, 1}));
    CHECK(entropy(constant_state(vec({std::exp(1.0), 1}), g), s2, g) == doctest::Approx(1).epsilon(1e-14));
    // alpha weights: 2 * (2 ln 2 - 2 + 1) for the first species
    auto sa = spec({2}, vec({1, 1}));
    CHECK(entropy(constant_state(vec({2, 1}), g), sa, g) == doctest::Approx(2 * (2 * std::log(2.0) - 1)));
    auto bad = constant_state(vec({1, 1}), g);
    bad.species[0][3] = -1e-3;
    CHECK_THROWS_AS(entropy(bad, s2, g), DomainError);
    bad.species[0][3] = 0;
    CHECK(entropy(bad, s2, g) == doctest::Approx(1.0 / 16));
}

TEST_CASE("functionals are non-negative on random positive states") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, 5);
    auto g = G::line(2.0, 32);
    auto sp = spec({1, 2}, vec({0, 1, 0.5}));
    for (int k = 0; k < 1000; ++k) {
        State s;
        for (int i = 0; i < 3; ++i) s.species.push_back(F::NullaryExpr(g.cells(), [&] { return u(rng); }));
        CHECK(entropy(s, sp, g) >= 0);
        CHECK(dissipation(s, sp, g) >= 0);
        CHECK(relative_entropy(s, equilibrium_of(s, sp, g), sp, g) >= -1e-12);
        auto dev = sqrt_deviation_norms(s, sp, g);
        CHECK(dev.delta2.minCoeff() >= 0);
        CHECK(dev.defect >= 0);
    }
}

TEST_CASE("dissipation of constant states") {
    for (double L : {1.0, 2.0}) {
        auto g = G::line(L, 16);
        auto sp = spec({1, 1}, vec({1, 1, 1}));
        CHECK(dissipation(constant_state(vec({1, 1, 1}), g), sp, g) == 0);
        CHECK(dissipation(constant_state(vec({2, 2, 1}), g), sp, g) == doctest::Approx(3 * std::log(4.0) * L));
        auto parts = dissipation_parts(constant_state(vec({2, 2, 1}), g), sp, g);
        CHECK(parts.gradient == 0);
    }
}

TEST_CASE("gradient part converges to the continuum Fisher integral") {
    // a = 2 + cos(pi x): int |a'|^2 / a = int pi^2 sin^2 / (2 + cos)
    const double exact = simpson([](double x) { return pi * pi * std::sin(pi * x) * std::sin(pi * x) / (2 + std::cos(pi * x)); }, 1.0);
    auto sp = spec({1}, vec({1, 0}));
    double prev = 0;
    for (int n : {32, 64, 128, 256}) {
        auto g = G::line(1.0, n);
        State s;
        s.species.push_back(sample_field(g, [](double x) { return 2 + std::cos(pi * x); }));
        // second species chosen so the reaction part vanishes: a_2 = a_1
        s.species.push_back(s.species[0]);
        auto parts = dissipation_parts(s, sp, g);
        CHECK(parts.reaction == 0);
        const double err = std::abs(parts.gradient - exact) / exact;
        CHECK(err < 2e-3);
        if (prev > 0) CHECK(prev / err > 3.5);
        prev = err;
    }
}

TEST_CASE("reaction-balanced field has pure gradient dissipation") {
    auto g = G::rectangle(1.0, 2.0, 12, 10);
    auto sp = spec({1, 2}, vec({1, 1, 1}));
    State s = random_smooth(g, vec({1.5, 0.7, 1}), 0.4, 3, 5);
    for (Eigen::Index k = 0; k < g.cells(); ++k) s.species[2][k] = s.species[0][k] * s.species[1][k] * s.species[1][k];
    auto parts = dissipation_parts(s, sp, g);
    CHECK(parts.reaction == doctest::Approx(0).epsilon(1e-14));
    CHECK(parts.gradient > 0);
    CHECK(sqrt_deviation_norms(s, sp, g).defect < 1e-28);
}

TEST_CASE("semi-discrete entropy identity dE/dt = -D holds exactly") {
    // Chain rule on the grid: dE/dt = sum_i alpha_i <ln a_i, d_i lap a_i + r_i>.
    std::mt19937_64 rng(2);
    for (const auto& g : {G::line(1.0, 40), G::rectangle(2.0, 1.0, 16, 12)}) {
        for (auto d : {vec({0, 1, 1}), vec({1, 1, 0}), vec({0.3, 2, 1.1})}) {
            auto sp = spec({1, 2}, d);
            State s = random_smooth(g, vec({1.2, 0.8, 0.9}), 0.45, 4, rng());
            double dEdt = 0;
            for (Eigen::Index k = 0; k < g.cells(); ++k) {
                const Vec r = reaction_rates(s.cell(k), sp);
                for (int i = 0; i < 3; ++i) dEdt += sp.alpha[i] * std::log(s.species[i][k]) * r[i] * g.cell_volume();
            }
            for (int i = 0; i < 3; ++i) {
                const F lap = neumann_laplacian(s.species[i], g);
                dEdt += sp.alpha[i] * d[i] * integrate<double>(s.species[i].log() * lap, g);
            }
            const double D = dissipation(s, sp, g);
            CHECK(std::abs(dEdt + D) <= 1e-10 * D);
        }
    }
}

TEST_CASE("relative entropy") {
    auto g = G::line(1.0, 32);
    auto sp = spec({1, 1}, vec({0, 1, 1}));
    EquilibriumState<double> eq{vec({1, 1, 1})};
    CHECK(relative_entropy(constant_state(vec({1, 1, 1}), g), eq, sp, g) == 0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1e-3, 20);
    for (int k = 0; k < 100000; ++k) CHECK(relative_entropy_density(u(rng), u(rng)) >= 0);
}

TEST_CASE("relative entropy equals entropy difference for mass-consistent states") {
    std::mt19937_64 rng(4);
    for (const auto& g : {G::line(1.5, 48), G::rectangle(1.0, 1.0, 12, 12)}) {
        for (int k = 0; k < 50; ++k) {
            auto sp = spec({1 + k % 2, 1 + k % 3}, vec({1, 1, 1}));
            State s = random_smooth(g, vec({0.5 + unit_uniform(rng), 0.5 + unit_uniform(rng), 0.5 + unit_uniform(rng)}),
                                    0.5, 3, rng());
            auto eq = equilibrium_of(s, sp, g);
            const double diff = entropy(s, sp, g) - entropy(constant_state(eq.a_inf, g), sp, g);
            const double rel = relative_entropy(s, eq, sp, g);
            CHECK(std::abs(rel - diff) <= 1e-10 * std::max(1.0, std::abs(rel)));
        }
    }
}

TEST_CASE("relative entropy density stays accurate near the diagonal") {
    for (double y : {1e-3, 1.0, 50.0})
        for (double u : {1e-9, 1e-6, 1e-4, 9.99e-3, 1.001e-2, 0.3, -0.3, -1.001e-2, -9.99e-3, -1e-6}) {
            const double x = y * (1 + u);
            // series oracle to fourth order in u: y (u^2/2 - u^3/6 + u^4/12 - u^5/20)
            const double approx = y * (u * u / 2 - u * u * u / 6 + u * u * u * u / 12 - std::pow(u, 5) / 20);
            if (std::abs(u) < 0.02) CHECK(relative_entropy_density(x, y) == doctest::Approx(approx).epsilon(1e-9));
            else CHECK(relative_entropy_density(x, y) == doctest::Approx(x * std::log(x / y) - x + y).epsilon(1e-13));
        }
    CHECK(relative_entropy_density(0.0, 2.0) == 2);
}

TEST_CASE("gamma function values") {
    CHECK(gamma(1.0, 1.0) == 2);
    CHECK(gamma(3.7, 3.7) == 2);
    CHECK(gamma(1e-6, 1e-6) == 2);
    CHECK(gamma(4.0, 1.0) == doctest::Approx(4 * std::log(4.0) - 3).epsilon(1e-14));
    CHECK(gamma(4.0, 1.0) == doctest::Approx(2.5452).epsilon(1e-4));
    CHECK(gamma(1.0, 4.0) == doctest::Approx(3 - std::log(4.0)).epsilon(1e-14));
    CHECK(gamma(1.0, 4.0) == doctest::Approx(1.6137).epsilon(1e-4));
    CHECK_THROWS_AS(gamma(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(gamma(1.0, -1.0), DomainError);
}

TEST_CASE("gamma is continuous across the diagonal and the series switch") {
    for (double y : {1e-4, 0.5, 1.0, 1e3}) {
        for (double u : {1e-12, 1e-9, 1e-6}) {
            CHECK(gamma(y * (1 + u), y) == doctest::Approx(2).epsilon(1e-5));
            CHECK(gamma(y * (1 - u), y) == doctest::Approx(2).epsilon(1e-5));
        }
        for (double u : {1e-2, -1e-2}) {
            const double below = gamma(y * (1 + u * (1 - 1e-9)), y), above = gamma(y * (1 + u * (1 + 1e-9)), y);
            CHECK(below == doctest::Approx(above).epsilon(1e-10));
        }
    }
}

TEST_CASE("gamma bound residual values") {
    CHECK(gamma_bound_residual(1.0, 1.0, 2.0) == 0);
    CHECK(gamma_bound_residual(4.0, 1.0, 3.0) == doctest::Approx(3 * std::log(4.0) - (4 * std::log(4.0) - 3)));
    CHECK(gamma_bound_residual(4.0, 1.0, 3.0) == doctest::Approx(1.614).epsilon(1e-3));
}

TEST_CASE("algebraic inequality residual") {
    CHECK(algebraic_inequality_residual(1.0, 1.0) == 0);
    CHECK(algebraic_inequality_residual(4.0, 1.0) == doctest::Approx(3 * std::log(4.0) - 4).epsilon(1e-14));
    CHECK(algebraic_inequality_residual(0.0, 0.0) == 0);
    CHECK(algebraic_inequality_residual(0.0, 2.0) == std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(algebraic_inequality_residual(-1.0, 2.0), DomainError);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> e(-8, 8);
    for (int k = 0; k < 100000; ++k) {
        const double x = std::exp(e(rng)), y = std::exp(e(rng));
        CHECK(algebraic_inequality_residual(x, y) >= -1e-12);
        CHECK(log_difference_product(x, y) == doctest::Approx((x - y) * (std::log(x) - std::log(y))).epsilon(1e-10));
    }
}

TEST_CASE("sqrt deviation norms") {
    auto g = G::line(2.0, 16);
    auto sp = spec({1, 1}, vec({1, 1, 1}));
    auto c = sqrt_deviation_norms(constant_state(vec({4, 1, 2}), g), sp, g);
    CHECK(c.delta2.cwiseAbs().maxCoeff() == 0);
    CHECK(c.defect == doctest::Approx(std::pow(std::sqrt(2.0) - 2, 2) * 2).epsilon(1e-14));
    CHECK(sqrt_deviation_norms(constant_state(vec({1, 1, 1}), g), sp, g).defect == 0);
    // sqrt(a) = 1 + 0.5 cos(pi x / L): deviation has norm 0.25 * L / 2
    State s = constant_state(vec({1, 1, 1}), g);
    s.species[0] = sample_field(g, [](double x) { return std::pow(1 + 0.5 * std::cos(pi * x / 2), 2); });
    CHECK(sqrt_deviation_norms(s, sp, g).delta2[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("dissipation lower bound right-hand side") {
    auto g = G::line(1.0, 32);
    auto sp = spec({1, 1}, vec({0, 2, 1}));
    const double P = poincare_constant(g);
    CHECK(dissipation_lower_bound_rhs(constant_state(vec({1, 1, 1}), g), sp, g, P) == 0);
    State s = constant_state(vec({1, 1, 1}), g);
    s.species[0] = sample_field(g, [](double x) { return 1 + 0.5 * std::cos(pi * x); });
    s.species[1] = sample_field(g, [](double x) { return 1 + 0.5 * std::cos(pi * x); });
    s.species[2] = s.species[0] * s.species[1];
    auto dev = sqrt_deviation_norms(s, sp, g);
    CHECK(dev.defect < 1e-28);
    // degenerate species 1 does not enter; alpha_2 d_2 / P on species 2 only
    CHECK(dissipation_lower_bound_rhs(s, sp, g, P) ==
          doctest::Approx(2 / P * dev.delta2[1] + 1 / P * dev.delta2[2] + dev.defect));
    CHECK_THROWS_AS(dissipation_lower_bound_rhs(s, sp, g, 0.0), DomainError);
}

TEST_CASE("deviation dominance") {
    std::mt19937_64 rng(6);
    for (const auto& g : {G::line(2.0, 64), G::rectangle(1.0, 1.5, 16, 16)}) {
        auto sp = spec({1, 1}, vec({1, 1, 1}));
        for (int k = 0; k < 200; ++k) {
            State s = random_smooth(g, vec({1, 2, 0.5}), 0.5, 4, rng());
            auto dev = sqrt_deviation_norms(s, sp, g);
            for (int i = 0; i < 3; ++i) {
                const double abar = mean<double>(s.species[i].sqrt(), g);
                const double root_mean = std::sqrt(mean(s.species[i], g));
                CHECK((abar - root_mean) * (abar - root_mean) * g.volume() <= dev.delta2[i] + 1e-15);
            }
        }
    }
}

TEST_CASE("gamma identity for the relative entropy") {
    std::mt19937_64 rng(7);
    auto g = G::line(1.0, 48);
    for (int k = 0; k < 100; ++k) {
        auto sp = spec({1 + k % 3, 1}, vec({1, 1, 1}));
        State s = random_smooth(g, vec({0.4 + 2 * unit_uniform(rng), 0.4 + 2 * unit_uniform(rng), 1}), 0.5, 3, rng());
        auto eq = equilibrium_of(s, sp, g);
        double acc = 0;
        for (int i = 0; i < 3; ++i)
            for (Eigen::Index c = 0; c < g.cells(); ++c) {
                const double x = s.species[i][c], y = eq.a_inf[i];
                const double diff = std::sqrt(x) - std::sqrt(y);
                acc += sp.alpha[i] * gamma(x, y) * diff * diff * g.cell_volume();
            }
        const double rel = relative_entropy(s, eq, sp, g);
        CHECK(acc == doctest::Approx(rel).epsilon(1e-8));
    }
}

TEST_CASE("ckp sides") {
    auto g = G::line(1.0, 64);
    F one = F::Ones(64);
    auto same = ckp_sides(one, one, g);
    CHECK(same.first == 0);
    CHECK(same.second == 0);
    F step = sample_field(g, [](double x) { return x < 0.5 ? 2.0 : 0.0; });
    auto sides = ckp_sides(step, one, g);
    CHECK(sides.first == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(sides.second == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(sides.second >= sides.first);
    CHECK_THROWS_AS(ckp_sides(F(2 * one), one, g), DomainError);
    CHECK(std::isinf(ckp_sides(one, step, g).second));
}

TEST_CASE("sample records every per-species quantity") {
    auto g = G::line(1.0, 32);
    auto sp = spec({1, 1}, vec({0, 1, 1}));
    State s = equilibrium_cosine(sp, g, vec({2, 2}), 1, 0.3);
    auto eq = equilibrium_of(s, sp, g);
    auto smp = compute_sample(s, sp, g, eq, poincare_constant(g));
    CHECK(smp.masses.size() == 2);
    CHECK(smp.masses[0] == doctest::Approx(2).epsilon(1e-14));
    CHECK(smp.sup.size() == 3);
    CHECK(smp.sup[1] == doctest::Approx(1 + 0.3 * std::cos(pi / 64)).epsilon(1e-3));
    CHECK(smp.l1dist[0] == doctest::Approx(0).epsilon(1e-14));
    CHECK(smp.D == doctest::Approx(smp.D_gradient + smp.D_reaction));
    CHECK(smp.D_lower_rhs == doctest::Approx(dissipation_lower_bound_rhs(s, sp, g, poincare_constant(g))));
    CHECK(smp.near_zero_cells == 0);
    CHECK(smp.E_rel <= smp.E);
}
