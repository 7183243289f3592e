#include <doctest.h>

#include "parahom/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace parahom;

namespace {

SpaceTimeGrid unit_square(int N, double T, int steps) {
    SpaceTimeGrid g;
    g.space.dim = 2;
    g.space.N = {N, N, 1};
    g.space.h = {1.0 / N, 1.0 / N, 1.0};
    g.time = {0.0, T / steps, steps};
    return g;
}

double ramp(double t, double tau) { return std::clamp(t / tau, 0.0, 1.0); }

BoundaryData data(std::function<double(std::span<const double>, double)> f, std::string label = "test") {
    BoundaryData b;
    b.f = std::move(f);
    b.label = std::move(label);
    return b;
}

double max_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    return m;
}

}  // namespace

TEST_CASE("half-space grid layout") {
    const auto g = half_space_grid(1, 2.0, 3.0, 0.25, -1.0, 1.0, 0.125);
    CHECK(g.space.dim == 2);
    CHECK(g.space.N[0] == 16);
    CHECK(g.space.N[1] == 12);
    CHECK(g.space.lo[0] == -2.0);
    CHECK(g.space.lo[1] == 0.0);
    CHECK(g.time.steps == 16);
    CHECK(g.time.t_end() == doctest::Approx(1.0));
    CHECK_THROWS_AS(half_space_grid(1, 2.0, 3.0, 0.3, 0.0, 1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(half_space_grid(3, 2.0, 3.0, 0.25, 0.0, 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("incompatible initial data is a hard error") {
    ParabolicSolver solver(identity_field(2), unit_square(8, 0.1, 4));
    CHECK_THROWS_AS(solver.solve(data([](auto, double) { return 1.0; })), std::invalid_argument);
    CHECK_THROWS_AS(solver.solve(data([](auto, double t) { return t + 1e-11; })), std::invalid_argument);
    CHECK_NOTHROW(solver.solve(data([](auto, double t) { return t + 1e-13; })));
}

TEST_CASE("discrete maximum principle over randomized solves") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const CoefficientField fields[] = {identity_field(2), laminate_field(2, 1.0, 9.0, 0.3, 1), trig_field(2),
                                       checkerboard_field(2, 0.5, 5.0, 0.1), scale_field(trig_field(2), 0.25)};
    double worst_low = 0.0, worst_high = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto& A = fields[static_cast<std::size_t>(trial) % std::size(fields)];
        const int N = 8 + static_cast<int>(U(rng) * 10);
        const auto grid = unit_square(N, 0.2 + U(rng), 12);
        const double cx = U(rng), cy = U(rng), width = 0.1 + 0.4 * U(rng), amp = U(rng), tau = 0.05 + 0.5 * U(rng);
        auto f = data([=](std::span<const double> X, double t) {
            const double r2 = (X[0] - cx) * (X[0] - cx) + (X[1] - cy) * (X[1] - cy);
            return amp * std::exp(-r2 / (width * width)) * ramp(t, tau);
        });
        const auto u = ParabolicSolver(A, grid).solve(f);
        double fmax = 0.0;
        for (double v : u.boundary_values()) fmax = std::max(fmax, v);
        for (int s = 0; s < u.level_count(); ++s) {
            for (double v : u.slot(s)) {
                worst_low = std::min(worst_low, v);
                worst_high = std::max(worst_high, v - amp);
            }
        }
        CHECK(fmax <= amp);
    }
    CHECK(worst_low >= -1e-12);
    CHECK(worst_high <= 1e-12);
}

TEST_CASE("constant data drives the solution to one") {
    const auto grid = unit_square(16, 1.0, 64);
    const auto u = ParabolicSolver(laminate_field(2, 1.0, 4.0), grid).solve(data([](auto, double t) { return ramp(t, 0.1); }));
    const double centre[] = {0.5, 0.5};
    CHECK(u.sample(centre, 1.0) > 0.99);
    CHECK(u.sample(centre, 1.0) <= 1.0 + 1e-12);
    CHECK(u.sample(centre, 0.1) < u.sample(centre, 0.5));
}

TEST_CASE("affine data is reproduced in the interior") {
    SmallMatrix M(2, 2);
    M << 1.5, 0.4, 0.4, 1.0;
    const auto grid = unit_square(16, 3.0, 96);
    const auto u = ParabolicSolver(constant_field(M), grid)
                       .solve(data([](std::span<const double> X, double t) { return (X[0] - 0.3 * X[1]) * ramp(t, 0.2); }));
    double err = 0.0;
    double X[2];
    const int last = u.level_count() - 1;
    for (int c = 0; c < grid.space.cells(); ++c) {
        grid.space.center(c, X);
        err = std::max(err, std::abs(u.at(last, c) - (X[0] - 0.3 * X[1])));
    }
    CHECK(err <= 1e-6);
}

TEST_CASE("linearity and bitwise determinism") {
    const auto grid = unit_square(12, 0.5, 10);
    ParabolicSolver solver(trig_field(2), grid);
    auto f = [](std::span<const double> X, double t) { return std::sin(3 * X[0]) * X[1] * t; };
    auto g = [](std::span<const double> X, double t) { return std::cos(X[0] * X[1]) * t * t; };
    const auto uf = solver.solve(data(f));
    const auto ug = solver.solve(data(g));
    const auto ufg = solver.solve(data([&](std::span<const double> X, double t) { return 2.0 * f(X, t) - 0.5 * g(X, t); }));
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < ufg.values().size(); ++k) {
        err = std::max(err, std::abs(ufg.values()[k] - (2.0 * uf.values()[k] - 0.5 * ug.values()[k])));
        scale = std::max(scale, std::abs(ufg.values()[k]));
    }
    CHECK(err <= 1e-9 * scale);

    const auto again = ParabolicSolver(trig_field(2), grid).solve(data(f));
    CHECK(again.values() == uf.values());
    CHECK(again.boundary_values() == uf.boundary_values());
}

TEST_CASE("adjoint weights reproduce the forward probe") {
    const auto grid = unit_square(10, 0.4, 16);
    ParabolicSolver solver(checkerboard_field(2, 1.0, 4.0, 0.2), grid);
    auto f = [](std::span<const double> X, double t) { return (1.0 + X[0] - X[1] * X[1]) * std::sin(7 * t); };
    const auto u = solver.solve(data(f));
    const double probe[] = {0.37, 0.61};
    const auto weights = sampling_weights(grid.space, probe);
    for (int level : {16, 9}) {
        const auto adj = solver.adjoint(weights, level);
        REQUIRE(adj.intervals == level);
        double via_adjoint = 0.0;
        for (int n = 0; n < level; ++n) {
            const double t = grid.time.t(n) + 0.5 * grid.time.dt;
            for (int k = 0; k < adj.faces; ++k)
                via_adjoint += adj.at(n, k) * f(std::span<const double>(solver.op().faces[static_cast<std::size_t>(k)].X.data(), 2), t);
        }
        const double forward = u.sample(probe, grid.time.t(level));
        CHECK(via_adjoint == doctest::Approx(forward).epsilon(1e-9));
    }
    CHECK_THROWS_AS(solver.adjoint(weights, 0), std::invalid_argument);
}

TEST_CASE("self-convergence under refinement") {
    // dt tied to h^2 keeps implicit Euler second order in h
    const double T = 0.125;
    auto f = [](std::span<const double> X, double t) {
        return std::sin(std::numbers::pi * X[0]) * (1.0 + X[1]) * std::sin(8.0 * t) * std::sin(8.0 * t);
    };
    std::vector<ScalarField> runs;
    for (int N : {16, 32, 64}) {
        const auto grid = unit_square(N, T, N * N / 8);
        runs.push_back(ParabolicSolver(trig_field(2), grid).solve(data(f), {.store_levels = {N * N / 8}}));
    }
    auto diff = [&](const ScalarField& coarse, const ScalarField& fine) {
        double m = 0.0, X[2];
        const auto& g = coarse.grid().space;
        for (int c = 0; c < g.cells(); ++c) {
            g.center(c, X);
            m = std::max(m, std::abs(coarse.at(0, c) - fine.sample(X, T)));
        }
        return m;
    };
    const double e1 = diff(runs[0], runs[1]);
    const double e2 = diff(runs[1], runs[2]);
    MESSAGE("self-convergence factor " << e1 / e2);
    CHECK(e1 / e2 >= 1.7);
}

TEST_CASE("rescaling") {
    const auto grid = unit_square(16, 0.25, 8);
    const auto u = ParabolicSolver(trig_field(2), grid).solve(data([](std::span<const double> X, double t) { return X[0] * t; }));
    const auto same = rescale_solution(u, 1.0, grid);
    CHECK(max_diff(same, u) <= 1e-12);

    const auto ones = ScalarField::from_function(grid, all_levels(grid.time), [](auto, double) { return 1.0; });
    auto target = grid;
    target.space.h = {0.5 / 16, 0.5 / 16, 1.0};
    target.time.dt /= 4.0;
    const auto rescaled = rescale_solution(ones, 2.0, target);
    for (double v : rescaled.values()) CHECK(v == 1.0);

    auto too_big = grid;
    too_big.space.h = {2.0 / 16, 2.0 / 16, 1.0};
    CHECK_THROWS_AS(rescale_solution(u, 1.0, too_big), std::out_of_range);
    CHECK_THROWS_AS(rescale_solution(u, 0.0, grid), std::invalid_argument);
}

TEST_CASE("solve with A(x/eps) then rescale equals solve with A on the stretched domain") {
    const double eps = 0.5;
    const auto fine = unit_square(32, 0.125, 16);
    auto f = [](std::span<const double> X, double t) { return X[0] * X[1] * t; };
    const auto u_eps = ParabolicSolver(scale_field(laminate_field(2), eps), fine).solve(data(f));

    SpaceTimeGrid stretched = fine;
    stretched.space.h = {fine.space.h[0] / eps, fine.space.h[1] / eps, 1.0};
    stretched.time.dt = fine.time.dt / (eps * eps);
    auto f_stretched = [&](std::span<const double> Y, double s) {
        const double X[] = {eps * Y[0], eps * Y[1]};
        return f(X, eps * eps * s);
    };
    const auto v = ParabolicSolver(laminate_field(2), stretched).solve(data(f_stretched));
    const auto v_from_u = rescale_solution(u_eps, eps, stretched);
    CHECK(max_diff(v, v_from_u) <= 1e-10 * u_eps.max_abs());
}

TEST_CASE("graph and cylinder wrappers") {
    const auto grid = half_space_grid(1, 1.0, 1.0, 0.125, 0.0, 0.25, 1.0 / 32);
    auto f = data([](std::span<const double> X, double t) { return std::exp(-4 * X[0] * X[0]) * t; });
    const auto flat = solve_dirichlet(identity_field(2), GraphDomain::flat(SpatialBox{{-1.0}, {1.0}}), f, grid);
    SolveOptions bottom;
    bottom.walls = DataWalls::Bottom;
    const auto direct = ParabolicSolver(identity_field(2), grid).solve(f, bottom);
    CHECK(flat.values() == direct.values());
    CHECK(flat.metadata.contains("graph"));

    const auto cyl = LipschitzCylinder::box(SpatialBox{{0.0, 0.0}, {1.0, 1.0}}, 0.25);
    const auto u = solve_dirichlet(identity_field(2), cyl, f, unit_square(8, 0.25, 8));
    CHECK(u.metadata.at("coordinates") == "cylinder");
    CHECK_THROWS_AS(solve_dirichlet(identity_field(2), cyl, f, grid), std::invalid_argument);
}

TEST_CASE("normal-derivative trace") {
    const auto grid = half_space_grid(1, 2.0, 2.0, 0.125, 0.0, 1.0, 0.125);
    const auto Q = boundary_cube(std::vector<double>{0.0}, 0.5, 0.5);
    auto lam = ScalarField::from_function(grid, all_levels(grid.time), [](std::span<const double> X, double) { return X[1]; });
    lam.set_boundary([](std::span<const double> X, double) { return X[1]; });
    const auto tr = nt_trace_ratio(lam, Q);
    REQUIRE_FALSE(tr.cells.empty());
    CHECK(tr.hypothesis_ok);
    for (const auto& c : tr.cells) {
        CHECK(c.first == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(c.richardson == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(std::abs(c.x[0]) < 0.5);
    }
    // 8 cells in |x| < 0.5 times levels with |t - 0.5| < 0.25
    CHECK(tr.cells.size() == 8 * 3);
    CHECK(tr.cell_measure == doctest::Approx(0.125 * 0.125));

    const auto sq = ScalarField::from_function(grid, all_levels(grid.time), [](std::span<const double> X, double) { return X[1] * X[1]; });
    const auto tr2 = nt_trace_ratio(sq, Q);
    CHECK(tr2.cells.front().first == doctest::Approx(0.0625));
    CHECK(std::abs(tr2.cells.front().richardson) <= 1e-15);

    auto dirty = lam;
    dirty.set_boundary([](std::span<const double> X, double) { return X[1] + 1e-8; });
    CHECK_FALSE(nt_trace_ratio(dirty, Q).hypothesis_ok);
}

TEST_CASE("Moser ratio") {
    const auto grid = half_space_grid(1, 2.0, 4.0, 0.125, 0.0, 2.0, 1.0 / 64);
    const auto Q = interior_cube(std::vector<double>{0.0, 2.0}, 1.0, 0.5);
    const auto one = ScalarField::from_function(grid, all_levels(grid.time), [](auto, double) { return 1.0; });
    CHECK(moser_ratio(one, Q) == doctest::Approx(1.0).epsilon(1e-14));

    const auto x1 = ScalarField::from_function(grid, all_levels(grid.time), [](std::span<const double> X, double) { return X[0]; });
    // direct oracle: inner cells |x1| < 0.5 have centres up to 0.4375; outer rms over |x1| < 1
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < 16; ++i) {
        const double x = -0.9375 + 0.125 * i;
        sum += x * x;
        ++count;
    }
    CHECK(moser_ratio(x1, Q) == doctest::Approx(0.4375 / std::sqrt(sum / count)).epsilon(1e-12));

    const auto off = interior_cube(std::vector<double>{1.5, 2.0}, 1.0, 0.5);
    CHECK_THROWS_AS(moser_ratio(one, off), std::out_of_range);
    const auto late = interior_cube(std::vector<double>{0.0, 2.0}, 1.5, 0.5);
    CHECK_THROWS_AS(moser_ratio(one, late), std::out_of_range);
}

TEST_CASE("Caccioppoli ratio of a separable solution") {
    const double R = 1.0;
    const double k = std::numbers::pi / (4 * R);
    // closed forms over Omega_2 x (0, 4R^2) and Omega_3 x (0, 8R^2), n = 1
    const double energy = 4 * R * R * (1 - std::exp(-8 * k * k * R * R)) / 2;
    const double mass = 4 * R * (1.5 * R + 1 / (4 * k)) * (1 - std::exp(-16 * k * k * R * R)) / (2 * k * k);
    const double exact = R * R * energy / mass;
    double prev_err = 1.0;
    for (double h : {0.125, 0.0625}) {
        const auto grid = half_space_grid(1, 2.0 * R, 4.0 * R, h, 0.0, 8 * R * R, h * h);
        auto u = ScalarField::from_function(grid, all_levels(grid.time), [k](std::span<const double> X, double t) {
            return std::sin(k * X[1]) * std::exp(-k * k * t);
        });
        u.set_boundary([k](std::span<const double> X, double t) { return std::sin(k * X[1]) * std::exp(-k * k * t); });
        const auto c = caccioppoli_ratio(u, R);
        const double err = std::abs(c.ratio / exact - 1);
        MESSAGE("h = " << h << " ratio " << c.ratio << " exact " << exact);
        CHECK(err < 0.03);
        CHECK(err < prev_err);
        CHECK_FALSE(c.hypothesis_ok);  // nonzero initial level and side walls
        prev_err = err;
    }

    const auto grid = half_space_grid(1, 2.0, 4.0, 0.25, 0.0, 8.0, 0.25);
    auto zero = ScalarField::from_function(grid, all_levels(grid.time), [](auto, double) { return 0.0; });
    zero.allocate_boundary(boundary_faces(grid.space).size());
    const auto c0 = caccioppoli_ratio(zero, 1.0);
    CHECK(c0.degenerate);
    CHECK(c0.ratio == 0.0);
    CHECK(c0.hypothesis_ok);
}

TEST_CASE("Q-difference") {
    const auto grid = half_space_grid(1, 2.0, 4.0, 0.125, 0.0, 1.0, 0.25);
    const auto periodic = ScalarField::from_function(grid, all_levels(grid.time), [](std::span<const double> X, double t) {
        return std::sin(2 * std::numbers::pi * X[1]) * X[0] * t;
    });
    const auto q0 = q_difference(periodic, 1.0);
    CHECK(q0.grid().space.N[1] == 32 - 8);
    CHECK(q0.max_abs() <= 1e-12);

    const auto lam = ScalarField::from_function(grid, all_levels(grid.time), [](std::span<const double> X, double) { return X[1]; });
    const auto q1 = q_difference(lam, 0.5);
    for (double v : q1.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-13));

    CHECK_THROWS_AS(q_difference(lam, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(q_difference(lam, 4.0), std::invalid_argument);

    const auto decay = q_difference_decay(lam, 0.5, 1.0);
    CHECK(decay.sup_q == doctest::Approx(0.5));
    CHECK(decay.mean_square > 0.0);
}
