#include <doctest.h>

#include "parahom/maximal.hpp"
#include "parahom/potential.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace parahom;

namespace {

SpaceTimeGrid small_grid(int dim, int nx, int nl, int steps) {
    SpaceTimeGrid g;
    std::vector<double> lo(static_cast<std::size_t>(dim), -1.0), hi(static_cast<std::size_t>(dim), 1.0);
    lo.back() = 0.0;
    hi.back() = 1.5;
    std::vector<int> cells(static_cast<std::size_t>(dim), nx);
    cells.back() = nl;
    g.space = SpatialGrid::from_box(SpatialBox{lo, hi}, cells);
    g.time = TimeGrid{0.0, 0.125, steps};
    return g;
}

ScalarField random_field(const SpaceTimeGrid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    return ScalarField::from_function(g, all_levels(g.time), [&](auto, double) { return U(rng); });
}

// sup |u| over cell centres inside the cone, by testing every space-time point
double brute_cone_sup(const ScalarField& u, int axis, int side, std::span<const double> X0, double t0, double eta) {
    const auto& g = u.grid().space;
    double best = -1.0;
    double X[3];
    for (int s = 0; s < u.level_count(); ++s)
        for (int c = 0; c < g.cells(); ++c) {
            g.center(c, std::span<double>(X, static_cast<std::size_t>(g.dim)));
            const double lam = side == 0 ? X[axis] - g.lo[static_cast<std::size_t>(axis)] : g.hi(axis) - X[axis];
            Cone cone;
            std::vector<double> x;
            for (int i = 0; i < g.dim; ++i)
                if (i != axis) {
                    cone.vertex.push_back(X0[static_cast<std::size_t>(i)]);
                    x.push_back(X[i]);
                }
            cone.t0 = t0;
            cone.eta = eta;
            if (cone_contains(cone, x, u.time(s), lam)) best = std::max(best, std::abs(u.at(s, c)));
        }
    return best;
}

}  // namespace

TEST_CASE("constant and linear fields") {
    const auto g = small_grid(2, 16, 12, 8);
    const auto c = ScalarField::from_function(g, all_levels(g.time), [](auto, double) { return -2.5; });
    const auto Nc = nontangential_max(c, ConeOptions{1.0});
    CHECK(Nc.size() == 16u * 9u);
    for (const auto& p : Nc.points) CHECK(p.value == 2.5);

    // u = lambda on height L: the cone reaches the top layer L - h/2
    const auto lam = ScalarField::from_function(g, all_levels(g.time), [](auto X, double) { return X[1]; });
    const double h = g.space.h[1];
    for (const auto& p : nontangential_max(lam, ConeOptions{1.0}).points) {
        CHECK(p.value == doctest::Approx(1.5 - 0.5 * h).epsilon(1e-14));
        CHECK_FALSE(p.flagged);
    }
}

TEST_CASE("cone scan agrees with a brute-force cone test") {
    for (int dim : {2, 3}) {
        const auto g = dim == 2 ? small_grid(2, 12, 9, 6) : small_grid(3, 6, 5, 4);
        const auto u = random_field(g, 7u + static_cast<unsigned>(dim));
        for (double eta : {0.63, 1.37, 3.1}) {
            const auto N = nontangential_max(u, ConeOptions{eta, DataWalls::All});
            for (const auto& p : N.points) {
                int axis = 0, side = 0;
                for (int i = 0; i < dim; ++i) {
                    if (std::abs(p.X[static_cast<std::size_t>(i)] - g.space.lo[static_cast<std::size_t>(i)]) < 1e-12) { axis = i; side = 0; }
                    if (std::abs(p.X[static_cast<std::size_t>(i)] - g.space.hi(i)) < 1e-12) { axis = i; side = 1; }
                }
                const double b = brute_cone_sup(u, axis, side, std::span<const double>(p.X.data(), static_cast<std::size_t>(dim)), p.t, eta);
                REQUIRE(b >= 0.0);
                CHECK_MESSAGE(p.value == b, "dim " << dim << " axis " << axis << " side " << side << " eta " << eta);
            }
        }
    }
}

TEST_CASE("maximal function properties") {
    const auto g = small_grid(2, 16, 12, 8);
    const auto u = random_field(g, 3u);
    const auto v = random_field(g, 4u);
    ScalarField w = u;
    for (std::size_t i = 0; i < w.values().size(); ++i) w.values()[i] += v.values()[i];

    const auto N1 = nontangential_max(u, ConeOptions{0.8});
    const auto N2 = nontangential_max(u, ConeOptions{1.6});
    const auto Nv = nontangential_max(v, ConeOptions{0.8});
    const auto Nw = nontangential_max(w, ConeOptions{0.8});
    for (std::size_t i = 0; i < N1.size(); ++i) {
        CHECK(N1.points[i].value <= N2.points[i].value);
        CHECK(Nw.points[i].value <= N1.points[i].value + Nv.points[i].value + 1e-15);
        CHECK(N1.points[i].value >= std::abs(u.at(static_cast<int>(i % 9), static_cast<int>(i / 9))));
        CHECK(N1.points[i].weight > 0.0);
    }

    // truncation only removes points
    ConeOptions trunc{1.6};
    trunc.truncation = 0.5;
    const auto Nt = nontangential_max(u, trunc);
    for (std::size_t i = 0; i < N1.size(); ++i) CHECK(Nt.points[i].value <= N2.points[i].value);
    CHECK(Nt.metadata["truncation"] == 0.5);
}

TEST_CASE("truncated vertical maximal function") {
    const auto g = small_grid(2, 16, 12, 8);
    const double h = g.space.h[1];
    const auto lam = ScalarField::from_function(g, all_levels(g.time), [](auto X, double) { return X[1]; });
    const auto M = truncated_vertical_max(lam, 0.5);
    for (const auto& p : M.points) CHECK(p.value == doctest::Approx(0.5 - 0.5 * h));
    CHECK(M.metadata["offset"].get<double>() == doctest::Approx(0.5 * h));

    const auto u = random_field(g, 11u);
    const auto Ma = truncated_vertical_max(u, 0.4);
    const auto Mb = truncated_vertical_max(u, 0.9);
    // the vertical segment below r lies in every cone with eta large enough
    ConeOptions wide{4.0};
    const auto N = nontangential_max(u, wide);
    for (std::size_t i = 0; i < Ma.size(); ++i) {
        CHECK(Ma.points[i].value <= Mb.points[i].value);
        CHECK(Mb.points[i].value <= N.points[i].value);
    }
    CHECK_THROWS_AS(truncated_vertical_max(u, 2.0), std::out_of_range);
    CHECK_THROWS_AS(truncated_vertical_max(u, 0.0), std::out_of_range);
}

TEST_CASE("weighted boundary norms") {
    const auto g = small_grid(2, 16, 12, 8);
    const auto u = random_field(g, 5u);
    const auto N = nontangential_max(u, ConeOptions{1.0});
    const double S = N.measure();
    CHECK(S == doctest::Approx(2.0 * 1.0));  // x in (-1, 1), t in (0, 1)
    const auto one = N.with_values([](const BoundaryPoint&) { return 1.0; });
    for (double p : {1.5, 2.0, 4.0}) CHECK(lp_boundary_norm(one, p) == doctest::Approx(std::pow(S, 1.0 / p)));
    const auto scaled = N.with_values([](const BoundaryPoint& q) { return -3.0 * q.value; });
    CHECK(lp_boundary_norm(scaled, 2.0) == doctest::Approx(3.0 * lp_boundary_norm(N, 2.0)).epsilon(1e-14));

    std::mt19937 rng(9);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto r = N.with_values([&](const BoundaryPoint&) { return U(rng); });
        for (auto [p, q] : {std::pair{1.5, 2.0}, std::pair{2.0, 6.0}, std::pair{1.1, 3.0}})
            CHECK(lp_boundary_norm(r, p) <= std::pow(S, 1.0 / p - 1.0 / q) * lp_boundary_norm(r, q) * (1 + 1e-12));
        // p-monotone once the patch has unit measure
        auto prob = r;
        for (auto& pt : prob.points) pt.weight /= S;
        CHECK(lp_boundary_norm(prob, 1.5) <= lp_boundary_norm(prob, 3.0) * (1 + 1e-12));
    }
    CHECK_THROWS_AS(lp_boundary_norm(N, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(lp_boundary_norm(N, INFINITY), std::invalid_argument);

    std::ostringstream csv;
    write_csv(csv, N);
    const std::string text = csv.str();
    CHECK(text.rfind("x1,x2,t,N_value,flag\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(N.size() + 1));
}

TEST_CASE("graph cones are measured from the graph") {
    const auto g = small_grid(2, 16, 12, 6);
    const auto u = random_field(g, 13u);
    const auto flat = GraphDomain::flat(SpatialBox{{-1.0}, {1.0}});
    const auto Nf = nontangential_max(u, flat, 1.3);
    const auto Nr = nontangential_max(u, ConeOptions{1.3});
    for (std::size_t i = 0; i < Nf.size(); ++i) CHECK(Nf.points[i].value == Nr.points[i].value);

    const auto tilted = GraphDomain::closed_form("0.25*x1", 0.25, SpatialBox{{-1.0}, {1.0}});
    CHECK(nontangential_max(u, tilted).metadata["eta"] == 1.0);
    CHECK_THROWS_AS(nontangential_max(u, tilted, 0.2), std::invalid_argument);
    const auto N = nontangential_max(u, tilted, 0.9);
    for (const auto& p : N.points) {
        // original coordinates of every cell: (x, s + phi(x))
        double best = 0.0;
        for (int s = 0; s < u.level_count(); ++s)
            for (int c = 0; c < g.space.cells(); ++c) {
                const auto idx = g.space.unravel(c);
                const double x = g.space.center(0, idx[0]);
                const double lam = g.space.center(1, idx[1]) + 0.25 * x;
                const Cone cone{{p.X[0]}, p.t, 0.9, std::nullopt};
                const double y[] = {x};
                if (cone_contains(cone, y, u.time(s), lam - p.X[1])) best = std::max(best, std::abs(u.at(s, c)));
            }
        CHECK(p.value == best);
        CHECK(p.X[1] == doctest::Approx(0.25 * p.X[0]));
        CHECK(p.weight == doctest::Approx(std::sqrt(1.0 + 0.0625) * g.space.h[0] * (p.t == 0.0 || p.t == 0.75 ? 0.0625 : 0.125)));
    }
}

TEST_CASE("empirical solvability constant for the heat equation") {
    const auto A = identity_field(2);
    const auto dom = GraphDomain::flat(SpatialBox{{-3.0}, {3.0}});
    auto table_at = [&](double h, double shift) {
        HalfSpaceBox b;
        b.half_width = 3.0;
        b.height = 3.0;
        b.h = h;
        b.dt = h * h;
        b.t_start = -0.5;
        const auto grid = HalfSpace(A, b).grid(1.5);
        std::vector<BoundaryData> family = {mollified_indicator(boundary_cube({shift}, 0.5, 0.5), 0.125, 0.0625)};
        return solvability_constant(A, dom, family, 2.0, grid, 0.0, static_cast<int>(std::lround(0.0625 / (h * h))));
    };
    const auto coarse = table_at(0.125, 0.0);
    const auto fine = table_at(0.0625, 0.0);
    const auto moved = table_at(0.125, 0.5);
    REQUIRE(coarse.rows.size() == 1u);
    CHECK(coarse.eta == 1.0);
    CHECK(std::isfinite(coarse.constant));
    CHECK(coarse.constant >= 1.0);
    CHECK(fine.constant == doctest::Approx(coarse.constant).epsilon(0.10));
    CHECK(moved.constant == doctest::Approx(coarse.constant).epsilon(0.15));
    MESSAGE("C(h=1/8) = " << coarse.constant << ", C(h=1/16) = " << fine.constant << ", shifted " << moved.constant);

    // data switched on and held at one: N dominates the first-layer trace,
    // which approaches the data as the grid refines
    BoundaryData ramp;
    ramp.label = "ramp";
    ramp.f = [](std::span<const double>, double t) { return std::clamp((t + 0.5) / 0.25, 0.0, 1.0); };
    double previous_gap = 1.0;
    for (double h : {0.125, 0.0625}) {
        HalfSpaceBox b;
        b.half_width = 3.0;
        b.height = 3.0;
        b.h = h;
        b.dt = 1.0 / 64;
        b.t_start = -0.5;
        const auto grid = HalfSpace(A, b).grid(1.0);
        SolveOptions opt;
        opt.store_levels = strided(grid.time, 4);
        const auto u = solve_dirichlet(A, dom, ramp, grid, opt);
        const auto N = nontangential_max(u, dom);
        const auto f = data_trace(N, ramp);
        const int S = u.level_count();
        std::size_t i = 0;
        const auto trace = N.with_values([&](const BoundaryPoint&) {
            const int face = static_cast<int>(i / static_cast<std::size_t>(S)), slot = static_cast<int>(i % static_cast<std::size_t>(S));
            ++i;
            return u.at(slot, face);
        });
        const double ratio = lp_boundary_norm(N, 2.0) / lp_boundary_norm(f, 2.0);
        CHECK(ratio >= lp_boundary_norm(trace, 2.0) / lp_boundary_norm(f, 2.0));
        CHECK(ratio >= 0.9);
        const double gap = std::max(0.0, 1.0 - ratio);
        CHECK(gap < previous_gap);
        previous_gap = gap;
        MESSAGE("ramp, h = " << h << ": ratio " << ratio);
    }
}

TEST_CASE("cylinder cones use the face charts") {
    const auto cyl = LipschitzCylinder::box(SpatialBox{{0.0, 0.0}, {1.0, 1.0}}, 0.5);
    SpaceTimeGrid g;
    g.space = SpatialGrid::from_box(cyl.base(), std::vector<int>{8, 8});
    g.time = TimeGrid{0.0, 0.0625, 8};
    const auto u = random_field(g, 21u);
    const auto N = nontangential_max(u, cyl);
    CHECK(N.metadata["eta"] == 2.0);  // corner charts have m = 1
    CHECK(N.size() == 4u * 8u * 9u);
    CHECK(N.measure() == doctest::Approx(4.0 * 0.5));
    const auto all = nontangential_max(u, ConeOptions{2.0, DataWalls::All});
    for (std::size_t i = 0; i < N.size(); ++i) CHECK(N.points[i].value == all.points[i].value);

    SpaceTimeGrid other = g;
    other.space = SpatialGrid::from_box(SpatialBox{{0.0, 0.0}, {2.0, 1.0}}, std::vector<int>{8, 8});
    CHECK_THROWS_AS(nontangential_max(ScalarField(other, {0}), cyl), std::invalid_argument);
}
