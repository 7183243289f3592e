#include <doctest.h>

#include "parahom/geometry.hpp"

#include <cmath>
#include <random>

using namespace parahom;

namespace {

// Independent oracle: bisection on t^2/rho^4 + |X|^2/rho^2 = 1.
double norm_by_bisection(std::span<const double> X, double t) {
    double s = 0.0;
    for (double x : X) s += x * x;
    if (s == 0.0 && t == 0.0) return 0.0;
    auto f = [&](double r) { return t * t / (r * r * r * r) + s / (r * r) - 1.0; };
    double lo = 1e-300, hi = 1.0;
    while (f(hi) > 0.0) hi *= 2.0;
    lo = hi / 2.0;
    while (f(lo) < 0.0) lo /= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("parabolic norm examples") {
    const double a[] = {3.0, 4.0};
    CHECK(parabolic_norm(a, 0.0) == doctest::Approx(5.0).epsilon(1e-15));
    const double z[] = {0.0, 0.0};
    CHECK(parabolic_norm(z, 4.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(parabolic_norm(z, 0.0) == 0.0);
    const double u[] = {1.0};
    CHECK(parabolic_norm(u, std::sqrt(2.0)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("parabolic norm agrees with bisection and satisfies its defining equation") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int k = 0; k < 2000; ++k) {
        const double X[] = {u(rng), u(rng)};
        const double t = u(rng) * std::abs(u(rng));
        const double rho = parabolic_norm(X, t);
        CHECK(std::abs(rho - norm_by_bisection(X, t)) <= 1e-12 * rho);
        const double lhs = t * t / std::pow(rho, 4) + (X[0] * X[0] + X[1] * X[1]) / (rho * rho);
        CHECK(std::abs(lhs - 1.0) <= 1e-12);
        const double gamma = std::abs(u(rng));
        const double Y[] = {gamma * X[0], gamma * X[1]};
        CHECK(std::abs(parabolic_norm(Y, gamma * gamma * t) - gamma * rho) <= 1e-12 * gamma * rho);
    }
}

TEST_CASE("parabolic distance examples and quasi-triangle inequality") {
    const ParabolicPoint o{{0.0, 0.0}, 0.0};
    CHECK(parabolic_distance(o, o) == 0.0);
    CHECK(parabolic_distance(o, {{3.0, 4.0}, 0.0}) == doctest::Approx(5.0));
    CHECK(parabolic_distance(o, {{0.0, 0.0}, 4.0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(parabolic_distance(o, {{1.0}, 0.0}), std::invalid_argument);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int k = 0; k < 5000; ++k) {
        const ParabolicPoint p{{g(rng), g(rng)}, g(rng)}, q{{g(rng), g(rng)}, g(rng)}, r{{g(rng), g(rng)}, g(rng)};
        CHECK(parabolic_distance(p, q) == parabolic_distance(q, p));
        CHECK(parabolic_distance(p, r) <= kQuasiMetricConstant * (parabolic_distance(p, q) + parabolic_distance(q, r)));
    }
}

TEST_CASE("cubes") {
    auto Q = boundary_cube({0.0}, 0.0, 0.5);
    CHECK(Q.measure() == doctest::Approx(1.0 * 2.0 * 0.25));
    const double in[] = {0.4};
    CHECK(Q.contains(in, 0.2));
    CHECK_FALSE(Q.contains(in, 0.3));
    auto T = box_cube({0.0}, 0.0, 1.0);
    CHECK(T.measure() == doctest::Approx(4.0));
    const double p[] = {0.0, 0.5};
    CHECK(T.contains(p, 0.0));
    const double q[] = {0.0, 1.5};
    CHECK_FALSE(T.contains(q, 0.0));
    CHECK(interior_cube({0.0, 0.0}, 0.0, 1.0).measure() == doctest::Approx(8.0));
    CHECK_THROWS(boundary_cube({0.0}, 0.0, 0.0));
}

TEST_CASE("cone membership") {
    Cone c{{0.0}, 0.0, 1.0, std::nullopt};
    const double x0[] = {0.0};
    CHECK(cone_contains(c, x0, 0.0, 1.0));
    const double x2[] = {2.0};
    CHECK_FALSE(cone_contains(c, x2, 0.0, 1.0));
    Cone wide{{0.0}, 0.0, 3.0, std::nullopt};
    const double x1[] = {1.0};
    CHECK(cone_contains(wide, x1, 1.0, 1.0));
    Cone cut{{0.0}, 0.0, 3.0, 0.5};
    CHECK_FALSE(cone_contains(cut, x1, 1.0, 1.0));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0), e(0.1, 4.0);
    for (int k = 0; k < 5000; ++k) {
        const double e1 = e(rng), e2 = e1 + e(rng);
        const double x[] = {u(rng)};
        const double t = u(rng), lam = std::abs(u(rng));
        if (cone_contains({{0.0}, 0.0, e1, std::nullopt}, x, t, lam))
            CHECK(cone_contains({{0.0}, 0.0, e2, std::nullopt}, x, t, lam));
    }
}

TEST_CASE("flatten pullback") {
    const SpatialBox box{{-2.0}, {2.0}};
    auto A = trig_field(2);

    auto same = flatten_pullback(GraphDomain::flat(box), A);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        const double X[] = {u(rng), u(rng)};
        CHECK((same(X).array() == A(X).array()).all());
    }

    auto tilted = flatten_pullback(GraphDomain::closed_form("x1/2", 0.5, box), identity_field(2));
    const double X[] = {0.3, 0.7};
    const SmallMatrix M = tilted(X);
    CHECK(M(0, 0) == doctest::Approx(1.0));
    CHECK(M(0, 1) == doctest::Approx(-0.5));
    CHECK(M(1, 0) == doctest::Approx(-0.5));
    CHECK(M(1, 1) == doctest::Approx(1.25));
    CHECK(tilted.ellipticity() == doctest::Approx(2.25));

    CHECK_THROWS_AS(flatten_pullback(GraphDomain::closed_form("2*x1", 1.0, box), A), std::domain_error);
}

TEST_CASE("flattened ellipticity lower bound on random tabulated graphs") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double lam = 2.0;
    SmallMatrix base(2, 2);
    base << 2.0, 0.0, 0.0, 0.5;
    auto A = constant_field(base, lam);
    for (int trial = 0; trial < 20; ++trial) {
        const double m = 0.2 + 1.5 * std::abs(u(rng));
        std::vector<double> values{0.0};
        const int nodes = 41;
        const double h = 4.0 / (nodes - 1);
        for (int i = 1; i < nodes; ++i) values.push_back(values.back() + m * u(rng) * h);
        auto dom = GraphDomain::table(values, {nodes}, m, SpatialBox{{-2.0}, {2.0}});
        auto F = flatten_pullback(dom, A);
        const double bound = (1.0 / lam) / (1.0 + m * m + m * std::sqrt(2.0 + m * m));
        for (int k = 0; k < 50; ++k) {
            const double X[] = {2.0 * u(rng), u(rng)};
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es{Eigen::Matrix2d(F(X))};
            CHECK(es.eigenvalues()(0) >= bound * (1.0 - 1e-12));
            CHECK(es.eigenvalues()(1) <= F.ellipticity() * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("graph Lipschitz check and gradients") {
    auto g = GraphDomain::closed_form("abs(x1)", 1.0, SpatialBox{{-1.0}, {1.0}}, 65);
    CHECK(g.check_lipschitz().pass);
    auto bad = GraphDomain::closed_form("sqrt(abs(x1))", 1.0, SpatialBox{{-1.0}, {1.0}}, 65);
    const auto chk = bad.check_lipschitz();
    CHECK_FALSE(chk.pass);
    CHECK(chk.worst_x.size() == 1);

    auto t = GraphDomain::table({0.0, 1.0, 4.0}, {3}, 3.0, SpatialBox{{0.0}, {2.0}});
    const double x[] = {1.5};
    CHECK(t.phi(x) == doctest::Approx(2.5));
    double grad[1];
    t.gradient(x, grad);
    // nodal gradients 1, 2, 3 interpolated at the midpoint of the last cell
    CHECK(grad[0] == doctest::Approx(2.5));
}

TEST_CASE("boundary measure") {
    const SpatialBox box{{-4.0}, {4.0}};
    const auto Q = boundary_cube({0.5}, 0.0, 0.75);
    CHECK(boundary_measure(GraphDomain::flat(box), Q).value == doctest::Approx(1.5 * 2 * 0.75 * 0.75));
    CHECK(boundary_measure(GraphDomain::closed_form("x1", 1.0, box), Q).value ==
          doctest::Approx(std::sqrt(2.0) * 1.5 * 2 * 0.75 * 0.75));
    const auto far = boundary_measure(GraphDomain::flat(box), boundary_cube({10.0}, 0.0, 1.0));
    CHECK(far.empty);
    CHECK(far.value == 0.0);

    // midpoint quadrature is second order: the h -> h/2 -> h/4 differences shrink by ~4
    auto smooth = GraphDomain::closed_form("sin(x1)", 1.0, box, 4097);
    const auto R = boundary_cube({0.0}, 0.0, 1.0);
    const double a = boundary_measure(smooth, R, 8).value;
    const double b = boundary_measure(smooth, R, 16).value;
    const double c = boundary_measure(smooth, R, 32).value;
    CHECK(std::abs(a - b) / std::abs(b - c) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("box cylinder charts") {
    auto cyl = LipschitzCylinder::box(SpatialBox{{0.0, 0.0}, {1.0, 2.0}}, 1.0);
    CHECK(cyl.charts().size() == 8);
    const auto chk = cyl.check_charts();
    CHECK(chk.pass);
    CHECK(chk.max_ratio == doctest::Approx(1.0));

    auto charts = cyl.charts();
    charts.back().phi_source = "0";  // a corner is not flat
    LipschitzCylinder broken(cyl.base(), 1.0, charts);
    CHECK_FALSE(broken.check_charts().pass);

    const auto face = boundary_measure(cyl, interior_cube({0.5, 0.0}, 0.5, 0.25));
    CHECK(face.value == doctest::Approx(0.5 * 0.125));
    const auto corner = boundary_measure(cyl, interior_cube({0.0, 0.0}, 0.0, 0.25));
    CHECK(corner.value == doctest::Approx(0.5 * 0.0625));
}

TEST_CASE("domains load from JSON") {
    const auto j = nlohmann::json::parse(R"({"phi": {"kind": "closed_form", "expr": "x1/2"}, "m": 0.5,
                                             "box": [[-1, 1]]})");
    auto g = graph_domain_from_json(j);
    const double x[] = {0.5};
    CHECK(g.phi(x) == doctest::Approx(0.25));
    auto again = graph_domain_from_json(g.to_json());
    CHECK(again.phi(x) == g.phi(x));

    const auto c = cylinder_from_json(nlohmann::json::parse(R"({"box": {"lo": [0, 0], "hi": [1, 1]}, "T": 0.5})"));
    CHECK(c.charts().size() == 8);
    auto c2 = cylinder_from_json(c.to_json());
    CHECK(c2.check_charts().pass);
    CHECK_THROWS(graph_domain_from_json(nlohmann::json::parse(R"({"phi": {"kind": "spline"}, "m": 1, "box": [[0,1]]})")));
}
