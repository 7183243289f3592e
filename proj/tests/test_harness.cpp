#include <doctest.h>

#include "parahom/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace parahom;

namespace {

ExperimentConfig small_homogenization(nlohmann::json coefficient) {
    auto cfg = default_homogenization_config();
    cfg.coefficient = std::move(coefficient);
    cfg.eps = {0.5, 0.25};
    cfg.resolution = 32;
    cfg.time_steps = 32;
    cfg.cell_resolution = 32;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing: defaults, round trip and validation") {
    const auto cfg = config_from_json(nlohmann::json::object());
    CHECK(cfg.n == 1);
    CHECK(cfg.eps.size() == 4);
    CHECK(cfg.enabled("anything"));

    auto custom = default_homogenization_config();
    custom.p = {1.5, 2.0, 4.0};
    custom.diagnostics = {{"oracle", false}};
    const auto back = config_from_json(to_json(custom));
    CHECK(to_json(back) == to_json(custom));
    CHECK_FALSE(back.enabled("oracle"));

    CHECK_THROWS_AS(config_from_json({{"eps", {0.5, 1.5}}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json({{"eps", {0.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json({{"p", {1.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json({{"n", 3}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json({{"resolution", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json({{"threads", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json({{"resoluton", 64}}), std::invalid_argument);
}

TEST_CASE("data presets vanish at the initial time") {
    const double X[2] = {0.3, 0.0};
    for (const char* name : {"smooth", "ramp"}) {
        const auto f = data_from_json(name, 2);
        CHECK(f.f(X, 0.0) == doctest::Approx(0.0));
        CHECK(f.f(X, 1.0) > 0.0);
    }
    const auto bump = data_from_json({{"preset", "bump"}, {"x", {0.3}}, {"t", 0.5}, {"r", 0.25}}, 2);
    CHECK(bump.f(X, 0.5) == doctest::Approx(1.0));
    CHECK(bump.f(X, 0.5 + 0.0625) == 0.0);
    const auto e = data_from_json({{"expr", "t * x1"}}, 2);
    CHECK(e.f(X, 2.0) == doctest::Approx(0.6));
    CHECK_THROWS_AS(data_from_json("nonsense", 2), std::invalid_argument);
}

TEST_CASE("homogenization refuses grids that under-resolve the smallest period") {
    auto cfg = small_homogenization("laminate");
    cfg.eps = {0.5, 0.125};
    try {
        homogenization_experiment(cfg);
        FAIL("expected InsufficientResolution");
    } catch (const InsufficientResolution& e) {
        CHECK(e.have == 32);
        CHECK(e.required == 64);
    }
}

TEST_CASE("constant coefficients homogenize to themselves with zero distance") {
    const auto cfg = small_homogenization({{"preset", "constant"}, {"matrix", {{2.0, 0.5}, {0.5, 1.0}}}});
    const auto r = homogenization_experiment(cfg);
    CHECK(r.Abar[0][0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(r.Abar[0][1] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.Abar[1][1] == doctest::Approx(1.0).epsilon(1e-10));
    REQUIRE(r.rows.size() == 2);
    for (const auto& row : r.rows) {
        CHECK(row.distance < 1e-8 * r.ubar_sup);
        CHECK(row.n_ratio.front() > 0.9);
    }
    // identical N for every eps, so the band collapses
    CHECK(r.n_band == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.ubar_sup > 0.0);
}

TEST_CASE("homogenization reports are deterministic and round trip through JSON") {
    auto cfg = small_homogenization("laminate");
    const auto a = homogenization_experiment(cfg);
    cfg.threads = 2;
    const auto b = homogenization_experiment(cfg);
    CHECK(a.rows == b.rows);
    CHECK(a.rows.front().eps > a.rows.back().eps);
    CHECK(a.rows.front().distance > 0.0);

    const auto back = convergence_report_from_json(to_json(a));
    CHECK(back == a);

    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = (dir / "parahom_h1.json").string(), p2 = (dir / "parahom_h2.json").string();
    emit_report(a, ReportFormat::Json, p1);
    emit_report(homogenization_experiment(small_homogenization("laminate")), ReportFormat::Json, p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(std::filesystem::exists(p1 + ".timing.json"));
    CHECK(slurp(p1).find("timing") == std::string::npos);

    std::ostringstream csv, dat;
    write_csv(csv, a);
    write_dat(dat, a);
    CHECK(csv.str().rfind("eps,distance,rate,N_norm_p2,N_ratio_p2,flagged\n", 0) == 0);
    CHECK(dat.str().rfind("# eps", 0) == 0);
    for (const auto& p : {p1, p2}) {
        std::filesystem::remove(p);
        std::filesystem::remove(p + ".timing.json");
    }
}

TEST_CASE("an empty sweep is a valid report") {
    auto cfg = default_sweep_config();
    cfg.sweep = {{"oracle", false}, {"periodic_presets", nlohmann::json::array()}};
    const auto r = solvability_sweep(cfg);
    CHECK(r.rows.empty());
    CHECK(r.pass);
    CHECK(sweep_report_from_json(to_json(r)) == r);
    std::ostringstream csv;
    write_csv(csv, r);
    const auto text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
}

TEST_CASE("chart fields conjugate the coefficient by the chart frame") {
    const auto cyl = LipschitzCylinder::box(SpatialBox{{0.0, 0.0}, {1.0, 1.0}}, 1.0);
    SmallMatrix M(2, 2);
    M << 2.0, 0.5, 0.5, 1.0;
    const auto A = constant_field(M);
    for (const auto& chart : cyl.charts()) {
        const auto B = chart_field(A, chart);
        const double y[2] = {0.1, 0.2};
        const SmallMatrix expect = chart.frame.transpose() * M * chart.frame;
        CHECK((B(y) - expect).norm() < 1e-14);
    }
}

TEST_CASE("sweep rows: identity local solvability at one scale, failures become rows") {
    auto cfg = default_sweep_config();
    cfg.sweep = {{"oracle", false}, {"periodic_presets", {"identity"}}, {"radii", {0.5, 1.0}}, {"charts", false}};
    const auto r = solvability_sweep(cfg);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].diagnostic == "local_solvability");
    CHECK(r.rows[0].value > 0.0);
    // scale invariance of the identity operator
    CHECK(r.rows[1].value == doctest::Approx(r.rows[0].value).epsilon(1e-6));
    CHECK(r.rows[2].diagnostic == "local_solvability_uniformity");
    CHECK(r.rows[2].pass);

    cfg.sweep["radii"] = {-1.0};
    const auto bad = solvability_sweep(cfg);
    CHECK_FALSE(bad.pass);
    CHECK_FALSE(bad.rows.front().note.empty());
}
