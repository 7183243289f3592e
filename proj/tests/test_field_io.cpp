#include <doctest.h>

#include "parahom/field_io.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace parahom;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("parahom_" + name)).string();
}

}  // namespace

TEST_CASE("field files round trip values, boundary values and metadata") {
    SpaceTimeGrid g;
    g.space = SpatialGrid::from_box(SpatialBox{{-1.0, 0.0}, {1.0, 0.5}}, std::vector<int>{6, 3});
    g.time = TimeGrid{-0.25, 0.0625, 8};
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto u = ScalarField::from_function(g, {0, 3, 8}, [&](auto, double) { return U(rng); });
    u.allocate_boundary(2 * (6 + 3));
    for (int s = 0; s < u.level_count(); ++s)
        for (auto& b : u.boundary_slot(s)) b = U(rng);
    u.metadata = {{"coefficient", "trig"}, {"eps", 0.125}};

    const auto path = temp_path("roundtrip.phf");
    write_field(u, path);
    const auto v = read_field(path);
    CHECK(v.grid().space == g.space);
    CHECK(v.grid().time.t0 == g.time.t0);
    CHECK(v.grid().time.dt == g.time.dt);
    CHECK(v.grid().time.steps == g.time.steps);
    CHECK(v.levels() == u.levels());
    CHECK(v.values() == u.values());
    CHECK(v.boundary_values() == u.boundary_values());
    CHECK(v.metadata == u.metadata);

    std::ifstream side(path + ".json");
    const auto meta = nlohmann::json::parse(side);
    CHECK(meta.at("levels") == nlohmann::json({0, 3, 8}));
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}

TEST_CASE("malformed field files are rejected") {
    const auto path = temp_path("bad.phf");
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOTAFIELD";
    }
    CHECK_THROWS_AS(read_field(path), std::runtime_error);
    {
        std::ofstream os(path, std::ios::binary);
        os.write("PHFIELD1", 8);
        const std::int32_t dim = 2;
        os.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    }
    CHECK_THROWS_AS(read_field(path), std::runtime_error);
    CHECK_THROWS_AS(read_field(temp_path("missing.phf")), std::runtime_error);
    std::filesystem::remove(path);
}
