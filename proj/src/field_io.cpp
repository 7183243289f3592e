#include "parahom/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace parahom {

static_assert(std::endian::native == std::endian::little, "field files are written in native little-endian order");

namespace {

constexpr char kMagic[8] = {'P', 'H', 'F', 'I', 'E', 'L', 'D', '1'};

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("field file truncated");
    return v;
}

}  // namespace

void write_field(const ScalarField& u, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    const auto& g = u.grid();
    os.write(kMagic, sizeof(kMagic));
    put<std::int32_t>(os, g.space.dim);
    for (int i = 0; i < 3; ++i) put<std::int32_t>(os, g.space.N[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 3; ++i) put<double>(os, g.space.lo[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 3; ++i) put<double>(os, g.space.h[static_cast<std::size_t>(i)]);
    put<double>(os, g.time.t0);
    put<double>(os, g.time.dt);
    put<std::int32_t>(os, g.time.steps);
    put<std::int32_t>(os, u.level_count());
    for (int level : u.levels()) put<std::int32_t>(os, level);
    put<std::uint64_t>(os, u.boundary_values().size());
    os.write(reinterpret_cast<const char*>(u.values().data()), static_cast<std::streamsize>(u.values().size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(u.boundary_values().data()),
             static_cast<std::streamsize>(u.boundary_values().size() * sizeof(double)));
    if (!os) throw std::runtime_error("write to '" + path + "' failed");

    std::ofstream side(path + ".json");
    if (!side) throw std::runtime_error("cannot open '" + path + ".json' for writing");
    const nlohmann::json meta = {{"format", "PHFIELD1 little-endian; cell values slot-major, first axis fastest"},
                                 {"grid", to_json(g)},
                                 {"levels", u.levels()},
                                 {"boundary_values", u.boundary_values().size()},
                                 {"metadata", u.metadata}};
    side << meta.dump(2) << '\n';
}

ScalarField read_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("'" + path + "' is not a field file");
    SpaceTimeGrid g;
    g.space.dim = get<std::int32_t>(is);
    if (g.space.dim < 1 || g.space.dim > 3) throw std::runtime_error("field file has bad dimension");
    for (int i = 0; i < 3; ++i) g.space.N[static_cast<std::size_t>(i)] = get<std::int32_t>(is);
    for (int i = 0; i < 3; ++i) g.space.lo[static_cast<std::size_t>(i)] = get<double>(is);
    for (int i = 0; i < 3; ++i) g.space.h[static_cast<std::size_t>(i)] = get<double>(is);
    g.time.t0 = get<double>(is);
    g.time.dt = get<double>(is);
    g.time.steps = get<std::int32_t>(is);
    const int count = get<std::int32_t>(is);
    if (count < 0 || count > g.time.steps + 1) throw std::runtime_error("field file has bad level count");
    std::vector<int> levels(static_cast<std::size_t>(count));
    for (auto& l : levels) l = get<std::int32_t>(is);
    const auto boundary = get<std::uint64_t>(is);
    ScalarField u(g, std::move(levels));
    is.read(reinterpret_cast<char*>(u.values().data()), static_cast<std::streamsize>(u.values().size() * sizeof(double)));
    if (!is) throw std::runtime_error("field file truncated");
    if (boundary > 0) {
        if (boundary % static_cast<std::uint64_t>(std::max(count, 1)) != 0) throw std::runtime_error("field file has bad boundary size");
        u.allocate_boundary(static_cast<std::size_t>(boundary) / static_cast<std::size_t>(count));
        for (int s = 0; s < count; ++s) {
            auto b = u.boundary_slot(s);
            is.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
        }
        if (!is) throw std::runtime_error("field file truncated");
    }
    std::ifstream side(path + ".json");
    if (side) u.metadata = nlohmann::json::parse(side).value("metadata", nlohmann::json::object());
    return u;
}

}  // namespace parahom
