#include "parahom/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace parahom {

SpatialGrid SpatialGrid::from_box(const SpatialBox& box, std::span<const int> cells) {
    const int d = box.dim();
    if (d < 2 || d > 3) throw std::invalid_argument("grid dimension must be 2 or 3");
    if (static_cast<int>(cells.size()) != d) throw std::invalid_argument("grid resolution/box dimension mismatch");
    SpatialGrid g;
    g.dim = d;
    for (int i = 0; i < d; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (cells[ui] < 2) throw std::invalid_argument("grid needs at least 2 cells per axis");
        g.N[ui] = cells[ui];
        g.lo[ui] = box.lo[ui];
        g.h[ui] = box.width(i) / cells[ui];
    }
    return g;
}

double SpatialGrid::cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < dim; ++i) v *= h[static_cast<std::size_t>(i)];
    return v;
}

std::array<int, 3> SpatialGrid::unravel(int cell) const {
    return {cell % N[0], (cell / N[0]) % N[1], cell / (N[0] * N[1])};
}

void SpatialGrid::center(int cell, std::span<double> X) const {
    const auto idx = unravel(cell);
    for (int i = 0; i < dim; ++i) X[static_cast<std::size_t>(i)] = center(i, idx[static_cast<std::size_t>(i)]);
}

SpatialBox SpatialGrid::box() const {
    SpatialBox b;
    for (int i = 0; i < dim; ++i) {
        b.lo.push_back(lo[static_cast<std::size_t>(i)]);
        b.hi.push_back(hi(i));
    }
    return b;
}

nlohmann::json to_json(const SpaceTimeGrid& g) {
    const auto& s = g.space;
    std::vector<int> N(s.N.begin(), s.N.begin() + s.dim);
    std::vector<double> lo(s.lo.begin(), s.lo.begin() + s.dim), h(s.h.begin(), s.h.begin() + s.dim);
    return {{"dim", s.dim}, {"cells", N}, {"lo", lo}, {"h", h},
            {"t0", g.time.t0}, {"dt", g.time.dt}, {"steps", g.time.steps}};
}

SpaceTimeGrid grid_from_json(const nlohmann::json& j) {
    SpaceTimeGrid g;
    g.space.dim = j.at("dim").get<int>();
    const auto N = j.at("cells").get<std::vector<int>>();
    const auto lo = j.at("lo").get<std::vector<double>>();
    const auto h = j.at("h").get<std::vector<double>>();
    for (int i = 0; i < g.space.dim; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        g.space.N[ui] = N.at(ui);
        g.space.lo[ui] = lo.at(ui);
        g.space.h[ui] = h.at(ui);
    }
    g.time.t0 = j.at("t0").get<double>();
    g.time.dt = j.at("dt").get<double>();
    g.time.steps = j.at("steps").get<int>();
    return g;
}

std::vector<BoundaryFace> boundary_faces(const SpatialGrid& g) {
    std::vector<BoundaryFace> faces;
    const double V = g.cell_volume();
    for (int axis = 0; axis < g.dim; ++axis) {
        const auto ua = static_cast<std::size_t>(axis);
        for (int side = 0; side < 2; ++side) {
            for (int c = 0; c < g.cells(); ++c) {
                const auto idx = g.unravel(c);
                if (idx[ua] != (side == 0 ? 0 : g.N[ua] - 1)) continue;
                BoundaryFace f;
                f.cell = c;
                f.axis = axis;
                f.side = side;
                for (int i = 0; i < g.dim; ++i) f.X[static_cast<std::size_t>(i)] = g.center(i, idx[static_cast<std::size_t>(i)]);
                f.X[ua] = side == 0 ? g.lo[ua] : g.hi(axis);
                f.area = V / g.h[ua];
                faces.push_back(f);
            }
        }
    }
    return faces;
}

int boundary_face_index(const SpatialGrid& g, int cell, int axis, int side) {
    // faces are grouped by (axis, side); inside a group they follow cell order,
    // which is the lexicographic order of the remaining indices
    int offset = 0;
    for (int a = 0; a < axis; ++a) offset += 2 * g.cells() / g.N[static_cast<std::size_t>(a)];
    const int group = g.cells() / g.N[static_cast<std::size_t>(axis)];
    offset += side * group;
    const auto idx = g.unravel(cell);
    int k = 0, stride = 1;
    for (int i = 0; i < g.dim; ++i) {
        if (i == axis) continue;
        k += idx[static_cast<std::size_t>(i)] * stride;
        stride *= g.N[static_cast<std::size_t>(i)];
    }
    return offset + k;
}

ScalarField::ScalarField(SpaceTimeGrid grid, std::vector<int> levels) : grid_(grid), levels_(std::move(levels)) {
    if (!std::is_sorted(levels_.begin(), levels_.end())) throw std::invalid_argument("ScalarField levels must be sorted");
    values_.assign(levels_.size() * static_cast<std::size_t>(grid_.space.cells()), 0.0);
}

std::span<double> ScalarField::slot(int s) {
    const auto n = static_cast<std::size_t>(grid_.space.cells());
    return std::span<double>(values_).subspan(static_cast<std::size_t>(s) * n, n);
}

std::span<const double> ScalarField::slot(int s) const {
    const auto n = static_cast<std::size_t>(grid_.space.cells());
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(s) * n, n);
}

std::span<double> ScalarField::boundary_slot(int s) {
    const std::size_t n = boundary_.size() / levels_.size();
    return std::span<double>(boundary_).subspan(static_cast<std::size_t>(s) * n, n);
}

std::span<const double> ScalarField::boundary_slot(int s) const {
    const std::size_t n = boundary_.size() / levels_.size();
    return std::span<const double>(boundary_).subspan(static_cast<std::size_t>(s) * n, n);
}

int ScalarField::slot_of_level(int level) const {
    const auto it = std::lower_bound(levels_.begin(), levels_.end(), level);
    if (it == levels_.end() || *it != level) return -1;
    return static_cast<int>(it - levels_.begin());
}

int ScalarField::nearest_slot(double t) const {
    int best = 0;
    for (int s = 1; s < level_count(); ++s)
        if (std::abs(time(s) - t) < std::abs(time(best) - t)) best = s;
    return best;
}

double ScalarField::sample(std::span<const double> X, double t) const {
    const auto& g = grid_.space;
    int base[3] = {0, 0, 0};
    double w[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < g.dim; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        double u = (X[ui] - g.lo[ui]) / g.h[ui] - 0.5;
        u = std::clamp(u, 0.0, static_cast<double>(g.N[ui] - 1));
        base[i] = std::min(static_cast<int>(std::floor(u)), g.N[ui] - 2);
        w[i] = u - base[i];
    }
    auto spatial = [&](int s) {
        double acc = 0.0;
        for (int corner = 0; corner < (1 << g.dim); ++corner) {
            double wt = 1.0;
            int idx[3] = {0, 0, 0};
            for (int i = 0; i < g.dim; ++i) {
                const bool up = (corner >> i) & 1;
                idx[i] = base[i] + (up ? 1 : 0);
                wt *= up ? w[i] : 1.0 - w[i];
            }
            if (wt != 0.0) acc += wt * at(s, g.index(idx[0], idx[1], idx[2]));
        }
        return acc;
    };
    if (level_count() == 1) return spatial(0);
    int s = 0;
    while (s + 2 < level_count() && time(s + 1) <= t) ++s;
    const double t0 = time(s), t1 = time(s + 1);
    const double a = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    if (a == 0.0) return spatial(s);
    if (a == 1.0) return spatial(s + 1);
    return (1.0 - a) * spatial(s) + a * spatial(s + 1);
}

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

std::vector<int> all_levels(const TimeGrid& t) {
    std::vector<int> levels(static_cast<std::size_t>(t.steps + 1));
    for (int k = 0; k <= t.steps; ++k) levels[static_cast<std::size_t>(k)] = k;
    return levels;
}

}  // namespace parahom
