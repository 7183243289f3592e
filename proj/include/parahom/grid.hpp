#pragma once

#include "parahom/geometry.hpp"

#include <array>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace parahom {

/// Cell-centred tensor grid on a box of R^d (d = 2 or 3). The last axis is
/// lambda for half-space runs. Cell (i0, i1, i2) has linear index with the
/// first axis varying fastest.
struct SpatialGrid {
    int dim = 2;
    std::array<int, 3> N{1, 1, 1};
    std::array<double, 3> lo{0.0, 0.0, 0.0};
    std::array<double, 3> h{1.0, 1.0, 1.0};

    static SpatialGrid from_box(const SpatialBox& box, std::span<const int> cells);

    int cells() const { return N[0] * N[1] * N[2]; }
    double cell_volume() const;
    double hi(int axis) const { return lo[static_cast<std::size_t>(axis)] + N[static_cast<std::size_t>(axis)] * h[static_cast<std::size_t>(axis)]; }
    int index(int i0, int i1, int i2 = 0) const { return i0 + N[0] * (i1 + N[1] * i2); }
    std::array<int, 3> unravel(int cell) const;
    /// Cell centre coordinate along one axis.
    double center(int axis, int i) const { return lo[static_cast<std::size_t>(axis)] + (i + 0.5) * h[static_cast<std::size_t>(axis)]; }
    void center(int cell, std::span<double> X) const;
    SpatialBox box() const;

    friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;
};

struct TimeGrid {
    double t0 = 0.0;
    double dt = 1.0;
    int steps = 1;

    double t(int level) const { return t0 + level * dt; }
    double t_end() const { return t(steps); }
    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

struct SpaceTimeGrid {
    SpatialGrid space;
    TimeGrid time;
    friend bool operator==(const SpaceTimeGrid&, const SpaceTimeGrid&) = default;
};

nlohmann::json to_json(const SpaceTimeGrid& g);
SpaceTimeGrid grid_from_json(const nlohmann::json& j);

/// One face on the outer boundary of a (non-periodic) grid.
struct BoundaryFace {
    int cell = 0;   // adjacent inside cell
    int axis = 0;
    int side = 0;   // 0 = low wall, 1 = high wall
    std::array<double, 3> X{};  // face centre
    double area = 0.0;
};

/// Boundary faces ordered by (axis, side, cell index).
std::vector<BoundaryFace> boundary_faces(const SpatialGrid& g);
/// Index of the boundary face of `cell` on (axis, side) inside `boundary_faces(g)`.
int boundary_face_index(const SpatialGrid& g, int cell, int axis, int side);

/// Discrete space-time field: cell values at a subset of time levels, plus the
/// boundary data seen by the solver at those levels.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(SpaceTimeGrid grid, std::vector<int> levels);

    const SpaceTimeGrid& grid() const { return grid_; }
    const std::vector<int>& levels() const { return levels_; }
    int level_count() const { return static_cast<int>(levels_.size()); }
    double time(int slot) const { return grid_.time.t(levels_[static_cast<std::size_t>(slot)]); }

    std::span<double> slot(int s);
    std::span<const double> slot(int s) const;
    std::span<double> boundary_slot(int s);
    std::span<const double> boundary_slot(int s) const;
    bool has_boundary() const { return !boundary_.empty(); }
    /// Zero wall values for `face_count` faces at every stored level.
    void allocate_boundary(std::size_t face_count) { boundary_.assign(face_count * levels_.size(), 0.0); }

    double at(int s, int cell) const { return values_[static_cast<std::size_t>(s) * grid_.space.cells() + static_cast<std::size_t>(cell)]; }
    /// Slot holding time level `level`, or -1.
    int slot_of_level(int level) const;
    /// Slot whose time is closest to t.
    int nearest_slot(double t) const;

    /// Multilinear interpolation between cell centres (clamped at the walls)
    /// and linear interpolation between stored levels.
    double sample(std::span<const double> X, double t) const;

    double max_abs() const;
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& boundary_values() const { return boundary_; }

    nlohmann::json metadata;  // provenance of the solve (coefficient, data, conventions)

    /// Field with values f(X, t) at cell centres of every stored level.
    template <class F>
    static ScalarField from_function(const SpaceTimeGrid& grid, std::vector<int> levels, F&& f) {
        ScalarField u(grid, std::move(levels));
        double X[3];
        const int n = grid.space.cells();
        for (int s = 0; s < u.level_count(); ++s) {
            auto vals = u.slot(s);
            for (int c = 0; c < n; ++c) {
                grid.space.center(c, std::span<double>(X, static_cast<std::size_t>(grid.space.dim)));
                vals[static_cast<std::size_t>(c)] = f(std::span<const double>(X, static_cast<std::size_t>(grid.space.dim)), u.time(s));
            }
        }
        return u;
    }

    /// Attaches wall values g(X_face, t) at each stored level.
    template <class F>
    void set_boundary(F&& g) {
        const auto faces = boundary_faces(grid_.space);
        boundary_.assign(faces.size() * levels_.size(), 0.0);
        for (int s = 0; s < level_count(); ++s) {
            auto b = boundary_slot(s);
            for (std::size_t f = 0; f < faces.size(); ++f)
                b[f] = g(std::span<const double>(faces[f].X.data(), static_cast<std::size_t>(grid_.space.dim)), time(s));
        }
    }

private:
    SpaceTimeGrid grid_;
    std::vector<int> levels_;
    std::vector<double> values_;
    std::vector<double> boundary_;
};

/// All levels 0..steps.
std::vector<int> all_levels(const TimeGrid& t);

}  // namespace parahom
