#pragma once

#include "parahom/coeffs.hpp"
#include "parahom/geometry.hpp"
#include "parahom/grid.hpp"
#include "parahom/pde.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace parahom {

/// One boundary cell (face x stored time slot) with its surface-measure weight.
struct BoundaryPoint {
    std::array<double, 3> X{};  // face centre in the coordinates of the field
    double t = 0.0;
    double value = 0.0;
    double weight = 0.0;  // dsigma(X) dt
    bool flagged = false;
};

struct BoundaryField {
    int dim = 2;  // entries of X in use
    std::vector<BoundaryPoint> points;
    nlohmann::json metadata;

    std::size_t size() const { return points.size(); }
    double max_abs() const;
    /// Total weight (sigma-measure of the sampled boundary region).
    double measure() const;
    /// Same points and weights with values f(X, t).
    template <class F>
    BoundaryField with_values(F&& f) const {
        BoundaryField out = *this;
        for (auto& p : out.points) {
            p.value = f(p);
            p.flagged = false;
        }
        return out;
    }
};

/// Columns x..., t, value, flag (flag as 0/1), header line first.
void write_csv(std::ostream& os, const BoundaryField& g);

/// Aperture used when none is given: max(2m, 1).
double default_aperture(double lipschitz);

struct ConeOptions {
    double eta = 1.0;
    DataWalls walls = DataWalls::Bottom;
    std::optional<double> truncation;  // only points at distance < truncation from the wall
};

/// N^eta(u) at every boundary face of the selected walls and every stored slot:
/// sup |u| over cell centres (x, t, lambda) with ||(x - x0, t - t0)|| < eta * lambda,
/// lambda the distance to the wall and x the tangential coordinates. A vertex
/// whose cone holds no point falls back to the first-layer value and is flagged.
BoundaryField nontangential_max(const ScalarField& u, const ConeOptions& opt);

/// Graph domain solved in flattened coordinates: the cone is measured in the
/// original ones, lambda - phi(x0) with lambda = s + phi(x). Requires eta > m;
/// eta <= 0 selects default_aperture(m).
BoundaryField nontangential_max(const ScalarField& u, const GraphDomain& dom, double eta = 0.0);

/// Lateral boundary of a box cylinder; each face uses the cone of its flat
/// chart. Throws std::invalid_argument if the grid is not the cylinder base.
BoundaryField nontangential_max(const ScalarField& u, const LipschitzCylinder& dom, double eta = 0.0);

/// M_r(u)(x, t) = sup_{0 < lambda < r} |u| over the bottom-wall columns. The
/// top cell centre below r sits `offset` below r; reported in metadata.
BoundaryField truncated_vertical_max(const ScalarField& u, double r);

/// (sum w |g|^p)^{1/p}; throws std::invalid_argument unless 1 < p < infinity.
double lp_boundary_norm(const BoundaryField& g, double p);

/// Boundary data evaluated on the points of `layout`, in the coordinates the
/// solver used for the data (graph points are lifted to (x, phi(x))).
BoundaryField data_trace(const BoundaryField& layout, const BoundaryData& f,
                         const GraphDomain* graph = nullptr);

struct SolvabilityRow {
    std::string label;
    double n_norm = 0.0;
    double f_norm = 0.0;
    double ratio = 0.0;
    int flagged = 0;
};

struct SolvabilityTable {
    double p = 2.0;
    double eta = 1.0;
    std::vector<SolvabilityRow> rows;
    double constant = 0.0;  // max ratio over the family
};

nlohmann::json to_json(const SolvabilityTable& t);

/// ||N(u_f)||_p / ||f||_p for every datum; `stride` keeps every stride-th level.
SolvabilityTable solvability_constant(const CoefficientField& A, const GraphDomain& dom,
                                      const std::vector<BoundaryData>& family, double p,
                                      const SpaceTimeGrid& grid, double eta = 0.0, int stride = 1);
SolvabilityTable solvability_constant(const CoefficientField& A, const LipschitzCylinder& dom,
                                      const std::vector<BoundaryData>& family, double p,
                                      const SpaceTimeGrid& grid, double eta = 0.0, int stride = 1);

/// Levels 0, stride, 2 stride, ... plus the last level.
std::vector<int> strided(const TimeGrid& t, int stride);

}  // namespace parahom
