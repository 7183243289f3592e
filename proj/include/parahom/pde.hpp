#pragma once

#include "parahom/coeffs.hpp"
#include "parahom/fv.hpp"
#include "parahom/geometry.hpp"
#include "parahom/grid.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace parahom {

enum class Integrator { ImplicitEuler, CrankNicolson };

/// Which walls of the computational box carry the boundary data; the others
/// are artificial truncation walls with homogeneous Dirichlet values.
enum class DataWalls {
    All,     // every wall (cylinders)
    Bottom,  // lambda = lo on the last axis (half-space and flattened graphs)
    Top,     // lambda = hi on the last axis
};

struct BoundaryData {
    std::function<double(std::span<const double> X, double t)> f;
    std::string label = "data";
    double p = 2.0;          // integrability exponent used for reporting
    bool classical = true;   // continuous with compact support
};

struct SolveOptions {
    Integrator integrator = Integrator::ImplicitEuler;
    double cg_tol = 1e-12;
    std::vector<int> store_levels;  // empty: every level
    DataWalls walls = DataWalls::All;
    /// Called after every step with (level, u at that level).
    std::function<void(int, const Vector&)> observer;
};

/// Tolerance of the zero-initial-data compatibility check.
inline constexpr double kCompatibilityTol = 1e-12;

/// Per-(interval, face) weights w such that the value probed at level N is
/// sum_n sum_f w[n][f] * f(face, t_n + dt/2). Built by one backward sweep of
/// the adjoint implicit-Euler recursion.
struct AdjointWeights {
    int intervals = 0;
    int faces = 0;
    std::vector<double> w;  // intervals x faces
    double at(int n, int f) const { return w[static_cast<std::size_t>(n) * static_cast<std::size_t>(faces) + static_cast<std::size_t>(f)]; }
};

/// Sparse cell weights (multilinear sampling or impulse distribution).
using CellWeights = std::vector<std::pair<int, double>>;

/// Multilinear weights of the cell-centre interpolant at X.
CellWeights sampling_weights(const SpatialGrid& g, std::span<const double> X);

class ParabolicSolver {
public:
    /// Assembles the Dirichlet finite-volume operator of A on the grid once.
    ParabolicSolver(const CoefficientField& A, SpaceTimeGrid grid);

    const SpaceTimeGrid& grid() const { return grid_; }
    const FvOperator& op() const { return op_; }

    /// Boundary data at every face for time t (zero on walls not carrying data).
    Vector face_data(const BoundaryData& f, double t, DataWalls walls) const;

    /// Zero initial data at t0; throws std::invalid_argument if f(t0) != 0 on
    /// the data walls beyond kCompatibilityTol, std::runtime_error if a step
    /// fails to converge.
    ScalarField solve(const BoundaryData& f, const SolveOptions& opt = {}) const;

    /// Homogeneous lateral data, initial value `u0` placed at `start_level`.
    ScalarField evolve(const Vector& u0, int start_level, const SolveOptions& opt = {}) const;

    /// Weights for the value sum_c probe[c] u_c at `level` (implicit Euler).
    AdjointWeights adjoint(const CellWeights& probe, int level, double cg_tol = 1e-12) const;

private:
    Vector step(const Vector& u, const Vector& forcing, Integrator integ, double tol) const;

    SpaceTimeGrid grid_;
    FvOperator op_;
    SparseMatrix implicit_;  // I/dt + S/V
    SparseMatrix cn_;        // I/dt + S/(2V)
};

/// Half-space computational box x in [-half_width, half_width]^n, lambda in (0, height),
/// with h per axis and time grid (t0, t1] in steps of dt.
SpaceTimeGrid half_space_grid(int n, double half_width, double height, double h, double t0, double t1, double dt);

/// Builds the solver for a graph domain by flattening; the grid lives in the
/// flattened (x, s) coordinates with s = lambda - phi(x).
ParabolicSolver graph_solver(const CoefficientField& A, const GraphDomain& dom, const SpaceTimeGrid& grid);

/// One-call Dirichlet solve: flattens graph domains, puts data on the bottom wall
/// for graph domains and on all walls for cylinders.
ScalarField solve_dirichlet(const CoefficientField& A, const GraphDomain& dom, const BoundaryData& f,
                            const SpaceTimeGrid& grid, SolveOptions opt = {});
ScalarField solve_dirichlet(const CoefficientField& A, const LipschitzCylinder& dom, const BoundaryData& f,
                            const SpaceTimeGrid& grid, SolveOptions opt = {});

/// v(y, s, sigma) = u(eps y, eps^2 s, eps sigma) sampled on `target`.
/// Throws std::out_of_range if the rescaled target leaves the source grid.
ScalarField rescale_solution(const ScalarField& u, double eps, const SpaceTimeGrid& target);

struct NtTrace {
    struct Cell {
        std::vector<double> x;
        double t = 0.0;
        double first = 0.0;       // u(lambda_1)/lambda_1
        double richardson = 0.0;  // (3 v1 - v2) / 2
    };
    std::vector<Cell> cells;
    double cell_measure = 0.0;          // h^n * (time spacing of stored levels)
    double boundary_max = 0.0;          // max |u| on Q_{4r} x {lambda = 0}
    bool hypothesis_ok = true;          // boundary_max <= 1e-10
    std::string convention = "first-layer ratio with second-layer Richardson limit";
};

/// Limit of u/lambda as lambda -> 0 on the boundary cells of Q_r(x0, t0).
NtTrace nt_trace_ratio(const ScalarField& u, const ParabolicCube& Q);

/// sup_{Q~} |u| / (mean_{2Q~} u^2)^{1/2}; throws std::out_of_range when 2Q~ leaves the data.
double moser_ratio(const ScalarField& u, const ParabolicCube& Q);

struct CaccioppoliResult {
    double ratio = 0.0;      // R^2 * energy / mass
    double energy = 0.0;     // int_{Omega_2 x (0,4R^2)} |grad u|^2
    double mass = 0.0;       // int_{Omega_3 x (0,8R^2)} u^2
    bool degenerate = false; // mass == 0
    bool hypothesis_ok = true;
    double hypothesis_violation = 0.0;
};

/// Energy ratio on Omega_g = {|x_i| < 2R, 0 < lambda < g R}, time from the grid start.
/// The vanishing hypothesis is checked on the bottom wall, the x walls and the initial level.
CaccioppoliResult caccioppoli_ratio(const ScalarField& u, double R);

/// Qu(x, t, lambda) = u(x, t, lambda + period) - u(x, t, lambda) on the cells
/// whose shifted partner exists; period must be a multiple of h_lambda.
ScalarField q_difference(const ScalarField& u, double period);

struct QDecay {
    double sup_q = 0.0;         // sup |Qu| over Omega_2 x (0, 4R^2), lambda >= R
    double mean_square = 0.0;   // R^{-(n+3)} int_{Omega_3 x (0, 8R^2)} u^2
    double normalized = 0.0;    // R * sup_q / sqrt(mean_square)
};

QDecay q_difference_decay(const ScalarField& u, double period, double R);

}  // namespace parahom
