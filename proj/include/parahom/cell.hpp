#pragma once

#include "parahom/coeffs.hpp"
#include "parahom/fv.hpp"
#include "parahom/grid.hpp"

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

namespace parahom {

struct CellOptions {
    double rel_tol = 1e-10;
    int max_iter = 0;               // 0 means 50 * N
    int periodicity_samples = 256;  // samples for the lattice-periodicity precondition
    int threads = 1;                // concurrent corrector columns
};

/// Discrete periodic corrector chi_alpha = w_alpha - alpha.y on the torus
/// (0, p)^d, p the declared lattice period of A.
struct CorrectorField {
    SmallVector alpha;
    int N = 0;
    SpatialGrid grid;
    Vector chi;               // mean zero
    SmallVector flux;         // averaged A (grad chi + alpha)
    double energy = 0.0;      // averaged (grad w)^T A grad w
    double residual = 0.0;    // |S chi + r| / |r| (0 when r = 0)
    int iterations = 0;
};

/// Throws std::invalid_argument for N < 8 or a field that is not lattice
/// periodic (deviation > 1e-8), std::runtime_error past the iteration cap.
CorrectorField solve_corrector(const CoefficientField& A, const SmallVector& alpha, int N, const CellOptions& opt = {});

struct EffectiveMatrix {
    SmallMatrix Abar;
    int N = 0;
    std::vector<double> residuals;  // per column
    std::vector<int> iterations;
    double asymmetry = 0.0;         // max |Abar - Abar^T|
    double min_eig = 0.0, max_eig = 0.0;
    bool ellipticity_ok = false;    // eigenvalues in [1/Lambda - tol, Lambda + tol]

    nlohmann::json to_json() const;
};

/// Columns Abar e_i from d corrector solves.
EffectiveMatrix effective_matrix(const CoefficientField& A, int N, const CellOptions& opt = {});

/// Default resolution per axis: 128 (d = 2), 48 (d = 3).
int default_cell_resolution(int dim);

struct ConvergenceRow {
    int N = 0;
    SmallMatrix Abar;
    double quadratic = 0.0;       // alpha^T Abar alpha
    std::optional<double> rate;   // observed order from the two neighbouring differences
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool exact = false;           // all successive differences vanish (to 1e-13)
    std::optional<double> observed_order;  // last available rate
};

/// Self-convergence of alpha^T Abar(N) alpha over an increasing list of N.
ConvergenceTable grid_convergence(const CoefficientField& A, const SmallVector& alpha, std::span<const int> N_list,
                                  const CellOptions& opt = {});

/// Harmonic (Reuss) and arithmetic (Voigt) cell averages by midpoint quadrature:
/// <A^-1>^-1 <= Abar <= <A>.
struct VoigtReuss {
    SmallMatrix lower;
    SmallMatrix upper;
};
VoigtReuss voigt_reuss_bounds(const CoefficientField& A, int N);

}  // namespace parahom
