#pragma once

#include "parahom/coeffs.hpp"
#include "parahom/grid.hpp"
#include "parahom/linalg.hpp"

#include <array>
#include <vector>

namespace parahom {

enum class BoundaryMode { Dirichlet, Periodic };

/// One contribution 0.5 * w * (d1.z + alpha[k1]) * (d2.z + alpha[k2]) to the
/// discrete energy, where z stacks cell unknowns followed by boundary-face data
/// and alpha is a constant background gradient (k = -1 means none).
struct EnergyTerm {
    static constexpr int kMax = 16;
    double w = 0.0;
    int k1 = -1, k2 = -1;
    int n1 = 0, n2 = 0;
    std::array<int, kMax> idx1{}, idx2{};
    std::array<double, kMax> c1{}, c2{};
};

/// Cell-centred finite-volume discretisation of -div(A grad u), written as the
/// Hessian of a quadratic energy so that it is symmetric by construction.
/// Diagonal entries of A use harmonic averaging on faces; off-diagonal entries
/// use corner stencils with ghost values at Dirichlet walls.
struct FvOperator {
    SpatialGrid grid;
    BoundaryMode mode = BoundaryMode::Dirichlet;
    SparseMatrix S;                   // cells x cells
    SparseMatrix B;                   // cells x boundary faces (Dirichlet only)
    std::vector<BoundaryFace> faces;  // column order of B
    std::vector<EnergyTerm> terms;    // kept only on request
    bool off_diagonal = false;        // whether any cross terms were assembled

    /// grad_u E = S u + B f, so the semi-discrete flow is V du/dt = -(S u + B f).
    int cells() const { return grid.cells(); }
};

FvOperator assemble_operator(const CoefficientField& A, const SpatialGrid& grid, BoundaryMode mode,
                             bool keep_terms = false);

/// r = dE/dz at z = 0 for a background gradient alpha (periodic cell problem).
Vector background_rhs(const FvOperator& op, const SmallVector& alpha);

/// Averaged flux (1/|Y|) dE/dalpha at (chi, alpha): the discrete version of
/// the cell average of A (grad chi + alpha).
SmallVector averaged_flux(const FvOperator& op, const Vector& chi, const SmallVector& alpha);

/// E(chi, alpha) / |Y|.
double averaged_energy(const FvOperator& op, const Vector& chi, const SmallVector& alpha);

}  // namespace parahom
