#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace parahom {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vector = Eigen::VectorXd;

struct CgOptions {
    double rel_tol = 1e-10;
    int max_iter = 0;            // 0 means 50 * rows
    bool project_mean = false;   // solve on the mean-zero subspace (constant null space)
};

struct CgResult {
    int iterations = 0;
    double rel_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// (semi-)definite matrix; `x` holds the initial guess on entry.
/// Throws std::domain_error on a non-positive curvature step and
/// std::runtime_error when the iteration cap is reached.
CgResult pcg(const SparseMatrix& A, const Vector& b, Vector& x, const CgOptions& opt);

}  // namespace parahom
