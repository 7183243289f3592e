#include "parahom/linalg.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace parahom {

namespace {

void remove_mean(Vector& v) { v.array() -= v.mean(); }

}  // namespace

CgResult pcg(const SparseMatrix& A, const Vector& b_in, Vector& x, const CgOptions& opt) {
    const auto n = A.rows();
    if (A.cols() != n || b_in.size() != n) throw std::invalid_argument("pcg: dimension mismatch");
    if (x.size() != n) x = Vector::Zero(n);

    Vector b = b_in;
    if (opt.project_mean) {
        remove_mean(b);
        remove_mean(x);
    }
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero();
        return {};
    }
    const Vector inv_diag = A.diagonal().cwiseInverse();
    const int cap = opt.max_iter > 0 ? opt.max_iter : static_cast<int>(std::max<Eigen::Index>(100, 50 * n));

    Vector r = b - A * x;
    if (opt.project_mean) remove_mean(r);
    Vector z = inv_diag.cwiseProduct(r);
    if (opt.project_mean) remove_mean(z);
    Vector p = z, Ap(n);
    double rz = r.dot(z);
    CgResult res;
    res.rel_residual = r.norm() / bnorm;
    while (res.rel_residual > opt.rel_tol) {
        if (res.iterations >= cap) {
            std::ostringstream os;
            os << "pcg: no convergence after " << cap << " iterations (relative residual " << res.rel_residual << ")";
            throw std::runtime_error(os.str());
        }
        Ap.noalias() = A * p;
        if (opt.project_mean) remove_mean(Ap);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) throw std::domain_error("pcg: operator is not positive definite on the search space");
        const double alpha = rz / pAp;
        x.noalias() += alpha * p;
        r.noalias() -= alpha * Ap;
        z = inv_diag.cwiseProduct(r);
        if (opt.project_mean) remove_mean(z);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++res.iterations;
        res.rel_residual = r.norm() / bnorm;
    }
    if (opt.project_mean) remove_mean(x);
    return res;
}

}  // namespace parahom
