#include "parahom/cell.hpp"

#include "parahom/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

namespace parahom {

namespace {

SpatialGrid torus(int dim, int N, double period) {
    SpatialGrid g;
    g.dim = dim;
    for (int i = 0; i < dim; ++i) {
        g.N[static_cast<std::size_t>(i)] = N;
        g.h[static_cast<std::size_t>(i)] = period / N;
    }
    return g;
}

void require_cell_problem(const CoefficientField& A, int N, const CellOptions& opt) {
    if (N < 8) throw std::invalid_argument("cell problem needs N >= 8");
    if (A.periodicity() != Periodicity::Lattice)
        throw std::invalid_argument("cell problem needs a lattice-periodic coefficient field ('" + A.label() + "' is " +
                                    to_string(A.periodicity()) + ")");
    const double dev = check_periodicity(A, opt.periodicity_samples);
    if (dev > 1e-8)
        throw std::invalid_argument("coefficient field '" + A.label() + "' deviates from its period by " + std::to_string(dev));
}

CorrectorField solve_on(const FvOperator& op, const SmallVector& alpha, int N, const CellOptions& opt) {
    CorrectorField out;
    out.alpha = alpha;
    out.N = N;
    out.grid = op.grid;
    const Vector r = background_rhs(op, alpha);
    out.chi = Vector::Zero(op.cells());
    const double rn = r.norm();
    // constant coefficients give r = 0 exactly: the corrector vanishes
    if (rn > 0.0) {
        CgOptions cg;
        cg.rel_tol = opt.rel_tol;
        cg.max_iter = opt.max_iter > 0 ? opt.max_iter : 50 * N;
        cg.project_mean = true;
        const Vector b = -r;
        const auto res = pcg(op.S, b, out.chi, cg);
        out.iterations = res.iterations;
        out.chi.array() -= out.chi.mean();
        out.residual = (op.S * out.chi + r).norm() / rn;
    }
    out.flux = averaged_flux(op, out.chi, alpha);
    out.energy = 2.0 * averaged_energy(op, out.chi, alpha);
    return out;
}

}  // namespace

CorrectorField solve_corrector(const CoefficientField& A, const SmallVector& alpha, int N, const CellOptions& opt) {
    require_cell_problem(A, N, opt);
    if (alpha.size() != A.dim()) throw std::invalid_argument("solve_corrector: alpha has wrong dimension");
    const auto op = assemble_operator(A, torus(A.dim(), N, A.period()), BoundaryMode::Periodic, true);
    return solve_on(op, alpha, N, opt);
}

EffectiveMatrix effective_matrix(const CoefficientField& A, int N, const CellOptions& opt) {
    require_cell_problem(A, N, opt);
    const int d = A.dim();
    const auto op = assemble_operator(A, torus(d, N, A.period()), BoundaryMode::Periodic, true);
    std::vector<CorrectorField> columns(static_cast<std::size_t>(d));
    auto column = [&](int i) {
        SmallVector e = SmallVector::Zero(d);
        e[i] = 1.0;
        return solve_on(op, e, N, opt);
    };
    if (opt.threads > 1) {
        std::vector<std::future<CorrectorField>> jobs;
        for (int i = 0; i < d; ++i) jobs.push_back(std::async(std::launch::async, column, i));
        for (int i = 0; i < d; ++i) columns[static_cast<std::size_t>(i)] = jobs[static_cast<std::size_t>(i)].get();
    } else {
        for (int i = 0; i < d; ++i) columns[static_cast<std::size_t>(i)] = column(i);
    }

    EffectiveMatrix out;
    out.N = N;
    out.Abar = SmallMatrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        const auto& c = columns[static_cast<std::size_t>(i)];
        out.Abar.col(i) = c.flux;
        out.residuals.push_back(c.residual);
        out.iterations.push_back(c.iterations);
    }
    out.asymmetry = (out.Abar - out.Abar.transpose()).cwiseAbs().maxCoeff();
    const Eigen::MatrixXd sym = 0.5 * (out.Abar + out.Abar.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    out.min_eig = es.eigenvalues().minCoeff();
    out.max_eig = es.eigenvalues().maxCoeff();
    const double lam = A.ellipticity();
    out.ellipticity_ok = out.min_eig >= 1.0 / lam - 1e-8 && out.max_eig <= lam + 1e-8;
    return out;
}

nlohmann::json EffectiveMatrix::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < Abar.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < Abar.cols(); ++j) row.push_back(Abar(i, j));
        rows.push_back(row);
    }
    return {{"Abar", rows},
            {"residuals", residuals},
            {"iterations", iterations},
            {"resolution", N},
            {"asymmetry", asymmetry},
            {"eigenvalues", {min_eig, max_eig}},
            {"ellipticity_ok", ellipticity_ok}};
}

int default_cell_resolution(int dim) { return dim == 3 ? 48 : 128; }

ConvergenceTable grid_convergence(const CoefficientField& A, const SmallVector& alpha, std::span<const int> N_list,
                                  const CellOptions& opt) {
    if (!std::is_sorted(N_list.begin(), N_list.end()) || std::adjacent_find(N_list.begin(), N_list.end()) != N_list.end())
        throw std::invalid_argument("grid_convergence: N list must be strictly increasing");
    ConvergenceTable table;
    for (int N : N_list) {
        ConvergenceRow row;
        row.N = N;
        row.Abar = effective_matrix(A, N, opt).Abar;
        row.quadratic = alpha.dot(row.Abar * alpha);
        table.rows.push_back(row);
    }
    std::vector<double> diffs;
    for (std::size_t k = 1; k < table.rows.size(); ++k)
        diffs.push_back(std::abs(table.rows[k].quadratic - table.rows[k - 1].quadratic));
    const double scale = std::max(1.0, std::abs(table.rows.empty() ? 0.0 : table.rows.back().quadratic));
    table.exact = std::all_of(diffs.begin(), diffs.end(), [&](double x) { return x <= 1e-13 * scale; });
    if (table.exact) return table;
    for (std::size_t k = 1; k + 1 < table.rows.size(); ++k) {
        const double coarse = diffs[k - 1], fine = diffs[k];
        if (coarse <= 0.0 || fine <= 0.0) continue;
        // differences shrink like (N_k / N_{k+1})^order
        const double step = static_cast<double>(table.rows[k + 1].N) / table.rows[k].N;
        const double prev = static_cast<double>(table.rows[k].N) / table.rows[k - 1].N;
        const double order = std::log(coarse / fine) / std::log(std::sqrt(step * prev));
        table.rows[k].rate = order;
        table.observed_order = order;
    }
    return table;
}

VoigtReuss voigt_reuss_bounds(const CoefficientField& A, int N) {
    const int d = A.dim();
    const auto g = torus(d, N, A.period());
    SmallMatrix sum = SmallMatrix::Zero(d, d), inv = SmallMatrix::Zero(d, d);
    double X[3];
    for (int c = 0; c < g.cells(); ++c) {
        g.center(c, std::span<double>(X, static_cast<std::size_t>(d)));
        const SmallMatrix M = A(std::span<const double>(X, static_cast<std::size_t>(d)));
        sum += M;
        inv += M.inverse();
    }
    VoigtReuss out;
    out.upper = sum / g.cells();
    out.lower = (inv / g.cells()).inverse();
    return out;
}

}  // namespace parahom
