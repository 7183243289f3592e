#include "parahom/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace parahom {

namespace {

SparseMatrix shifted(const SparseMatrix& S, double diag, double scale) {
    SparseMatrix I(S.rows(), S.cols());
    I.setIdentity();
    SparseMatrix M = diag * I + scale * S;
    M.makeCompressed();
    return M;
}

bool on_wall(const BoundaryFace& f, int dim, DataWalls walls) {
    switch (walls) {
        case DataWalls::All: return true;
        case DataWalls::Bottom: return f.axis == dim - 1 && f.side == 0;
        case DataWalls::Top: return f.axis == dim - 1 && f.side == 1;
    }
    return false;
}

std::vector<int> resolve_levels(const SolveOptions& opt, const TimeGrid& t) {
    if (opt.store_levels.empty()) return all_levels(t);
    std::vector<int> levels = opt.store_levels;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.front() < 0 || levels.back() > t.steps) throw std::invalid_argument("store level outside the time grid");
    return levels;
}

int cells_for(double width, double h, const char* what) {
    const double n = width / h;
    const int N = static_cast<int>(std::lround(n));
    if (N < 2 || std::abs(n - N) > 1e-9 * std::max(1.0, n))
        throw std::invalid_argument(std::string("grid spacing does not divide the ") + what);
    return N;
}

/// Time spacing between consecutive stored levels (uniform stride assumed).
double slot_spacing(const ScalarField& u) {
    if (u.level_count() < 2) return u.grid().time.dt;
    return u.time(1) - u.time(0);
}

}  // namespace

CellWeights sampling_weights(const SpatialGrid& g, std::span<const double> X) {
    int base[3] = {0, 0, 0};
    double w[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < g.dim; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        double u = (X[ui] - g.lo[ui]) / g.h[ui] - 0.5;
        u = std::clamp(u, 0.0, static_cast<double>(g.N[ui] - 1));
        base[i] = std::min(static_cast<int>(std::floor(u)), g.N[ui] - 2);
        w[i] = u - base[i];
    }
    CellWeights out;
    for (int corner = 0; corner < (1 << g.dim); ++corner) {
        double wt = 1.0;
        int idx[3] = {0, 0, 0};
        for (int i = 0; i < g.dim; ++i) {
            const bool up = (corner >> i) & 1;
            idx[i] = base[i] + (up ? 1 : 0);
            wt *= up ? w[i] : 1.0 - w[i];
        }
        if (wt != 0.0) out.emplace_back(g.index(idx[0], idx[1], idx[2]), wt);
    }
    return out;
}

ParabolicSolver::ParabolicSolver(const CoefficientField& A, SpaceTimeGrid grid)
    : grid_(grid), op_(assemble_operator(A, grid.space, BoundaryMode::Dirichlet)) {
    if (!(grid_.time.dt > 0.0) || grid_.time.steps < 1) throw std::invalid_argument("time grid needs dt > 0 and steps >= 1");
    const double V = grid_.space.cell_volume();
    implicit_ = shifted(op_.S, 1.0 / grid_.time.dt, 1.0 / V);
    cn_ = shifted(op_.S, 1.0 / grid_.time.dt, 0.5 / V);
}

Vector ParabolicSolver::face_data(const BoundaryData& f, double t, DataWalls walls) const {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(op_.faces.size()));
    const auto d = static_cast<std::size_t>(grid_.space.dim);
    for (std::size_t k = 0; k < op_.faces.size(); ++k) {
        const auto& face = op_.faces[k];
        if (on_wall(face, grid_.space.dim, walls)) out[static_cast<Eigen::Index>(k)] = f.f(std::span<const double>(face.X.data(), d), t);
    }
    return out;
}

Vector ParabolicSolver::step(const Vector& u, const Vector& forcing, Integrator integ, double tol) const {
    const double dt = grid_.time.dt;
    Vector rhs = u / dt + forcing;
    const SparseMatrix* M = &implicit_;
    if (integ == Integrator::CrankNicolson) {
        rhs.noalias() -= op_.S * u * (0.5 / grid_.space.cell_volume());
        M = &cn_;
    }
    Vector x = u;
    CgOptions cg;
    cg.rel_tol = tol;
    cg.max_iter = 50 * static_cast<int>(u.size());
    pcg(*M, rhs, x, cg);
    return x;
}

ScalarField ParabolicSolver::solve(const BoundaryData& f, const SolveOptions& opt) const {
    if (!f.f) throw std::invalid_argument("solve: boundary data has no evaluator");
    const auto& tg = grid_.time;
    const Vector initial = face_data(f, tg.t0, opt.walls);
    const double mismatch = initial.size() ? initial.cwiseAbs().maxCoeff() : 0.0;
    if (mismatch > kCompatibilityTol) {
        std::ostringstream os;
        os << "solve: boundary data '" << f.label << "' is " << mismatch << " at the initial time " << tg.t0
           << "; zero initial data requires f(t0) = 0";
        throw std::invalid_argument(os.str());
    }
    ScalarField out(grid_, resolve_levels(opt, tg));
    out.allocate_boundary(op_.faces.size());
    const double V = grid_.space.cell_volume();
    Vector u = Vector::Zero(grid_.space.cells());
    auto record = [&](int level) {
        const int s = out.slot_of_level(level);
        if (s < 0) return;
        std::copy(u.data(), u.data() + u.size(), out.slot(s).begin());
        const Vector fb = face_data(f, tg.t(level), opt.walls);
        std::copy(fb.data(), fb.data() + fb.size(), out.boundary_slot(s).begin());
    };
    record(0);
    for (int n = 0; n < tg.steps; ++n) {
        const Vector forcing = -(op_.B * face_data(f, tg.t(n) + 0.5 * tg.dt, opt.walls)) / V;
        u = step(u, forcing, opt.integrator, opt.cg_tol);
        record(n + 1);
        if (opt.observer) opt.observer(n + 1, u);
    }
    out.metadata = {{"data", f.label},
                    {"integrator", opt.integrator == Integrator::ImplicitEuler ? "implicit-euler" : "crank-nicolson"},
                    {"data_time", "interval midpoint"},
                    {"cg_tol", opt.cg_tol}};
    return out;
}

ScalarField ParabolicSolver::evolve(const Vector& u0, int start_level, const SolveOptions& opt) const {
    const auto& tg = grid_.time;
    if (u0.size() != grid_.space.cells()) throw std::invalid_argument("evolve: initial vector has wrong size");
    if (start_level < 0 || start_level > tg.steps) throw std::invalid_argument("evolve: start level outside the grid");
    ScalarField out(grid_, resolve_levels(opt, tg));
    out.allocate_boundary(op_.faces.size());
    Vector u = u0;
    const Vector none = Vector::Zero(u.size());
    auto record = [&](int level) {
        const int s = out.slot_of_level(level);
        if (s >= 0) std::copy(u.data(), u.data() + u.size(), out.slot(s).begin());
    };
    record(start_level);
    for (int n = start_level; n < tg.steps; ++n) {
        u = step(u, none, opt.integrator, opt.cg_tol);
        record(n + 1);
        if (opt.observer) opt.observer(n + 1, u);
    }
    out.metadata = {{"impulse_level", start_level}};
    return out;
}

AdjointWeights ParabolicSolver::adjoint(const CellWeights& probe, int level, double cg_tol) const {
    if (level < 1 || level > grid_.time.steps) throw std::invalid_argument("adjoint: probe level outside the grid");
    const double V = grid_.space.cell_volume();
    const double dt = grid_.time.dt;
    AdjointWeights out;
    out.intervals = level;
    out.faces = static_cast<int>(op_.faces.size());
    out.w.assign(static_cast<std::size_t>(out.intervals) * static_cast<std::size_t>(out.faces), 0.0);
    Vector e = Vector::Zero(grid_.space.cells());
    for (const auto& [c, w] : probe) e[c] += w;
    CgOptions cg;
    cg.rel_tol = cg_tol;
    cg.max_iter = 50 * static_cast<int>(e.size());
    Vector psi = Vector::Zero(e.size());
    pcg(implicit_, e, psi, cg);
    for (int n = level - 1; n >= 0; --n) {
        const Vector wn = -(op_.B.transpose() * psi) / V;
        std::copy(wn.data(), wn.data() + wn.size(), out.w.begin() + static_cast<std::ptrdiff_t>(n) * out.faces);
        if (n > 0) {
            const Vector rhs = psi / dt;
            pcg(implicit_, rhs, psi, cg);
        }
    }
    return out;
}

SpaceTimeGrid half_space_grid(int n, double half_width, double height, double h, double t0, double t1, double dt) {
    if (n < 1 || n > 2) throw std::invalid_argument("half_space_grid: n must be 1 or 2");
    SpaceTimeGrid g;
    g.space.dim = n + 1;
    for (int i = 0; i < n; ++i) {
        g.space.N[static_cast<std::size_t>(i)] = cells_for(2.0 * half_width, h, "half-space width");
        g.space.lo[static_cast<std::size_t>(i)] = -half_width;
        g.space.h[static_cast<std::size_t>(i)] = h;
    }
    g.space.N[static_cast<std::size_t>(n)] = cells_for(height, h, "half-space height");
    g.space.lo[static_cast<std::size_t>(n)] = 0.0;
    g.space.h[static_cast<std::size_t>(n)] = h;
    g.time = {t0, dt, cells_for(t1 - t0, dt, "time interval")};
    return g;
}

ParabolicSolver graph_solver(const CoefficientField& A, const GraphDomain& dom, const SpaceTimeGrid& grid) {
    return ParabolicSolver(flatten_pullback(dom, A), grid);
}

ScalarField solve_dirichlet(const CoefficientField& A, const GraphDomain& dom, const BoundaryData& f,
                            const SpaceTimeGrid& grid, SolveOptions opt) {
    const auto solver = graph_solver(A, dom, grid);
    BoundaryData lifted = f;
    const int n = dom.n();
    // data is prescribed at (x, phi(x)) in the original coordinates
    lifted.f = [f, dom, n](std::span<const double> X, double t) {
        double Y[3];
        std::copy(X.begin(), X.begin() + n, Y);
        Y[n] = dom.phi(X.first(static_cast<std::size_t>(n)));
        return f.f(std::span<const double>(Y, static_cast<std::size_t>(n + 1)), t);
    };
    opt.walls = DataWalls::Bottom;
    auto u = solver.solve(lifted, opt);
    u.metadata["coordinates"] = dom.is_flat() ? "half-space (x, lambda)" : "flattened (x, lambda - phi(x))";
    u.metadata["graph"] = dom.to_json();
    return u;
}

ScalarField solve_dirichlet(const CoefficientField& A, const LipschitzCylinder& dom, const BoundaryData& f,
                            const SpaceTimeGrid& grid, SolveOptions opt) {
    const auto& b = dom.base();
    if (b.dim() != grid.space.dim) throw std::invalid_argument("solve_dirichlet: cylinder/grid dimension mismatch");
    for (int i = 0; i < b.dim(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (std::abs(grid.space.lo[ui] - b.lo[ui]) > 1e-12 || std::abs(grid.space.hi(i) - b.hi[ui]) > 1e-9)
            throw std::invalid_argument("solve_dirichlet: grid must cover the cylinder base exactly");
    }
    if (std::abs(grid.time.t0) > 1e-12) throw std::invalid_argument("solve_dirichlet: cylinders start at t = 0");
    opt.walls = DataWalls::All;
    ParabolicSolver solver(A, grid);
    auto u = solver.solve(f, opt);
    u.metadata["coordinates"] = "cylinder";
    u.metadata["cylinder"] = dom.to_json();
    return u;
}

ScalarField rescale_solution(const ScalarField& u, double eps, const SpaceTimeGrid& target) {
    if (!(eps > 0.0)) throw std::invalid_argument("rescale_solution: eps must be positive");
    const auto& src = u.grid().space;
    const auto& tg = target.space;
    if (src.dim != tg.dim) throw std::invalid_argument("rescale_solution: dimension mismatch");
    const double slack = 1e-9;
    for (int i = 0; i < tg.dim; ++i) {
        const double lo = eps * tg.center(i, 0), hi = eps * tg.center(i, tg.N[static_cast<std::size_t>(i)] - 1);
        if (lo < src.lo[static_cast<std::size_t>(i)] - slack || hi > src.hi(i) + slack)
            throw std::out_of_range("rescale_solution: rescaled domain exceeds the source grid");
    }
    const double t_lo = eps * eps * target.time.t0, t_hi = eps * eps * target.time.t_end();
    if (t_lo < u.time(0) - slack || t_hi > u.time(u.level_count() - 1) + slack)
        throw std::out_of_range("rescale_solution: rescaled time range exceeds the source levels");
    ScalarField v(target, all_levels(target.time));
    double Y[3], X[3];
    const auto d = static_cast<std::size_t>(tg.dim);
    for (int s = 0; s < v.level_count(); ++s) {
        auto vals = v.slot(s);
        const double t = eps * eps * v.time(s);
        for (int c = 0; c < tg.cells(); ++c) {
            tg.center(c, std::span<double>(Y, d));
            for (std::size_t i = 0; i < d; ++i) X[i] = eps * Y[i];
            vals[static_cast<std::size_t>(c)] = u.sample(std::span<const double>(X, d), t);
        }
    }
    v.metadata = {{"rescaled_from", u.metadata}, {"eps", eps}};
    return v;
}

NtTrace nt_trace_ratio(const ScalarField& u, const ParabolicCube& Q) {
    const auto& g = u.grid().space;
    const int d = g.dim, n = d - 1;
    if (Q.kind != CubeKind::Boundary || static_cast<int>(Q.center.size()) != n)
        throw std::invalid_argument("nt_trace_ratio: needs a boundary cube in R^n");
    const auto ul = static_cast<std::size_t>(n);
    const double lam1 = g.center(n, 0) - g.lo[ul], lam2 = g.center(n, 1) - g.lo[ul];
    NtTrace out;
    out.cell_measure = slot_spacing(u);
    for (int i = 0; i < n; ++i) out.cell_measure *= g.h[static_cast<std::size_t>(i)];

    auto in_cube = [&](std::span<const double> x, double t, double r) {
        for (int i = 0; i < n; ++i)
            if (!(std::abs(x[static_cast<std::size_t>(i)] - Q.center[static_cast<std::size_t>(i)]) < r)) return false;
        return std::abs(t - Q.t) < r * r;
    };
    double X[3];
    for (int s = 0; s < u.level_count(); ++s) {
        const double t = u.time(s);
        if (!(std::abs(t - Q.t) < Q.r * Q.r)) continue;
        for (int c = 0; c < g.cells(); ++c) {
            const auto idx = g.unravel(c);
            if (idx[ul] != 0) continue;
            g.center(c, std::span<double>(X, static_cast<std::size_t>(d)));
            if (!in_cube(std::span<const double>(X, ul), t, Q.r)) continue;
            auto up = idx;
            up[ul] = 1;
            NtTrace::Cell cell;
            cell.x.assign(X, X + n);
            cell.t = t;
            cell.first = u.at(s, c) / lam1;
            const double v2 = u.at(s, g.index(up[0], up[1], up[2])) / lam2;
            cell.richardson = (3.0 * cell.first - v2) / 2.0;
            out.cells.push_back(std::move(cell));
        }
    }
    if (u.has_boundary()) {
        const auto faces = boundary_faces(g);
        for (int s = 0; s < u.level_count(); ++s) {
            const auto b = u.boundary_slot(s);
            for (std::size_t f = 0; f < faces.size(); ++f) {
                if (faces[f].axis != n || faces[f].side != 0) continue;
                if (!in_cube(std::span<const double>(faces[f].X.data(), ul), u.time(s), 4.0 * Q.r)) continue;
                out.boundary_max = std::max(out.boundary_max, std::abs(b[f]));
            }
        }
    }
    out.hypothesis_ok = out.boundary_max <= 1e-10;
    return out;
}

double moser_ratio(const ScalarField& u, const ParabolicCube& Q) {
    const auto& g = u.grid().space;
    const int d = g.dim;
    if (Q.kind != CubeKind::Interior || static_cast<int>(Q.center.size()) != d)
        throw std::invalid_argument("moser_ratio: needs an interior cube in R^d");
    const double slack = 1e-9;
    for (int i = 0; i < d; ++i) {
        const double c = Q.center[static_cast<std::size_t>(i)];
        if (c - 2 * Q.r < g.lo[static_cast<std::size_t>(i)] - slack || c + 2 * Q.r > g.hi(i) + slack)
            throw std::out_of_range("moser_ratio: doubled cube leaves the spatial grid");
    }
    if (Q.t - 4 * Q.r * Q.r < u.time(0) - slack || Q.t + 4 * Q.r * Q.r > u.time(u.level_count() - 1) + slack)
        throw std::out_of_range("moser_ratio: doubled cube leaves the stored time range");
    double sup = 0.0, sum2 = 0.0;
    long inner = 0, outer = 0;
    double X[3];
    for (int s = 0; s < u.level_count(); ++s) {
        const double dt = std::abs(u.time(s) - Q.t);
        if (!(dt < 4 * Q.r * Q.r)) continue;
        for (int c = 0; c < g.cells(); ++c) {
            g.center(c, std::span<double>(X, static_cast<std::size_t>(d)));
            double dist = 0.0;
            for (int i = 0; i < d; ++i) dist = std::max(dist, std::abs(X[i] - Q.center[static_cast<std::size_t>(i)]));
            if (!(dist < 2 * Q.r)) continue;
            const double v = u.at(s, c);
            sum2 += v * v;
            ++outer;
            if (dist < Q.r && dt < Q.r * Q.r) {
                sup = std::max(sup, std::abs(v));
                ++inner;
            }
        }
    }
    if (inner == 0) throw std::out_of_range("moser_ratio: cube contains no grid points");
    const double rms = std::sqrt(sum2 / static_cast<double>(outer));
    return rms > 0.0 ? sup / rms : 0.0;
}

namespace {

/// Cells of Omega_g = {|x_i| < 2R, 0 < lambda < g R} (by centre).
bool in_omega(const SpatialGrid& g, int cell, double R, double gamma) {
    double X[3];
    g.center(cell, std::span<double>(X, static_cast<std::size_t>(g.dim)));
    for (int i = 0; i + 1 < g.dim; ++i)
        if (!(std::abs(X[i]) < 2 * R)) return false;
    const double lam = X[g.dim - 1] - g.lo[static_cast<std::size_t>(g.dim - 1)];
    return lam > 0.0 && lam < gamma * R;
}

double mass_in(const ScalarField& u, double R, double gamma, double t_len) {
    const auto& g = u.grid().space;
    const double V = g.cell_volume(), dt = slot_spacing(u);
    const double t0 = u.grid().time.t0;
    double mass = 0.0;
    for (int s = 1; s < u.level_count(); ++s) {
        if (u.time(s) - t0 > t_len + 1e-12) continue;
        for (int c = 0; c < g.cells(); ++c)
            if (in_omega(g, c, R, gamma)) mass += u.at(s, c) * u.at(s, c) * V * dt;
    }
    return mass;
}

}  // namespace

CaccioppoliResult caccioppoli_ratio(const ScalarField& u, double R) {
    if (!(R > 0.0)) throw std::invalid_argument("caccioppoli_ratio: R must be positive");
    const auto& g = u.grid().space;
    const int d = g.dim;
    const double V = g.cell_volume(), dt = slot_spacing(u);
    const double t0 = u.grid().time.t0;
    CaccioppoliResult out;

    const auto faces = boundary_faces(g);
    for (int s = 0; s < u.level_count(); ++s) {
        if (u.has_boundary()) {
            const auto b = u.boundary_slot(s);
            for (std::size_t f = 0; f < faces.size(); ++f) {
                const bool top = faces[f].axis == d - 1 && faces[f].side == 1;
                if (!top) out.hypothesis_violation = std::max(out.hypothesis_violation, std::abs(b[f]));
            }
        }
        if (u.levels()[static_cast<std::size_t>(s)] == 0)
            for (double v : u.slot(s)) out.hypothesis_violation = std::max(out.hypothesis_violation, std::abs(v));
    }
    out.hypothesis_ok = out.hypothesis_violation <= 1e-10;

    for (int s = 1; s < u.level_count(); ++s) {
        if (u.time(s) - t0 > 4 * R * R + 1e-12) continue;
        const auto vals = u.slot(s);
        for (int c = 0; c < g.cells(); ++c) {
            if (!in_omega(g, c, R, 2.0)) continue;
            const auto idx = g.unravel(c);
            for (int axis = 0; axis < d; ++axis) {
                const auto ua = static_cast<std::size_t>(axis);
                const double h = g.h[ua];
                if (idx[ua] + 1 < g.N[ua]) {
                    auto up = idx;
                    up[ua] += 1;
                    const int q = g.index(up[0], up[1], up[2]);
                    // each interior face is counted once, from its lower cell
                    const double diff = (vals[static_cast<std::size_t>(q)] - vals[static_cast<std::size_t>(c)]) / h;
                    out.energy += diff * diff * V * dt;
                }
                if (u.has_boundary()) {
                    for (int side = 0; side < 2; ++side) {
                        if (idx[ua] != (side == 0 ? 0 : g.N[ua] - 1)) continue;
                        const double fb = u.boundary_slot(s)[static_cast<std::size_t>(boundary_face_index(g, c, axis, side))];
                        const double diff = (vals[static_cast<std::size_t>(c)] - fb) / (0.5 * h);
                        out.energy += diff * diff * 0.5 * V * dt;
                    }
                }
            }
        }
    }
    out.mass = mass_in(u, R, 3.0, 8 * R * R);
    if (out.mass == 0.0) {
        out.degenerate = true;
        out.ratio = 0.0;
        return out;
    }
    out.ratio = R * R * out.energy / out.mass;
    return out;
}

ScalarField q_difference(const ScalarField& u, double period) {
    const auto& g = u.grid().space;
    const int d = g.dim;
    const auto ul = static_cast<std::size_t>(d - 1);
    const double shift_f = period / g.h[ul];
    const int shift = static_cast<int>(std::lround(shift_f));
    if (shift < 1 || std::abs(shift_f - shift) > 1e-9 * shift_f)
        throw std::invalid_argument("q_difference: period must be a positive multiple of the lambda spacing");
    if (shift >= g.N[ul]) throw std::invalid_argument("q_difference: grid does not extend one period");
    SpaceTimeGrid qg = u.grid();
    qg.space.N[ul] -= shift;
    ScalarField q(qg, u.levels());
    for (int s = 0; s < u.level_count(); ++s) {
        auto out = q.slot(s);
        for (int c = 0; c < qg.space.cells(); ++c) {
            const auto idx = qg.space.unravel(c);
            auto up = idx;
            up[ul] += shift;
            out[static_cast<std::size_t>(c)] = u.at(s, g.index(up[0], up[1], up[2])) - u.at(s, g.index(idx[0], idx[1], idx[2]));
        }
    }
    q.metadata = {{"q_difference_period", period}};
    return q;
}

QDecay q_difference_decay(const ScalarField& u, double period, double R) {
    const ScalarField q = q_difference(u, period);
    const auto& g = q.grid().space;
    const int d = g.dim, n = d - 1;
    const double t0 = u.grid().time.t0;
    QDecay out;
    double X[3];
    for (int s = 1; s < q.level_count(); ++s) {
        if (q.time(s) - t0 > 4 * R * R + 1e-12) continue;
        for (int c = 0; c < g.cells(); ++c) {
            g.center(c, std::span<double>(X, static_cast<std::size_t>(d)));
            const double lam = X[n] - g.lo[static_cast<std::size_t>(n)];
            if (lam < R || lam > 2 * R) continue;
            bool inside = true;
            for (int i = 0; i < n; ++i) inside = inside && std::abs(X[i]) <= 2 * R;
            if (inside) out.sup_q = std::max(out.sup_q, std::abs(q.at(s, c)));
        }
    }
    out.mean_square = mass_in(u, R, 3.0, 8 * R * R) / std::pow(R, n + 3);
    out.normalized = out.mean_square > 0.0 ? R * out.sup_q / std::sqrt(out.mean_square) : 0.0;
    return out;
}

}  // namespace parahom
