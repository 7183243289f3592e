#include "parahom/maximal.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace parahom {

namespace {

/// Trapezoid weights of the stored times (dt for a single slot).
std::vector<double> slot_weights(const ScalarField& u) {
    const int S = u.level_count();
    std::vector<double> w(static_cast<std::size_t>(S), u.grid().time.dt);
    if (S < 2) return w;
    for (int s = 0; s < S; ++s) {
        const double a = u.time(std::max(s - 1, 0));
        const double b = u.time(std::min(s + 1, S - 1));
        w[static_cast<std::size_t>(s)] = 0.5 * (b - a);
    }
    return w;
}

/// Range maximum of |u| along one axis, per stored slot (sparse table).
class RowMax {
public:
    RowMax(const ScalarField& u, int axis) : g_(u.grid().space), axis_(axis) {
        const auto a = static_cast<std::size_t>(axis);
        const int N = g_.N[a];
        stride_ = axis == 0 ? 1 : (axis == 1 ? g_.N[0] : g_.N[0] * g_.N[1]);
        cells_ = static_cast<std::size_t>(g_.cells());
        slots_ = static_cast<std::size_t>(u.level_count());
        int levels = 1;
        while ((1 << levels) <= N) ++levels;
        table_.resize(static_cast<std::size_t>(levels));
        table_[0].resize(cells_ * slots_);
        for (std::size_t i = 0; i < cells_ * slots_; ++i) table_[0][i] = std::abs(u.values()[i]);
        for (int k = 1; k < levels; ++k) {
            auto& cur = table_[static_cast<std::size_t>(k)];
            const auto& prev = table_[static_cast<std::size_t>(k - 1)];
            cur.assign(cells_ * slots_, 0.0);
            const int half = 1 << (k - 1);
            for (std::size_t s = 0; s < slots_; ++s)
                for (int c = 0; c < g_.cells(); ++c) {
                    const int i = g_.unravel(c)[a];
                    const std::size_t at = s * cells_ + static_cast<std::size_t>(c);
                    if (i + (1 << k) > N) continue;
                    cur[at] = std::max(prev[at], prev[at + static_cast<std::size_t>(half * stride_)]);
                }
        }
    }

    /// max |u| over cells first + i * stride for i in [i0, i1] (relative to first's row start).
    double query(int slot, int row_start, int i0, int i1) const {
        const int len = i1 - i0 + 1;
        int k = 0;
        while ((2 << k) <= len) ++k;
        const auto& t = table_[static_cast<std::size_t>(k)];
        const std::size_t base = static_cast<std::size_t>(slot) * cells_;
        const double a = t[base + static_cast<std::size_t>(row_start + i0 * stride_)];
        const double b = t[base + static_cast<std::size_t>(row_start + (i1 - (1 << k) + 1) * stride_)];
        return std::max(a, b);
    }

    int axis() const { return axis_; }

private:
    SpatialGrid g_;
    int axis_;
    int stride_ = 1;
    std::size_t cells_ = 0, slots_ = 0;
    std::vector<std::vector<double>> table_;
};

/// Distance from the wall (axis, side) to the centre of cell index i along axis.
double wall_distance(const SpatialGrid& g, int axis, int side, int i) {
    const double c = g.center(axis, i);
    return side == 0 ? c - g.lo[static_cast<std::size_t>(axis)] : g.hi(axis) - c;
}

int layer_index(const SpatialGrid& g, int axis, int side, int j) {
    return side == 0 ? j : g.N[static_cast<std::size_t>(axis)] - 1 - j;
}

/// Index range [i0, i1] of cell centres along `axis` with |c - x0| < w.
std::pair<int, int> strict_range(const SpatialGrid& g, int axis, double x0, double w) {
    const auto a = static_cast<std::size_t>(axis);
    const int N = g.N[a];
    int i0 = std::max(0, static_cast<int>(std::floor((x0 - w - g.lo[a]) / g.h[a] - 0.5)));
    int i1 = std::min(N - 1, static_cast<int>(std::ceil((x0 + w - g.lo[a]) / g.h[a] - 0.5)));
    while (i0 < N && !(std::abs(g.center(axis, i0) - x0) < w)) ++i0;
    while (i1 >= 0 && !(std::abs(g.center(axis, i1) - x0) < w)) --i1;
    return {i0, i1};
}

/// Cone sup over flat walls using row maxima along one tangential axis.
void flat_wall_scan(const ScalarField& u, const ConeOptions& opt, int axis, int side, const RowMax& rows,
                    const std::vector<double>& tw, BoundaryField& out) {
    const auto& g = u.grid().space;
    const int d = g.dim;
    const int scan = rows.axis();
    int other = -1;  // remaining tangential axis (d = 3)
    for (int k = 0; k < d; ++k)
        if (k != axis && k != scan) other = k;
    const auto faces = boundary_faces(g);
    const int S = u.level_count();
    for (const auto& face : faces) {
        if (face.axis != axis || face.side != side) continue;
        for (int s0 = 0; s0 < S; ++s0) {
            const double t0 = u.time(s0);
            double best = 0.0;
            bool found = false;
            for (int j = 0; j < g.N[static_cast<std::size_t>(axis)]; ++j) {
                const int layer = layer_index(g, axis, side, j);
                const double lam = wall_distance(g, axis, side, layer);
                if (opt.truncation && lam >= *opt.truncation) break;
                const double R = opt.eta * lam;
                const double R2 = R * R;
                for (int s = 0; s < S; ++s) {
                    const double dt = u.time(s) - t0;
                    const double base = R2 - dt * dt / R2;
                    if (base <= 0.0) continue;
                    const int other_n = other < 0 ? 1 : g.N[static_cast<std::size_t>(other)];
                    for (int io = 0; io < other_n; ++io) {
                        double rem = base;
                        if (other >= 0) {
                            const double y = g.center(other, io) - face.X[static_cast<std::size_t>(other)];
                            rem -= y * y;
                            if (rem <= 0.0) continue;
                        }
                        const auto [i0, i1] = strict_range(g, scan, face.X[static_cast<std::size_t>(scan)], std::sqrt(rem));
                        if (i0 > i1) continue;
                        std::array<int, 3> idx{0, 0, 0};
                        idx[static_cast<std::size_t>(axis)] = layer;
                        if (other >= 0) idx[static_cast<std::size_t>(other)] = io;
                        const int row_start = g.index(idx[0], idx[1], idx[2]);
                        best = std::max(best, rows.query(s, row_start, i0, i1));
                        found = true;
                    }
                }
            }
            BoundaryPoint p;
            p.X = face.X;
            p.t = t0;
            p.weight = face.area * tw[static_cast<std::size_t>(s0)];
            if (found) {
                p.value = best;
            } else {
                p.value = std::abs(u.at(s0, face.cell));
                p.flagged = true;
            }
            out.points.push_back(p);
        }
    }
}

int first_tangential(int axis) { return axis == 0 ? 1 : 0; }

void finish(BoundaryField& out, const ConeOptions& opt) {
    int flagged = 0;
    for (const auto& p : out.points) flagged += p.flagged ? 1 : 0;
    out.metadata["eta"] = opt.eta;
    out.metadata["flagged"] = flagged;
    if (opt.truncation) out.metadata["truncation"] = *opt.truncation;
    out.metadata["convention"] = "sup |u| over cell centres strictly inside the cone; empty cones fall back to the first layer";
}

}  // namespace

double BoundaryField::max_abs() const {
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, std::abs(p.value));
    return m;
}

double BoundaryField::measure() const {
    double m = 0.0;
    for (const auto& p : points) m += p.weight;
    return m;
}

void write_csv(std::ostream& os, const BoundaryField& g) {
    for (int i = 0; i < g.dim; ++i) os << 'x' << (i + 1) << ',';
    os << "t,N_value,flag\n";
    os.precision(17);
    for (const auto& p : g.points) {
        for (int i = 0; i < g.dim; ++i) os << p.X[static_cast<std::size_t>(i)] << ',';
        os << p.t << ',' << p.value << ',' << (p.flagged ? 1 : 0) << '\n';
    }
}

double default_aperture(double lipschitz) { return std::max(2.0 * lipschitz, 1.0); }

std::vector<int> strided(const TimeGrid& t, int stride) {
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    std::vector<int> levels;
    for (int k = 0; k <= t.steps; k += stride) levels.push_back(k);
    if (levels.back() != t.steps) levels.push_back(t.steps);
    return levels;
}

BoundaryField nontangential_max(const ScalarField& u, const ConeOptions& opt) {
    if (!(opt.eta > 0.0)) throw std::invalid_argument("cone aperture must be positive");
    const auto& g = u.grid().space;
    const auto tw = slot_weights(u);
    BoundaryField out;
    out.dim = g.dim;
    std::vector<std::optional<RowMax>> rows(static_cast<std::size_t>(g.dim));
    auto rows_for = [&](int axis) -> const RowMax& {
        const int scan = first_tangential(axis);
        auto& r = rows[static_cast<std::size_t>(scan)];
        if (!r) r.emplace(u, scan);
        return *r;
    };
    if (opt.walls == DataWalls::All) {
        for (int axis = 0; axis < g.dim; ++axis)
            for (int side = 0; side < 2; ++side) flat_wall_scan(u, opt, axis, side, rows_for(axis), tw, out);
    } else {
        const int side = opt.walls == DataWalls::Bottom ? 0 : 1;
        flat_wall_scan(u, opt, g.dim - 1, side, rows_for(g.dim - 1), tw, out);
    }
    finish(out, opt);
    return out;
}

BoundaryField nontangential_max(const ScalarField& u, const GraphDomain& dom, double eta) {
    const double m = dom.lipschitz();
    if (eta <= 0.0) eta = default_aperture(m);
    if (!(eta > m)) throw std::invalid_argument("cone aperture must exceed the Lipschitz constant");
    ConeOptions opt{eta, DataWalls::Bottom, std::nullopt};
    if (dom.is_flat()) {
        auto out = nontangential_max(u, opt);
        out.metadata["coordinates"] = "half-space (x, lambda)";
        return out;
    }

    const auto& g = u.grid().space;
    const int d = g.dim, n = d - 1;
    const auto tw = slot_weights(u);
    const int S = u.level_count();
    const int columns = g.cells() / g.N[static_cast<std::size_t>(n)];
    std::vector<double> phi(static_cast<std::size_t>(columns));
    std::vector<std::array<double, 2>> xs(static_cast<std::size_t>(columns));
    for (int c = 0; c < columns; ++c) {
        const auto idx = g.unravel(c);
        double x[2] = {0.0, 0.0};
        for (int i = 0; i < n; ++i) x[i] = g.center(i, idx[static_cast<std::size_t>(i)]);
        xs[static_cast<std::size_t>(c)] = {x[0], x[1]};
        phi[static_cast<std::size_t>(c)] = dom.phi(std::span<const double>(x, static_cast<std::size_t>(n)));
    }
    BoundaryField out;
    out.dim = d;
    std::vector<double> grad(static_cast<std::size_t>(n));
    for (const auto& face : boundary_faces(g)) {
        if (face.axis != n || face.side != 0) continue;
        const std::span<const double> x0(face.X.data(), static_cast<std::size_t>(n));
        const double phi0 = dom.phi(x0);
        dom.gradient(x0, grad);
        double jac = 1.0;
        for (double v : grad) jac += v * v;
        jac = std::sqrt(jac);
        for (int s0 = 0; s0 < S; ++s0) {
            const double t0 = u.time(s0);
            double best = 0.0;
            bool found = false;
            for (int j = 0; j < g.N[static_cast<std::size_t>(n)]; ++j) {
                const double sj = g.center(n, j);
                for (int s = 0; s < S; ++s) {
                    const double dt = u.time(s) - t0;
                    const auto vals = u.slot(s);
                    for (int c = 0; c < columns; ++c) {
                        const double lam = sj + phi[static_cast<std::size_t>(c)] - phi0;
                        if (lam <= 0.0) continue;
                        double y[2];
                        for (int i = 0; i < n; ++i) y[i] = xs[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] - x0[static_cast<std::size_t>(i)];
                        if (!(parabolic_norm(std::span<const double>(y, static_cast<std::size_t>(n)), dt) < eta * lam)) continue;
                        best = std::max(best, std::abs(vals[static_cast<std::size_t>(c + columns * j)]));
                        found = true;
                    }
                }
            }
            BoundaryPoint p;
            p.X = face.X;
            p.X[static_cast<std::size_t>(n)] = phi0;
            p.t = t0;
            p.weight = face.area * jac * tw[static_cast<std::size_t>(s0)];
            if (found) {
                p.value = best;
            } else {
                p.value = std::abs(u.at(s0, face.cell));
                p.flagged = true;
            }
            out.points.push_back(p);
        }
    }
    finish(out, opt);
    out.metadata["coordinates"] = "original (x, phi(x)) vertices, cone measured from the graph";
    return out;
}

BoundaryField nontangential_max(const ScalarField& u, const LipschitzCylinder& dom, double eta) {
    double m = 0.0;
    for (const auto& c : dom.charts()) m = std::max(m, c.m);
    if (eta <= 0.0) eta = default_aperture(m);
    const auto& g = u.grid().space;
    const auto& base = dom.base();
    if (base.dim() != g.dim) throw std::invalid_argument("cylinder and grid dimensions differ");
    for (int i = 0; i < g.dim; ++i)
        if (std::abs(base.lo[static_cast<std::size_t>(i)] - g.lo[static_cast<std::size_t>(i)]) > 1e-12 ||
            std::abs(base.hi[static_cast<std::size_t>(i)] - g.hi(i)) > 1e-12)
            throw std::invalid_argument("grid does not cover the cylinder base");
    auto out = nontangential_max(u, ConeOptions{eta, DataWalls::All, std::nullopt});
    out.metadata["coordinates"] = "cylinder; every face uses the cone of its flat chart";
    return out;
}

BoundaryField truncated_vertical_max(const ScalarField& u, double r) {
    const auto& g = u.grid().space;
    const int n = g.dim - 1;
    const double height = g.hi(n) - g.lo[static_cast<std::size_t>(n)];
    if (!(r > 0.0) || r > height + 1e-12) throw std::out_of_range("truncation height outside the grid");
    const auto tw = slot_weights(u);
    int top = -1;
    for (int j = 0; j < g.N[static_cast<std::size_t>(n)]; ++j)
        if (wall_distance(g, n, 0, j) < r) top = j;
    BoundaryField out;
    out.dim = g.dim;
    const int columns = g.cells() / g.N[static_cast<std::size_t>(n)];
    for (const auto& face : boundary_faces(g)) {
        if (face.axis != n || face.side != 0) continue;
        for (int s = 0; s < u.level_count(); ++s) {
            BoundaryPoint p;
            p.X = face.X;
            p.t = u.time(s);
            p.weight = face.area * tw[static_cast<std::size_t>(s)];
            const auto vals = u.slot(s);
            for (int j = 0; j <= top; ++j)
                p.value = std::max(p.value, std::abs(vals[static_cast<std::size_t>(face.cell + columns * j)]));
            p.flagged = top < 0;
            out.points.push_back(p);
        }
    }
    out.metadata["r"] = r;
    out.metadata["offset"] = top < 0 ? r : r - wall_distance(g, n, 0, top);
    return out;
}

double lp_boundary_norm(const BoundaryField& g, double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must lie in (1, infinity)");
    double sum = 0.0;
    for (const auto& q : g.points) sum += q.weight * std::pow(std::abs(q.value), p);
    return std::pow(sum, 1.0 / p);
}

BoundaryField data_trace(const BoundaryField& layout, const BoundaryData& f, const GraphDomain* graph) {
    const int d = layout.dim;
    auto out = layout.with_values([&](const BoundaryPoint& q) {
        std::array<double, 3> X = q.X;
        if (graph) X[static_cast<std::size_t>(d - 1)] = graph->phi(std::span<const double>(X.data(), static_cast<std::size_t>(d - 1)));
        return f.f(std::span<const double>(X.data(), static_cast<std::size_t>(d)), q.t);
    });
    out.metadata = {{"data", f.label}};
    return out;
}

nlohmann::json to_json(const SolvabilityTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"data", r.label}, {"N_norm", r.n_norm}, {"f_norm", r.f_norm}, {"ratio", r.ratio}, {"flagged", r.flagged}});
    return {{"p", t.p}, {"eta", t.eta}, {"rows", rows}, {"constant", t.constant}};
}

namespace {

template <class Dom>
SolvabilityTable solvability_table(const CoefficientField& A, const Dom& dom, const std::vector<BoundaryData>& family,
                                   double p, const SpaceTimeGrid& grid, double eta, int stride,
                                   const GraphDomain* graph) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must lie in (1, infinity)");
    SolvabilityTable table;
    table.p = p;
    SolveOptions opt;
    opt.store_levels = strided(grid.time, stride);
    for (const auto& f : family) {
        const auto u = solve_dirichlet(A, dom, f, grid, opt);
        const auto N = nontangential_max(u, dom, eta);
        table.eta = N.metadata["eta"].template get<double>();
        const auto trace = data_trace(N, f, graph);
        SolvabilityRow row;
        row.label = f.label;
        row.n_norm = lp_boundary_norm(N, p);
        row.f_norm = lp_boundary_norm(trace, p);
        if (row.f_norm == 0.0) throw std::invalid_argument("datum '" + f.label + "' vanishes on the sampled boundary");
        row.ratio = row.n_norm / row.f_norm;
        row.flagged = N.metadata["flagged"].template get<int>();
        table.constant = std::max(table.constant, row.ratio);
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace

SolvabilityTable solvability_constant(const CoefficientField& A, const GraphDomain& dom,
                                      const std::vector<BoundaryData>& family, double p,
                                      const SpaceTimeGrid& grid, double eta, int stride) {
    return solvability_table(A, dom, family, p, grid, eta, stride, dom.is_flat() ? nullptr : &dom);
}

SolvabilityTable solvability_constant(const CoefficientField& A, const LipschitzCylinder& dom,
                                      const std::vector<BoundaryData>& family, double p,
                                      const SpaceTimeGrid& grid, double eta, int stride) {
    return solvability_table(A, dom, family, p, grid, eta, stride, nullptr);
}

}  // namespace parahom
