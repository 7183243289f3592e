#include "parahom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace parahom {

double parabolic_norm(std::span<const double> X, double t) {
    double s = 0.0;
    for (double x : X) s += x * x;
    if (s == 0.0 && t == 0.0) return 0.0;
    return std::sqrt(0.5 * (s + std::hypot(s, 2.0 * t)));
}

double parabolic_distance(const ParabolicPoint& p, const ParabolicPoint& q) {
    if (p.X.size() != q.X.size())
        throw std::invalid_argument("parabolic_distance: dimension mismatch (" + std::to_string(p.X.size()) +
                                    " vs " + std::to_string(q.X.size()) + ")");
    double diff[8];
    if (p.X.size() > 8) throw std::invalid_argument("parabolic_distance: dimension too large");
    for (std::size_t i = 0; i < p.X.size(); ++i) diff[i] = p.X[i] - q.X[i];
    return parabolic_norm(std::span<const double>(diff, p.X.size()), p.t - q.t);
}

double ParabolicCube::measure() const {
    const double k = static_cast<double>(center.size());
    double m = std::pow(2.0 * r, k) * 2.0 * r * r;
    if (kind == CubeKind::Box) m *= r;
    return m;
}

bool ParabolicCube::contains(std::span<const double> y, double s) const {
    const std::size_t k = center.size();
    if (y.size() < k + (kind == CubeKind::Box ? 1 : 0))
        throw std::invalid_argument("ParabolicCube::contains: point has too few coordinates");
    for (std::size_t i = 0; i < k; ++i)
        if (!(std::abs(y[i] - center[i]) < r)) return false;
    if (!(std::abs(s - t) < r * r)) return false;
    if (kind == CubeKind::Box) return y[k] > 0.0 && y[k] < r;
    return true;
}

ParabolicCube ParabolicCube::scaled(double factor) const {
    ParabolicCube c = *this;
    c.r *= factor;
    return c;
}

nlohmann::json to_json(const ParabolicPoint& p) { return {{"X", p.X}, {"t", p.t}}; }

nlohmann::json to_json(const ParabolicCube& Q) {
    const char* kind = Q.kind == CubeKind::Boundary ? "boundary" : Q.kind == CubeKind::Interior ? "interior" : "box";
    return {{"center", Q.center}, {"t", Q.t}, {"r", Q.r}, {"kind", kind}};
}

ParabolicCube boundary_cube(std::vector<double> x, double t, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("cube side must be positive");
    return {std::move(x), t, r, CubeKind::Boundary};
}

ParabolicCube interior_cube(std::vector<double> X, double t, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("cube side must be positive");
    return {std::move(X), t, r, CubeKind::Interior};
}

ParabolicCube box_cube(std::vector<double> x, double t, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("cube side must be positive");
    return {std::move(x), t, r, CubeKind::Box};
}

bool cone_contains(const Cone& cone, std::span<const double> x, double t, double lambda) {
    if (!(lambda > 0.0)) return false;
    if (cone.truncation && !(lambda < *cone.truncation)) return false;
    double diff[8];
    const std::size_t n = cone.vertex.size();
    for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - cone.vertex[i];
    return parabolic_norm(std::span<const double>(diff, n), t - cone.t0) < cone.eta * lambda;
}

// ---- GraphDomain -------------------------------------------------------------

namespace {

void check_box(const SpatialBox& box) {
    if (box.lo.empty() || box.lo.size() != box.hi.size())
        throw std::invalid_argument("box needs matching non-empty lo/hi");
    for (int i = 0; i < box.dim(); ++i)
        if (!(box.width(i) > 0.0)) throw std::invalid_argument("box has non-positive width");
}

/// Iterates over all multi-indices in [0, shape).
template <class F>
void for_each_index(std::span<const int> shape, F&& f) {
    std::vector<int> idx(shape.size(), 0);
    const int total = std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<>());
    for (int k = 0; k < total; ++k) {
        int rem = k;
        for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
            idx[static_cast<std::size_t>(i)] = rem % shape[static_cast<std::size_t>(i)];
            rem /= shape[static_cast<std::size_t>(i)];
        }
        f(std::span<const int>(idx));
    }
}

}  // namespace

GraphDomain GraphDomain::flat(SpatialBox box) {
    check_box(box);
    GraphDomain g;
    g.kind_ = Kind::Flat;
    g.box_ = std::move(box);
    g.shape_.assign(static_cast<std::size_t>(g.box_.dim()), 2);
    return g;
}

GraphDomain GraphDomain::closed_form(const std::string& expression, double m, SpatialBox box, int resolution) {
    check_box(box);
    if (resolution < 2) throw std::invalid_argument("graph resolution must be >= 2");
    if (!(m >= 0.0)) throw std::invalid_argument("Lipschitz constant must be nonnegative");
    GraphDomain g;
    g.kind_ = Kind::ClosedForm;
    g.m_ = m;
    g.box_ = std::move(box);
    g.expression_ = Expression(expression, coordinate_names(g.box_.dim()));
    g.shape_.assign(static_cast<std::size_t>(g.box_.dim()), resolution);
    return g;
}

GraphDomain GraphDomain::table(std::vector<double> values, std::vector<int> shape, double m, SpatialBox box) {
    check_box(box);
    if (static_cast<int>(shape.size()) != box.dim()) throw std::invalid_argument("table shape/box mismatch");
    std::size_t total = 1;
    for (int s : shape) {
        if (s < 2) throw std::invalid_argument("table needs >= 2 nodes per axis");
        total *= static_cast<std::size_t>(s);
    }
    if (values.size() != total) throw std::invalid_argument("table value count does not match shape");
    GraphDomain g;
    g.kind_ = Kind::Table;
    g.m_ = m;
    g.box_ = std::move(box);
    g.shape_ = std::move(shape);
    g.values_ = std::move(values);

    // nodal gradients: central differences, one-sided at the edges
    const int n = g.n();
    g.node_gradients_.assign(total * static_cast<std::size_t>(n), 0.0);
    std::size_t node = 0;
    for_each_index(g.shape_, [&](std::span<const int> idx) {
        std::vector<int> a(idx.begin(), idx.end()), b = a;
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            a = {idx.begin(), idx.end()};
            b = a;
            a[ui] = std::max(0, idx[ui] - 1);
            b[ui] = std::min(g.shape_[ui] - 1, idx[ui] + 1);
            const double dx = g.node_coord(i, b[ui]) - g.node_coord(i, a[ui]);
            g.node_gradients_[node * static_cast<std::size_t>(n) + ui] = (g.node_value(b) - g.node_value(a)) / dx;
        }
        ++node;
    });
    return g;
}

double GraphDomain::node_coord(int axis, int i) const {
    const auto a = static_cast<std::size_t>(axis);
    return box_.lo[a] + box_.width(axis) * i / (shape_[a] - 1);
}

double GraphDomain::node_value(std::span<const int> idx) const {
    if (kind_ == Kind::Flat) return 0.0;
    if (kind_ == Kind::Table) {
        std::size_t flat = 0;
        for (std::size_t i = 0; i < shape_.size(); ++i) flat = flat * static_cast<std::size_t>(shape_[i]) + static_cast<std::size_t>(idx[i]);
        return values_[flat];
    }
    double x[8];
    for (std::size_t i = 0; i < idx.size(); ++i) x[i] = node_coord(static_cast<int>(i), idx[i]);
    return expression_.evaluate(std::span<const double>(x, idx.size()));
}

namespace {

struct Bracket {
    int lo;
    double w;  // weight of the upper node
};

Bracket bracket(double x, double lo, double width, int nodes) {
    double u = (x - lo) / width * (nodes - 1);
    u = std::clamp(u, 0.0, static_cast<double>(nodes - 1));
    int i = std::min(static_cast<int>(std::floor(u)), nodes - 2);
    return {i, u - i};
}

}  // namespace

double GraphDomain::table_value(std::span<const double> x) const {
    const int n = this->n();
    Bracket br[8];
    for (int i = 0; i < n; ++i)
        br[i] = bracket(x[static_cast<std::size_t>(i)], box_.lo[static_cast<std::size_t>(i)], box_.width(i),
                        shape_[static_cast<std::size_t>(i)]);
    double acc = 0.0;
    int idx[8];
    for (int corner = 0; corner < (1 << n); ++corner) {
        double w = 1.0;
        for (int i = 0; i < n; ++i) {
            const bool up = (corner >> i) & 1;
            idx[i] = br[i].lo + (up ? 1 : 0);
            w *= up ? br[i].w : 1.0 - br[i].w;
        }
        if (w != 0.0) acc += w * node_value(std::span<const int>(idx, static_cast<std::size_t>(n)));
    }
    return acc;
}

double GraphDomain::phi(std::span<const double> x) const {
    switch (kind_) {
        case Kind::Flat: return 0.0;
        case Kind::ClosedForm: return expression_.evaluate(x);
        case Kind::Table: return table_value(x);
    }
    return 0.0;
}

void GraphDomain::gradient(std::span<const double> x, std::span<double> out) const {
    const int n = this->n();
    if (kind_ == Kind::Flat) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    if (kind_ == Kind::ClosedForm) {
        double xp[8], xm[8];
        for (int i = 0; i < n; ++i) {
            std::copy(x.begin(), x.begin() + n, xp);
            std::copy(x.begin(), x.begin() + n, xm);
            const double h = box_.width(i) / (shape_[static_cast<std::size_t>(i)] - 1);
            xp[i] += h;
            xm[i] -= h;
            const auto nn = static_cast<std::size_t>(n);
            out[static_cast<std::size_t>(i)] =
                (expression_.evaluate(std::span<const double>(xp, nn)) -
                 expression_.evaluate(std::span<const double>(xm, nn))) / (2.0 * h);
        }
        return;
    }
    Bracket br[8];
    for (int i = 0; i < n; ++i)
        br[i] = bracket(x[static_cast<std::size_t>(i)], box_.lo[static_cast<std::size_t>(i)], box_.width(i),
                        shape_[static_cast<std::size_t>(i)]);
    std::fill(out.begin(), out.begin() + n, 0.0);
    for (int corner = 0; corner < (1 << n); ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int i = 0; i < n; ++i) {
            const bool up = (corner >> i) & 1;
            flat = flat * static_cast<std::size_t>(shape_[static_cast<std::size_t>(i)]) +
                   static_cast<std::size_t>(br[i].lo + (up ? 1 : 0));
            w *= up ? br[i].w : 1.0 - br[i].w;
        }
        for (int i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] += w * node_gradients_[flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
    }
}

LipschitzCheck GraphDomain::check_lipschitz() const {
    LipschitzCheck out;
    if (kind_ == Kind::Flat) return out;
    const int n = this->n();
    std::vector<int> cells(shape_.begin(), shape_.end());
    for (auto& c : cells) c -= 1;
    std::vector<int> a(static_cast<std::size_t>(n)), b(a.size());
    for_each_index(cells, [&](std::span<const int> cell) {
        for (int ca = 0; ca < (1 << n); ++ca) {
            for (int cb = ca + 1; cb < (1 << n); ++cb) {
                double dist2 = 0.0;
                for (int i = 0; i < n; ++i) {
                    const auto ui = static_cast<std::size_t>(i);
                    a[ui] = cell[ui] + ((ca >> i) & 1);
                    b[ui] = cell[ui] + ((cb >> i) & 1);
                    const double d = node_coord(i, a[ui]) - node_coord(i, b[ui]);
                    dist2 += d * d;
                }
                const double ratio = std::abs(node_value(a) - node_value(b)) / std::sqrt(dist2);
                if (ratio > out.max_ratio) {
                    out.max_ratio = ratio;
                    out.worst_x.resize(a.size());
                    out.worst_y.resize(b.size());
                    for (int i = 0; i < n; ++i) {
                        out.worst_x[static_cast<std::size_t>(i)] = node_coord(i, a[static_cast<std::size_t>(i)]);
                        out.worst_y[static_cast<std::size_t>(i)] = node_coord(i, b[static_cast<std::size_t>(i)]);
                    }
                }
            }
        }
    });
    out.pass = out.max_ratio <= m_ * (1.0 + 1e-9) + 1e-12;
    return out;
}

nlohmann::json GraphDomain::to_json() const {
    nlohmann::json box = nlohmann::json::array();
    for (int i = 0; i < n(); ++i) box.push_back({box_.lo[static_cast<std::size_t>(i)], box_.hi[static_cast<std::size_t>(i)]});
    nlohmann::json phi;
    switch (kind_) {
        case Kind::Flat: phi = {{"kind", "flat"}}; break;
        case Kind::ClosedForm:
            phi = {{"kind", "closed_form"}, {"expr", expression_.source()}, {"resolution", shape_.front()}};
            break;
        case Kind::Table: phi = {{"kind", "table"}, {"values", values_}, {"shape", shape_}}; break;
    }
    return {{"phi", phi}, {"m", m_}, {"box", box}};
}

CoefficientField flatten_pullback(const GraphDomain& dom, const CoefficientField& A) {
    if (dom.is_flat()) return A;
    const int d = A.dim();
    const int n = dom.n();
    if (n != d - 1) throw std::invalid_argument("flatten_pullback: graph dimension does not match coefficients");
    const auto check = dom.check_lipschitz();
    if (!check.pass) {
        std::ostringstream os;
        os << "flatten_pullback: Lipschitz bound m=" << dom.lipschitz() << " violated (ratio " << check.max_ratio
           << ")";
        throw std::domain_error(os.str());
    }
    auto eval = [dom, A, d, n](std::span<const double> Xs) {
        double Y[3], g[3];
        const auto nn = static_cast<std::size_t>(n);
        std::span<const double> x = Xs.first(nn);
        std::copy(x.begin(), x.end(), Y);
        Y[n] = Xs[nn] + dom.phi(x);
        dom.gradient(x, std::span<double>(g, nn));
        SmallMatrix J = SmallMatrix::Identity(d, d);
        for (int i = 0; i < n; ++i) J(n, i) = -g[i];
        const SmallMatrix M = A(std::span<const double>(Y, static_cast<std::size_t>(d)));
        SmallMatrix out = J * M * J.transpose();
        // restore exact symmetry lost to rounding in the triple product
        out = 0.5 * (out + out.transpose()).eval();
        return out;
    };
    const double m = dom.lipschitz();
    CoefficientField field(d, eval, A.ellipticity() * (1.0 + m) * (1.0 + m), Periodicity::None,
                           A.label() + "|flattened");
    return field.with_spec({{"flattened", A.spec()}, {"graph", dom.to_json()}});
}

MeasureResult boundary_measure(const GraphDomain& dom, const ParabolicCube& region, int cells_per_side) {
    if (region.kind == CubeKind::Interior)
        throw std::invalid_argument("boundary_measure: graph domains take boundary cubes in R^n");
    const int n = dom.n();
    if (static_cast<int>(region.center.size()) != n)
        throw std::invalid_argument("boundary_measure: cube dimension does not match the graph");
    std::vector<double> lo(static_cast<std::size_t>(n)), hi(lo.size());
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        lo[ui] = std::max(region.center[ui] - region.r, dom.box().lo[ui]);
        hi[ui] = std::min(region.center[ui] + region.r, dom.box().hi[ui]);
        if (!(hi[ui] > lo[ui])) return {0.0, true};
    }
    std::vector<int> shape(static_cast<std::size_t>(n), cells_per_side);
    double x[8], g[8];
    double area = 0.0;
    double cell_volume = 1.0;
    for (int i = 0; i < n; ++i) cell_volume *= (hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]) / cells_per_side;
    for_each_index(shape, [&](std::span<const int> idx) {
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            x[i] = lo[ui] + (idx[ui] + 0.5) * (hi[ui] - lo[ui]) / cells_per_side;
        }
        const auto nn = static_cast<std::size_t>(n);
        dom.gradient(std::span<const double>(x, nn), std::span<double>(g, nn));
        double s = 1.0;
        for (int i = 0; i < n; ++i) s += g[i] * g[i];
        area += std::sqrt(s);
    });
    return {area * cell_volume * 2.0 * region.r * region.r, false};
}

// ---- charts and cylinders -------------------------------------------------

std::vector<double> Chart::to_global(std::span<const double> local) const {
    std::vector<double> X(origin);
    for (std::size_t i = 0; i < X.size(); ++i)
        for (std::size_t j = 0; j < X.size(); ++j)
            X[i] += frame(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * local[j];
    return X;
}

std::vector<double> Chart::to_local(std::span<const double> X) const {
    std::vector<double> local(origin.size(), 0.0);
    for (std::size_t j = 0; j < local.size(); ++j)
        for (std::size_t i = 0; i < local.size(); ++i)
            local[j] += frame(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (X[i] - origin[i]);
    return local;
}

LipschitzCylinder::LipschitzCylinder(SpatialBox base, double T, std::vector<Chart> charts)
    : base_(std::move(base)), T_(T), charts_(std::move(charts)) {
    check_box(base_);
    if (base_.dim() < 2 || base_.dim() > 3) throw std::invalid_argument("cylinder base must be 2- or 3-dimensional");
    if (!(T > 0.0)) throw std::invalid_argument("cylinder final time must be positive");
}

LipschitzCylinder LipschitzCylinder::box(SpatialBox base, double T) {
    check_box(base);
    const int d = base.dim();
    double min_width = base.width(0);
    for (int i = 1; i < d; ++i) min_width = std::min(min_width, base.width(i));
    std::vector<Chart> charts;
    for (int a = 0; a < d; ++a) {
        for (int side = 0; side < 2; ++side) {
            Chart c;
            c.origin.resize(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i)
                c.origin[static_cast<std::size_t>(i)] =
                    0.5 * (base.lo[static_cast<std::size_t>(i)] + base.hi[static_cast<std::size_t>(i)]);
            c.origin[static_cast<std::size_t>(a)] = side == 0 ? base.lo[static_cast<std::size_t>(a)] : base.hi[static_cast<std::size_t>(a)];
            c.frame = SmallMatrix::Zero(d, d);
            int col = 0;
            for (int i = 0; i < d; ++i)
                if (i != a) c.frame(i, col++) = 1.0;
            c.frame(a, d - 1) = side == 0 ? 1.0 : -1.0;
            c.r0 = 0.25 * min_width;
            charts.push_back(std::move(c));
        }
    }
    if (d == 2) {
        const double s = 1.0 / std::sqrt(2.0);
        for (int corner = 0; corner < 4; ++corner) {
            const double s1 = (corner & 1) ? -1.0 : 1.0;
            const double s2 = (corner & 2) ? -1.0 : 1.0;
            Chart c;
            c.origin = {(corner & 1) ? base.hi[0] : base.lo[0], (corner & 2) ? base.hi[1] : base.lo[1]};
            c.frame = SmallMatrix(2, 2);
            c.frame << s1 * s, s1 * s, -s2 * s, s2 * s;
            c.r0 = 0.25 * min_width;
            c.m = 1.0;
            c.phi_source = "abs(x1)";
            charts.push_back(std::move(c));
        }
    }
    return LipschitzCylinder(std::move(base), T, std::move(charts));
}

bool LipschitzCylinder::inside(std::span<const double> X) const {
    for (int i = 0; i < base_.dim(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (!(X[ui] > base_.lo[ui] && X[ui] < base_.hi[ui])) return false;
    }
    return true;
}

ChartCheck LipschitzCylinder::check_charts(int samples_per_axis) const {
    ChartCheck out;
    const int d = base_.dim();
    const int n = d - 1;
    for (const auto& chart : charts_) {
        const Expression phi(chart.phi_source, coordinate_names(n));
        std::vector<int> shape(static_cast<std::size_t>(n), samples_per_axis);
        std::vector<double> prev_x, prev_phi;
        std::vector<double> local(static_cast<std::size_t>(d));
        for_each_index(shape, [&](std::span<const int> idx) {
            for (int i = 0; i < n; ++i)
                local[static_cast<std::size_t>(i)] =
                    chart.r0 * (-1.0 + 2.0 * idx[static_cast<std::size_t>(i)] / (samples_per_axis - 1));
            const double p = phi.evaluate(std::span<const double>(local.data(), static_cast<std::size_t>(n)));
            // Lipschitz ratio against the previous sample along the last axis
            if (!prev_x.empty() && idx[static_cast<std::size_t>(n - 1)] > 0) {
                double dist2 = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double dd = local[static_cast<std::size_t>(i)] - prev_x[static_cast<std::size_t>(i)];
                    dist2 += dd * dd;
                }
                out.max_ratio = std::max(out.max_ratio, std::abs(p - prev_phi[0]) / std::sqrt(dist2));
            }
            prev_x.assign(local.begin(), local.begin() + n);
            prev_phi = {p};
            for (double frac : {0.05, 0.25, 0.5}) {
                const double delta = frac * chart.r0;
                local[static_cast<std::size_t>(n)] = p + delta;
                if (!inside(chart.to_global(local))) out.worst_violation = std::max(out.worst_violation, delta);
                local[static_cast<std::size_t>(n)] = p - delta;
                if (inside(chart.to_global(local))) out.worst_violation = std::max(out.worst_violation, delta);
            }
        });
        if (out.max_ratio > chart.m * (1.0 + 1e-9) + 1e-12) out.pass = false;
    }
    if (out.worst_violation > 0.0) out.pass = false;
    return out;
}

nlohmann::json LipschitzCylinder::to_json() const {
    nlohmann::json box = nlohmann::json::array();
    for (int i = 0; i < base_.dim(); ++i)
        box.push_back({base_.lo[static_cast<std::size_t>(i)], base_.hi[static_cast<std::size_t>(i)]});
    nlohmann::json charts = nlohmann::json::array();
    for (const auto& c : charts_) {
        nlohmann::json frame = nlohmann::json::array();
        for (Eigen::Index i = 0; i < c.frame.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < c.frame.cols(); ++j) row.push_back(c.frame(i, j));
            frame.push_back(row);
        }
        charts.push_back({{"origin", c.origin}, {"frame", frame}, {"r0", c.r0}, {"m", c.m}, {"phi", c.phi_source}});
    }
    return {{"box", box}, {"T", T_}, {"charts", charts}};
}

MeasureResult boundary_measure(const LipschitzCylinder& dom, const ParabolicCube& region) {
    const auto& b = dom.base();
    const int d = b.dim();
    if (region.kind != CubeKind::Interior || static_cast<int>(region.center.size()) != d)
        throw std::invalid_argument("boundary_measure: cylinders take interior-kind cubes in R^d");
    auto overlap = [&](int i) {
        const auto ui = static_cast<std::size_t>(i);
        return std::max(0.0, std::min(b.hi[ui], region.center[ui] + region.r) -
                                 std::max(b.lo[ui], region.center[ui] - region.r));
    };
    double area = 0.0;
    for (int a = 0; a < d; ++a) {
        for (double face : {b.lo[static_cast<std::size_t>(a)], b.hi[static_cast<std::size_t>(a)]}) {
            if (!(std::abs(face - region.center[static_cast<std::size_t>(a)]) < region.r)) continue;
            double patch = 1.0;
            for (int i = 0; i < d; ++i)
                if (i != a) patch *= overlap(i);
            area += patch;
        }
    }
    const double duration = std::max(
        0.0, std::min(dom.final_time(), region.t + region.r * region.r) - std::max(0.0, region.t - region.r * region.r));
    const double value = area * duration;
    return {value, value == 0.0};
}

SpatialBox box_from_json(const nlohmann::json& j) {
    SpatialBox box;
    if (j.is_object()) {
        box.lo = j.at("lo").get<std::vector<double>>();
        box.hi = j.at("hi").get<std::vector<double>>();
    } else {
        for (const auto& row : j) {
            box.lo.push_back(row.at(0).get<double>());
            box.hi.push_back(row.at(1).get<double>());
        }
    }
    check_box(box);
    return box;
}

GraphDomain graph_domain_from_json(const nlohmann::json& j) {
    const SpatialBox box = box_from_json(j.at("box"));
    const auto& phi = j.at("phi");
    const std::string kind = phi.is_string() ? "closed_form" : phi.value("kind", std::string("closed_form"));
    if (kind == "flat") return GraphDomain::flat(box);
    const double m = j.at("m").get<double>();
    if (kind == "closed_form") {
        const std::string expr = phi.is_string() ? phi.get<std::string>() : phi.at("expr").get<std::string>();
        const int res = phi.is_string() ? 256 : phi.value("resolution", 256);
        return GraphDomain::closed_form(expr, m, box, res);
    }
    if (kind == "table")
        return GraphDomain::table(phi.at("values").get<std::vector<double>>(), phi.at("shape").get<std::vector<int>>(),
                                  m, box);
    throw std::invalid_argument("unknown graph kind '" + kind + "'");
}

LipschitzCylinder cylinder_from_json(const nlohmann::json& j) {
    SpatialBox base = box_from_json(j.at("box"));
    const double T = j.at("T").get<double>();
    if (!j.contains("charts")) return LipschitzCylinder::box(std::move(base), T);
    std::vector<Chart> charts;
    for (const auto& c : j.at("charts")) {
        Chart chart;
        chart.origin = c.at("origin").get<std::vector<double>>();
        const auto& rows = c.at("frame");
        const auto d = static_cast<Eigen::Index>(rows.size());
        chart.frame = SmallMatrix(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index k = 0; k < d; ++k)
                chart.frame(i, k) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
        chart.r0 = c.at("r0").get<double>();
        chart.m = c.value("m", 0.0);
        chart.phi_source = c.value("phi", std::string("0"));
        charts.push_back(std::move(chart));
    }
    return LipschitzCylinder(std::move(base), T, std::move(charts));
}

}  // namespace parahom
