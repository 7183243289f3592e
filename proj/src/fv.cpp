#include "parahom/fv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace parahom {

namespace {

/// Affine combination over the stacked index space (cells, then faces).
struct Affine {
    int n = 0;
    std::array<int, 12> idx{};
    std::array<double, 12> c{};

    void add(int i, double v) {
        for (int k = 0; k < n; ++k)
            if (idx[static_cast<std::size_t>(k)] == i) {
                c[static_cast<std::size_t>(k)] += v;
                return;
            }
        if (n == 12) throw std::logic_error("affine stencil overflow");
        idx[static_cast<std::size_t>(n)] = i;
        c[static_cast<std::size_t>(n)] = v;
        ++n;
    }
    void add(const Affine& o, double s) {
        for (int k = 0; k < o.n; ++k) add(o.idx[static_cast<std::size_t>(k)], s * o.c[static_cast<std::size_t>(k)]);
    }
};

void store(const Affine& a, int& n, std::array<int, EnergyTerm::kMax>& idx, std::array<double, EnergyTerm::kMax>& c) {
    n = 0;
    for (int k = 0; k < a.n; ++k) {
        if (a.c[static_cast<std::size_t>(k)] == 0.0) continue;
        idx[static_cast<std::size_t>(n)] = a.idx[static_cast<std::size_t>(k)];
        c[static_cast<std::size_t>(n)] = a.c[static_cast<std::size_t>(k)];
        ++n;
    }
}

double harmonic(double a, double b) { return (a + b) > 0.0 ? 2.0 * a * b / (a + b) : 0.0; }

class Assembler {
public:
    Assembler(const CoefficientField& A, const SpatialGrid& g, BoundaryMode mode) : g_(g), mode_(mode) {
        if (A.dim() != g.dim) throw std::invalid_argument("assemble_operator: coefficient/grid dimension mismatch");
        const int n = g.cells();
        const int d = g.dim;
        coeff_.resize(static_cast<std::size_t>(n) * 9);
        double X[3];
        for (int c = 0; c < n; ++c) {
            g.center(c, std::span<double>(X, static_cast<std::size_t>(d)));
            const SmallMatrix M = A(std::span<const double>(X, static_cast<std::size_t>(d)));
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) coeff_[static_cast<std::size_t>(c) * 9 + static_cast<std::size_t>(3 * i + j)] = M(i, j);
        }
        if (mode == BoundaryMode::Dirichlet) faces_ = boundary_faces(g);
    }

    double a(int cell, int i, int j) const { return coeff_[static_cast<std::size_t>(cell) * 9 + static_cast<std::size_t>(3 * i + j)]; }

    template <class Sink>
    void run(Sink&& sink) {
        face_terms(sink);
        for (int i = 0; i < g_.dim; ++i)
            for (int j = i + 1; j < g_.dim; ++j) corner_terms(i, j, sink);
    }

    const std::vector<BoundaryFace>& faces() const { return faces_; }
    bool off_diagonal() const { return off_diagonal_; }

private:
    int cells() const { return g_.cells(); }
    int face_slot(int cell, int axis, int side) const { return cells() + boundary_face_index(g_, cell, axis, side); }

    template <class Sink>
    void face_terms(Sink& sink) {
        const double V = g_.cell_volume();
        for (int axis = 0; axis < g_.dim; ++axis) {
            const auto ua = static_cast<std::size_t>(axis);
            const double h = g_.h[ua];
            for (int c = 0; c < cells(); ++c) {
                auto idx = g_.unravel(c);
                const int i = idx[ua];
                // face between c and its upper neighbour
                if (i + 1 < g_.N[ua] || mode_ == BoundaryMode::Periodic) {
                    auto up = idx;
                    up[ua] = (i + 1) % g_.N[ua];
                    const int q = g_.index(up[0], up[1], up[2]);
                    Affine D;
                    D.add(q, 1.0 / h);
                    D.add(c, -1.0 / h);
                    emit(sink, V * harmonic(a(c, axis, axis), a(q, axis, axis)), D, axis, D, axis);
                }
                if (mode_ == BoundaryMode::Dirichlet) {
                    for (int side = 0; side < 2; ++side) {
                        if (i != (side == 0 ? 0 : g_.N[ua] - 1)) continue;
                        // half cell between the centre and the wall
                        Affine D;
                        const double s = side == 0 ? 1.0 : -1.0;
                        D.add(c, s * 2.0 / h);
                        D.add(face_slot(c, axis, side), -s * 2.0 / h);
                        emit(sink, 0.5 * V * a(c, axis, axis), D, axis, D, axis);
                    }
                }
            }
        }
    }

    /// Value of a possibly out-of-range cell in the (i, j) corner stencil.
    Affine value(std::array<int, 3> idx, int i, int j) const {
        Affine out;
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
        if (mode_ == BoundaryMode::Periodic) {
            idx[ui] = (idx[ui] + g_.N[ui]) % g_.N[ui];
            idx[uj] = (idx[uj] + g_.N[uj]) % g_.N[uj];
            out.add(g_.index(idx[0], idx[1], idx[2]), 1.0);
            return out;
        }
        auto outside = [&](std::size_t ax) { return idx[ax] < 0 || idx[ax] >= g_.N[ax]; };
        auto clamp = [&](std::array<int, 3> v, std::size_t ax) {
            v[ax] = std::clamp(v[ax], 0, g_.N[ax] - 1);
            return v;
        };
        const bool oi = outside(ui), oj = outside(uj);
        if (oi && oj) throw std::logic_error("corner stencil reached a domain corner");
        if (!oi && !oj) {
            out.add(g_.index(idx[0], idx[1], idx[2]), 1.0);
        } else {
            const std::size_t ax = oi ? ui : uj;
            const auto mirror = clamp(idx, ax);
            const int m = g_.index(mirror[0], mirror[1], mirror[2]);
            out.add(face_slot(m, static_cast<int>(ax), idx[ax] < 0 ? 0 : 1), 2.0);
            out.add(m, -1.0);
        }
        return out;
    }

    template <class Sink>
    void corner_terms(int i, int j, Sink& sink) {
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
        const double V = g_.cell_volume();
        const bool periodic = mode_ == BoundaryMode::Periodic;
        const int ci_max = periodic ? g_.N[ui] - 1 : g_.N[ui];
        const int cj_max = periodic ? g_.N[uj] - 1 : g_.N[uj];
        // the remaining axis (d = 3) runs over cells
        const int k = 3 - i - j;
        const auto uk = static_cast<std::size_t>(k);
        const int nk = (g_.dim == 3) ? g_.N[uk] : 1;
        for (int ck = 0; ck < nk; ++ck) {
            for (int cj = 0; cj <= cj_max; ++cj) {
                for (int ci = 0; ci <= ci_max; ++ci) {
                    // quads at a domain corner are skipped: with the reflected ghosts
                    // their cross term breaks exactness on affine functions
                    if (!periodic && (ci == 0 || ci == ci_max) && (cj == 0 || cj == cj_max)) continue;
                    std::array<int, 3> base{0, 0, 0};
                    base[ui] = ci - 1;
                    base[uj] = cj - 1;
                    if (g_.dim == 3) base[uk] = ck;
                    double aij = 0.0;
                    int inside = 0;
                    std::array<std::array<int, 3>, 4> pos;
                    for (int q = 0; q < 4; ++q) {
                        auto p = base;
                        p[ui] += q & 1;
                        p[uj] += q >> 1;
                        pos[static_cast<std::size_t>(q)] = p;
                        auto w = p;
                        if (periodic) {
                            w[ui] = (w[ui] + g_.N[ui]) % g_.N[ui];
                            w[uj] = (w[uj] + g_.N[uj]) % g_.N[uj];
                        } else if (w[ui] < 0 || w[ui] >= g_.N[ui] || w[uj] < 0 || w[uj] >= g_.N[uj]) {
                            continue;
                        }
                        aij += a(g_.index(w[0], w[1], w[2]), i, j);
                        ++inside;
                    }
                    if (inside == 0 || aij == 0.0) continue;
                    aij /= inside;
                    off_diagonal_ = true;
                    Affine U[4];
                    for (int q = 0; q < 4; ++q) U[q] = value(pos[static_cast<std::size_t>(q)], i, j);
                    Affine Di, Dj;
                    const double hi = g_.h[ui], hj = g_.h[uj];
                    Di.add(U[1], 0.5 / hi);
                    Di.add(U[0], -0.5 / hi);
                    Di.add(U[3], 0.5 / hi);
                    Di.add(U[2], -0.5 / hi);
                    Dj.add(U[2], 0.5 / hj);
                    Dj.add(U[0], -0.5 / hj);
                    Dj.add(U[3], 0.5 / hj);
                    Dj.add(U[1], -0.5 / hj);
                    // A_ij and A_ji both contribute
                    emit(sink, 2.0 * V * inside / 4.0 * aij, Di, i, Dj, j);
                }
            }
        }
    }

    template <class Sink>
    void emit(Sink& sink, double w, const Affine& d1, int k1, const Affine& d2, int k2) {
        if (w == 0.0) return;
        EnergyTerm t;
        t.w = w;
        t.k1 = k1;
        t.k2 = k2;
        store(d1, t.n1, t.idx1, t.c1);
        store(d2, t.n2, t.idx2, t.c2);
        sink(t);
    }

    const SpatialGrid& g_;
    BoundaryMode mode_;
    std::vector<double> coeff_;
    std::vector<BoundaryFace> faces_;
    bool off_diagonal_ = false;
};

double dot(const EnergyTerm& t, int which, const Vector& chi) {
    double s = 0.0;
    const int n = which == 1 ? t.n1 : t.n2;
    const auto& idx = which == 1 ? t.idx1 : t.idx2;
    const auto& c = which == 1 ? t.c1 : t.c2;
    for (int k = 0; k < n; ++k) s += c[static_cast<std::size_t>(k)] * chi[idx[static_cast<std::size_t>(k)]];
    return s;
}

double grid_measure(const SpatialGrid& g) { return g.cell_volume() * g.cells(); }

}  // namespace

FvOperator assemble_operator(const CoefficientField& A, const SpatialGrid& grid, BoundaryMode mode, bool keep_terms) {
    Assembler as(A, grid, mode);
    FvOperator op;
    op.grid = grid;
    op.mode = mode;
    op.faces = as.faces();
    const int n = grid.cells();
    std::vector<Eigen::Triplet<double>> s_trip, b_trip;
    s_trip.reserve(static_cast<std::size_t>(n) * 4 * static_cast<std::size_t>(grid.dim + 1));
    auto add = [&](int p, int q, double v) {
        if (p < n && q < n) s_trip.emplace_back(p, q, v);
        else if (p < n) b_trip.emplace_back(p, q - n, v);
    };
    as.run([&](const EnergyTerm& t) {
        for (int a = 0; a < t.n1; ++a) {
            for (int b = 0; b < t.n2; ++b) {
                const double v = 0.5 * t.w * t.c1[static_cast<std::size_t>(a)] * t.c2[static_cast<std::size_t>(b)];
                const int p = t.idx1[static_cast<std::size_t>(a)], q = t.idx2[static_cast<std::size_t>(b)];
                add(p, q, v);
                add(q, p, v);
            }
        }
        if (keep_terms) op.terms.push_back(t);
    });
    op.off_diagonal = as.off_diagonal();
    op.S.resize(n, n);
    op.S.setFromTriplets(s_trip.begin(), s_trip.end());
    op.S.makeCompressed();
    op.B.resize(n, static_cast<int>(op.faces.size()));
    op.B.setFromTriplets(b_trip.begin(), b_trip.end());
    op.B.makeCompressed();
    return op;
}

Vector background_rhs(const FvOperator& op, const SmallVector& alpha) {
    if (op.terms.empty()) throw std::logic_error("background_rhs: operator was assembled without terms");
    Vector r = Vector::Zero(op.cells());
    for (const auto& t : op.terms) {
        const double a2 = t.k2 >= 0 ? alpha[t.k2] : 0.0;
        const double a1 = t.k1 >= 0 ? alpha[t.k1] : 0.0;
        for (int k = 0; k < t.n1; ++k)
            if (t.idx1[static_cast<std::size_t>(k)] < op.cells()) r[t.idx1[static_cast<std::size_t>(k)]] += 0.5 * t.w * t.c1[static_cast<std::size_t>(k)] * a2;
        for (int k = 0; k < t.n2; ++k)
            if (t.idx2[static_cast<std::size_t>(k)] < op.cells()) r[t.idx2[static_cast<std::size_t>(k)]] += 0.5 * t.w * t.c2[static_cast<std::size_t>(k)] * a1;
    }
    return r;
}

SmallVector averaged_flux(const FvOperator& op, const Vector& chi, const SmallVector& alpha) {
    if (op.mode != BoundaryMode::Periodic) throw std::logic_error("averaged_flux: periodic operators only");
    const int d = op.grid.dim;
    SmallVector flux = SmallVector::Zero(d);
    for (const auto& t : op.terms) {
        const double g1 = dot(t, 1, chi) + (t.k1 >= 0 ? alpha[t.k1] : 0.0);
        const double g2 = dot(t, 2, chi) + (t.k2 >= 0 ? alpha[t.k2] : 0.0);
        if (t.k1 >= 0) flux[t.k1] += 0.5 * t.w * g2;
        if (t.k2 >= 0) flux[t.k2] += 0.5 * t.w * g1;
    }
    return flux / grid_measure(op.grid);
}

double averaged_energy(const FvOperator& op, const Vector& chi, const SmallVector& alpha) {
    if (op.mode != BoundaryMode::Periodic) throw std::logic_error("averaged_energy: periodic operators only");
    double e = 0.0;
    for (const auto& t : op.terms) {
        const double g1 = dot(t, 1, chi) + (t.k1 >= 0 ? alpha[t.k1] : 0.0);
        const double g2 = dot(t, 2, chi) + (t.k2 >= 0 ? alpha[t.k2] : 0.0);
        e += 0.5 * t.w * g1 * g2;
    }
    return e / grid_measure(op.grid);
}

}  // namespace parahom
