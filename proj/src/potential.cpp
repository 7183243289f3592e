#include "parahom/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace parahom {

namespace {

constexpr double kSlack = 1e-9;

void require_boundary_cube(const ParabolicCube& Q, int n, const char* what) {
    if (Q.kind != CubeKind::Boundary || static_cast<int>(Q.center.size()) != n)
        throw std::invalid_argument(std::string(what) + ": needs a boundary cube in R^" + std::to_string(n));
}

// Fraction of the box kernel [s - w/2, s + w/2] lying above a; a plain step for w = 0.
double ramp(double s, double a, double w) {
    if (w <= 0.0) return s > a ? 1.0 : (s == a ? 0.5 : 0.0);
    return std::clamp((s - a) / w + 0.5, 0.0, 1.0);
}

double window(double s, double a, double b, double w) { return ramp(s, a, w) - ramp(s, b, w); }

double slot_spacing(const ScalarField& u) {
    if (u.level_count() < 2) return u.grid().time.dt;
    return u.time(1) - u.time(0);
}

template <class F>
void for_each_cell(const ScalarField& u, F&& f) {
    const auto& g = u.grid().space;
    const auto d = static_cast<std::size_t>(g.dim);
    double X[3];
    for (int s = 0; s < u.level_count(); ++s) {
        const double t = u.time(s);
        for (int c = 0; c < g.cells(); ++c) {
            g.center(c, std::span<double>(X, d));
            f(s, c, std::span<const double>(X, d), t);
        }
    }
}

// (X, t) in T_rho(x0, t0) = Q_rho(x0, t0) x (0, rho), lambda measured from the grid floor.
bool in_box(const SpatialGrid& g, std::span<const double> X, double t, std::span<const double> x0, double t0,
            double rho) {
    const int n = g.dim - 1;
    for (int i = 0; i < n; ++i)
        if (!(std::abs(X[static_cast<std::size_t>(i)] - x0[static_cast<std::size_t>(i)]) < rho)) return false;
    const double lam = X[static_cast<std::size_t>(n)] - g.lo[static_cast<std::size_t>(n)];
    return lam > 0.0 && lam < rho && std::abs(t - t0) < rho * rho;
}

void require_spatial_box(const SpatialGrid& g, std::span<const double> x0, double rho, const char* what) {
    const int n = g.dim - 1;
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (x0[ui] - rho < g.lo[ui] - kSlack || x0[ui] + rho > g.hi(i) + kSlack)
            throw std::out_of_range(std::string(what) + " leaves the grid");
    }
    if (rho > g.hi(n) - g.lo[static_cast<std::size_t>(n)] + kSlack) throw std::out_of_range(std::string(what) + " is taller than the grid");
}

void require_times(const ScalarField& u, double lo, double hi, const char* what) {
    if (lo < u.time(0) - kSlack || hi > u.time(u.level_count() - 1) + kSlack)
        throw std::out_of_range(std::string(what) + " leaves the stored time levels");
}

std::vector<double> above(std::span<const double> x0, double lambda, double floor) {
    std::vector<double> X(x0.begin(), x0.end());
    X.push_back(floor + lambda);
    return X;
}

// Levels from `first` to `last` with at most ~`budget` entries (always including `last`).
std::vector<int> strided_levels(int first, int last, int budget) {
    const int stride = std::max(1, (last - first) / budget);
    std::vector<int> out;
    for (int k = first; k < last; k += stride) out.push_back(k);
    out.push_back(last);
    return out;
}

int level_at_or_after(const HalfSpaceBox& b, double t) {
    return static_cast<int>(std::ceil((t - b.t_start) / b.dt - 1e-9));
}

}  // namespace

// ---- HalfSpace ---------------------------------------------------------------

HalfSpace::HalfSpace(CoefficientField A, HalfSpaceBox box, std::optional<GraphDomain> graph)
    : A_(std::move(A)), flat_(A_), box_(box), graph_(std::move(graph)) {
    if (box_.n < 1 || box_.n > 2) throw std::invalid_argument("HalfSpace: n must be 1 or 2");
    if (A_.dim() != box_.n + 1) throw std::invalid_argument("HalfSpace: coefficient dimension must be n + 1");
    if (!(box_.h > 0.0) || !(box_.dt > 0.0) || !(box_.half_width > 0.0) || !(box_.height > 0.0))
        throw std::invalid_argument("HalfSpace: box sizes and steps must be positive");
    if (graph_) {
        if (graph_->n() != box_.n) throw std::invalid_argument("HalfSpace: graph dimension mismatch");
        flat_ = flatten_pullback(*graph_, A_);
    }
}

SpaceTimeGrid HalfSpace::grid(double t_end) const {
    return half_space_grid(box_.n, box_.half_width, box_.height, box_.h, box_.t_start, t_end, box_.dt);
}

int HalfSpace::level(double t) const {
    const double k = (t - box_.t_start) / box_.dt;
    const double k_round = std::round(k);
    if (std::abs(k - k_round) > 1e-9 * std::max(1.0, std::abs(k))) {
        std::ostringstream os;
        os << "time " << t << " is not on the level lattice " << box_.t_start << " + k * " << box_.dt;
        throw std::invalid_argument(os.str());
    }
    return static_cast<int>(k_round);
}

std::vector<double> HalfSpace::flatten(std::span<const double> X) const {
    std::vector<double> out(X.begin(), X.end());
    if (out.size() != static_cast<std::size_t>(box_.n + 1)) throw std::invalid_argument("flatten: point must have n + 1 entries");
    if (graph_ && !graph_->is_flat()) out.back() -= graph_->phi(X.first(static_cast<std::size_t>(box_.n)));
    return out;
}

double HalfSpace::sigma(const ParabolicCube& Q) const {
    if (graph_ && !graph_->is_flat()) return boundary_measure(*graph_, Q).value;
    return Q.measure();
}

ParabolicSolver HalfSpace::solver(double t_end) const { return ParabolicSolver(flat_, grid(t_end)); }

HalfSpace HalfSpace::widened(double factor) const {
    HalfSpaceBox b = box_;
    b.half_width *= factor;
    b.height *= factor;
    return HalfSpace(A_, b, graph_);
}

nlohmann::json HalfSpace::to_json() const {
    return {{"n", box_.n},
            {"half_width", box_.half_width},
            {"height", box_.height},
            {"h", box_.h},
            {"dt", box_.dt},
            {"t_start", box_.t_start},
            {"coefficients", A_.label()},
            {"graph", graph_ ? graph_->to_json() : nlohmann::json(nullptr)}};
}

BoundaryData mollified_indicator(const ParabolicCube& Q, double wx, double wt) {
    BoundaryData data;
    const std::size_t n = Q.center.size();
    data.f = [Q, wx, wt, n](std::span<const double> X, double t) {
        double v = window(t, Q.t - Q.r * Q.r, Q.t + Q.r * Q.r, wt);
        for (std::size_t i = 0; i < n && v != 0.0; ++i) v *= window(X[i], Q.center[i] - Q.r, Q.center[i] + Q.r, wx);
        return v;
    };
    data.label = "mollified indicator";
    data.classical = wx > 0.0 && wt > 0.0;
    return data;
}

// ---- caloric measure ---------------------------------------------------------

PoleMeasure::PoleMeasure(const HalfSpace& space, ParabolicPoint pole)
    : pole_(std::move(pole)), box_(space.box()), n_(space.n()) {
    const auto un = static_cast<std::size_t>(n_);
    if (pole_.X.size() != un + 1) throw std::invalid_argument("PoleMeasure: pole must have n + 1 coordinates");
    const auto Z = space.flatten(pole_.X);
    if (!(Z[un] >= 4.0 * box_.h - kSlack))
        throw std::invalid_argument("PoleMeasure: pole is less than four grid cells above the boundary");
    for (std::size_t i = 0; i < un; ++i)
        if (!(std::abs(Z[i]) < box_.half_width)) throw std::invalid_argument("PoleMeasure: pole outside the box");
    if (!(Z[un] < box_.height)) throw std::invalid_argument("PoleMeasure: pole above the box");
    if (space.level(pole_.t) < 2) throw std::invalid_argument("PoleMeasure: pole time must be two steps after the box start");

    const auto solver = space.solver(pole_.t);
    const auto& g = solver.grid().space;
    const auto adj = solver.adjoint(sampling_weights(g, Z), solver.grid().time.steps);
    const auto& faces = solver.op().faces;
    std::vector<int> bottom;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (faces[f].axis != n_ || faces[f].side != 0) continue;
        bottom.push_back(static_cast<int>(f));
        std::vector<double> x(faces[f].X.begin(), faces[f].X.begin() + n_);
        const double lift = space.graph() ? space.graph()->phi(x) : 0.0;
        x.push_back(lift);
        bottom_x_.push_back(std::move(x));
    }
    intervals_ = adj.intervals;
    w_.assign(static_cast<std::size_t>(intervals_) * bottom.size(), 0.0);
    for (int k = 0; k < intervals_; ++k) {
        std::size_t j = 0;
        for (int f = 0; f < adj.faces; ++f) {
            const double w = adj.at(k, f);
            if (j < bottom.size() && bottom[j] == f) {
                w_[static_cast<std::size_t>(k) * bottom.size() + j] = w;
                bottom_mass_ += w;
                ++j;
            } else {
                wall_mass_ += std::abs(w);
            }
        }
    }
}

double PoleMeasure::measure(const ParabolicCube& Q, double width) const {
    require_boundary_cube(Q, n_, "PoleMeasure::measure");
    const double wx = width * box_.h, wt = width * box_.dt;
    const std::size_t m = bottom_x_.size();
    std::vector<double> xf(m, 1.0);
    for (std::size_t j = 0; j < m; ++j)
        for (int i = 0; i < n_; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            xf[j] *= window(bottom_x_[j][ui], Q.center[ui] - Q.r, Q.center[ui] + Q.r, wx);
        }
    double total = 0.0;
    for (int k = 0; k < intervals_; ++k) {
        const double t = box_.t_start + (k + 0.5) * box_.dt;
        const double tf = window(t, Q.t - Q.r * Q.r, Q.t + Q.r * Q.r, wt);
        if (tf == 0.0) continue;
        const double* row = w_.data() + static_cast<std::size_t>(k) * m;
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += row[j] * xf[j];
        total += tf * acc;
    }
    return total;
}

double PoleMeasure::integrate(const BoundaryData& f) const {
    const std::size_t m = bottom_x_.size();
    double total = 0.0;
    for (int k = 0; k < intervals_; ++k) {
        const double t = box_.t_start + (k + 0.5) * box_.dt;
        const double* row = w_.data() + static_cast<std::size_t>(k) * m;
        for (std::size_t j = 0; j < m; ++j) total += row[j] * f.f(bottom_x_[j], t);
    }
    return total;
}

nlohmann::json MeasureEstimate::to_json() const {
    return {{"value", value},
            {"smoothing_error", smoothing_error},
            {"truncation_error", truncation_error},
            {"truncation_method", truncation_method},
            {"wall_mass", wall_mass},
            {"pole", parahom::to_json(pole)},
            {"cube", parahom::to_json(cube)}};
}

MeasureEstimate caloric_measure(const HalfSpace& space, const ParabolicPoint& pole, const ParabolicCube& Q,
                                const MeasureOptions& opt) {
    require_boundary_cube(Q, space.n(), "caloric_measure");
    const PoleMeasure pm(space, pole);
    MeasureEstimate out;
    out.pole = pole;
    out.cube = Q;
    const double full = pm.measure(Q, 1.0);
    out.smoothing_error = std::abs(full - pm.measure(Q, 0.5));
    out.wall_mass = pm.wall_mass();
    if (opt.margin_doubling) {
        const PoleMeasure wide(space.widened(2.0), pole);
        out.truncation_error = std::abs(wide.measure(Q, 1.0) - full);
        out.truncation_method = "margin doubling";
    } else {
        out.truncation_error = pm.wall_mass();
        out.truncation_method = "artificial-wall mass";
    }
    out.value = std::clamp(full, 0.0, 1.0);
    return out;
}

std::vector<ParabolicCube> partition(const ParabolicCube& Q, int depth) {
    if (depth < 0 || depth > 10) throw std::invalid_argument("partition: depth must be in [0, 10]");
    if (Q.kind != CubeKind::Boundary) throw std::invalid_argument("partition: needs a boundary cube");
    const int k = 1 << depth;
    const int n = static_cast<int>(Q.center.size());
    const double rr = Q.r / k;
    int spatial = 1;
    for (int i = 0; i < n; ++i) spatial *= k;
    std::vector<ParabolicCube> out;
    out.reserve(static_cast<std::size_t>(spatial) * static_cast<std::size_t>(k * k));
    for (int m = 0; m < k * k; ++m) {
        const double t = Q.t - Q.r * Q.r + (2 * m + 1) * rr * rr;
        for (int j = 0; j < spatial; ++j) {
            std::vector<double> x(Q.center.size());
            int rem = j;
            for (int i = 0; i < n; ++i) {
                x[static_cast<std::size_t>(i)] = Q.center[static_cast<std::size_t>(i)] - Q.r + (2 * (rem % k) + 1) * rr;
                rem /= k;
            }
            out.push_back(boundary_cube(std::move(x), t, rr));
        }
    }
    return out;
}

KernelEstimate kernel_estimate(const PoleMeasure& measure, const HalfSpace& space, const ParabolicCube& Q, int depth) {
    require_boundary_cube(Q, space.n(), "kernel_estimate");
    if (depth < 1) throw std::invalid_argument("kernel_estimate: depth must be at least 1 (the error bar uses depth - 1)");
    KernelEstimate out;
    out.pole = measure.pole();
    out.cube = Q;
    out.depth = depth;
    out.cells = partition(Q, depth);
    const auto parents = partition(Q, depth - 1);
    std::vector<double> parent_density(parents.size());
    for (std::size_t p = 0; p < parents.size(); ++p) {
        const double s = space.sigma(parents[p]);
        parent_density[p] = s > 0.0 ? measure.measure(parents[p]) / s : 0.0;
    }
    const int n = space.n();
    const int k = 1 << depth, kp = k / 2;
    int spatial = 1, spatial_p = 1;
    for (int i = 0; i < n; ++i) {
        spatial *= k;
        spatial_p *= kp;
    }
    for (std::size_t c = 0; c < out.cells.size(); ++c) {
        const double omega = measure.measure(out.cells[c]);
        const double s = space.sigma(out.cells[c]);
        const double K = s > 0.0 ? omega / s : 0.0;
        // parent: time slot m / 4, spatial index j_i / 2
        const int m = static_cast<int>(c) / spatial;
        int rem = static_cast<int>(c) % spatial, pj = 0, stride = 1;
        for (int i = 0; i < n; ++i) {
            pj += (rem % k) / 2 * stride;
            rem /= k;
            stride *= kp;
        }
        const auto parent = static_cast<std::size_t>((m / 4) * spatial_p + pj);
        out.density.push_back(K);
        out.sigma.push_back(s);
        out.error_bar.push_back(std::abs(K - parent_density[parent]));
        out.total += omega;
    }
    out.cube_measure = measure.measure(Q);
    return out;
}

KernelEstimate kernel_estimate(const HalfSpace& space, const ParabolicPoint& pole, const ParabolicCube& Q, int depth) {
    return kernel_estimate(PoleMeasure(space, pole), space, Q, depth);
}

nlohmann::json KernelEstimate::to_json() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (std::size_t i = 0; i < cells.size(); ++i)
        cells_json.push_back({{"center", cells[i].center},
                              {"t", cells[i].t},
                              {"r", cells[i].r},
                              {"density", density[i]},
                              {"sigma", sigma[i]},
                              {"error_bar", error_bar[i]}});
    return {{"pole", parahom::to_json(pole)},
            {"cube", parahom::to_json(cube)},
            {"depth", depth},
            {"method", method},
            {"total", total},
            {"cube_measure", cube_measure},
            {"cells", cells_json}};
}

double power_mean_ratio(std::span<const double> values, std::span<const double> weights, double q) {
    if (values.size() != weights.size() || values.empty()) throw std::invalid_argument("power_mean_ratio: size mismatch");
    if (!(q >= 1.0)) throw std::invalid_argument("power_mean_ratio: q must be at least 1");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end(),
                                              [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (std::abs(*lo) == std::abs(*hi)) return 1.0;
    double W = 0.0, m1 = 0.0, mq = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (weights[i] < 0.0) throw std::invalid_argument("power_mean_ratio: negative weight");
        const double a = std::abs(values[i]);
        W += weights[i];
        m1 += weights[i] * a;
        mq += weights[i] * std::pow(a, q);
    }
    if (!(W > 0.0) || !(m1 > 0.0)) return 1.0;
    return std::pow(mq / W, 1.0 / q) / (m1 / W);
}

RatioResult reverse_holder_ratio(const KernelEstimate& K, double q) {
    if (!(q > 1.0)) throw std::invalid_argument("reverse_holder_ratio: exponent must exceed 1");
    RatioResult out;
    out.value = power_mean_ratio(K.density, K.sigma, q);
    const auto& Z = K.pole.X;
    const std::size_t n = K.cube.center.size();
    double dist2 = Z[n] * Z[n];
    for (std::size_t i = 0; i < n; ++i) dist2 += (K.cube.center[i] - Z[i]) * (K.cube.center[i] - Z[i]);
    const double gap = K.pole.t - K.cube.t;
    const bool near = dist2 <= std::abs(gap) + kSlack;
    const bool late = gap >= 4.0 * K.cube.r * K.cube.r - kSlack;
    out.admissible = near && late;
    if (!out.admissible) {
        std::ostringstream os;
        os << "outside the reverse Hoelder window:";
        if (!near) os << " |(x,0) - Z|^2 = " << dist2 << " > |t - tau| = " << std::abs(gap) << ";";
        if (!late) os << " tau - t = " << gap << " < 4 r^2 = " << 4.0 * K.cube.r * K.cube.r << ";";
        out.note = os.str();
    }
    return out;
}

// ---- Green's function --------------------------------------------------------

double GreenField::value(std::span<const double> X, double t, const HalfSpace& space) const {
    if (t < pole.t) return 0.0;
    return field.sample(space.flatten(X), t);
}

double GreenField::cell_value(std::span<const double> X, double t, const HalfSpace& space) const {
    if (t < pole.t) return 0.0;
    const auto& g = field.grid().space;
    const auto Y = space.flatten(X);
    int idx[3] = {0, 0, 0};
    for (int i = 0; i < g.dim; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        idx[i] = std::clamp(static_cast<int>(std::floor((Y[ui] - g.lo[ui]) / g.h[ui])), 0, g.N[ui] - 1);
    }
    const int s = field.slot_of_level(space.level(t));
    if (s < 0) throw std::invalid_argument("GreenField::cell_value: time is not a stored level");
    return field.at(s, g.index(idx[0], idx[1], idx[2]));
}

GreenField greens_function(const HalfSpace& space, const ParabolicPoint& pole, double t_end, int delta_width,
                           std::vector<int> store_levels) {
    const int n = space.n();
    const auto un = static_cast<std::size_t>(n);
    if (pole.X.size() != un + 1) throw std::invalid_argument("greens_function: pole must have n + 1 coordinates");
    const auto Z = space.flatten(pole.X);
    if (!(Z[un] > 0.0)) throw std::invalid_argument("greens_function: pole on or outside the boundary");
    const auto& b = space.box();
    for (std::size_t i = 0; i < un; ++i)
        if (!(std::abs(Z[i]) < b.half_width)) throw std::invalid_argument("greens_function: pole outside the box");
    if (!(Z[un] < b.height)) throw std::invalid_argument("greens_function: pole above the box");
    const auto solver = space.solver(t_end);
    const auto& g = solver.grid().space;
    const int start = space.level(pole.t);
    if (start < 0 || start >= solver.grid().time.steps)
        throw std::invalid_argument("greens_function: pole time must lie in [t_start, t_end)");

    const double V = g.cell_volume();
    Vector u0 = Vector::Zero(g.cells());
    if (delta_width == 1) {
        int idx[3] = {0, 0, 0};
        for (int i = 0; i < g.dim; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            idx[i] = std::clamp(static_cast<int>(std::floor((Z[ui] - g.lo[ui]) / g.h[ui])), 0, g.N[ui] - 1);
        }
        u0[g.index(idx[0], idx[1], idx[2])] = 1.0 / V;
    } else if (delta_width == 2) {
        for (const auto& [c, w] : sampling_weights(g, Z)) u0[c] += w / V;
    } else {
        throw std::invalid_argument("greens_function: delta width must be 1 or 2");
    }
    SolveOptions opt;
    opt.store_levels = std::move(store_levels);
    GreenField G{solver.evolve(u0, start, opt), pole, delta_width};
    G.field.metadata["pole"] = parahom::to_json(pole);
    G.field.metadata["delta_width"] = delta_width;
    return G;
}

GreenBound green_upper_bound(const GreenField& G, const HalfSpace& space, double min_distance) {
    if (!(min_distance > 0.0)) throw std::invalid_argument("green_upper_bound: min_distance must be positive");
    const auto Z = space.flatten(G.pole.X);
    const int n = space.n();
    const double power = n + 1;
    GreenBound out;
    std::vector<double> shell_max;
    double diff[3];
    for_each_cell(G.field, [&](int s, int c, std::span<const double> X, double t) {
        if (!(t > G.pole.t)) return;
        for (std::size_t i = 0; i < X.size(); ++i) diff[i] = X[i] - Z[i];
        const double d = parabolic_norm(std::span<const double>(diff, X.size()), t - G.pole.t);
        if (d < min_distance) return;
        const double v = G.field.at(s, c);
        out.constant = std::max(out.constant, v * std::pow(d, power));
        ++out.samples;
        // half-octave shells in distance
        const auto bin = static_cast<std::size_t>(std::floor(2.0 * std::log2(d / min_distance)));
        if (shell_max.size() <= bin) shell_max.resize(bin + 1, 0.0);
        shell_max[bin] = std::max(shell_max[bin], v);
    });
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int m = 0;
    for (std::size_t b = 0; b < shell_max.size(); ++b) {
        if (!(shell_max[b] > 0.0)) continue;
        const double x = std::log(min_distance) + (static_cast<double>(b) + 0.5) * 0.5 * std::log(2.0);
        const double y = std::log(shell_max[b]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m >= 2) out.exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return out;
}

SymmetryResult green_symmetry_check(const HalfSpace& space, const ParabolicPoint& pole, const ParabolicPoint& point,
                                    double shift) {
    if (!(point.t > pole.t)) throw std::invalid_argument("green_symmetry_check: needs t > tau");
    SymmetryResult out;
    const auto fwd = greens_function(space, pole, point.t, 1, {space.level(point.t)});
    out.forward = fwd.cell_value(point.X, point.t, space);
    const ParabolicPoint swapped{point.X, pole.t + shift};
    const double t_back = point.t + shift;
    const auto bwd = greens_function(space, swapped, t_back, 1, {space.level(t_back)});
    out.backward = bwd.cell_value(pole.X, t_back, space);
    const double scale = std::max(std::abs(out.forward), std::abs(out.backward));
    out.deviation = scale > 0.0 ? std::abs(out.forward - out.backward) / scale : 0.0;

    const auto smooth = greens_function(space, pole, point.t, 2, {space.level(point.t)});
    const double g2 = smooth.value(point.X, point.t, space);
    if (g2 > 0.0) out.regularization = std::abs(fwd.value(point.X, point.t, space) - g2) / g2;
    return out;
}

// ---- doubling ----------------------------------------------------------------

DoublingResult doubling_ratio(const PoleMeasure& measure, const ParabolicCube& Q, const PoleMeasure* wide) {
    DoublingResult out;
    out.omega_r = measure.measure(Q);
    out.omega_2r = measure.measure(Q.scaled(2.0));
    const double smoothing = std::abs(out.omega_r - measure.measure(Q, 0.5));
    const double truncation = wide ? std::abs(wide->measure(Q) - out.omega_r) : measure.wall_mass();
    out.noise_floor = smoothing + truncation;
    if (!(out.omega_r > 10.0 * out.noise_floor)) {
        std::ostringstream os;
        os << "doubling_ratio: omega(Q_r) = " << out.omega_r << " is below ten times the noise floor " << out.noise_floor;
        throw std::domain_error(os.str());
    }
    out.ratio = out.omega_2r / out.omega_r;
    return out;
}

DoublingResult doubling_ratio(const HalfSpace& space, const ParabolicPoint& pole, const ParabolicCube& Q) {
    require_boundary_cube(Q, space.n(), "doubling_ratio");
    const PoleMeasure pm(space, pole);
    const PoleMeasure wide(space.widened(2.0), pole);
    return doubling_ratio(pm, Q, &wide);
}

// ---- diagnostics on solution fields ------------------------------------------

LocalSolvability local_solvability_ratio(const ScalarField& u, const ParabolicCube& Q) {
    const auto& g = u.grid().space;
    const int n = g.dim - 1;
    require_boundary_cube(Q, n, "local_solvability_ratio");
    const auto tr = nt_trace_ratio(u, Q);
    if (!tr.hypothesis_ok) {
        std::ostringstream os;
        os << "local_solvability_ratio: u does not vanish on Q_4r x {0} (max |u| = " << tr.boundary_max << ")";
        throw std::domain_error(os.str());
    }
    const double r2 = 2.0 * Q.r;
    try {
        require_spatial_box(g, Q.center, r2, "T_2r");
        require_times(u, Q.t - r2 * r2, Q.t + r2 * r2, "T_2r");
    } catch (const std::out_of_range& e) {
        throw std::domain_error(std::string("local_solvability_ratio: ") + e.what());
    }
    LocalSolvability out;
    for (const auto& c : tr.cells) {
        out.lhs += c.richardson * c.richardson * tr.cell_measure;
        out.lhs_first_layer += c.first * c.first * tr.cell_measure;
    }
    const double w = g.cell_volume() * slot_spacing(u);
    for_each_cell(u, [&](int s, int c, std::span<const double> X, double t) {
        if (!in_box(g, X, t, Q.center, Q.t, r2)) return;
        const double v = u.at(s, c);
        out.rhs += v * v * w;
    });
    if (out.rhs == 0.0) {
        out.degenerate = true;
        return out;
    }
    out.ratio = Q.r * Q.r * Q.r * out.lhs / out.rhs;
    return out;
}

namespace {

// Smallest C with C exp(C a + b) >= q, by bisection on log C.
double exponential_constant(double q, double a, double b) {
    const double target = std::log(q);
    auto f = [&](double y) { return y + a * std::exp(y) + b - target; };
    double lo = -60.0, hi = 60.0;
    if (f(lo) >= 0.0) return std::exp(lo);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return std::exp(hi);
}

}  // namespace

HarnackResult harnack_ratio(const ScalarField& u, const ParabolicCube& Q) {
    const auto& g = u.grid().space;
    const int n = g.dim - 1;
    const auto un = static_cast<std::size_t>(n);
    require_boundary_cube(Q, n, "harnack_ratio");
    const double r = Q.r, r4 = 4.0 * r;
    const double t_lo = Q.t - r4 * r4, t_ref = Q.t + 2.0 * r * r;
    require_spatial_box(g, Q.center, r4, "T_4r");
    require_times(u, t_lo, t_ref, "harnack_ratio");

    const double floor = g.lo[un];
    const auto Xref = above(Q.center, r, floor);
    HarnackResult out;
    out.reference = u.sample(Xref, t_ref);
    out.sup = -std::numeric_limits<double>::infinity();
    for_each_cell(u, [&](int s, int c, std::span<const double> X, double t) {
        if (!in_box(g, X, t, Q.center, Q.t, r4)) return;
        const double v = u.at(s, c);
        if (v < -1e-12) {
            std::ostringstream os;
            os << "harnack_ratio: u = " << v << " < 0 on T_4r at t = " << t;
            throw std::domain_error(os.str());
        }
        if (in_box(g, X, t, Q.center, Q.t, r)) out.sup = std::max(out.sup, v);
    });
    if (!(out.reference > 0.0)) throw std::domain_error("harnack_ratio: reference value u(x0, t0 + 2r^2, r) is not positive");
    out.ratio = out.sup / out.reference;

    // interior form on Omega = Q_4r x (0, 4r) with time origin t0 - 16 r^2
    auto wall_distance = [&](std::span<const double> X) {
        double d = std::min(X[un] - floor, r4 - (X[un] - floor));
        for (std::size_t i = 0; i < un; ++i) d = std::min(d, r4 - std::abs(X[i] - Q.center[i]));
        return std::max(d, 0.0);
    };
    const double dref = wall_distance(Xref);
    for_each_cell(u, [&](int s, int c, std::span<const double> Y, double t) {
        if (!in_box(g, Y, t, Q.center, Q.t, r)) return;
        const double q = u.at(s, c) / out.reference;
        if (!(q > 0.0) || !(t > t_lo)) return;
        double dist2 = 0.0;
        for (std::size_t i = 0; i <= un; ++i) dist2 += (Xref[i] - Y[i]) * (Xref[i] - Y[i]);
        const double gap = t_ref - t;
        const double dy = wall_distance(Y);
        const double R = std::min({dref * dref, dy * dy, t - t_lo, 1.0});
        if (!(R > 0.0)) return;
        out.interior_constant = std::max(out.interior_constant, exponential_constant(q, dist2 / gap, gap / R + 1.0));
    });
    return out;
}

ComparisonResult comparison_ratio(const ScalarField& u, const ScalarField& v, const ParabolicCube& Q) {
    if (!(u.grid() == v.grid()) || u.levels() != v.levels())
        throw std::invalid_argument("comparison_ratio: u and v must share grid and stored levels");
    const auto& g = u.grid().space;
    const int n = g.dim - 1;
    const auto un = static_cast<std::size_t>(n);
    require_boundary_cube(Q, n, "comparison_ratio");
    const double r = Q.r;
    require_spatial_box(g, Q.center, 2.0 * r, "T_2r");
    require_times(u, Q.t - 2.0 * r * r, Q.t + 2.0 * r * r, "comparison_ratio");

    // vanishing traces on Q_2r
    const auto faces = boundary_faces(g);
    for (const auto* w : {&u, &v}) {
        if (!w->has_boundary()) continue;
        for (int s = 0; s < w->level_count(); ++s) {
            if (!(std::abs(w->time(s) - Q.t) < 4.0 * r * r)) continue;
            const auto b = w->boundary_slot(s);
            for (std::size_t f = 0; f < faces.size(); ++f) {
                if (faces[f].axis != n || faces[f].side != 0) continue;
                bool inside = true;
                for (std::size_t i = 0; i < un; ++i) inside = inside && std::abs(faces[f].X[i] - Q.center[i]) < 2.0 * r;
                if (inside && std::abs(b[f]) > 1e-10)
                    throw std::domain_error("comparison_ratio: boundary values do not vanish on Q_2r");
            }
        }
    }

    const double tol = v.metadata.contains("cg_tol") ? v.metadata["cg_tol"].get<double>() : 1e-12;
    const double noise = tol * v.max_abs();
    ComparisonResult out;
    double inf_v = std::numeric_limits<double>::infinity();
    out.sup_quotient = -std::numeric_limits<double>::infinity();
    for_each_cell(u, [&](int s, int c, std::span<const double> X, double t) {
        if (!in_box(g, X, t, Q.center, Q.t, 2.0 * r)) return;
        const double a = u.at(s, c), b = v.at(s, c);
        if (a < -1e-12 || b < -1e-12) throw std::domain_error("comparison_ratio: negative values on T_2r");
        if (!in_box(g, X, t, Q.center, Q.t, r)) return;
        inf_v = std::min(inf_v, b);
        if (b > 0.0) out.sup_quotient = std::max(out.sup_quotient, a / b);
    });
    if (!(inf_v > 10.0 * noise)) {
        std::ostringstream os;
        os << "comparison_ratio: min of v on T_r (" << inf_v << ") is below ten times the noise floor " << noise;
        throw std::domain_error(os.str());
    }
    const auto Xr = above(Q.center, r, g.lo[un]);
    out.v_before = v.sample(Xr, Q.t - 2.0 * r * r);
    out.u_after = u.sample(Xr, Q.t + 2.0 * r * r);
    if (!(out.u_after > 0.0)) throw std::domain_error("comparison_ratio: u(x0, t0 + 2r^2, r) is not positive");
    out.ratio = out.sup_quotient * out.v_before / out.u_after;
    return out;
}

// ---- Green / measure comparisons and positivity ------------------------------

GreenMeasureResult green_measure_equivalence(const HalfSpace& space, const ParabolicPoint& point,
                                             std::span<const double> x0, double t0, double rho, double region_A) {
    const int n = space.n();
    const auto un = static_cast<std::size_t>(n);
    if (x0.size() != un) throw std::invalid_argument("green_measure_equivalence: x0 must have n entries");
    if (!(rho > 0.0)) throw std::invalid_argument("green_measure_equivalence: rho must be positive");
    if (!(point.t - t0 >= 4.0 * rho * rho - kSlack))
        throw std::invalid_argument("green_measure_equivalence: needs t - t0 >= 4 rho^2");
    GreenMeasureResult out;
    const PoleMeasure pm(space, point);
    out.omega = pm.measure(boundary_cube({x0.begin(), x0.end()}, t0, 0.5 * rho));

    // G(X, t; Y, t0 + rho^2) = G(X, t - 2 rho^2; Y, t0 - rho^2): one forward solve
    const double lift = space.graph() ? space.graph()->phi(x0) : 0.0;
    const ParabolicPoint Y{above(x0, rho, lift), t0 - rho * rho};
    const double t_plus = point.t - 2.0 * rho * rho;
    const auto G = greens_function(space, Y, point.t, 1, {space.level(t_plus), space.level(point.t)});
    out.green_minus = G.value(point.X, point.t, space);
    out.green_plus = G.value(point.X, t_plus, space);
    if (!(out.omega > 0.0) || !(out.green_minus > 0.0) || !(out.green_plus > 0.0))
        throw std::domain_error("green_measure_equivalence: measure or Green's function below the noise floor");
    const double scale = std::pow(rho, n + 1);
    out.upper_ratio = out.omega / (scale * out.green_minus);
    out.lower_ratio = out.omega / (scale * out.green_plus);
    const auto Xf = space.flatten(point.X);
    double dist2 = Xf[un] * Xf[un];
    for (std::size_t i = 0; i < un; ++i) dist2 += (Xf[i] - x0[i]) * (Xf[i] - x0[i]);
    out.region_ok = dist2 <= region_A * std::abs(point.t - t0);
    return out;
}

ScalarField caloric_measure_field(const HalfSpace& space, const ParabolicCube& Q, double t_end,
                                  std::vector<int> store_levels) {
    require_boundary_cube(Q, space.n(), "caloric_measure_field");
    const auto solver = space.solver(t_end);
    SolveOptions opt;
    opt.walls = DataWalls::Bottom;
    opt.store_levels = std::move(store_levels);
    auto u = solver.solve(mollified_indicator(Q, space.box().h, space.box().dt), opt);
    u.metadata["cube"] = parahom::to_json(Q);
    return u;
}

ScalarField top_driven_solution(const HalfSpace& space, const BoundaryData& top, double t_end,
                                std::vector<int> store_levels) {
    const auto solver = space.solver(t_end);
    SolveOptions opt;
    opt.walls = DataWalls::Top;
    opt.store_levels = std::move(store_levels);
    return solver.solve(top, opt);
}

PositivityResult measure_positivity(const HalfSpace& space, const ParabolicCube& Q, double gamma, double C1, double C2) {
    require_boundary_cube(Q, space.n(), "measure_positivity");
    if (!(gamma > 0.0) || !(C1 > 0.0) || !(C2 > 0.0)) throw std::invalid_argument("measure_positivity: constants must be positive");
    const auto& b = space.box();
    const double r = Q.r;
    const int first = std::max(0, level_at_or_after(b, Q.t));
    const int last = level_at_or_after(b, Q.t + C2 * r * r / C1);
    const auto u = caloric_measure_field(space, Q, b.t_start + last * b.dt, strided_levels(first, last, 512));
    const auto& g = u.grid().space;
    const auto un = static_cast<std::size_t>(space.n());
    PositivityResult out;
    out.floor = std::numeric_limits<double>::infinity();
    for_each_cell(u, [&](int s, int c, std::span<const double> X, double t) {
        const double lam = X[un] - g.lo[un];
        if (!(lam > gamma * r)) return;
        double e = lam * lam;
        for (std::size_t i = 0; i < un; ++i) e += (X[i] - Q.center[i]) * (X[i] - Q.center[i]);
        const double tt = C1 * (t - Q.t);
        if (!(e <= tt && tt <= C2 * r * r + kSlack)) return;
        ++out.samples;
        if (u.at(s, c) < out.floor) {
            out.floor = u.at(s, c);
            out.argmin.assign(X.begin(), X.end());
            out.t_argmin = t;
        }
    });
    if (out.samples == 0) throw std::domain_error("measure_positivity: the region contains no grid points");
    return out;
}

PositivityResult green_positivity(const HalfSpace& space, std::span<const double> x0, double t0, double r, double gamma,
                                  double region_A) {
    const auto un = static_cast<std::size_t>(space.n());
    if (x0.size() != un) throw std::invalid_argument("green_positivity: x0 must have n entries");
    if (!(r > 0.0) || !(gamma > 0.0) || !(region_A > 0.0)) throw std::invalid_argument("green_positivity: constants must be positive");
    const auto& b = space.box();
    const int first = space.level(t0);
    const int last = level_at_or_after(b, t0 + 10.0 * r * r);
    const double lift = space.graph() ? space.graph()->phi(x0) : 0.0;
    const auto G = greens_function(space, {above(x0, r, lift), t0}, b.t_start + last * b.dt, 1,
                                   strided_levels(first, last, 512));
    const auto& u = G.field;
    const auto& g = u.grid().space;
    const double scale = std::pow(r, static_cast<double>(un + 1));
    PositivityResult out;
    out.floor = std::numeric_limits<double>::infinity();
    for_each_cell(u, [&](int s, int c, std::span<const double> X, double t) {
        const double lam = X[un] - g.lo[un];
        if (!(lam > gamma * r) || !(t > t0)) return;
        double e = lam * lam;
        for (std::size_t i = 0; i < un; ++i) e += (X[i] - x0[i]) * (X[i] - x0[i]);
        const double tt = region_A * (t - t0);
        if (!(e <= tt && tt <= 10.0 * region_A * r * r + kSlack)) return;
        ++out.samples;
        const double v = scale * u.at(s, c);
        if (v < out.floor) {
            out.floor = v;
            out.argmin.assign(X.begin(), X.end());
            out.t_argmin = t;
        }
    });
    if (out.samples == 0) throw std::domain_error("green_positivity: the region contains no grid points");
    return out;
}

}  // namespace parahom
