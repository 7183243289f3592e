#include "parahom/harness.hpp"

#include "parahom/cell.hpp"
#include "parahom/heat_kernel.hpp"
#include "parahom/maximal.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <ostream>
#include <sstream>

namespace parahom {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Shortest round-trip decimal form (17 significant digits).
std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + num(v[i]);
    return out;
}

double smoothstep(double s) {
    s = std::clamp(s, 0.0, 1.0);
    return s * s * (3.0 - 2.0 * s);
}

double bump1(double s) { return std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0; }

const std::vector<std::string> kConfigKeys = {"n", "coefficient", "domain", "data", "eps", "p", "resolution", "time_steps",
                                              "cell_resolution", "nt_stride", "diagnostics", "sweep", "output_dir",
                                              "seed", "threads"};

}  // namespace

// ---- config -----------------------------------------------------------------

bool ExperimentConfig::enabled(const std::string& diagnostic) const {
    const auto it = diagnostics.find(diagnostic);
    return it == diagnostics.end() || it->second;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (std::find(kConfigKeys.begin(), kConfigKeys.end(), key) == kConfigKeys.end())
            throw std::invalid_argument("unknown config key '" + key + "'");
    ExperimentConfig cfg;
    cfg.n = j.value("n", cfg.n);
    if (cfg.n != 1 && cfg.n != 2) throw std::invalid_argument("n must be 1 or 2");
    if (j.contains("coefficient")) cfg.coefficient = j.at("coefficient");
    if (j.contains("domain")) cfg.domain = j.at("domain");
    if (j.contains("data")) cfg.data = j.at("data");
    if (j.contains("eps")) cfg.eps = j.at("eps").get<std::vector<double>>();
    if (j.contains("p")) cfg.p = j.at("p").get<std::vector<double>>();
    cfg.resolution = j.value("resolution", cfg.resolution);
    cfg.time_steps = j.value("time_steps", cfg.time_steps);
    cfg.cell_resolution = j.value("cell_resolution", cfg.cell_resolution);
    cfg.nt_stride = j.value("nt_stride", cfg.nt_stride);
    if (j.contains("diagnostics")) cfg.diagnostics = j.at("diagnostics").get<std::map<std::string, bool>>();
    if (j.contains("sweep")) cfg.sweep = j.at("sweep");
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);

    for (double e : cfg.eps)
        if (!(e > 0.0 && e <= 1.0)) throw std::invalid_argument("eps values must lie in (0, 1]");
    for (double p : cfg.p)
        if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p values must lie in (1, infinity)");
    if (cfg.resolution <= 0 || cfg.time_steps <= 0 || cfg.cell_resolution <= 0 || cfg.nt_stride <= 0)
        throw std::invalid_argument("resolutions and strides must be positive");
    if (cfg.threads < 1) throw std::invalid_argument("threads must be >= 1");
    return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
    return {{"n", cfg.n},
            {"coefficient", cfg.coefficient},
            {"domain", cfg.domain},
            {"data", cfg.data},
            {"eps", cfg.eps},
            {"p", cfg.p},
            {"resolution", cfg.resolution},
            {"time_steps", cfg.time_steps},
            {"cell_resolution", cfg.cell_resolution},
            {"nt_stride", cfg.nt_stride},
            {"diagnostics", cfg.diagnostics},
            {"sweep", cfg.sweep},
            {"output_dir", cfg.output_dir},
            {"seed", cfg.seed},
            {"threads", cfg.threads}};
}

InsufficientResolution::InsufficientResolution(int have_, int required_)
    : std::invalid_argument("resolution " + std::to_string(have_) + " gives fewer than 8 cells per period of the smallest eps; requires resolution >= " +
                            std::to_string(required_)),
      have(have_),
      required(required_) {}

// ---- boundary data ------------------------------------------------------------

BoundaryData data_from_json(const nlohmann::json& spec_in, int dim) {
    const nlohmann::json spec = spec_in.is_string() ? nlohmann::json{{"preset", spec_in.get<std::string>()}}
                                : spec_in.is_null() ? nlohmann::json{{"preset", "smooth"}}
                                                    : spec_in;
    BoundaryData f;
    if (spec.contains("expr")) {
        auto names = coordinate_names(dim);
        names.push_back("t");
        const Expression e(spec.at("expr").get<std::string>(), names, {{"lambda", dim - 1}});
        f.f = [e, dim](std::span<const double> X, double t) {
            double v[4];
            for (int i = 0; i < dim; ++i) v[i] = X[static_cast<std::size_t>(i)];
            v[dim] = t;
            return e.evaluate(std::span<const double>(v, static_cast<std::size_t>(dim + 1)));
        };
        f.label = spec.value("label", spec.at("expr").get<std::string>());
        f.classical = spec.value("classical", false);
        return f;
    }
    const auto name = spec.at("preset").get<std::string>();
    if (name == "smooth") {
        const double tau = spec.value("rise", 1.0 / 32.0);
        const double c = spec.value("offset", 1.0);
        std::vector<double> grad = spec.value("gradient", std::vector<double>{1.0, 0.5, 0.25});
        grad.resize(static_cast<std::size_t>(dim), 0.0);
        if (!(tau > 0.0)) throw std::invalid_argument("smooth data: rise must be positive");
        f.f = [tau, c, grad](std::span<const double> X, double t) {
            if (t <= 0.0) return 0.0;
            double s = c;
            for (std::size_t i = 0; i < grad.size(); ++i) s += grad[i] * X[i];
            return (1.0 - std::exp(-(t / tau) * (t / tau))) * s;
        };
        f.label = "smooth";
        f.classical = false;  // no compact support on a bounded cylinder, but smooth
    } else if (name == "ramp") {
        const double a = spec.value("t0", 0.0), w = spec.value("rise", 0.25), c = spec.value("amplitude", 1.0);
        if (!(w > 0.0)) throw std::invalid_argument("ramp data: rise must be positive");
        f.f = [a, w, c](std::span<const double>, double t) { return c * std::clamp((t - a) / w, 0.0, 1.0); };
        f.label = "ramp";
        f.classical = false;
    } else if (name == "indicator") {
        const auto x = spec.value("x", std::vector<double>(static_cast<std::size_t>(dim - 1), 0.0));
        const double r = spec.value("r", 0.5);
        f = mollified_indicator(boundary_cube(x, spec.value("t", 0.0), r), spec.value("wx", 0.125), spec.value("wt", 0.0625));
    } else if (name == "bump") {
        const auto x = spec.value("x", std::vector<double>(static_cast<std::size_t>(dim - 1), 0.0));
        const double t0 = spec.value("t", 0.0), r = spec.value("r", 0.5);
        if (!(r > 0.0)) throw std::invalid_argument("bump data: r must be positive");
        f.f = [x, t0, r](std::span<const double> X, double t) {
            double v = bump1((t - t0) / (r * r));
            for (std::size_t i = 0; i < x.size() && v != 0.0; ++i) v *= bump1((X[i] - x[i]) / r);
            return v;
        };
        f.label = "bump";
    } else {
        throw std::invalid_argument("unknown data preset '" + name + "'");
    }
    f.p = spec.value("p", 2.0);
    return f;
}

// ---- homogenization -----------------------------------------------------------

ExperimentConfig default_homogenization_config() {
    ExperimentConfig cfg;
    cfg.coefficient = {{"preset", "laminate"}, {"a1", 1.0}, {"a2", 4.0}};
    cfg.domain = {{"kind", "cylinder"}, {"box", {{0.0, 1.0}, {0.0, 1.0}}}, {"T", 0.25}};
    cfg.data = {{"preset", "smooth"}, {"rise", 1.0 / 32.0}, {"offset", 1.0}, {"gradient", {1.0, 0.5}}};
    cfg.output_dir = "out/homogenize";
    return cfg;
}

namespace {

struct CompactSet {
    double margin = 0.0;
    double t_min = 0.0;
    std::vector<int> cells;
};

CompactSet default_compact(const SpatialGrid& g, const SpatialBox& base, double T) {
    CompactSet K;
    double diam2 = 0.0;
    for (int i = 0; i < base.dim(); ++i) diam2 += base.width(i) * base.width(i);
    K.margin = 0.25 * std::sqrt(diam2);
    K.t_min = 0.25 * T;
    double X[3];
    for (int c = 0; c < g.cells(); ++c) {
        g.center(c, std::span<double>(X, static_cast<std::size_t>(g.dim)));
        double dist = INFINITY;
        for (int i = 0; i < g.dim; ++i)
            dist = std::min({dist, X[i] - base.lo[static_cast<std::size_t>(i)], base.hi[static_cast<std::size_t>(i)] - X[i]});
        if (dist >= K.margin) K.cells.push_back(c);
    }
    return K;
}

}  // namespace

ConvergenceReport homogenization_experiment(const ExperimentConfig& cfg) {
    const auto start = Clock::now();
    const int d = cfg.n + 1;
    if (cfg.eps.empty()) throw std::invalid_argument("homogenization needs at least one eps");
    const auto A = field_from_json(cfg.coefficient, d);
    if (A.periodicity() != Periodicity::Lattice) throw std::invalid_argument("homogenization needs a lattice-periodic coefficient");
    nlohmann::json dom_spec = cfg.domain.is_null() ? default_homogenization_config().domain : cfg.domain;
    if (dom_spec.value("kind", std::string("cylinder")) != "cylinder")
        throw std::invalid_argument("homogenization runs on cylinder domains");
    const auto cyl = cylinder_from_json(dom_spec);
    const auto f = data_from_json(cfg.data, d);

    // resolution guard: 8 cells across the smallest period
    const double eps_min = *std::min_element(cfg.eps.begin(), cfg.eps.end());
    const double period = eps_min * A.period();
    if (period * cfg.resolution < 8.0 - 1e-9)
        throw InsufficientResolution(cfg.resolution, static_cast<int>(std::ceil(8.0 / period - 1e-9)));

    std::vector<int> cells;
    for (int i = 0; i < d; ++i) {
        const double c = cyl.base().width(i) * cfg.resolution;
        if (std::abs(c - std::round(c)) > 1e-9) throw std::invalid_argument("box widths must be multiples of 1 / resolution");
        cells.push_back(static_cast<int>(std::lround(c)));
    }
    SpaceTimeGrid grid;
    grid.space = SpatialGrid::from_box(cyl.base(), cells);
    const double T = cyl.final_time();
    grid.time = TimeGrid{0.0, T / cfg.time_steps, cfg.time_steps};
    const auto K = default_compact(grid.space, cyl.base(), T);
    if (K.cells.empty()) throw std::invalid_argument("compact set holds no cells at this resolution");

    ConvergenceReport report;
    report.config = to_json(cfg);
    report.compact = {{"margin", K.margin}, {"t_min", K.t_min}, {"t_max", T}, {"cells", K.cells.size()},
                      {"rule", "distance >= diameter / 4 from the lateral boundary, t >= T / 4"}};

    auto t0 = Clock::now();
    const auto eff = effective_matrix(A, cfg.cell_resolution);
    report.timing["cell"] = seconds_since(t0);
    for (int i = 0; i < d; ++i) {
        std::vector<double> row;
        for (int k = 0; k < d; ++k) row.push_back(eff.Abar(i, k));
        report.Abar.push_back(row);
    }

    const auto nt_levels = strided(grid.time, cfg.nt_stride);
    t0 = Clock::now();
    SolveOptions all;
    const auto ubar = solve_dirichlet(constant_field(eff.Abar), cyl, f, grid, all);
    report.timing["ubar"] = seconds_since(t0);
    const int k_first = static_cast<int>(std::ceil(K.t_min / grid.time.dt - 1e-9));
    for (int level = k_first; level <= grid.time.steps; ++level)
        for (int c : K.cells) report.ubar_sup = std::max(report.ubar_sup, std::abs(ubar.at(level, c)));

    std::vector<double> eps = cfg.eps;
    std::sort(eps.begin(), eps.end(), std::greater<>());

    struct Solved {
        HomogenizationRow row;
        std::vector<double> f_norm;
        double seconds = 0.0;
    };
    auto run = [&](double e) {
        const auto ts = Clock::now();
        Solved out;
        out.row.eps = e;
        SolveOptions opt;
        opt.store_levels = nt_levels;
        opt.observer = [&](int level, const Vector& u) {
            if (level < k_first) return;
            for (int c : K.cells)
                out.row.distance = std::max(out.row.distance, std::abs(u[c] - ubar.at(level, c)));
        };
        const auto u = solve_dirichlet(scale_field(A, e), cyl, f, grid, opt);
        out.row.rate = out.row.distance / e;
        const auto N = nontangential_max(u, cyl);
        const auto trace = data_trace(N, f);
        out.row.flagged = N.metadata["flagged"].get<int>();
        for (double p : cfg.p) {
            const double nn = lp_boundary_norm(N, p), fn = lp_boundary_norm(trace, p);
            out.row.n_norm.push_back(nn);
            out.row.n_ratio.push_back(nn / fn);
            out.f_norm.push_back(fn);
        }
        out.seconds = seconds_since(ts);
        return out;
    };
    std::vector<Solved> solved;
    for (std::size_t i = 0; i < eps.size(); i += static_cast<std::size_t>(cfg.threads)) {
        std::vector<std::future<Solved>> batch;
        for (std::size_t k = i; k < std::min(eps.size(), i + static_cast<std::size_t>(cfg.threads)); ++k)
            batch.push_back(std::async(cfg.threads > 1 ? std::launch::async : std::launch::deferred, run, eps[k]));
        for (auto& fut : batch) solved.push_back(fut.get());
    }
    for (const auto& s : solved) {
        report.rows.push_back(s.row);
        report.timing["eps=" + num(s.row.eps)] = s.seconds;
    }
    report.f_norm = solved.front().f_norm;

    const auto& rows = report.rows;
    const std::size_t m = rows.size();
    report.monotone = true;
    for (std::size_t i = 1; i < m; ++i) report.monotone = report.monotone && rows[i].distance < rows[i - 1].distance;
    report.decreasing_last_three = m >= 3 && rows[m - 2].distance < rows[m - 3].distance && rows[m - 1].distance < rows[m - 2].distance;
    if (!cfg.p.empty()) {
        double lo = INFINITY, hi = 0.0;
        for (const auto& r : rows) {
            lo = std::min(lo, r.n_ratio.front());
            hi = std::max(hi, r.n_ratio.front());
        }
        report.n_band = hi / lo - 1.0;
    }
    report.pass = report.decreasing_last_three && report.n_band <= 0.25;
    report.timing["total"] = seconds_since(start);
    return report;
}

nlohmann::json to_json(const ConvergenceReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"eps", row.eps}, {"distance", row.distance}, {"rate", row.rate}, {"N_norm", row.n_norm},
                        {"N_ratio", row.n_ratio}, {"flagged", row.flagged}});
    return {{"version", r.version},
            {"config", r.config},
            {"Abar", r.Abar},
            {"compact", r.compact},
            {"f_norm", r.f_norm},
            {"rows", rows},
            {"ubar_sup", r.ubar_sup},
            {"verdict",
             {{"decreasing_last_three", r.decreasing_last_three}, {"monotone", r.monotone}, {"N_band", r.n_band}, {"pass", r.pass}}}};
}

ConvergenceReport convergence_report_from_json(const nlohmann::json& j) {
    ConvergenceReport r;
    r.version = j.at("version").get<std::string>();
    r.config = j.at("config");
    r.Abar = j.at("Abar").get<std::vector<std::vector<double>>>();
    r.compact = j.at("compact");
    r.f_norm = j.at("f_norm").get<std::vector<double>>();
    for (const auto& row : j.at("rows")) {
        HomogenizationRow h;
        h.eps = row.at("eps").get<double>();
        h.distance = row.at("distance").get<double>();
        h.rate = row.at("rate").get<double>();
        h.n_norm = row.at("N_norm").get<std::vector<double>>();
        h.n_ratio = row.at("N_ratio").get<std::vector<double>>();
        h.flagged = row.at("flagged").get<int>();
        r.rows.push_back(h);
    }
    r.ubar_sup = j.at("ubar_sup").get<double>();
    const auto& v = j.at("verdict");
    r.decreasing_last_three = v.at("decreasing_last_three").get<bool>();
    r.monotone = v.at("monotone").get<bool>();
    r.n_band = v.at("N_band").get<double>();
    r.pass = v.at("pass").get<bool>();
    return r;
}

namespace {

std::vector<double> report_p(const ConvergenceReport& r) {
    if (r.config.is_object() && r.config.contains("p")) return r.config.at("p").get<std::vector<double>>();
    return std::vector<double>(r.f_norm.size(), 2.0);
}

}  // namespace

void write_csv(std::ostream& os, const ConvergenceReport& r) {
    const auto ps = report_p(r);
    os << "eps,distance,rate";
    for (double p : ps) os << ",N_norm_p" << num(p) << ",N_ratio_p" << num(p);
    os << ",flagged\n";
    for (const auto& row : r.rows) {
        os << num(row.eps) << ',' << num(row.distance) << ',' << num(row.rate);
        for (std::size_t i = 0; i < row.n_norm.size(); ++i) os << ',' << num(row.n_norm[i]) << ',' << num(row.n_ratio[i]);
        os << ',' << row.flagged << '\n';
    }
}

void write_dat(std::ostream& os, const ConvergenceReport& r) {
    const auto ps = report_p(r);
    os << "# eps distance rate";
    for (double p : ps) os << " N_ratio_p" << num(p);
    os << '\n';
    for (const auto& row : r.rows) {
        os << num(row.eps) << ' ' << num(row.distance) << ' ' << num(row.rate);
        for (double v : row.n_ratio) os << ' ' << num(v);
        os << '\n';
    }
}

// ---- local solvability across scales -------------------------------------------

ScaleSolvability local_solvability_at_scale(const CoefficientField& A, double r, int cells_per_r) {
    if (!(r > 0.0) || cells_per_r < 4) throw std::invalid_argument("local_solvability_at_scale: bad scale or resolution");
    HalfSpaceBox b;
    b.n = A.dim() - 1;
    b.half_width = 4.0 * r;
    b.height = 4.0 * r;
    b.h = r / cells_per_r;
    b.dt = r * r / 64.0;
    // levels staggered against the cube edges, so time integrals are midpoint sums
    b.t_start = -8.0 * r * r - 0.5 * b.dt;
    const HalfSpace space(A, b);
    const double t_end = b.t_start + std::ceil((4.0 * r * r - b.t_start) / b.dt + 1.0) * b.dt;
    BoundaryData top;
    top.label = "top ramp";
    const double t_on = b.t_start, rise = r * r;
    top.f = [t_on, rise](std::span<const double>, double t) { return smoothstep((t - t_on) / rise); };
    const auto u = top_driven_solution(space, top, t_end);
    const std::vector<double> x0(static_cast<std::size_t>(b.n), 0.0);
    return {r, local_solvability_ratio(u, boundary_cube(x0, 0.0, r))};
}

CoefficientField chart_field(const CoefficientField& A, const Chart& chart) {
    const int d = A.dim();
    if (chart.frame.rows() != d || static_cast<int>(chart.origin.size()) != d)
        throw std::invalid_argument("chart_field: chart dimension differs from the field");
    const SmallMatrix F = chart.frame;
    const std::vector<double> origin = chart.origin;
    auto eval = [A, F, origin, d](std::span<const double> y) {
        double X[3];
        for (int i = 0; i < d; ++i) {
            X[i] = origin[static_cast<std::size_t>(i)];
            for (int k = 0; k < d; ++k) X[i] += F(i, k) * y[static_cast<std::size_t>(k)];
        }
        const SmallMatrix M = F.transpose() * A(std::span<const double>(X, static_cast<std::size_t>(d))) * F;
        return M;
    };
    return CoefficientField(d, eval, A.ellipticity(), Periodicity::None, A.label() + "@chart");
}

// ---- sweep ---------------------------------------------------------------------

ExperimentConfig default_sweep_config() {
    ExperimentConfig cfg;
    cfg.coefficient = "identity";
    cfg.sweep = {{"oracle", true},
                 {"pole", {0.0, 1.0}},
                 {"tau", 2.0},
                 {"measure_radii", {0.25, 0.5, 1.0}},
                 {"doubling_radii", {0.125, 0.25, 0.5}},
                 {"periodic_presets", {"trig", "laminate", "checkerboard"}},
                 {"radii", {0.25, 0.5, 1.0, 2.0, 4.0}},
                 {"cells_per_r", 16},
                 {"charts", true},
                 {"tolerance", 0.05},
                 {"uniformity_factor", 2.0}};
    cfg.output_dir = "out/sweep";
    return cfg;
}

namespace {

SweepRow make_row(std::string preset, std::string domain, std::string diagnostic, double r, std::vector<double> x0, double t0) {
    SweepRow row;
    row.preset = std::move(preset);
    row.domain = std::move(domain);
    row.diagnostic = std::move(diagnostic);
    row.r = r;
    row.x0 = std::move(x0);
    row.t0 = t0;
    return row;
}

void set_oracle(SweepRow& row, double value, double oracle, double tol) {
    row.value = value;
    row.oracle = oracle;
    row.rel_error = std::abs(value / oracle - 1.0);
    row.tolerance = tol;
    row.pass = *row.rel_error <= tol;
}

/// Runs `body`, turning an exception into a failed row.
template <class F>
void guarded(std::vector<SweepRow>& rows, SweepRow proto, F&& body) {
    try {
        body(rows, proto);
    } catch (const std::exception& e) {
        proto.pass = false;
        proto.note = e.what();
        rows.push_back(proto);
    }
}

/// A = I battery against the images formulas, for a given space and label.
void oracle_rows(std::vector<SweepRow>& rows, const HalfSpace& space, const std::string& domain, const nlohmann::json& sw) {
    const auto Zv = sw.value("pole", std::vector<double>{0.0, 1.0});
    const double tau = sw.value("tau", 2.0);
    const double tol = sw.value("tolerance", 0.05);
    const ParabolicPoint pole{Zv, tau};
    const int n = space.n();
    const std::vector<double> origin(static_cast<std::size_t>(n), 0.0);
    const std::string preset = "identity";

    const PoleMeasure pm(space, pole);
    const PoleMeasure wide(space.widened(2.0), pole);
    auto with_pole = [&](SweepRow row) {
        row.pole = pole.X;
        row.tau = pole.t;
        return row;
    };

    for (double r : sw.value("measure_radii", std::vector<double>{0.25, 0.5, 1.0})) {
        guarded(rows, with_pole(make_row(preset, domain, "caloric_measure", r, origin, 0.0)), [&](auto& out, SweepRow row) {
            const auto Q = boundary_cube(origin, 0.0, r);
            set_oracle(row, pm.measure(Q), images_caloric_measure(pole.X, pole.t, Q), tol);
            out.push_back(row);
        });
    }

    guarded(rows, with_pole(make_row(preset, domain, "kernel_estimate", 0.5, origin, 0.0)), [&](auto& out, SweepRow proto) {
        const auto K = kernel_estimate(pm, space, boundary_cube(origin, 0.0, 0.5), 1);
        std::vector<double> exact;
        for (std::size_t i = 0; i < K.cells.size(); ++i) {
            const auto& Qi = K.cells[i];
            SweepRow row = proto;
            row.r = Qi.r;
            row.x0 = Qi.center;
            row.t0 = Qi.t;
            exact.push_back(images_caloric_measure(pole.X, pole.t, Qi) / K.sigma[i]);
            set_oracle(row, K.density[i], exact.back(), tol);
            row.note = "cell-averaged kernel";
            out.push_back(row);
        }
        SweepRow rh = proto;
        rh.diagnostic = "reverse_holder_q2";
        const auto ratio = reverse_holder_ratio(K, 2.0);
        set_oracle(rh, ratio.value, power_mean_ratio(exact, K.sigma, 2.0), tol);
        rh.watermark = !ratio.admissible;
        rh.note = ratio.note;
        out.push_back(rh);
    });

    // a cube outside the admissible window of the pole: recorded with the watermark
    guarded(rows, with_pole(make_row(preset, domain, "reverse_holder_q2", 0.25, std::vector<double>(static_cast<std::size_t>(n), 1.5), 1.5)),
            [&](auto& out, SweepRow row) {
                const auto K = kernel_estimate(pm, space, boundary_cube(row.x0, row.t0, row.r), 1);
                const auto ratio = reverse_holder_ratio(K, 2.0);
                row.value = ratio.value;
                row.watermark = !ratio.admissible;
                row.note = ratio.note;
                out.push_back(row);
            });

    for (double r : sw.value("doubling_radii", std::vector<double>{0.125, 0.25, 0.5})) {
        guarded(rows, with_pole(make_row(preset, domain, "doubling_ratio", r, origin, 0.0)), [&](auto& out, SweepRow row) {
            const auto Q = boundary_cube(origin, 0.0, r);
            const auto dbl = doubling_ratio(pm, Q, &wide);
            const double exact = images_caloric_measure(pole.X, pole.t, boundary_cube(origin, 0.0, 2 * r)) /
                                 images_caloric_measure(pole.X, pole.t, Q);
            set_oracle(row, dbl.ratio, exact, tol);
            out.push_back(row);
        });
    }

    // Harnack with a Green's function whose pole lies before and above T_4r
    guarded(rows, make_row(preset, domain, "harnack_ratio", 0.25, origin, 0.0), [&](auto& out, SweepRow row) {
        std::vector<double> Zh(static_cast<std::size_t>(n + 1), 0.0);
        Zh[0] = 0.5;
        Zh[static_cast<std::size_t>(n)] = 1.5;
        const ParabolicPoint hp{Zh, -1.125};
        row.pole = hp.X;
        row.tau = hp.t;
        const double r = row.r, t_ref = 2.0 * r * r;
        const auto G = greens_function(space, hp, t_ref, 2);
        const auto hr = harnack_ratio(G.field, boundary_cube(origin, 0.0, r));
        double sup = 0.0;
        const auto& g = G.field.grid().space;
        double X[3];
        for (int s = 0; s < G.field.level_count(); ++s) {
            const double t = G.field.time(s);
            if (!(std::abs(t) < r * r)) continue;
            for (int c = 0; c < g.cells(); ++c) {
                g.center(c, std::span<double>(X, static_cast<std::size_t>(n + 1)));
                bool inside = X[n] < r;
                for (int i = 0; i < n; ++i) inside = inside && std::abs(X[i]) < r;
                if (inside) sup = std::max(sup, images_green(std::span<const double>(X, static_cast<std::size_t>(n + 1)), t, hp.X, hp.t));
            }
        }
        std::vector<double> ref(static_cast<std::size_t>(n + 1), 0.0);
        ref[static_cast<std::size_t>(n)] = r;
        set_oracle(row, hr.ratio, sup / images_green(ref, t_ref, hp.X, hp.t), tol);
        out.push_back(row);
    });

    guarded(rows, make_row(preset, domain, "green_symmetry", 0.0, origin, 0.0), [&](auto& out, SweepRow row) {
        std::vector<double> Zs(static_cast<std::size_t>(n + 1), 0.0), Xs(static_cast<std::size_t>(n + 1), 0.0);
        Zs[0] = 0.3;
        Zs[static_cast<std::size_t>(n)] = 1.1;
        Xs[0] = -0.4;
        Xs[static_cast<std::size_t>(n)] = 0.8;
        const ParabolicPoint Z{Zs, 0.0}, Xp{Xs, 1.0};
        row.pole = Z.X;
        row.tau = Z.t;
        const auto s = green_symmetry_check(space, Z, Xp, 0.25);
        // symmetric kernel: the backward value is the oracle of the forward one
        set_oracle(row, s.forward, s.backward, tol);
        row.note = "regularization " + num(s.regularization);
        out.push_back(row);
        SweepRow images = row;
        images.diagnostic = "green_function";
        set_oracle(images, s.forward, images_green(Xp.X, Xp.t, Z.X, Z.t), 0.1);
        images.note = "single-cell delta, cell-wise reading";
        out.push_back(images);
    });
}

void solvability_rows(std::vector<SweepRow>& rows, const CoefficientField& A, const std::string& preset, const std::string& domain,
                      const nlohmann::json& sw) {
    const auto radii = sw.value("radii", std::vector<double>{0.25, 0.5, 1.0, 2.0, 4.0});
    const int cells = sw.value("cells_per_r", 16);
    const double factor = sw.value("uniformity_factor", 2.0);
    const std::vector<double> origin(static_cast<std::size_t>(A.dim() - 1), 0.0);
    std::vector<double> values;
    for (double r : radii) {
        guarded(rows, make_row(preset, domain, "local_solvability", r, origin, 0.0), [&](auto& out, SweepRow row) {
            const auto s = local_solvability_at_scale(A, r, cells);
            row.value = s.result.ratio;
            row.note = "first-layer lhs " + num(s.result.lhs_first_layer * r * r * r / s.result.rhs);
            if (s.result.degenerate) throw std::runtime_error("degenerate local solvability (zero interior mass)");
            values.push_back(row.value);
            out.push_back(row);
        });
    }
    SweepRow u = make_row(preset, domain, "local_solvability_uniformity", 0.0, origin, 0.0);
    if (values.size() == radii.size() && !values.empty()) {
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        u.value = *hi / *lo;
        u.tolerance = factor;
        u.pass = *lo > 0.0 && u.value <= factor;
        u.note = "max / min over r";
    } else {
        u.pass = false;
        u.note = "missing scales";
    }
    rows.push_back(u);
}

}  // namespace

SweepReport solvability_sweep(const ExperimentConfig& cfg) {
    const auto start = Clock::now();
    const int d = cfg.n + 1;
    nlohmann::json sw = default_sweep_config().sweep;
    for (const auto& [k, v] : cfg.sweep.items()) sw[k] = v;
    SweepReport report;
    report.config = to_json(cfg);
    report.config["sweep"] = sw;

    const bool charts = sw.value("charts", true);
    const auto cyl = LipschitzCylinder::box(SpatialBox{std::vector<double>(static_cast<std::size_t>(d), 0.0),
                                                       std::vector<double>(static_cast<std::size_t>(d), 1.0)},
                                            1.0);
    const auto& chart = cyl.charts().front();

    if (sw.value("oracle", true) && cfg.enabled("oracle")) {
        HalfSpaceBox b;
        b.n = cfg.n;
        auto t0 = Clock::now();
        oracle_rows(report.rows, HalfSpace(identity_field(d), b), "half-space", sw);
        report.timing["oracle:half-space"] = seconds_since(t0);
        if (charts) {
            t0 = Clock::now();
            oracle_rows(report.rows, HalfSpace(chart_field(identity_field(d), chart), b), "cylinder-chart:0", sw);
            report.timing["oracle:cylinder-chart:0"] = seconds_since(t0);
        }
    }
    if (cfg.enabled("local_solvability")) {
        for (const auto& name : sw.value("periodic_presets", std::vector<std::string>{})) {
            const auto A = field_from_json(name, d);
            auto t0 = Clock::now();
            solvability_rows(report.rows, A, name, "half-space", sw);
            report.timing["local_solvability:" + name] = seconds_since(t0);
            if (charts) {
                t0 = Clock::now();
                solvability_rows(report.rows, chart_field(A, chart), name, "cylinder-chart:0", sw);
                report.timing["local_solvability:" + name + "@chart"] = seconds_since(t0);
            }
        }
    }
    for (const auto& row : report.rows) report.pass = report.pass && row.pass;
    report.timing["total"] = seconds_since(start);
    return report;
}

nlohmann::json to_json(const SweepReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json j = {{"preset", row.preset}, {"domain", row.domain}, {"diagnostic", row.diagnostic},
                            {"r", row.r},           {"x0", row.x0},         {"t0", row.t0},
                            {"pole", row.pole},     {"tau", row.tau},       {"value", row.value},
                            {"tolerance", row.tolerance}, {"pass", row.pass}, {"watermark", row.watermark},
                            {"note", row.note}};
        j["oracle"] = row.oracle ? nlohmann::json(*row.oracle) : nlohmann::json(nullptr);
        j["rel_error"] = row.rel_error ? nlohmann::json(*row.rel_error) : nlohmann::json(nullptr);
        rows.push_back(j);
    }
    return {{"version", r.version}, {"config", r.config}, {"rows", rows}, {"pass", r.pass}};
}

SweepReport sweep_report_from_json(const nlohmann::json& j) {
    SweepReport r;
    r.version = j.at("version").get<std::string>();
    r.config = j.at("config");
    r.pass = j.at("pass").get<bool>();
    for (const auto& x : j.at("rows")) {
        SweepRow row;
        row.preset = x.at("preset").get<std::string>();
        row.domain = x.at("domain").get<std::string>();
        row.diagnostic = x.at("diagnostic").get<std::string>();
        row.r = x.at("r").get<double>();
        row.x0 = x.at("x0").get<std::vector<double>>();
        row.t0 = x.at("t0").get<double>();
        row.pole = x.at("pole").get<std::vector<double>>();
        row.tau = x.at("tau").get<double>();
        row.value = x.at("value").get<double>();
        if (!x.at("oracle").is_null()) row.oracle = x.at("oracle").get<double>();
        if (!x.at("rel_error").is_null()) row.rel_error = x.at("rel_error").get<double>();
        row.tolerance = x.at("tolerance").get<double>();
        row.pass = x.at("pass").get<bool>();
        row.watermark = x.at("watermark").get<bool>();
        row.note = x.at("note").get<std::string>();
        r.rows.push_back(row);
    }
    return r;
}

void write_csv(std::ostream& os, const SweepReport& r) {
    os << "preset,domain,diagnostic,r,x0,t0,pole,tau,value,oracle,rel_error,tolerance,pass,watermark,note\n";
    for (const auto& row : r.rows) {
        os << csv_quote(row.preset) << ',' << csv_quote(row.domain) << ',' << row.diagnostic << ',' << num(row.r) << ','
           << join(row.x0) << ',' << num(row.t0) << ',' << join(row.pole) << ',' << num(row.tau) << ',' << num(row.value) << ','
           << (row.oracle ? num(*row.oracle) : "") << ',' << (row.rel_error ? num(*row.rel_error) : "") << ','
           << num(row.tolerance) << ',' << (row.pass ? 1 : 0) << ',' << (row.watermark ? 1 : 0) << ',' << csv_quote(row.note) << '\n';
    }
}

void write_dat(std::ostream& os, const SweepReport& r) {
    std::string block;
    for (const auto& row : r.rows) {
        if (row.diagnostic != "local_solvability") continue;
        const auto key = row.preset + " " + row.domain;
        if (key != block) {
            os << (block.empty() ? "" : "\n\n") << "# " << key << "\n# r ratio\n";
            block = key;
        }
        os << num(row.r) << ' ' << num(row.value) << '\n';
    }
}

// ---- files ---------------------------------------------------------------------

namespace {

template <class Report>
void emit(const Report& r, ReportFormat format, const std::string& path) {
    {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
        if (format == ReportFormat::Json)
            os << to_json(r).dump(2) << '\n';
        else
            write_csv(os, r);
        if (!os) throw std::runtime_error("write to '" + path + "' failed");
    }
    std::ofstream side(path + ".timing.json");
    if (!side) throw std::runtime_error("cannot open '" + path + ".timing.json' for writing");
    side << nlohmann::json{{"seconds", r.timing}}.dump(2) << '\n';
}

}  // namespace

void emit_report(const ConvergenceReport& r, ReportFormat format, const std::string& path) { emit(r, format, path); }
void emit_report(const SweepReport& r, ReportFormat format, const std::string& path) { emit(r, format, path); }

}  // namespace parahom
