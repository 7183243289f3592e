// Acceptance run: one PASS/FAIL line per criterion, exit code 0 iff all pass.
// Tolerances and runtime limits are fixed here; `--only 1,4` selects criteria.

#include "parahom/cell.hpp"
#include "parahom/harness.hpp"
#include "parahom/heat_kernel.hpp"
#include "parahom/maximal.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace parahom;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double max_over_min(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo > 0.0 ? *hi / *lo : INFINITY;
}

std::string list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt("%.4g", v[i]);
    return s;
}

// ---- 1: effective matrix ------------------------------------------------------

Outcome effective_matrix_oracle() {
    const auto t0 = Clock::now();
    const auto lam = effective_matrix(laminate_field(2, 1.0, 4.0), 256);
    const double e11 = std::abs(lam.Abar(0, 0) / 1.6 - 1.0), e22 = std::abs(lam.Abar(1, 1) / 2.5 - 1.0);
    SmallMatrix M(2, 2);
    M << 2.0, 0.5, 0.5, 1.0;
    const auto con = effective_matrix(constant_field(M), 256);
    const double ec = (con.Abar - M).cwiseAbs().maxCoeff();
    const double sec = seconds_since(t0);
    return {e11 <= 0.005 && e22 <= 0.005 && ec <= 1e-10 && sec < 30.0,
            "laminate Abar11 " + fmt("%.6f", lam.Abar(0, 0)) + " Abar22 " + fmt("%.6f", lam.Abar(1, 1)) +
                " (tol 0.5%); constant |Abar - A| " + fmt("%.2e", ec) + " (tol 1e-10); " + fmt("%.1f", sec) + " s (< 30)"};
}

// ---- 2: A = I oracle suite ------------------------------------------------------

SweepReport oracle_sweep() {
    auto cfg = default_sweep_config();
    cfg.sweep["periodic_presets"] = nlohmann::json::array();
    cfg.sweep["charts"] = false;
    return solvability_sweep(cfg);
}

Outcome heat_kernel_suite(SweepReport& kept) {
    const auto t0 = Clock::now();
    kept = oracle_sweep();
    const double sec = seconds_since(t0);
    const std::set<std::string> required{"kernel_estimate", "caloric_measure", "doubling_ratio", "harnack_ratio", "green_symmetry"};
    std::set<std::string> seen;
    double worst = 0.0;
    bool pass = true;
    for (const auto& row : kept.rows) {
        if (!row.oracle) continue;
        seen.insert(row.diagnostic);
        worst = std::max(worst, *row.rel_error);
        pass = pass && *row.rel_error <= 0.05;
    }
    for (const auto& name : required) pass = pass && seen.count(name);
    return {pass && sec < 300.0, std::to_string(kept.rows.size()) + " rows, worst relative error " + fmt("%.4f", worst) +
                                     " (tol 0.05); " + fmt("%.1f", sec) + " s (< 300)"};
}

// ---- 3: local solvability across scales ----------------------------------------

Outcome local_solvability_uniformity() {
    const auto A = trig_field(2);
    std::vector<double> ratios;
    for (double r : {0.25, 0.5, 1.0, 2.0, 4.0}) ratios.push_back(local_solvability_at_scale(A, r, 32).result.ratio);
    const double spread = max_over_min(ratios);
    return {spread <= 2.0, "trig, 32 cells per r, r = 1/4..4: " + list(ratios) + "; max/min " + fmt("%.3f", spread) + " (tol 2)"};
}

// ---- 4: homogenization -----------------------------------------------------------

Outcome homogenization(ConvergenceReport& kept) {
    const auto t0 = Clock::now();
    kept = homogenization_experiment(default_homogenization_config());
    const double sec = seconds_since(t0);
    std::vector<double> d;
    for (const auto& row : kept.rows) d.push_back(row.distance);
    return {kept.decreasing_last_three && kept.n_band <= 0.25 && sec < 600.0,
            "sup|u_eps - ubar| " + list(d) + (kept.decreasing_last_three ? " (last three decreasing)" : " (NOT decreasing)") +
                "; N band " + fmt("%.4f", kept.n_band) + " (tol 0.25); " + fmt("%.1f", sec) + " s (< 600)"};
}

// ---- 5: parabolic norm and cones -----------------------------------------------

Outcome geometry_properties() {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_real_distribution<double> u(0.05, 4.0);
    int failures = 0;
    const int cases = 100000;
    for (int k = 0; k < cases; ++k) {
        const int n = 1 + k % 2;
        std::vector<double> X(static_cast<std::size_t>(n + 1)), Y(X.size()), Z(X.size());
        for (std::size_t i = 0; i < X.size(); ++i) {
            X[i] = g(rng);
            Y[i] = g(rng);
            Z[i] = g(rng);
        }
        const double t = g(rng), s = g(rng), w = g(rng);
        const double rho = parabolic_norm(X, t);
        // root of t^2 / rho^4 + |X|^2 / rho^2 = 1
        double x2 = 0.0;
        for (double v : X) x2 += v * v;
        const bool root = rho > 0.0 && std::abs(t * t / std::pow(rho, 4) + x2 / (rho * rho) - 1.0) <= 1e-12;
        // ||(delta X, delta^2 t)|| = delta ||(X, t)||
        const double delta = u(rng);
        std::vector<double> dX = X;
        for (auto& v : dX) v *= delta;
        const bool scaling = std::abs(parabolic_norm(dX, delta * delta * t) - delta * rho) <= 1e-12 * delta * rho;
        const ParabolicPoint p{X, t}, q{Y, s}, r{Z, w};
        const bool quasi = parabolic_distance(p, r) <= kQuasiMetricConstant * (parabolic_distance(p, q) + parabolic_distance(q, r));
        // a point in the eta cone lies in every wider cone
        Cone narrow;
        narrow.vertex.assign(X.begin(), X.end() - 1);
        narrow.t0 = t;
        narrow.eta = u(rng);
        Cone wide = narrow;
        wide.eta = narrow.eta * (1.0 + u(rng));
        const std::vector<double> y(Y.begin(), Y.end() - 1);
        const double lam = std::abs(Y.back());
        const bool cone = !cone_contains(narrow, y, s, lam) || cone_contains(wide, y, s, lam);
        failures += !(root && scaling && quasi && cone);
    }
    return {failures == 0, std::to_string(cases) + " cases (root, scaling, quasi-metric C = 2, cone monotonicity), " +
                               std::to_string(failures) + " failures"};
}

// ---- 6: solver contracts -----------------------------------------------------------

SpaceTimeGrid unit_square(int N, double T, int steps) {
    SpaceTimeGrid g;
    g.space = SpatialGrid::from_box(SpatialBox{{0.0, 0.0}, {1.0, 1.0}}, std::vector<int>{N, N});
    g.time = TimeGrid{0.0, T / steps, steps};
    return g;
}

BoundaryData boundary(std::function<double(std::span<const double>, double)> f) {
    BoundaryData b;
    b.f = std::move(f);
    return b;
}

Outcome solver_contracts() {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const CoefficientField fields[] = {identity_field(2), laminate_field(2, 1.0, 4.0), trig_field(2), checkerboard_field(2, 1.0, 4.0, 0.05),
                                       scale_field(trig_field(2), 0.25)};
    double below = 0.0, above = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto& A = fields[static_cast<std::size_t>(trial) % std::size(fields)];
        const int N = 8 + static_cast<int>(U(rng) * 17);
        const double cx = U(rng), cy = U(rng), width = 0.1 + 0.5 * U(rng), amp = 0.1 + U(rng), tau = 0.02 + 0.3 * U(rng);
        const auto f = boundary([=](std::span<const double> X, double t) {
            const double r2 = (X[0] - cx) * (X[0] - cx) + (X[1] - cy) * (X[1] - cy);
            return amp * std::exp(-r2 / (width * width)) * std::clamp(t / tau, 0.0, 1.0);
        });
        const auto u = ParabolicSolver(A, unit_square(N, 0.1 + 0.5 * U(rng), 16)).solve(f);
        double fmax = 0.0;
        for (double v : u.boundary_values()) fmax = std::max(fmax, v);
        for (double v : u.values()) {
            below = std::min(below, v);
            above = std::max(above, v - fmax);
        }
    }
    const bool dmp = below >= -1e-12 && above <= 1e-12;

    ParabolicSolver solver(checkerboard_field(2, 1.0, 4.0, 0.05), unit_square(16, 0.25, 16));
    const auto f = boundary([](std::span<const double> X, double t) { return std::sin(3 * X[0]) * (1 + X[1]) * t; });
    const auto g = boundary([](std::span<const double> X, double t) { return std::cos(X[0] * X[1]) * t * t; });
    const auto fg = boundary([&](std::span<const double> X, double t) { return 2.0 * f.f(X, t) - 3.0 * g.f(X, t); });
    const auto uf = solver.solve(f), ug = solver.solve(g), ufg = solver.solve(fg);
    double lin = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < ufg.values().size(); ++k) {
        lin = std::max(lin, std::abs(ufg.values()[k] - 2.0 * uf.values()[k] + 3.0 * ug.values()[k]));
        scale = std::max(scale, std::abs(ufg.values()[k]));
    }
    const bool linear = lin <= 1e-9 * scale;

    // smooth data, dt tied to h^2
    const double T = 0.125;
    const auto smooth = boundary([](std::span<const double> X, double t) {
        return std::sin(std::numbers::pi * X[0]) * (1.0 + X[1]) * std::sin(8.0 * t) * std::sin(8.0 * t);
    });
    std::vector<ScalarField> runs;
    for (int N : {16, 32, 64}) {
        SolveOptions opt;
        opt.store_levels = {N * N / 8};
        runs.push_back(ParabolicSolver(trig_field(2), unit_square(N, T, N * N / 8)).solve(smooth, opt));
    }
    auto diff = [&](const ScalarField& coarse, const ScalarField& fine) {
        double m = 0.0, X[2];
        const auto& sg = coarse.grid().space;
        for (int c = 0; c < sg.cells(); ++c) {
            sg.center(c, X);
            m = std::max(m, std::abs(coarse.at(0, c) - fine.sample(X, T)));
        }
        return m;
    };
    const double factor = diff(runs[0], runs[1]) / diff(runs[1], runs[2]);
    return {dmp && linear && factor >= 1.7, "DMP over 50 solves: min " + fmt("%.2e", below) + ", max excess " + fmt("%.2e", above) +
                                                " (tol 1e-12); linearity " + fmt("%.2e", lin / scale) +
                                                " (tol 1e-9); self-convergence factor " + fmt("%.3f", factor) + " (>= 1.7)"};
}

// ---- 7: Q-difference decay -----------------------------------------------------------

Outcome q_decay() {
    const double h = 0.125;
    bool pass = true;
    std::string detail;
    for (const char* preset : {"trig", "laminate", "checkerboard"}) {
        std::vector<double> values;
        for (double R : {1.0, 2.0, 4.0}) {  // 8, 16, 32 cells
            HalfSpaceBox b;
            b.n = 1;
            b.half_width = 3.0 * R;
            b.height = 4.0 * R;
            b.h = h;
            b.dt = R * R / 32.0;
            b.t_start = 0.0;
            const HalfSpace space(field_from_json(preset, 2), b);
            BoundaryData top;
            top.f = [R](std::span<const double>, double t) {
                const double s = std::clamp(t / (R * R), 0.0, 1.0);
                return s * s * (3.0 - 2.0 * s);
            };
            values.push_back(q_difference_decay(top_driven_solution(space, top, 8.0 * R * R), 1.0, R).normalized);
        }
        const double spread = max_over_min(values);
        pass = pass && spread <= 2.0;
        detail += std::string(detail.empty() ? "" : "; ") + preset + " " + list(values) + " max/min " + fmt("%.3f", spread);
    }
    return {pass, "R sup|Qu| / rms at R = 8, 16, 32 cells: " + detail + " (tol 2)"};
}

// ---- 8: determinism ---------------------------------------------------------------------

std::string bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

template <class Report>
bool identical_files(const Report& a, const Report& b, const std::string& stem) {
    const auto dir = std::filesystem::temp_directory_path();
    bool same = true;
    for (auto format : {ReportFormat::Json, ReportFormat::Csv}) {
        const auto pa = (dir / (stem + "_a")).string(), pb = (dir / (stem + "_b")).string();
        emit_report(a, format, pa);
        emit_report(b, format, pb);
        same = same && bytes(pa) == bytes(pb) && !bytes(pa).empty();
        for (const auto& p : {pa, pb}) {
            std::filesystem::remove(p);
            std::filesystem::remove(p + ".timing.json");
        }
    }
    return same;
}

Outcome determinism(const ConvergenceReport* homog, const SweepReport* sweep) {
    const auto h1 = homog ? *homog : homogenization_experiment(default_homogenization_config());
    const auto h2 = homogenization_experiment(default_homogenization_config());
    const auto s1 = sweep ? *sweep : oracle_sweep();
    const auto s2 = oracle_sweep();
    const bool h = identical_files(h1, h2, "parahom_acceptance_homog");
    const bool s = identical_files(s1, s2, "parahom_acceptance_sweep");
    return {h && s, std::string("default homogenization report ") + (h ? "identical" : "DIFFERS") + "; A = I sweep report " +
                        (s ? "identical" : "DIFFERS") + " (JSON and CSV bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);
    auto selected = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

    const char* names[] = {"",
                           "effective-matrix oracle",
                           "heat-kernel oracle suite",
                           "local solvability across scales",
                           "homogenization limit",
                           "parabolic norm and cone properties",
                           "solver contracts",
                           "Q-difference decay",
                           "determinism"};
    ConvergenceReport homog;
    SweepReport sweep;
    bool have_homog = false, have_sweep = false;
    bool all = true;
    for (int k = 1; k <= 8; ++k) {
        if (!selected(k)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            switch (k) {
                case 1: o = effective_matrix_oracle(); break;
                case 2: o = heat_kernel_suite(sweep); have_sweep = true; break;
                case 3: o = local_solvability_uniformity(); break;
                case 4: o = homogenization(homog); have_homog = true; break;
                case 5: o = geometry_properties(); break;
                case 6: o = solver_contracts(); break;
                case 7: o = q_decay(); break;
                case 8: o = determinism(have_homog ? &homog : nullptr, have_sweep ? &sweep : nullptr); break;
            }
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        all = all && o.pass;
        std::printf("criterion %d %-36s %s  %s [%.1f s]\n", k, names[k], o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
