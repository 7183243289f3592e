// parahom: command-line front end for the cell, solver, diagnostic, maximal
// function and experiment modules. Exit code 0 iff every asserted check passes,
// 1 if a check fails, 2 on bad input or runtime errors.

#include "parahom/cell.hpp"
#include "parahom/field_io.hpp"
#include "parahom/harness.hpp"
#include "parahom/heat_kernel.hpp"
#include "parahom/maximal.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace parahom;
using nlohmann::json;

namespace {

/// A JSON file path, an inline JSON document, or a bare preset name.
json load_spec(const std::string& arg) {
    if (arg.empty()) return nullptr;
    if (std::filesystem::is_regular_file(arg)) {
        std::ifstream is(arg);
        return json::parse(is);
    }
    if (arg.front() == '{' || arg.front() == '[') return json::parse(arg);
    return arg;
}

std::ofstream open_out(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    return os;
}

std::string with_extension(const std::string& path, const std::string& ext) {
    return std::filesystem::path(path).replace_extension(ext).string();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::pair<int, int> parse_grid(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("--grid expects N,Nt");
    const int N = std::stoi(s.substr(0, comma)), Nt = std::stoi(s.substr(comma + 1));
    if (N <= 0 || Nt <= 0) throw std::invalid_argument("--grid values must be positive");
    return {N, Nt};
}

int cells_for(double width, int per_unit) {
    const double c = width * per_unit;
    if (std::abs(c - std::round(c)) > 1e-9) throw std::invalid_argument("box widths must be multiples of 1 / N");
    return static_cast<int>(std::lround(c));
}

// ---- cell ------------------------------------------------------------------

int run_cell(const std::string& coeff, int dim, int resolution, const std::string& out) {
    const auto A = field_from_json(load_spec(coeff), dim);
    const auto eff = effective_matrix(A, resolution);
    std::vector<std::vector<double>> Abar;
    for (int i = 0; i < dim; ++i) {
        Abar.emplace_back();
        for (int k = 0; k < dim; ++k) Abar.back().push_back(eff.Abar(i, k));
    }
    const json j = {{"Abar", Abar}, {"residuals", eff.residuals}, {"resolution", resolution}};
    if (out.empty())
        std::cout << j.dump(2) << '\n';
    else
        open_out(out) << j.dump(2) << '\n';
    return eff.ellipticity_ok ? 0 : 1;
}

// ---- solve -----------------------------------------------------------------

int run_solve(const std::string& coeff, const std::string& domain, const std::string& data, const std::string& grid_arg,
              const std::string& out) {
    const auto dom = load_spec(domain);
    if (!dom.is_object()) throw std::invalid_argument("--domain must be a JSON object or file");
    const auto [N, Nt] = parse_grid(grid_arg);
    const auto kind = dom.value("kind", std::string("cylinder"));
    ScalarField u;
    if (kind == "cylinder") {
        const auto cyl = cylinder_from_json(dom);
        const int d = cyl.base().dim();
        const auto A = field_from_json(load_spec(coeff), d);
        SpaceTimeGrid g;
        std::vector<int> cells;
        for (int i = 0; i < d; ++i) cells.push_back(cells_for(cyl.base().width(i), N));
        g.space = SpatialGrid::from_box(cyl.base(), cells);
        g.time = TimeGrid{0.0, cyl.final_time() / Nt, Nt};
        u = solve_dirichlet(A, cyl, data_from_json(load_spec(data), d), g);
    } else if (kind == "graph") {
        const auto graph = graph_domain_from_json(dom);
        const int d = graph.n() + 1;
        const auto A = field_from_json(load_spec(coeff), d);
        const double H = dom.value("height", 1.0), T = dom.value("T", 1.0);
        SpatialBox box = graph.box();
        box.lo.push_back(0.0);
        box.hi.push_back(H);
        std::vector<int> cells;
        for (int i = 0; i < d; ++i) cells.push_back(cells_for(box.width(i), N));
        SpaceTimeGrid g;
        g.space = SpatialGrid::from_box(box, cells);
        g.time = TimeGrid{dom.value("t0", 0.0), T / Nt, Nt};
        u = solve_dirichlet(A, graph, data_from_json(load_spec(data), d), g);
    } else {
        throw std::invalid_argument("unknown domain kind '" + kind + "'");
    }
    u.metadata["domain"] = dom;
    write_field(u, out);
    std::cout << json{{"field", out}, {"levels", u.level_count()}, {"max_abs", u.max_abs()}}.dump() << '\n';
    return 0;
}

// ---- maximal ---------------------------------------------------------------

int run_maximal(const std::string& field, const std::string& domain, double eta, const std::vector<double>& ps,
                const std::string& out) {
    const auto u = read_field(field);
    const auto dom = load_spec(domain);
    BoundaryField N;
    if (dom.is_null()) {
        ConeOptions opt;
        opt.eta = eta > 0.0 ? eta : 1.0;
        N = nontangential_max(u, opt);
    } else if (dom.value("kind", std::string("cylinder")) == "graph") {
        N = nontangential_max(u, graph_domain_from_json(dom), eta);
    } else {
        N = nontangential_max(u, cylinder_from_json(dom), eta);
    }
    if (!out.empty()) {
        auto os = open_out(out);
        write_csv(os, N);
    }
    json norms = json::object();
    for (double p : ps) norms["p=" + num(p)] = lp_boundary_norm(N, p);
    std::cout << json{{"points", N.size()}, {"eta", N.metadata["eta"]}, {"flagged", N.metadata["flagged"]}, {"norms", norms}}.dump(2)
              << '\n';
    return 0;
}

// ---- diagnose --------------------------------------------------------------

struct DiagnoseArgs {
    std::string check;
    std::string coeff = "identity";
    std::vector<double> pole;
    double tau = NAN;
    std::vector<double> x0{0.0};
    double t0 = 0.0;
    double r = 0.25;
    double q = 2.0;
    int depth = 1;
    std::vector<double> point;
    double t = NAN;
    double shift = 0.25;
    double tolerance = 0.05;
    std::string out;
};

struct DiagnoseRow {
    std::string check;
    std::string params;
    double value = 0.0;
    double error_bar = 0.0;
    std::optional<double> oracle;
    bool pass = true;
};

DiagnoseRow diagnose_row(std::string check, std::string params, double value, double error_bar) {
    DiagnoseRow row;
    row.check = std::move(check);
    row.params = std::move(params);
    row.value = value;
    row.error_bar = error_bar;
    return row;
}

std::string point_str(std::span<const double> X) {
    std::string s;
    for (std::size_t i = 0; i < X.size(); ++i) s += (i ? ";" : "") + num(X[i]);
    return s;
}

void judge(DiagnoseRow& row, const std::optional<double>& oracle, double tol) {
    row.oracle = oracle;
    if (oracle) row.pass = std::abs(row.value / *oracle - 1.0) <= tol;
    row.pass = row.pass && std::isfinite(row.value);
}

int run_diagnose(DiagnoseArgs a) {
    const int n = static_cast<int>(a.x0.size());
    const auto A = field_from_json(load_spec(a.coeff), n + 1);
    // images oracles apply to A = I only
    const std::vector<double> origin(static_cast<std::size_t>(n + 1), 0.0);
    const bool identity = A.label() == "constant" && (A(origin) - SmallMatrix::Identity(n + 1, n + 1)).norm() == 0.0;
    HalfSpaceBox b;
    b.n = n;
    const HalfSpace space(A, b);
    const auto Q = boundary_cube(a.x0, a.t0, a.r);
    auto default_point = [n](double lam) {
        std::vector<double> X(static_cast<std::size_t>(n + 1), 0.0);
        X.back() = lam;
        return X;
    };
    const std::string cube = "x0=" + point_str(a.x0) + " t0=" + num(a.t0) + " r=" + num(a.r);
    std::vector<DiagnoseRow> rows;

    if (a.check == "doubling" || a.check == "rh") {
        // caloric measure with a pole after the cube
        const ParabolicPoint pole{a.pole.empty() ? default_point(1.0) : a.pole, std::isnan(a.tau) ? 2.0 : a.tau};
        const std::string params = cube + " pole=" + point_str(pole.X) + " tau=" + num(pole.t);
        const PoleMeasure pm(space, pole);
        if (a.check == "doubling") {
            const PoleMeasure wide(space.widened(2.0), pole);
            const auto d = doubling_ratio(pm, Q, &wide);
            auto row = diagnose_row("doubling", params, d.ratio, d.noise_floor / d.omega_r * d.ratio);
            std::optional<double> oracle;
            if (identity)
                oracle = images_caloric_measure(pole.X, pole.t, boundary_cube(a.x0, a.t0, 2 * a.r)) /
                         images_caloric_measure(pole.X, pole.t, Q);
            judge(row, oracle, a.tolerance);
            rows.push_back(row);
        } else {
            const auto K = kernel_estimate(pm, space, Q, a.depth);
            const auto rh = reverse_holder_ratio(K, a.q);
            double err = 0.0;
            for (std::size_t i = 0; i < K.density.size(); ++i) err = std::max(err, K.error_bar[i] / K.density[i]);
            auto row = diagnose_row("rh", params + " q=" + num(a.q) + (rh.admissible ? "" : " [outside admissible window]"), rh.value,
                            err * rh.value);
            std::optional<double> oracle;
            if (identity) {
                std::vector<double> exact;
                for (std::size_t i = 0; i < K.cells.size(); ++i)
                    exact.push_back(images_caloric_measure(pole.X, pole.t, K.cells[i]) / K.sigma[i]);
                oracle = power_mean_ratio(exact, K.sigma, a.q);
            }
            judge(row, oracle, a.tolerance);
            row.pass = row.pass && rh.value >= 1.0 - 1e-12;
            rows.push_back(row);
        }
    } else if (a.check == "localsolv") {
        const auto s = local_solvability_at_scale(A, a.r);
        auto row = diagnose_row("localsolv", "r=" + num(a.r), s.result.ratio,
                        std::abs(s.result.ratio - s.result.lhs_first_layer * a.r * a.r * a.r / s.result.rhs));
        row.pass = !s.result.degenerate && std::isfinite(row.value);
        rows.push_back(row);
    } else if (a.check == "harnack" || a.check == "comparison") {
        // Green's functions with poles before and above the cube
        std::vector<double> Z = a.pole.empty() ? default_point(1.5) : a.pole;
        if (a.pole.empty()) Z[0] = a.x0[0] + 0.5;
        const ParabolicPoint pole{Z, std::isnan(a.tau) ? a.t0 - 1.125 : a.tau};
        const double t_ref = a.t0 + 2 * a.r * a.r;
        const auto G = greens_function(space, pole, t_ref, 2);
        const std::string params = cube + " pole=" + point_str(pole.X) + " tau=" + num(pole.t);
        if (a.check == "harnack") {
            const auto h = harnack_ratio(G.field, Q);
            auto row = diagnose_row("harnack", params, h.ratio, 0.0);
            std::optional<double> oracle;
            if (identity) {
                const auto& g = G.field.grid().space;
                double sup = 0.0, X[3];
                for (int s = 0; s < G.field.level_count(); ++s) {
                    const double t = G.field.time(s);
                    if (!(std::abs(t - a.t0) < a.r * a.r)) continue;
                    for (int c = 0; c < g.cells(); ++c) {
                        g.center(c, std::span<double>(X, static_cast<std::size_t>(n + 1)));
                        bool inside = X[n] < a.r;
                        for (int i = 0; i < n; ++i) inside = inside && std::abs(X[i] - a.x0[static_cast<std::size_t>(i)]) < a.r;
                        if (inside) sup = std::max(sup, images_green(std::span<const double>(X, static_cast<std::size_t>(n + 1)), t, pole.X, pole.t));
                    }
                }
                auto ref = a.x0;
                ref.push_back(a.r);
                oracle = sup / images_green(ref, t_ref, pole.X, pole.t);
            }
            judge(row, oracle, a.tolerance);
            rows.push_back(row);
        } else {
            auto Z2 = Z;
            Z2[0] -= 1.0;
            const auto G2 = greens_function(space, ParabolicPoint{Z2, pole.t}, t_ref, 2);
            const auto c = comparison_ratio(G.field, G2.field, Q);
            auto row = diagnose_row("comparison", params + " second_pole=" + point_str(Z2), c.ratio, 0.0);
            judge(row, std::nullopt, a.tolerance);
            row.pass = row.pass && c.ratio > 0.0;
            rows.push_back(row);
        }
    } else if (a.check == "green-sym") {
        std::vector<double> Z = a.pole.empty() ? default_point(1.1) : a.pole;
        if (a.pole.empty()) Z[0] = 0.3;
        std::vector<double> X = a.point.empty() ? default_point(0.8) : a.point;
        if (a.point.empty()) X[0] = -0.4;
        const ParabolicPoint pole{Z, std::isnan(a.tau) ? 0.0 : a.tau}, pt{X, std::isnan(a.t) ? 1.0 : a.t};
        const auto s = green_symmetry_check(space, pole, pt, a.shift);
        auto row = diagnose_row("green-sym", "pole=" + point_str(Z) + " tau=" + num(pole.t) + " X=" + point_str(X) + " t=" + num(pt.t),
                        s.forward, s.regularization * s.forward);
        judge(row, s.backward, a.tolerance);
        rows.push_back(row);
    } else if (a.check == "green-measure") {
        std::vector<double> X = a.point.empty() ? default_point(0.5) : a.point;
        const ParabolicPoint pt{X, std::isnan(a.t) ? a.t0 + 1.0 : a.t};
        const auto g = green_measure_equivalence(space, pt, a.x0, a.t0, a.r);
        const std::string params = cube + " X=" + point_str(X) + " t=" + num(pt.t) + (g.region_ok ? "" : " [outside region]");
        auto up = diagnose_row("green-measure:upper", params, g.upper_ratio, 0.0);
        judge(up, std::nullopt, a.tolerance);
        auto lo = diagnose_row("green-measure:lower", params, g.lower_ratio, 0.0);
        judge(lo, std::nullopt, a.tolerance);
        up.pass = up.pass && g.upper_ratio > 0.0;
        lo.pass = lo.pass && g.lower_ratio > 0.0;
        rows.push_back(up);
        rows.push_back(lo);
    } else {
        throw std::invalid_argument("unknown check '" + a.check + "'");
    }

    std::ostringstream csv;
    csv << "check,params,value,error_bar,oracle,pass\n";
    bool pass = true;
    for (const auto& row : rows) {
        csv << row.check << ",\"" << row.params << "\"," << num(row.value) << ',' << num(row.error_bar) << ','
            << (row.oracle ? num(*row.oracle) : "") << ',' << (row.pass ? 1 : 0) << '\n';
        pass = pass && row.pass;
    }
    if (a.out.empty())
        std::cout << csv.str();
    else
        open_out(a.out) << csv.str();
    return pass ? 0 : 1;
}

// ---- experiments -----------------------------------------------------------

ExperimentConfig experiment_config(const std::string& path, ExperimentConfig defaults) {
    if (path.empty()) return defaults;
    json j = to_json(defaults);
    const json overrides = load_spec(path);
    if (!overrides.is_object()) throw std::invalid_argument("--config must be a JSON object or file");
    for (const auto& [k, v] : overrides.items()) j[k] = v;
    return config_from_json(j);
}

ReportFormat parse_format(const std::string& f) {
    if (f == "json") return ReportFormat::Json;
    if (f == "csv") return ReportFormat::Csv;
    throw std::invalid_argument("--format must be json or csv");
}

template <class Report>
void write_outputs(const Report& r, const std::string& format, std::string out, const std::string& output_dir,
                   const std::string& stem) {
    if (out.empty()) out = (std::filesystem::path(output_dir) / (stem + "." + format)).string();
    open_out(out).close();
    emit_report(r, parse_format(format), out);
    auto dat = open_out(with_extension(out, ".dat"));
    write_dat(dat, r);
    std::cerr << "wrote " << out << " and " << with_extension(out, ".dat") << '\n';
}

int run_homogenize(const std::string& config, const std::string& format, const std::string& out) {
    const auto cfg = experiment_config(config, default_homogenization_config());
    try {
        const auto r = homogenization_experiment(cfg);
        write_outputs(r, format, out, cfg.output_dir, "homogenization");
        std::printf("last three eps strictly decreasing: %s; N band %.4f; %s\n", r.decreasing_last_three ? "yes" : "no",
                    r.n_band, r.pass ? "PASS" : "FAIL");
        return r.pass ? 0 : 1;
    } catch (const InsufficientResolution& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

int run_sweep(const std::string& config, const std::string& format, const std::string& out) {
    const auto cfg = experiment_config(config, default_sweep_config());
    const auto r = solvability_sweep(cfg);
    write_outputs(r, format, out, cfg.output_dir, "sweep");
    int failed = 0;
    for (const auto& row : r.rows) failed += row.pass ? 0 : 1;
    std::printf("%zu rows, %d failed: %s\n", r.rows.size(), failed, r.pass ? "PASS" : "FAIL");
    return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parabolic homogenization toolkit"};
    app.set_version_flag("--version", kToolkitVersion);
    app.require_subcommand(1);
    int code = 0;

    std::string coeff, out, domain, data, grid = "64,64", field, config, format = "json";
    int dim = 2, resolution = 128;
    double eta = 0.0;
    std::vector<double> ps{2.0};

    auto* cell = app.add_subcommand("cell", "effective matrix from the periodic cell problem");
    cell->add_option("--coeff", coeff, "preset name, JSON spec or spec file")->required();
    cell->add_option("--dim", dim, "space dimension d = n + 1")->check(CLI::Range(2, 3));
    cell->add_option("--resolution", resolution, "cells per axis")->check(CLI::PositiveNumber);
    cell->add_option("--out", out, "output JSON (stdout when omitted)");
    cell->callback([&] { code = run_cell(coeff, dim, resolution, out); });

    auto* solve = app.add_subcommand("solve", "Dirichlet solve on a cylinder or graph domain");
    solve->add_option("--coeff", coeff)->required();
    solve->add_option("--domain", domain, "cylinder {box, T} or graph {box, phi, m, height, T}")->required();
    solve->add_option("--data", data, "boundary data spec")->required();
    solve->add_option("--grid", grid, "N,Nt: cells per unit length and time steps");
    solve->add_option("--out", out, "field file (JSON sidecar next to it)")->required();
    solve->callback([&] { code = run_solve(coeff, domain, data, grid, out); });

    DiagnoseArgs da;
    auto* diag = app.add_subcommand("diagnose", "one potential-theoretic check on the half-space");
    diag->add_option("--check", da.check)
        ->required()
        ->check(CLI::IsMember({"doubling", "rh", "localsolv", "harnack", "comparison", "green-sym", "green-measure"}));
    diag->add_option("--coeff", da.coeff);
    diag->add_option("--x0", da.x0, "cube centre on the boundary");
    diag->add_option("--t0", da.t0);
    diag->add_option("--r", da.r)->check(CLI::PositiveNumber);
    diag->add_option("--pole", da.pole, "pole position (x, lambda)");
    diag->add_option("--tau", da.tau, "pole time");
    diag->add_option("--point", da.point, "evaluation point (x, lambda)");
    diag->add_option("--t", da.t, "evaluation time");
    diag->add_option("--q", da.q);
    diag->add_option("--depth", da.depth);
    diag->add_option("--shift", da.shift);
    diag->add_option("--tolerance", da.tolerance, "relative oracle tolerance (A = I)");
    diag->add_option("--out", da.out, "CSV output (stdout when omitted)");
    diag->callback([&] { code = run_diagnose(da); });

    auto* maximal = app.add_subcommand("maximal", "nontangential maximal function of a stored field");
    maximal->add_option("--field", field)->required();
    maximal->add_option("--domain", domain, "cylinder or graph spec; flat bottom wall when omitted");
    maximal->add_option("--eta", eta, "cone aperture (default from the Lipschitz constant)");
    maximal->add_option("--p", ps, "L^p exponents");
    maximal->add_option("--out", out, "CSV of (x, t, N_value, flag)");
    maximal->callback([&] { code = run_maximal(field, domain, eta, ps, out); });

    auto* homog = app.add_subcommand("homogenize", "u_eps against the homogenized solution");
    homog->add_option("--config", config, "experiment config JSON (defaults when omitted)");
    homog->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));
    homog->add_option("--out", out);
    homog->callback([&] { code = run_homogenize(config, format, out); });

    auto* sweep = app.add_subcommand("sweep", "solvability diagnostics across presets, scales and domains");
    sweep->add_option("--config", config);
    sweep->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));
    sweep->add_option("--out", out);
    sweep->callback([&] { code = run_sweep(config, format, out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return code;
}
