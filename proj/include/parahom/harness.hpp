#pragma once

#include "parahom/coeffs.hpp"
#include "parahom/geometry.hpp"
#include "parahom/pde.hpp"
#include "parahom/potential.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace parahom {

inline constexpr const char* kToolkitVersion = "0.3.0";

struct ExperimentConfig {
    int n = 1;                                     // boundary dimension (d = n + 1)
    nlohmann::json coefficient = "laminate";       // preset name or coefficient spec
    nlohmann::json domain;                         // {"kind": "cylinder", "box": ..., "T": ...} or {"kind": "half_space", ...}
    nlohmann::json data;                           // boundary data spec (see data_from_json)
    std::vector<double> eps{0.5, 0.25, 0.125, 0.0625};
    std::vector<double> p{2.0};
    int resolution = 128;                          // cells per unit length
    int time_steps = 128;
    int cell_resolution = 128;
    int nt_stride = 4;                             // stored-level stride for maximal functions
    std::map<std::string, bool> diagnostics;       // toggles; missing keys are on
    nlohmann::json sweep = nlohmann::json::object();
    std::string output_dir = "out";
    unsigned seed = 1;
    int threads = 1;                               // concurrent eps solves

    bool enabled(const std::string& diagnostic) const;
};

/// Defaults per key; throws std::invalid_argument on bad values
/// (eps outside (0, 1], p outside (1, inf), non-positive resolutions, n not 1 or 2).
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// The homogenization grid cannot resolve the smallest period with 8 cells.
class InsufficientResolution : public std::invalid_argument {
public:
    InsufficientResolution(int have, int required);
    int have = 0;
    int required = 0;
};

/// Boundary data presets:
///   {"preset": "smooth", "rise": tau, "offset": c, "gradient": [g...]}: (1 - exp(-(t/tau)^2)) (c + g.X)
///   {"preset": "ramp", "t0": a, "rise": w, "amplitude": c}: c clamp((t - a) / w, 0, 1)
///   {"preset": "indicator", "x": [...], "t": t, "r": r, "wx": wx, "wt": wt}: mollified indicator of Q_r(x, t)
///   {"preset": "bump", "x": [...], "t": t, "r": r}: smooth bump supported in Q_r(x, t)
///   {"expr": "...", "label": ...}: expression in x1..xd and t
/// A bare string is a preset name with default parameters.
BoundaryData data_from_json(const nlohmann::json& spec, int dim);

// ---- homogenization --------------------------------------------------------

struct HomogenizationRow {
    double eps = 0.0;
    double distance = 0.0;             // sup over K of |u_eps - ubar|
    double rate = 0.0;                 // distance / eps (recorded only)
    std::vector<double> n_norm;        // ||N(u_eps)||_p per configured p
    std::vector<double> n_ratio;       // ||N(u_eps)||_p / ||f||_p
    int flagged = 0;                   // empty-cone vertices
    friend bool operator==(const HomogenizationRow&, const HomogenizationRow&) = default;
};

struct ConvergenceReport {
    std::string version = kToolkitVersion;
    nlohmann::json config;
    std::vector<std::vector<double>> Abar;
    nlohmann::json compact;            // K specification
    std::vector<double> f_norm;        // ||f||_p per p
    std::vector<HomogenizationRow> rows;  // eps descending
    double ubar_sup = 0.0;
    bool decreasing_last_three = false;   // strict decrease over the three smallest eps
    bool monotone = false;                // strict decrease over all eps
    double n_band = 0.0;                  // max / min - 1 of the N ratio (first p)
    bool pass = false;                    // decreasing_last_three and n_band <= 0.25
    std::map<std::string, double> timing; // seconds; written to a sidecar, never to the report

    friend bool operator==(const ConvergenceReport& a, const ConvergenceReport& b) {
        return a.version == b.version && a.config == b.config && a.Abar == b.Abar && a.compact == b.compact &&
               a.f_norm == b.f_norm && a.rows == b.rows && a.ubar_sup == b.ubar_sup &&
               a.decreasing_last_three == b.decreasing_last_three && a.monotone == b.monotone &&
               a.n_band == b.n_band && a.pass == b.pass;
    }
};

/// Cylinder domain with the default compact set: the centred sub-cylinder at
/// distance >= diameter / 4 from the lateral boundary and t >= T / 4.
ConvergenceReport homogenization_experiment(const ExperimentConfig& cfg);

/// Default config: laminate a in {1, 4}, box (0,1)^2, T = 1/4, smooth data, N = 128.
ExperimentConfig default_homogenization_config();

nlohmann::json to_json(const ConvergenceReport& r);
ConvergenceReport convergence_report_from_json(const nlohmann::json& j);
/// Columns eps, distance, rate, then N_norm_p / N_ratio_p per p.
void write_csv(std::ostream& os, const ConvergenceReport& r);
/// Whitespace-separated columns for plotting, '#' header.
void write_dat(std::ostream& os, const ConvergenceReport& r);

// ---- solvability sweep -----------------------------------------------------

struct SweepRow {
    std::string preset;
    std::string domain;                 // "half-space" or "cylinder-chart:<i>"
    std::string diagnostic;
    double r = 0.0;
    std::vector<double> x0;
    double t0 = 0.0;
    std::vector<double> pole;           // Z (empty when not pole based)
    double tau = 0.0;
    double value = 0.0;
    std::optional<double> oracle;
    std::optional<double> rel_error;
    double tolerance = 0.0;             // 0: recorded only
    bool pass = true;
    bool watermark = false;             // computed outside the admissible window
    std::string note;
    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepReport {
    std::string version = kToolkitVersion;
    nlohmann::json config;
    std::vector<SweepRow> rows;
    bool pass = true;
    std::map<std::string, double> timing;

    friend bool operator==(const SweepReport& a, const SweepReport& b) {
        return a.version == b.version && a.config == b.config && a.rows == b.rows && a.pass == b.pass;
    }
};

/// Default sweep: A = I oracle battery on the half-space and on one cylinder
/// chart, plus local solvability across r for the periodic presets.
ExperimentConfig default_sweep_config();

/// Runs the diagnostic battery selected by cfg.sweep:
///   "oracle": A = I battery checked against the images formulas; "pole", "tau", "tolerance",
///   "measure_radii", "doubling_radii" tune it
///   "periodic_presets": presets for the local-solvability uniformity rows
///   "radii": r values for local solvability; "cells_per_r": resolution per r
///   "charts": include the cylinder chart rows.
/// Errors inside a diagnostic become a failed row with the message in `note`.
SweepReport solvability_sweep(const ExperimentConfig& cfg);

nlohmann::json to_json(const SweepReport& r);
SweepReport sweep_report_from_json(const nlohmann::json& j);
void write_csv(std::ostream& os, const SweepReport& r);
/// Local-solvability (r, value) columns, one gnuplot index block per preset and domain.
void write_dat(std::ostream& os, const SweepReport& r);

// ---- local-solvability scale family ----------------------------------------

struct ScaleSolvability {
    double r = 0.0;
    LocalSolvability result;
};

/// local_solvability_ratio on Q_r(0, 0) for a solution driven through the top
/// wall at height 4r of a box of half-width 4r, with h = r / cells_per_r and
/// dt = r^2 / 64. The default resolves a unit period with 8 cells up to r = 4.
ScaleSolvability local_solvability_at_scale(const CoefficientField& A, double r, int cells_per_r = 32);

/// Coefficient field seen in a chart's local coordinates: F^T A(origin + F y) F.
CoefficientField chart_field(const CoefficientField& A, const Chart& chart);

// ---- report files ----------------------------------------------------------

enum class ReportFormat { Json, Csv };

/// Writes the report to `path` and the timing sidecar to `path + ".timing.json"`.
/// Throws std::runtime_error on I/O failure.
void emit_report(const ConvergenceReport& r, ReportFormat format, const std::string& path);
void emit_report(const SweepReport& r, ReportFormat format, const std::string& path);

}  // namespace parahom
