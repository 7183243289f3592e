#pragma once

#include "parahom/coeffs.hpp"
#include "parahom/geometry.hpp"
#include "parahom/pde.hpp"

#include <optional>
#include <string>
#include <vector>

namespace parahom {

/// Truncated half-space box: x in [-half_width, half_width]^n, lambda in (0, height)
/// (flattened coordinates), time levels t_start + k dt.
struct HalfSpaceBox {
    int n = 1;
    double half_width = 6.0;
    double height = 6.0;
    double h = 0.125;
    double dt = 1.0 / 256.0;
    double t_start = -1.25;
};

/// Coefficient field plus (optional) Lipschitz graph, discretised on a
/// truncated box. Graph domains are flattened once; every point handed to the
/// diagnostics is given in original coordinates (x, lambda) and mapped to
/// (x, lambda - phi(x)) internally.
class HalfSpace {
public:
    HalfSpace(CoefficientField A, HalfSpaceBox box, std::optional<GraphDomain> graph = std::nullopt);

    const HalfSpaceBox& box() const { return box_; }
    int n() const { return box_.n; }
    const CoefficientField& coefficients() const { return A_; }
    /// Coefficients in flattened coordinates (A itself for flat boundaries).
    const CoefficientField& flattened() const { return flat_; }
    const std::optional<GraphDomain>& graph() const { return graph_; }

    /// Grid from t_start up to the level at t_end (t_end must lie on a level).
    SpaceTimeGrid grid(double t_end) const;
    /// Level index of time t; throws std::invalid_argument off the level lattice.
    int level(double t) const;
    /// (x, lambda) -> (x, lambda - phi(x)).
    std::vector<double> flatten(std::span<const double> X) const;
    /// Surface measure sigma(Q) of a boundary cube on the graph.
    double sigma(const ParabolicCube& Q) const;
    ParabolicSolver solver(double t_end) const;
    /// Same problem with the box widened by `factor` (margin doubling).
    HalfSpace widened(double factor) const;

    nlohmann::json to_json() const;

private:
    CoefficientField A_;
    CoefficientField flat_;
    HalfSpaceBox box_;
    std::optional<GraphDomain> graph_;
};

/// Indicator of the boundary cube Q in (x, t), convolved with a box kernel of
/// width wx in each x_i and wt in t. Adjacent cubes sum to the mollified union.
BoundaryData mollified_indicator(const ParabolicCube& Q, double wx, double wt);

/// Caloric measure of all boundary sets for one pole (Z, tau), from one
/// backward sweep of the discrete adjoint.
class PoleMeasure {
public:
    PoleMeasure(const HalfSpace& space, ParabolicPoint pole);

    const ParabolicPoint& pole() const { return pole_; }
    /// omega(Q) with data mollified over `width` grid cells (and `width` time steps).
    double measure(const ParabolicCube& Q, double width = 1.0) const;
    /// Integral of bottom-wall data against the discrete measure.
    double integrate(const BoundaryData& f) const;
    /// Discrete measure of the artificial walls (sides and top): bounds the
    /// truncation error of omega(Q) for data in [0, 1] when weights are nonnegative.
    double wall_mass() const { return wall_mass_; }
    /// Measure of the whole bottom wall over (t_start, tau).
    double bottom_mass() const { return bottom_mass_; }

private:
    ParabolicPoint pole_;
    HalfSpaceBox box_;
    int n_ = 1;
    int intervals_ = 0;
    std::vector<std::vector<double>> bottom_x_;  // face centres of the bottom wall
    std::vector<double> w_;                      // intervals x bottom faces
    double wall_mass_ = 0.0;
    double bottom_mass_ = 0.0;
};

struct MeasureOptions {
    bool margin_doubling = true;  // re-solve on a doubled box to bound truncation
};

struct MeasureEstimate {
    double value = 0.0;
    double smoothing_error = 0.0;    // |omega(width 1) - omega(width 1/2)|
    double truncation_error = 0.0;   // margin doubling, or the wall-mass bound
    std::string truncation_method;
    double wall_mass = 0.0;
    ParabolicPoint pole;
    ParabolicCube cube;

    nlohmann::json to_json() const;
};

/// omega^{(Z, tau)}(Q_r). Throws std::invalid_argument when the pole is less than
/// four cells above the boundary or outside the box, or Q is not a boundary cube.
MeasureEstimate caloric_measure(const HalfSpace& space, const ParabolicPoint& pole, const ParabolicCube& Q,
                                const MeasureOptions& opt = {});

/// Parabolic partition of a boundary cube into 2^{n depth} x 4^depth cubes of radius r / 2^depth.
std::vector<ParabolicCube> partition(const ParabolicCube& Q, int depth);

struct KernelEstimate {
    ParabolicPoint pole;
    ParabolicCube cube;
    int depth = 0;                       // partition depth of the estimate
    std::vector<ParabolicCube> cells;
    std::vector<double> density;         // omega(Q_i) / sigma(Q_i)
    std::vector<double> sigma;
    std::vector<double> error_bar;       // |K_i - K_parent(i)| from depth - 1
    double total = 0.0;                  // sum K_i sigma_i
    double cube_measure = 0.0;           // omega(Q_r)
    std::string method = "measure-ratio";

    nlohmann::json to_json() const;
};

KernelEstimate kernel_estimate(const HalfSpace& space, const ParabolicPoint& pole, const ParabolicCube& Q, int depth);
KernelEstimate kernel_estimate(const PoleMeasure& measure, const HalfSpace& space, const ParabolicCube& Q, int depth);

struct RatioResult {
    double value = 0.0;
    bool admissible = true;   // false: computed outside the lemma's window (watermarked)
    std::string note;
};

/// (mean K^q)^{1/q} / mean K with sigma weights. Admissibility: |(x,0) - Z|^2 <= |t - tau|
/// and tau - t >= 4 r^2 for the cube centre (x, t).
RatioResult reverse_holder_ratio(const KernelEstimate& K, double q);
double power_mean_ratio(std::span<const double> values, std::span<const double> weights, double q);

struct GreenField {
    ScalarField field;          // flattened coordinates
    ParabolicPoint pole;
    int delta_width = 1;        // 1: single cell, 2: multilinear spread over 2^d cells
    double value(std::span<const double> X, double t, const HalfSpace& space) const;
    /// Value of the cell containing X at the stored level t: the reading that
    /// matches a single-cell delta, so G(cell X; cell Z) is a symmetric kernel.
    double cell_value(std::span<const double> X, double t, const HalfSpace& space) const;
};

/// Forward propagation of a discrete delta placed at tau (mass 1 / cell volume).
/// Throws std::invalid_argument if the pole is on or outside the boundary.
GreenField greens_function(const HalfSpace& space, const ParabolicPoint& pole, double t_end, int delta_width = 1,
                           std::vector<int> store_levels = {});

struct GreenBound {
    double constant = 0.0;   // max G * ||(X - Z, t - tau)||^{n+1} over the samples
    double exponent = 0.0;   // least-squares slope of log(shell max of G) against log distance
    int samples = 0;
};

/// Fits G <= C / ||(X - Z, t - tau)||^{n+1} over stored cells at parabolic
/// distance >= min_distance from the pole.
GreenBound green_upper_bound(const GreenField& G, const HalfSpace& space, double min_distance);

struct SymmetryResult {
    double forward = 0.0;         // G(X, t; Z, tau), cell-wise reading
    double backward = 0.0;        // G(Z, t + shift; X, tau + shift)
    double deviation = 0.0;       // |forward - backward| / max
    double regularization = 0.0;  // |G_1(X) - G_2(X)| / G_2(X) with point sampling: single- vs 2-cell delta
};

SymmetryResult green_symmetry_check(const HalfSpace& space, const ParabolicPoint& pole, const ParabolicPoint& point,
                                    double shift);

struct DoublingResult {
    double ratio = 0.0;
    double omega_r = 0.0;
    double omega_2r = 0.0;
    double noise_floor = 0.0;
};

/// omega(Q_2r) / omega(Q_r). Throws std::domain_error when omega(Q_r) is below
/// ten times the truncation bound.
DoublingResult doubling_ratio(const HalfSpace& space, const ParabolicPoint& pole, const ParabolicCube& Q);
/// With `wide` (the same pole on a widened box) the truncation part of the noise
/// floor comes from margin doubling instead of the wall-mass bound.
DoublingResult doubling_ratio(const PoleMeasure& measure, const ParabolicCube& Q, const PoleMeasure* wide = nullptr);

struct LocalSolvability {
    double ratio = 0.0;          // r^3 * lhs / rhs
    double lhs = 0.0;            // int_{Q_r} (Richardson trace)^2
    double lhs_first_layer = 0.0;
    double rhs = 0.0;            // int_{T_2r} u^2
    bool degenerate = false;     // rhs == 0
};

/// Local solvability quotient on Q_r. Throws std::domain_error if u does not vanish
/// on Q_4r x {0} (to 1e-10) or T_2r leaves the data.
LocalSolvability local_solvability_ratio(const ScalarField& u, const ParabolicCube& Q);

struct HarnackResult {
    double ratio = 0.0;              // sup_{T_r} u / u(x0, t0 + 2r^2, r)
    double sup = 0.0;
    double reference = 0.0;
    double interior_constant = 0.0;  // smallest C in the exponential interior Harnack form
};

/// Boundary Harnack quotient around (x0, t0) at scale r (flattened coordinates).
/// T_4r must fit in the grid in space and its past half (from t0 - 16 r^2) plus
/// the reference time must lie within the stored levels.
/// Throws std::domain_error if u < -1e-12 on the stored part of T_4r or the
/// reference value is not positive, std::out_of_range if T_4r or the reference
/// point leaves the data.
HarnackResult harnack_ratio(const ScalarField& u, const ParabolicCube& Q);

struct ComparisonResult {
    double ratio = 0.0;
    double sup_quotient = 0.0;   // sup_{T_r} u / v
    double v_before = 0.0;       // v(x0, t0 - 2r^2, r)
    double u_after = 0.0;        // u(x0, t0 + 2r^2, r)
};

/// sup_{T_r}(u / v) * v(x0, t0 - 2r^2, r) / u(x0, t0 + 2r^2, r).
/// Throws std::domain_error for negative data, nonvanishing traces on Q_2r or v below the noise floor.
ComparisonResult comparison_ratio(const ScalarField& u, const ScalarField& v, const ParabolicCube& Q);

struct GreenMeasureResult {
    double omega = 0.0;        // omega^{(x,t,lambda)}(Q_{rho/2}(x0, t0))
    double green_minus = 0.0;  // G(x, t, lambda; x0, t0 - rho^2, rho)
    double green_plus = 0.0;   // G(x, t, lambda; x0, t0 + rho^2, rho)
    double upper_ratio = 0.0;  // omega / (rho^{n+1} G_minus), bounded above
    double lower_ratio = 0.0;  // omega / (rho^{n+1} G_plus), bounded below
    bool region_ok = true;     // |(x0,0) - (x,lambda)|^2 <= region_A |t - t0|
};

/// Throws std::invalid_argument unless t - t0 >= 4 rho^2.
GreenMeasureResult green_measure_equivalence(const HalfSpace& space, const ParabolicPoint& point,
                                             std::span<const double> x0, double t0, double rho, double region_A = 1.0);

struct PositivityResult {
    double floor = 0.0;        // min over the region
    int samples = 0;
    std::vector<double> argmin;
    double t_argmin = 0.0;
};

/// min omega(x, t, lambda; Q_r(x0, t0)) over lambda > gamma r, |x - x0|^2 + lambda^2 <= C1 (t - t0) <= C2 r^2.
PositivityResult measure_positivity(const HalfSpace& space, const ParabolicCube& Q, double gamma, double C1, double C2);

/// min r^{n+1} G(x, t, lambda; x0, t0, r) over lambda > gamma r, |(x0,0) - (x,lambda)|^2 <= A (t - t0) <= 10 A r^2.
PositivityResult green_positivity(const HalfSpace& space, std::span<const double> x0, double t0, double r,
                                  double gamma, double region_A = 1.0);

/// Forward solve with the mollified indicator of Q as data: omega(., Q) at every grid point.
ScalarField caloric_measure_field(const HalfSpace& space, const ParabolicCube& Q, double t_end,
                                  std::vector<int> store_levels = {});

/// Solution driven only through the top wall, so it vanishes on the whole base.
ScalarField top_driven_solution(const HalfSpace& space, const BoundaryData& top, double t_end,
                                std::vector<int> store_levels = {});

}  // namespace parahom
