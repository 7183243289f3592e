#pragma once

#include "parahom/coeffs.hpp"
#include "parahom/expr.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace parahom {

/// ||(X,t)||: the positive root of t^2/rho^4 + |X|^2/rho^2 = 1, in closed form
/// rho^2 = (|X|^2 + sqrt(|X|^4 + 4 t^2)) / 2.
double parabolic_norm(std::span<const double> X, double t);

struct ParabolicPoint {
    std::vector<double> X;
    double t = 0.0;
};

/// d(p,q) = ||(X - Y, t - s)||; throws std::invalid_argument on dimension mismatch.
double parabolic_distance(const ParabolicPoint& p, const ParabolicPoint& q);

/// Quasi-triangle constant used by the property checks.
inline constexpr double kQuasiMetricConstant = 2.0;

enum class CubeKind {
    Boundary,  // Q_r(x,t) = {|y_i - x_i| < r, |s - t| < r^2} in R^n x R
    Interior,  // Q~_r(X,t), same shape in R^d x R
    Box,       // T_r(x,t) = Q_r(x,t) x (0, r)
};

struct ParabolicCube {
    std::vector<double> center;  // x in R^n (Boundary, Box) or X in R^d (Interior)
    double t = 0.0;
    double r = 1.0;
    CubeKind kind = CubeKind::Boundary;

    /// Lebesgue measure: (2r)^k * 2r^2, times r for the Box kind.
    double measure() const;
    /// `y` has center.size() entries, plus a trailing lambda for the Box kind.
    bool contains(std::span<const double> y, double s) const;
    ParabolicCube scaled(double factor) const;
};

nlohmann::json to_json(const ParabolicPoint& p);
nlohmann::json to_json(const ParabolicCube& Q);

ParabolicCube boundary_cube(std::vector<double> x, double t, double r);
ParabolicCube interior_cube(std::vector<double> X, double t, double r);
ParabolicCube box_cube(std::vector<double> x, double t, double r);

struct Cone {
    std::vector<double> vertex;  // x0 in R^n
    double t0 = 0.0;
    double eta = 1.0;
    std::optional<double> truncation;  // only points with lambda < truncation
};

/// ||(x - x0, t - t0)|| < eta * lambda, intersected with lambda < truncation.
bool cone_contains(const Cone& cone, std::span<const double> x, double t, double lambda);

struct SpatialBox {
    std::vector<double> lo, hi;
    int dim() const { return static_cast<int>(lo.size()); }
    double width(int i) const { return hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]; }
};

struct LipschitzCheck {
    double max_ratio = 0.0;  // largest |phi(x)-phi(y)| / |x-y| over checked pairs
    std::vector<double> worst_x, worst_y;
    bool pass = true;
};

/// D = {lambda > phi(x)} with phi Lipschitz on a finite box of R^n.
class GraphDomain {
public:
    /// Flat boundary phi = 0 over `box`.
    static GraphDomain flat(SpatialBox box);
    /// phi given as an expression in x1..xn; `resolution` points per axis are
    /// used for the Lipschitz check and as the finite-difference step.
    static GraphDomain closed_form(const std::string& expression, double m, SpatialBox box,
                                   int resolution = 256);
    /// phi tabulated at `shape` nodes spanning `box`, row-major with x1 slowest.
    static GraphDomain table(std::vector<double> values, std::vector<int> shape, double m, SpatialBox box);

    int n() const { return box_.dim(); }
    double lipschitz() const { return m_; }
    const SpatialBox& box() const { return box_; }
    bool is_flat() const { return kind_ == Kind::Flat; }

    double phi(std::span<const double> x) const;
    void gradient(std::span<const double> x, std::span<double> out) const;

    /// Checks |phi(x) - phi(y)| <= m |x - y| for all node pairs inside each grid cell.
    LipschitzCheck check_lipschitz() const;

    nlohmann::json to_json() const;

private:
    enum class Kind { Flat, ClosedForm, Table };

    GraphDomain() = default;
    double node_value(std::span<const int> idx) const;
    double node_coord(int axis, int i) const;
    double table_value(std::span<const double> x) const;

    Kind kind_ = Kind::Flat;
    double m_ = 0.0;
    SpatialBox box_;
    Expression expression_;
    std::vector<int> shape_;  // nodes per axis
    std::vector<double> values_;
    std::vector<double> node_gradients_;  // n entries per node (tables only)
};

/// Pulls A back to the half-space under (x, lambda) -> (x, lambda - phi(x)):
/// A~(x, s) = J A(x, s + phi(x)) J^T with J = [[I, 0], [-grad phi^T, 1]].
/// The declared ellipticity becomes Lambda (1 + m)^2. A flat graph returns A
/// unchanged. Throws std::domain_error if the Lipschitz check fails.
CoefficientField flatten_pullback(const GraphDomain& dom, const CoefficientField& A);

struct MeasureResult {
    double value = 0.0;
    bool empty = false;
};

/// sigma(Q_r cap boundary) = (integral of sqrt(1 + |grad phi|^2) over the cube base
/// within the box) * 2 r^2, by midpoint quadrature with `cells_per_side` cells.
MeasureResult boundary_measure(const GraphDomain& dom, const ParabolicCube& region,
                               int cells_per_side = 256);

/// Local graph chart of a bounded domain: X = origin + frame * (x~, lambda~),
/// with the domain equal to {lambda~ > phi(x~)} for |x~_i| < r0.
struct Chart {
    std::vector<double> origin;
    SmallMatrix frame;  // orthonormal; last column is the inward direction
    double r0 = 1.0;
    double m = 0.0;
    std::string phi_source = "0";

    std::vector<double> to_global(std::span<const double> local) const;
    std::vector<double> to_local(std::span<const double> X) const;
};

struct ChartCheck {
    double worst_violation = 0.0;  // largest misclassified offset, 0 when consistent
    double max_ratio = 0.0;        // sampled Lipschitz ratio of phi
    bool pass = true;
};

/// Omega x (0, T) with Omega a box described by (m, r0) charts.
class LipschitzCylinder {
public:
    LipschitzCylinder(SpatialBox base, double T, std::vector<Chart> charts);
    /// Charts at every face centre (phi = 0) and, for d = 2, every corner (phi = |x~|, m = 1).
    static LipschitzCylinder box(SpatialBox base, double T);

    const SpatialBox& base() const { return base_; }
    double final_time() const { return T_; }
    const std::vector<Chart>& charts() const { return charts_; }
    bool inside(std::span<const double> X) const;

    /// Checks the graph representation of every chart on a sample grid.
    ChartCheck check_charts(int samples_per_axis = 33) const;

    nlohmann::json to_json() const;

private:
    SpatialBox base_;
    double T_;
    std::vector<Chart> charts_;
};

/// Lateral surface measure of the box inside an interior-kind cube, times the
/// cube's time extent clipped to (0, T).
MeasureResult boundary_measure(const LipschitzCylinder& dom, const ParabolicCube& region);

GraphDomain graph_domain_from_json(const nlohmann::json& j);
LipschitzCylinder cylinder_from_json(const nlohmann::json& j);
SpatialBox box_from_json(const nlohmann::json& j);

}  // namespace parahom
