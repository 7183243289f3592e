#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace parahom {

/// Small dense matrix (at most 3x3) with inline storage; coefficient values
/// are produced at every grid cell so they must not allocate.
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

enum class Periodicity {
    None,
    AxisLambda,  // A(x, lambda + p) = A(x, lambda)
    Lattice,     // A(X + p Z) = A(X) for Z in Z^d
};

std::string to_string(Periodicity p);
Periodicity periodicity_from_string(const std::string& s);

/// Symmetric, time-independent coefficient field A(X) on R^d.
class CoefficientField {
public:
    using Evaluator = std::function<SmallMatrix(std::span<const double>)>;

    CoefficientField(int dim, Evaluator evaluator, double ellipticity, Periodicity periodicity,
                     std::string label, double period = 1.0);

    SmallMatrix operator()(std::span<const double> X) const { return evaluator_(X); }

    int dim() const { return dim_; }
    /// Declared Lambda >= 1 with Lambda^-1 |xi|^2 <= xi.A xi <= Lambda |xi|^2.
    double ellipticity() const { return ellipticity_; }
    Periodicity periodicity() const { return periodicity_; }
    /// Lattice spacing of the declared period (1 for the unscaled presets).
    double period() const { return period_; }
    const std::string& label() const { return label_; }

    /// Raw JSON spec the field was built from, when it came from a config.
    const nlohmann::json& spec() const { return spec_; }
    CoefficientField with_spec(nlohmann::json spec) const;

private:
    int dim_;
    Evaluator evaluator_;
    double ellipticity_;
    Periodicity periodicity_;
    std::string label_;
    double period_;
    nlohmann::json spec_;
};

// ---- presets ---------------------------------------------------------------

CoefficientField constant_field(const SmallMatrix& A, double ellipticity = 0.0);
CoefficientField identity_field(int dim, double scale = 1.0);

/// a(X_axis mod 1) * I with a = a1 on [0, fraction), a2 on [fraction, 1).
CoefficientField laminate_field(int dim, double a1 = 1.0, double a2 = 4.0, double fraction = 0.5,
                                int axis = 0);

/// (2 + sin 2 pi lambda + (0.5/n) sum_{i<d} cos 2 pi x_i) * I, lattice periodic.
CoefficientField trig_field(int dim);

/// Two-phase checkerboard a1/a2 with tanh smoothing of width `delta`,
/// interpolated geometrically so that swapping phases is a half-period shift.
CoefficientField checkerboard_field(int dim, double a1, double a2, double delta);

/// Builds a field from a JSON spec: {"preset": name, ...} or
/// {"matrix": [[expr,...],...], "lambda": L, "period": "lattice"}.
/// A bare string is treated as {"preset": string}.
CoefficientField field_from_json(const nlohmann::json& spec, int dim);

// ---- hypothesis checks ----------------------------------------------------

struct EllipticityReport {
    double min_eig = 0.0;
    double max_eig = 0.0;
    bool pass = false;
};

/// Eigenvalue range over `sample_count` quasi-random points of the unit cell.
/// Throws std::domain_error naming the point if an asymmetric sample is found.
EllipticityReport check_ellipticity(const CoefficientField& A, int sample_count,
                                    unsigned seed = 1);

/// Largest Frobenius deviation |A(X+Z) - A(X)| over samples and lattice
/// generators of the declared period.
double check_periodicity(const CoefficientField& A, int sample_count, unsigned seed = 1);

enum class DiniKind { AxisLambda, AllVariables };

struct DiniModulus {
    DiniKind kind = DiniKind::AxisLambda;
    std::vector<double> rho;
    std::vector<double> theta;       // running max (monotone)
    std::vector<double> half_width;  // gap between the two largest samples at each rho
};

/// Geometric grid rho_k = 2^{-k/4}, from 2^-20 up to 1.
std::vector<double> default_rho_grid();

/// Supremum of the spectral-norm oscillation |A(X) - A(Y)| over admissible
/// pairs (|lambda1 - lambda2| <= rho with x fixed, or |X - Y| <= rho).
DiniModulus dini_modulus(const CoefficientField& A, DiniKind kind, std::span<const double> rho_grid,
                         int pairs_per_rho = 10000, unsigned seed = 1);

struct DiniIntegral {
    double value = 0.0;
    double tail_indicator = 0.0;  // theta(rho_min)^2 |log rho_min|
};

DiniIntegral dini_integral(const DiniModulus& modulus, double rho_min);

/// A_eps(X) = A(X / eps), with the period rescaled to eps * period.
CoefficientField scale_field(const CoefficientField& A, double eps);

/// Shift by an integer lattice vector: X -> A(X + z).
CoefficientField shift_field(const CoefficientField& A, std::span<const double> z);

/// Halton point in [0,1)^dim (bases 2,3,5,7,...), index >= 1.
void halton_point(std::uint64_t index, std::span<double> out, unsigned scramble = 0);

}  // namespace parahom
