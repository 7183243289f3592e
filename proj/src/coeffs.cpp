#include "parahom/coeffs.hpp"

#include "parahom/expr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace parahom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double frac(double x) { return x - std::floor(x); }

/// Eigenvalues of a symmetric 2x2 or 3x3 matrix, ascending.
SmallVector symmetric_eigenvalues(const SmallMatrix& A) {
    const auto n = A.rows();
    if (n == 2) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es;
        es.computeDirect(Eigen::Matrix2d(A), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }
    if (n == 3) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
        es.computeDirect(Eigen::Matrix3d(A), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(A), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double spectral_norm_symmetric(const SmallMatrix& A) {
    const SmallVector ev = symmetric_eigenvalues(A);
    return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

std::string point_string(std::span<const double> X) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (std::size_t i = 0; i < X.size(); ++i) os << (i ? ", " : "") << X[i];
    os << ")";
    return os.str();
}

/// Quasi-random points with a Cranley-Patterson shift derived from the seed.
class QuasiRandom {
public:
    QuasiRandom(int dim, unsigned seed) : shift_(static_cast<std::size_t>(dim)) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto& s : shift_) s = u(rng);
    }
    void next(std::span<double> out) {
        halton_point(++index_, out);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = frac(out[i] + shift_[i]);
    }

private:
    std::vector<double> shift_;
    std::uint64_t index_ = 0;
};

}  // namespace

std::string to_string(Periodicity p) {
    switch (p) {
        case Periodicity::None: return "none";
        case Periodicity::AxisLambda: return "axis";
        case Periodicity::Lattice: return "lattice";
    }
    return "none";
}

Periodicity periodicity_from_string(const std::string& s) {
    if (s == "none") return Periodicity::None;
    if (s == "axis" || s == "lambda") return Periodicity::AxisLambda;
    if (s == "lattice") return Periodicity::Lattice;
    throw std::invalid_argument("unknown periodicity '" + s + "'");
}

CoefficientField::CoefficientField(int dim, Evaluator evaluator, double ellipticity,
                                   Periodicity periodicity, std::string label, double period)
    : dim_(dim),
      evaluator_(std::move(evaluator)),
      ellipticity_(ellipticity),
      periodicity_(periodicity),
      label_(std::move(label)),
      period_(period) {
    if (dim < 2 || dim > 3) throw std::invalid_argument("coefficient dimension must be 2 or 3");
    if (!(ellipticity >= 1.0)) throw std::invalid_argument("ellipticity constant must be >= 1");
    if (!(period > 0.0)) throw std::invalid_argument("period must be positive");
}

CoefficientField CoefficientField::with_spec(nlohmann::json spec) const {
    CoefficientField copy = *this;
    copy.spec_ = std::move(spec);
    return copy;
}

CoefficientField constant_field(const SmallMatrix& A, double ellipticity) {
    if (A.rows() != A.cols()) throw std::invalid_argument("constant_field: matrix must be square");
    const SmallVector ev = symmetric_eigenvalues(A);
    if (ev.minCoeff() <= 0.0) throw std::invalid_argument("constant_field: matrix not positive definite");
    const double needed = std::max({1.0, ev.maxCoeff(), 1.0 / ev.minCoeff()});
    const double lam = ellipticity > 0.0 ? ellipticity : needed;
    return CoefficientField(
        static_cast<int>(A.rows()), [A](std::span<const double>) { return A; }, lam,
        Periodicity::Lattice, "constant");
}

CoefficientField identity_field(int dim, double scale) {
    SmallMatrix A = SmallMatrix::Identity(dim, dim) * scale;
    auto field = constant_field(A);
    return field.with_spec({{"preset", "constant"}, {"scale", scale}});
}

CoefficientField laminate_field(int dim, double a1, double a2, double fraction, int axis) {
    if (!(a1 > 0.0 && a2 > 0.0)) throw std::invalid_argument("laminate phases must be positive");
    if (axis < 0 || axis >= dim) throw std::invalid_argument("laminate axis out of range");
    const double lam = std::max({1.0, a1, a2, 1.0 / a1, 1.0 / a2});
    auto eval = [=](std::span<const double> X) {
        const double a = frac(X[static_cast<std::size_t>(axis)]) < fraction ? a1 : a2;
        return SmallMatrix(SmallMatrix::Identity(dim, dim) * a);
    };
    CoefficientField field(dim, eval, lam, Periodicity::Lattice, "laminate");
    return field.with_spec(
        {{"preset", "laminate"}, {"a1", a1}, {"a2", a2}, {"fraction", fraction}, {"axis", axis}});
}

CoefficientField trig_field(int dim) {
    const int n = dim - 1;
    auto eval = [dim, n](std::span<const double> X) {
        double a = 2.0 + std::sin(kTwoPi * X[static_cast<std::size_t>(dim - 1)]);
        for (int i = 0; i < n; ++i) a += 0.5 / n * std::cos(kTwoPi * X[static_cast<std::size_t>(i)]);
        return SmallMatrix(SmallMatrix::Identity(dim, dim) * a);
    };
    CoefficientField field(dim, eval, 3.5, Periodicity::Lattice, "trig");
    return field.with_spec({{"preset", "trig"}});
}

CoefficientField checkerboard_field(int dim, double a1, double a2, double delta) {
    if (!(a1 > 0.0 && a2 > 0.0 && delta > 0.0))
        throw std::invalid_argument("checkerboard needs positive phases and smoothing width");
    const double geo = std::sqrt(a1 * a2);
    const double half_log = 0.5 * std::log(a2 / a1);
    auto eval = [=](std::span<const double> X) {
        double s = 1.0;
        for (int i = 0; i < dim; ++i) s *= std::sin(kTwoPi * X[static_cast<std::size_t>(i)]);
        const double a = geo * std::exp(half_log * std::tanh(s / delta));
        return SmallMatrix(SmallMatrix::Identity(dim, dim) * a);
    };
    const double lam = std::max({1.0, a1, a2, 1.0 / a1, 1.0 / a2});
    CoefficientField field(dim, eval, lam, Periodicity::Lattice, "checkerboard");
    return field.with_spec({{"preset", "checkerboard"}, {"a1", a1}, {"a2", a2}, {"delta", delta}});
}

CoefficientField field_from_json(const nlohmann::json& spec_in, int dim) {
    const nlohmann::json spec =
        spec_in.is_string() ? nlohmann::json{{"preset", spec_in.get<std::string>()}} : spec_in;
    if (spec.contains("preset")) {
        const auto name = spec.at("preset").get<std::string>();
        if (name == "constant" || name == "identity") {
            if (spec.contains("matrix")) {
                const auto rows = spec.at("matrix");
                SmallMatrix A(dim, dim);
                for (int i = 0; i < dim; ++i)
                    for (int j = 0; j < dim; ++j) A(i, j) = rows.at(i).at(j).get<double>();
                return constant_field(A, spec.value("lambda", 0.0)).with_spec(spec);
            }
            return identity_field(dim, spec.value("scale", 1.0));
        }
        if (name == "laminate")
            return laminate_field(dim, spec.value("a1", 1.0), spec.value("a2", 4.0),
                                  spec.value("fraction", 0.5), spec.value("axis", 0));
        if (name == "trig") return trig_field(dim);
        if (name == "checkerboard")
            return checkerboard_field(dim, spec.value("a1", 1.0), spec.value("a2", 4.0),
                                      spec.value("delta", 0.05));
        throw std::invalid_argument("unknown coefficient preset '" + name + "'");
    }
    if (!spec.contains("matrix")) throw std::invalid_argument("coefficient spec needs 'preset' or 'matrix'");
    const auto& rows = spec.at("matrix");
    if (!rows.is_array() || static_cast<int>(rows.size()) != dim)
        throw std::invalid_argument("coefficient 'matrix' must have " + std::to_string(dim) + " rows");
    std::vector<Expression> entries;
    for (int i = 0; i < dim; ++i) {
        if (static_cast<int>(rows.at(i).size()) != dim)
            throw std::invalid_argument("coefficient 'matrix' row has wrong length");
        for (int j = 0; j < dim; ++j) {
            const auto& e = rows.at(i).at(j);
            entries.push_back(parse_spatial_expression(e.is_string() ? e.get<std::string>() : e.dump(), dim));
        }
    }
    // symmetric by construction: the upper triangle wins
    auto eval = [entries, dim](std::span<const double> X) {
        SmallMatrix A(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j) {
                const double v = entries[static_cast<std::size_t>(i * dim + j)].evaluate(X);
                A(i, j) = v;
                A(j, i) = v;
            }
        return A;
    };
    if (!spec.contains("lambda")) throw std::invalid_argument("custom coefficient needs 'lambda'");
    const auto period = periodicity_from_string(spec.value("period", std::string("none")));
    CoefficientField field(dim, eval, spec.at("lambda").get<double>(), period,
                           spec.value("label", std::string("custom")));
    return field.with_spec(spec);
}

void halton_point(std::uint64_t index, std::span<double> out, unsigned scramble) {
    static constexpr unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    for (std::size_t k = 0; k < out.size(); ++k) {
        const unsigned base = primes[(k + scramble) % 8];
        double f = 1.0, r = 0.0;
        std::uint64_t i = index;
        while (i > 0) {
            f /= base;
            r += f * static_cast<double>(i % base);
            i /= base;
        }
        out[k] = r;
    }
}

EllipticityReport check_ellipticity(const CoefficientField& A, int sample_count, unsigned seed) {
    if (sample_count < 1) throw std::invalid_argument("check_ellipticity: sample_count must be >= 1");
    const int d = A.dim();
    QuasiRandom qr(d, seed);
    std::vector<double> X(static_cast<std::size_t>(d));
    EllipticityReport rep;
    rep.min_eig = std::numeric_limits<double>::infinity();
    rep.max_eig = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < sample_count; ++s) {
        qr.next(X);
        const SmallMatrix M = A(X);
        const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
        if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw std::domain_error("coefficient '" + A.label() + "' is not symmetric at " +
                                    point_string(X));
        const SmallVector ev = symmetric_eigenvalues(M);
        rep.min_eig = std::min(rep.min_eig, ev.minCoeff());
        rep.max_eig = std::max(rep.max_eig, ev.maxCoeff());
    }
    const double lam = A.ellipticity();
    rep.pass = rep.min_eig >= 1.0 / lam - 1e-10 && rep.max_eig <= lam + 1e-10;
    return rep;
}

double check_periodicity(const CoefficientField& A, int sample_count, unsigned seed) {
    if (A.periodicity() == Periodicity::None)
        throw std::invalid_argument("check_periodicity: field '" + A.label() + "' declares no period");
    const int d = A.dim();
    std::vector<int> axes;
    if (A.periodicity() == Periodicity::AxisLambda) axes.push_back(d - 1);
    else
        for (int i = 0; i < d; ++i) axes.push_back(i);

    QuasiRandom qr(d, seed);
    std::vector<double> X(static_cast<std::size_t>(d)), Y(X.size());
    double worst = 0.0;
    for (int s = 0; s < sample_count; ++s) {
        qr.next(X);
        // spread samples over a few periods, not just the first cell
        for (auto& x : X) x = (x * 4.0 - 2.0) * A.period();
        const SmallMatrix base = A(X);
        for (int axis : axes) {
            Y = X;
            Y[static_cast<std::size_t>(axis)] += A.period();
            worst = std::max(worst, (A(Y) - base).norm());
        }
    }
    return worst;
}

std::vector<double> default_rho_grid() {
    std::vector<double> grid;
    for (int k = 80; k >= 0; --k) grid.push_back(std::pow(2.0, -k / 4.0));
    return grid;
}

DiniModulus dini_modulus(const CoefficientField& A, DiniKind kind, std::span<const double> rho_grid,
                         int pairs_per_rho, unsigned seed) {
    const int d = A.dim();
    DiniModulus out;
    out.kind = kind;
    out.rho.assign(rho_grid.begin(), rho_grid.end());
    if (!std::is_sorted(out.rho.begin(), out.rho.end()))
        throw std::invalid_argument("dini_modulus: rho grid must be increasing");
    for (double r : out.rho)
        if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("dini_modulus: rho must lie in (0,1]");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> X(static_cast<std::size_t>(d)), Y(X.size()), dir(X.size());
    const int grid_side = 32;
    const double span = A.periodicity() == Periodicity::None ? 1.0 : A.period();

    double running = 0.0;
    for (double rho : out.rho) {
        double best = 0.0, second = 0.0;
        auto record = [&](double v) {
            if (v > best) {
                second = best;
                best = v;
            } else if (v > second) {
                second = v;
            }
        };
        auto displace = [&](double step) {
            Y = X;
            if (kind == DiniKind::AxisLambda) {
                Y[static_cast<std::size_t>(d - 1)] += step;
            } else {
                double norm = 0.0;
                for (auto& c : dir) {
                    c = gauss(rng);
                    norm += c * c;
                }
                norm = std::sqrt(norm);
                for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += step * dir[i] / norm;
            }
        };

        QuasiRandom qr(d, seed + 17);
        for (int s = 0; s < pairs_per_rho; ++s) {
            qr.next(X);
            for (auto& x : X) x *= span;
            // half of the pairs sit at the maximal admissible separation
            const double step = (s % 2 == 0) ? rho : rho * unit(rng);
            displace(step);
            record(spectral_norm_symmetric(A(Y) - A(X)));
        }
        // grid-aligned pairs centred on lattice nodes in x1 and lambda, so
        // jumps sitting on dyadic points are straddled at every rho
        const int total = grid_side * grid_side;
        for (int k = 0; k < total; ++k) {
            std::fill(X.begin(), X.end(), 0.0);
            X[0] = span * (k % grid_side) / grid_side;
            X[static_cast<std::size_t>(d - 1)] = span * (k / grid_side) / grid_side;
            const std::vector<double> centre = X;
            displace(rho);
            for (std::size_t i = 0; i < X.size(); ++i) {
                const double half = 0.5 * (Y[i] - centre[i]);
                X[i] = centre[i] - half;
                Y[i] = centre[i] + half;
            }
            record(spectral_norm_symmetric(A(Y) - A(X)));
        }
        running = std::max(running, best);
        out.theta.push_back(running);
        out.half_width.push_back(best - second);
    }
    return out;
}

DiniIntegral dini_integral(const DiniModulus& m, double rho_min) {
    DiniIntegral out;
    if (m.rho.empty()) return out;
    if (rho_min < m.rho.front() * (1.0 - 1e-12))
        throw std::invalid_argument("dini_integral: samples do not cover rho_min");
    const double* prev_r = nullptr;
    double prev_f = 0.0;
    for (std::size_t k = 0; k < m.rho.size(); ++k) {
        if (m.rho[k] < rho_min * (1.0 - 1e-12)) continue;
        const double f = m.theta[k] * m.theta[k] / m.rho[k];
        if (prev_r) out.value += 0.5 * (m.rho[k] - *prev_r) * (f + prev_f);
        else out.tail_indicator = m.theta[k] * m.theta[k] * std::abs(std::log(m.rho[k]));
        prev_r = &m.rho[k];
        prev_f = f;
    }
    return out;
}

CoefficientField scale_field(const CoefficientField& A, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("scale_field: eps must be positive");
    const int d = A.dim();
    auto eval = [A, eps, d](std::span<const double> X) {
        double Y[3];
        for (int i = 0; i < d; ++i) Y[i] = X[static_cast<std::size_t>(i)] / eps;
        return A(std::span<const double>(Y, static_cast<std::size_t>(d)));
    };
    std::ostringstream label;
    label << A.label() << "@eps=" << eps;
    CoefficientField out(d, eval, A.ellipticity(), A.periodicity(), label.str(), A.period() * eps);
    nlohmann::json spec = A.spec();
    if (!spec.is_null()) spec = {{"scaled", spec}, {"eps", eps}};
    return out.with_spec(spec);
}

CoefficientField shift_field(const CoefficientField& A, std::span<const double> z) {
    const int d = A.dim();
    std::vector<double> shift(z.begin(), z.end());
    auto eval = [A, shift, d](std::span<const double> X) {
        double Y[3];
        for (int i = 0; i < d; ++i) Y[i] = X[static_cast<std::size_t>(i)] + shift[static_cast<std::size_t>(i)];
        return A(std::span<const double>(Y, static_cast<std::size_t>(d)));
    };
    return CoefficientField(d, eval, A.ellipticity(), A.periodicity(), A.label() + "+shift", A.period());
}

}  // namespace parahom
