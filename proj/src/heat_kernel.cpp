#include "parahom/heat_kernel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace parahom {

double free_heat_kernel(int d, double dist2, double t) {
    if (t <= 0.0) return 0.0;
    return std::pow(4.0 * std::numbers::pi * t, -0.5 * d) * std::exp(-dist2 / (4.0 * t));
}

double images_green(std::span<const double> X, double t, std::span<const double> Y, double s) {
    if (X.size() != Y.size() || X.empty()) throw std::invalid_argument("images_green: dimension mismatch");
    const std::size_t n = X.size() - 1;
    double x2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) x2 += (X[i] - Y[i]) * (X[i] - Y[i]);
    const double lm = X[n] - Y[n], lp = X[n] + Y[n];
    const int d = static_cast<int>(X.size());
    return free_heat_kernel(d, x2 + lm * lm, t - s) - free_heat_kernel(d, x2 + lp * lp, t - s);
}

double images_kernel(std::span<const double> Z, double tau, std::span<const double> y, double s) {
    if (Z.size() != y.size() + 1) throw std::invalid_argument("images_kernel: dimension mismatch");
    const double t = tau - s;
    if (t <= 0.0) return 0.0;
    const std::size_t n = y.size();
    double x2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) x2 += (Z[i] - y[i]) * (Z[i] - y[i]);
    const double lam = Z[n];
    return lam / t * free_heat_kernel(static_cast<int>(n + 1), x2 + lam * lam, t);
}

double images_caloric_measure(std::span<const double> Z, double tau, std::span<const double> a,
                              std::span<const double> b, double s0, double s1) {
    const std::size_t n = a.size();
    if (Z.size() != n + 1 || b.size() != n) throw std::invalid_argument("images_caloric_measure: dimension mismatch");
    const double lam = Z[n];
    if (!(lam > 0.0)) throw std::invalid_argument("images_caloric_measure: pole must lie above the boundary");
    const double hi = std::min(s1, tau);
    if (hi <= s0) return 0.0;
    // integrand in the elapsed time t = tau - s
    auto integrand = [&](double t) {
        if (t <= 0.0) return 0.0;
        const double sq = 2.0 * std::sqrt(t);
        double spatial = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            spatial *= 0.5 * (std::erf((b[i] - Z[i]) / sq) - std::erf((a[i] - Z[i]) / sq));
        // the x-Gaussian integrates to the erf factors; lambda part stays explicit
        return spatial * lam / t * std::pow(4.0 * std::numbers::pi * t, -0.5) * std::exp(-lam * lam / (4.0 * t));
    };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, tau - hi, tau - s0, 15, 1e-12, &err);
}

double images_caloric_measure(std::span<const double> Z, double tau, const ParabolicCube& Q) {
    if (Q.kind != CubeKind::Boundary) throw std::invalid_argument("images_caloric_measure: needs a boundary cube");
    std::vector<double> a(Q.center.size()), b(Q.center.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = Q.center[i] - Q.r;
        b[i] = Q.center[i] + Q.r;
    }
    return images_caloric_measure(Z, tau, a, b, Q.t - Q.r * Q.r, Q.t + Q.r * Q.r);
}

}  // namespace parahom
