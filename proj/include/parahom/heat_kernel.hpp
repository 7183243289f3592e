#pragma once

#include "parahom/geometry.hpp"

#include <span>

namespace parahom {

// Closed forms for A = I on the half-space {lambda > 0} of R^d (d = n + 1),
// obtained by the method of images. Points carry lambda as their last
// coordinate; boundary points are x in R^n.

/// Free-space heat kernel (4 pi t)^{-d/2} exp(-|X|^2 / 4t); zero for t <= 0.
double free_heat_kernel(int d, double dist2, double t);

/// Dirichlet Green's function G(X, t; Y, s) of the half-space.
double images_green(std::span<const double> X, double t, std::span<const double> Y, double s);

/// Caloric-measure density K(Z, tau; y, s) = lambda/(tau - s) (4 pi (tau - s))^{-d/2}
/// exp(-(|z - y|^2 + lambda^2) / 4(tau - s)), the normal derivative of G at the boundary.
double images_kernel(std::span<const double> Z, double tau, std::span<const double> y, double s);

/// omega^{(Z, tau)}(Q) for a boundary cube Q: erf in space, adaptive
/// Gauss-Kronrod in time.
double images_caloric_measure(std::span<const double> Z, double tau, const ParabolicCube& Q);

/// omega^{(Z, tau)} of the rectangle prod_i [a_i, b_i] x [s0, s1] of the boundary.
double images_caloric_measure(std::span<const double> Z, double tau, std::span<const double> a,
                              std::span<const double> b, double s0, double s1);

}  // namespace parahom
