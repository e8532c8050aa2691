#pragma once

#include <functional>
#include <span>
#include <vector>

namespace shemfc {

using Integrand = std::function<double(double)>;

/// Globally adaptive Gauss-Kronrod (G7,K15) on a finite interval.
/// Throws QuadratureFailure if the error estimate cannot be brought below
/// max(abs_tol, rel_tol*|I|) within max_segments refinements.
double integrate_gk(const Integrand& f, double a, double b, double rel_tol = 1e-10,
                    double abs_tol = 0.0, int max_segments = 2000);

/// Tanh-sinh (double exponential) quadrature on (a,b); robust to integrable
/// endpoint singularities. Non-finite integrand values near the endpoints
/// are treated as zero.
double integrate_tanh_sinh(const Integrand& f, double a, double b, double tol = 1e-10,
                           int max_level = 12);

/// Distance-aware tanh-sinh: the integrand receives (x, x-a, b-x) with the
/// endpoint distances computed without cancellation. Use this whenever a
/// singular factor like (b-x)^{-p} must be evaluated accurately near the
/// endpoints.
using IntegrandWithDistance = std::function<double(double x, double dist_a, double dist_b)>;
double integrate_tanh_sinh(const IntegrandWithDistance& f, double a, double b,
                           double tol = 1e-10, int max_level = 12);

/// Integral over (0,inf) of an eventually-decaying integrand: tanh-sinh on
/// (0,1) plus the substitution x = e^s on the tail.
double integrate_zero_inf(const Integrand& f, double tol = 1e-10);

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1,1]; cached per order.
const QuadRule& gauss_legendre(int n);

/// Gauss-Hermite rule (weight e^{-x^2}); cached per order.
const QuadRule& gauss_hermite(int n);

}  // namespace shemfc
