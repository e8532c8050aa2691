#pragma once

#include <optional>

#include "shemfc/kernels.hpp"

namespace shemfc {

/// ln Gamma(x) for x > 0. Throws DomainError otherwise.
double log_gamma(double x);

/// Ordered-simplex integral
///   I_n(t,h) = Int_{0<s_1<...<s_n<t} [(t-s_n)(s_n-s_{n-1})...(s_2-s_1)]^h ds
///            = Gamma(1+h)^n / Gamma(n(1+h)+1) * t^{n(1+h)},
/// finite iff 1+h > 0 (nullopt otherwise).
std::optional<double> simplex_integral(int n, double t, double h);

/// Phi(x,a) = sum_{n>=0} x^n/(n!)^a for x,a >= 0; nullopt iff a = 0, x >= 1.
/// Terms are summed until the running term is below tol*partial_sum and the
/// term ratio has dropped below 1/2 (geometric tail).
std::optional<double> phi_series(double x, double a, double tol = 1e-12);

/// Admissible constant beta_H for
///   alpha_H Int Int phi(s) phi(t) |t-s|^{2H-2} ds dt
///     <= beta_H^2 ( Int phi^{1/H} )^{2H}.
/// Exactly 1 for H = 1/2. For H > 1/2, the override if given, else a cached
/// numerical estimate: the ratio is maximized over nonnegative step
/// functions on [0,1] (64 pieces, coordinate ascent) and inflated by 5%.
double beta_h_constant(double H, std::optional<double> override = std::nullopt);

/// Best step-function ratio found by the optimizer (the square of the
/// estimated constant before inflation); exposed for diagnostics/tests.
double beta_h_ratio_sup(double H, int pieces = 64);

/// Exact alpha_H Int_a^b Int_c^e |r-s|^{2H-2} dr ds for H > 1/2, via the
/// antiderivative phi(x) = |x|^{2H} (inclusion-exclusion of four corners).
double fractional_cell_weight(double H, double a, double b, double c, double e);

/// Noise configuration: Hurst index, dimension, spatial kernel, and the
/// derived/configured constants alpha_H = H(2H-1) and beta_H.
struct NoiseModel {
  double H = 0.5;
  int d = 1;
  KernelSpec kernel;
  double alpha_H = 0.0;
  double beta_H = 1.0;

  NoiseModel() = default;
  NoiseModel(double hurst, KernelSpec k, std::optional<double> beta_override = std::nullopt);

  bool white_in_time() const { return H == 0.5; }
};

}  // namespace shemfc
