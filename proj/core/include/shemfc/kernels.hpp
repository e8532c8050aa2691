#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shemfc/mc.hpp"

namespace shemfc {

enum class KernelFamily { Riesz, Bessel, Heat, Poisson };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// One of the four spatial covariance kernels, with its order and dimension.
///
/// The kernel f and the spectral density g form a Fourier pair under the
/// convention f(x) = (2pi)^{-d} Int e^{-i xi.x} g(xi) d xi:
///
///   Riesz    g(xi) = |xi|^{-alpha}            f(x) = gamma_{a,d} |x|^{alpha-d}
///   Bessel   g(xi) = (1+|xi|^2)^{-alpha/2}    f(x) = gamma'_{a,d} Int_0^inf
///                w^{(alpha-d)/2-1} e^{-w} e^{-|x|^2/(4w)} dw
///   Heat     g(xi) = e^{-alpha |xi|^2 / 2}    f(x) = p_alpha(x)
///   Poisson  g(xi) = e^{-alpha |xi|}          f(x) = C_d alpha (|x|^2+alpha^2)^{-(d+1)/2}
///
/// Riesz and Bessel are "rough" (singular at the origin, for alpha < d);
/// heat and Poisson are "smooth" (bounded).
struct KernelSpec {
  KernelFamily family = KernelFamily::Heat;
  double alpha = 1.0;
  int d = 1;

  KernelSpec() = default;
  KernelSpec(KernelFamily f, double a, int dim);

  bool rough() const { return family == KernelFamily::Riesz || family == KernelFamily::Bessel; }
  bool smooth() const { return !rough(); }

  /// Leading constant of the closed form: gamma_{alpha,d}, gamma'_{alpha,d},
  /// (2 pi alpha)^{-d/2}, or C_d alpha, per family.
  double closed_form_constant() const;
};

/// Surface measure of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
double sphere_surface(int d);

/// Heat kernel p_t(x) = (2 pi t)^{-d/2} e^{-|x|^2/(2t)}.
double heat_kernel(double t, double dist2, int d);

/// f(x). Throws SingularPoint where f is singular (Riesz at 0; Bessel at 0
/// when alpha <= d).
double eval_kernel(const KernelSpec& spec, std::span<const double> x,
                   double rel_tol = 1e-8);

/// Spectral density g(xi) with mu(d xi) = g(xi) d xi.
double eval_spectral_density(const KernelSpec& spec, std::span<const double> xi);

/// Radial forms of f and g as functions of |x| (resp. |xi|).
double eval_kernel_radial(const KernelSpec& spec, double r, double rel_tol = 1e-8);
double spectral_density_radial(const KernelSpec& spec, double r);

/// (p_eps * f)(x), the kernel mollified by the Gaussian of variance eps.
double mollified_kernel(const KernelSpec& spec, double eps, std::span<const double> x,
                        double rel_tol = 1e-8);
double mollified_kernel_radial(const KernelSpec& spec, double eps, double r,
                               double rel_tol = 1e-8);

/// (p_eps * f)(0) via the radial spectral integral
/// (2pi)^{-d} S_{d-1} Int_0^inf e^{-eps r^2/2} g(r) r^{d-1} dr.
double mollified_at_origin(const KernelSpec& spec, double eps, double rel_tol = 1e-10);

/// Spectral route for (p_eps * f)(x) at any x, reduced to a 1-D radial
/// integral (cos / J0 / sinc factor for d = 1,2,3). Cross-check companion
/// to mollified_kernel; supports d <= 3.
double mollified_kernel_spectral(const KernelSpec& spec, double eps, double r,
                                 double rel_tol = 1e-8);

/// Fast radial evaluator of (p_eps * f) for hot loops. Heat evaluates the
/// closed form; Riesz interpolates a scale-invariant profile; Bessel and
/// Poisson interpolate a per-eps table up to x_max and fall back to direct
/// quadrature beyond it.
class MollifiedKernel {
 public:
  MollifiedKernel(const KernelSpec& spec, double eps, double x_max = 32.0);

  double at_dist2(double dist2) const;
  double at(std::span<const double> x) const;
  double at_origin() const { return origin_; }

  const KernelSpec& spec() const { return spec_; }
  double eps() const { return eps_; }

 private:
  KernelSpec spec_;
  double eps_;
  double origin_;
  // Heat fast path
  double heat_norm_ = 0.0, heat_rate_ = 0.0;
  // Riesz: profile M(rho) = E|rho e1 + Z|^{alpha-d}, value = scale * M(|x|/sqrt(eps))
  // Bessel/Poisson: direct table over |x|
  std::vector<double> table_;
  double grid_max_ = 0.0, inv_h_ = 0.0, scale_ = 1.0, arg_scale_ = 1.0;
  double asym_c0_ = 0.0, asym_c2_ = 0.0;  // Riesz tail: c0 rho^{alpha-d}(1 + c2/rho^2)

  double lookup(double rho) const;
};

/// Lemma-level bound constants for J_f.
struct KernelBoundConstants {
  enum class Provenance { DerivedSharp, ProofChain };

  std::optional<double> D;  // rough: J_f <= D (u+v)^{-(d-alpha)/2}
  std::optional<double> C;  // smooth: J_f <= C
  Provenance provenance = Provenance::DerivedSharp;

  /// The bound evaluated at total Gaussian variance u+v.
  double bound_at(double u_plus_v, int d, double alpha) const;
};

/// Constants for the J_f bounds:
///   Heat    C = (2 pi alpha)^{-d/2}
///   Poisson C = C_d alpha^{-d}
///   Riesz   D = gamma_{a,d} 2^{-(d-a)/2} Gamma(a/2)/Gamma(d/2)      (sharp, at y=z)
///   Bessel  D = gamma'_{a,d} K_{a,d} 2^{(d-a)/2},  K = 2d/(a(d-a))  (proof chain)
/// Rough kernels require alpha < d.
KernelBoundConstants bound_constants(const KernelSpec& spec);

/// J_f(u,v,y,z) = E[f(y - z + sqrt(u) Y - sqrt(v) Z)] = (p_{u+v} * f)(y-z).
/// Closed forms: heat family always; Riesz for y = z.
double j_f_closed(const KernelSpec& spec, double u, double v,
                  std::span<const double> y, std::span<const double> z);

/// Monte Carlo J_f over independent standard normal pairs.
Estimate j_f_mc(const KernelSpec& spec, double u, double v, std::span<const double> y,
                std::span<const double> z, std::uint64_t n_samples, RngStream stream);

}  // namespace shemfc
