#include "shemfc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shemfc/errors.hpp"
#include "shemfc/quadrature.hpp"

namespace shemfc {

namespace {

constexpr double kPi = std::numbers::pi;

double dist2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double norm(std::span<const double> x) { return std::sqrt(dist2(x)); }

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Riesz: return "riesz";
    case KernelFamily::Bessel: return "bessel";
    case KernelFamily::Heat: return "heat";
    case KernelFamily::Poisson: return "poisson";
  }
  return "?";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "riesz") return KernelFamily::Riesz;
  if (name == "bessel") return KernelFamily::Bessel;
  if (name == "heat") return KernelFamily::Heat;
  if (name == "poisson") return KernelFamily::Poisson;
  throw InvalidSpec("unknown kernel family: " + name);
}

KernelSpec::KernelSpec(KernelFamily f, double a, int dim) : family(f), alpha(a), d(dim) {
  if (d < 1) throw InvalidSpec("kernel dimension must be >= 1");
  if (!(alpha > 0.0)) throw InvalidSpec("kernel order alpha must be > 0");
  if (family == KernelFamily::Riesz && !(alpha < d))
    throw InvalidSpec("Riesz kernel requires 0 < alpha < d");
}

double sphere_surface(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

double heat_kernel(double t, double r2, int d) {
  return std::pow(2.0 * kPi * t, -0.5 * d) * std::exp(-r2 / (2.0 * t));
}

double KernelSpec::closed_form_constant() const {
  switch (family) {
    case KernelFamily::Riesz:
      // gamma_{alpha,d} = Gamma((d-alpha)/2) 2^{-alpha} pi^{-d/2} / Gamma(alpha/2)
      return std::tgamma(0.5 * (d - alpha)) * std::pow(2.0, -alpha) *
             std::pow(kPi, -0.5 * d) / std::tgamma(0.5 * alpha);
    case KernelFamily::Bessel:
      // gamma'_{alpha,d} = (4 pi)^{-d/2} / Gamma(alpha/2)
      return std::pow(4.0 * kPi, -0.5 * d) / std::tgamma(0.5 * alpha);
    case KernelFamily::Heat:
      return std::pow(2.0 * kPi * alpha, -0.5 * d);
    case KernelFamily::Poisson:
      // C_d alpha with C_d = pi^{-(d+1)/2} Gamma((d+1)/2)
      return std::pow(kPi, -0.5 * (d + 1)) * std::tgamma(0.5 * (d + 1)) * alpha;
  }
  return 0.0;
}

double eval_kernel_radial(const KernelSpec& spec, double r, double rel_tol) {
  const double c = spec.closed_form_constant();
  switch (spec.family) {
    case KernelFamily::Riesz:
      if (r == 0.0) throw SingularPoint("Riesz kernel is singular at x = 0");
      return c * std::pow(r, spec.alpha - spec.d);
    case KernelFamily::Bessel: {
      const double r2 = r * r;
      const double ex = 0.5 * (spec.alpha - spec.d) - 1.0;
      if (r == 0.0) {
        if (spec.alpha <= spec.d)
          throw SingularPoint("Bessel kernel of order alpha <= d is singular at x = 0");
        return c * std::tgamma(0.5 * (spec.alpha - spec.d));
      }
      auto f = [&](double w) { return std::pow(w, ex) * std::exp(-w - r2 / (4.0 * w)); };
      return c * integrate_zero_inf(f, rel_tol);
    }
    case KernelFamily::Heat:
      return c * std::exp(-r * r / (2.0 * spec.alpha));
    case KernelFamily::Poisson:
      return c * std::pow(r * r + spec.alpha * spec.alpha, -0.5 * (spec.d + 1));
  }
  return 0.0;
}

double eval_kernel(const KernelSpec& spec, std::span<const double> x, double rel_tol) {
  if (int(x.size()) != spec.d) throw InvalidSpec("eval_kernel: point dimension mismatch");
  return eval_kernel_radial(spec, norm(x), rel_tol);
}

double spectral_density_radial(const KernelSpec& spec, double r) {
  switch (spec.family) {
    case KernelFamily::Riesz:
      if (r == 0.0) throw SingularPoint("Riesz spectral density is singular at xi = 0");
      return std::pow(r, -spec.alpha);
    case KernelFamily::Bessel:
      return std::pow(1.0 + r * r, -0.5 * spec.alpha);
    case KernelFamily::Heat:
      return std::exp(-0.5 * spec.alpha * r * r);
    case KernelFamily::Poisson:
      return std::exp(-spec.alpha * r);
  }
  return 0.0;
}

double eval_spectral_density(const KernelSpec& spec, std::span<const double> xi) {
  if (int(xi.size()) != spec.d) throw InvalidSpec("eval_spectral_density: dimension mismatch");
  return spectral_density_radial(spec, norm(xi));
}

double mollified_at_origin(const KernelSpec& spec, double eps, double rel_tol) {
  if (!(eps > 0.0)) throw InvalidSpec("mollified_at_origin: eps must be > 0");
  const int d = spec.d;
  switch (spec.family) {
    case KernelFamily::Heat:
      return heat_kernel(spec.alpha + eps, 0.0, d);
    case KernelFamily::Riesz: {
      // (2pi)^{-d} S_{d-1} Int r^{d-1-alpha} e^{-eps r^2/2} dr, in closed form.
      const double p = d - spec.alpha;
      return std::pow(2.0 * kPi, -d) * sphere_surface(d) * 0.5 *
             std::pow(2.0 / eps, 0.5 * p) * std::tgamma(0.5 * p);
    }
    default: {
      auto f = [&](double r) {
        return std::exp(-0.5 * eps * r * r) * spectral_density_radial(spec, r) *
               std::pow(r, d - 1);
      };
      return std::pow(2.0 * kPi, -d) * sphere_surface(d) * integrate_zero_inf(f, rel_tol);
    }
  }
}

namespace {

// E |rho e1 + Z|^{-p} for a d-dimensional standard normal Z, via
//   (2^{p/2} Gamma(p/2))^{-1} Int_0^1 v^{p/2-1} (1-v)^{(d-p)/2-1} e^{-v rho^2/2} dv.
double gaussian_inverse_moment(double p, int d, double rho, double tol) {
  const double a = 0.5 * p;              // exponent of v
  const double b = 0.5 * (d - p);        // exponent of 1-v
  const double rho2 = rho * rho;
  IntegrandWithDistance f = [&](double v, double dist0, double dist1) {
    return std::pow(dist0, a - 1.0) * std::pow(dist1, b - 1.0) * std::exp(-0.5 * v * rho2);
  };
  const double c = 1.0 / (std::pow(2.0, a) * std::tgamma(a));
  return c * integrate_tanh_sinh(f, 0.0, 1.0, tol);
}

double mollified_riesz(const KernelSpec& spec, double eps, double r, double tol) {
  const double p = spec.d - spec.alpha;
  const double g = spec.closed_form_constant();
  return g * std::pow(eps, -0.5 * p) * gaussian_inverse_moment(p, spec.d, r / std::sqrt(eps), tol);
}

double mollified_bessel(const KernelSpec& spec, double eps, double r, double tol) {
  // p_eps * f with the Gaussian factor of the w-representation convolved:
  //   gamma' Int w^{(alpha-d)/2-1} e^{-w} (2w/(2w+eps))^{d/2} e^{-r^2/(2(2w+eps))} dw
  const double ex = 0.5 * (spec.alpha - spec.d) - 1.0;
  const double r2 = r * r;
  const double hd = 0.5 * spec.d;
  auto f = [&](double w) {
    const double denom = 2.0 * w + eps;
    return std::pow(w, ex) * std::exp(-w - r2 / (2.0 * denom)) *
           std::pow(2.0 * w / denom, hd);
  };
  return spec.closed_form_constant() * integrate_zero_inf(f, tol);
}

double mollified_poisson(const KernelSpec& spec, double eps, double r, double tol) {
  // Gaussian subordination of the Poisson kernel:
  //   (p_eps * f)(x) = pi^{-1/2} Int_0^inf u^{-1/2} e^{-u} p_{eps + alpha^2/(2u)}(x) du
  const double a2 = spec.alpha * spec.alpha;
  const double r2 = r * r;
  auto f = [&](double u) {
    return std::pow(u, -0.5) * std::exp(-u) * heat_kernel(eps + a2 / (2.0 * u), r2, spec.d);
  };
  return integrate_zero_inf(f, tol) / std::sqrt(kPi);
}

}  // namespace

double mollified_kernel_radial(const KernelSpec& spec, double eps, double r, double rel_tol) {
  if (!(eps > 0.0)) throw InvalidSpec("mollified_kernel: eps must be > 0");
  switch (spec.family) {
    case KernelFamily::Heat:
      return heat_kernel(spec.alpha + eps, r * r, spec.d);
    case KernelFamily::Riesz:
      return mollified_riesz(spec, eps, r, rel_tol);
    case KernelFamily::Bessel:
      return mollified_bessel(spec, eps, r, rel_tol);
    case KernelFamily::Poisson:
      return mollified_poisson(spec, eps, r, rel_tol);
  }
  return 0.0;
}

double mollified_kernel(const KernelSpec& spec, double eps, std::span<const double> x,
                        double rel_tol) {
  if (int(x.size()) != spec.d) throw InvalidSpec("mollified_kernel: dimension mismatch");
  return mollified_kernel_radial(spec, eps, norm(x), rel_tol);
}

double mollified_kernel_spectral(const KernelSpec& spec, double eps, double rho,
                                 double rel_tol) {
  if (!(eps > 0.0)) throw InvalidSpec("mollified_kernel_spectral: eps must be > 0");
  if (rho == 0.0) return mollified_at_origin(spec, eps, rel_tol);
  const int d = spec.d;
  auto damped = [&](double r) {
    return std::exp(-0.5 * eps * r * r) * spectral_density_radial(spec, r);
  };
  // Truncate where the Gaussian damping is below 1e-18.
  const double r_max = std::sqrt(2.0 * 41.5 / eps);
  switch (d) {
    case 1: {
      auto f = [&](double r) { return std::cos(r * rho) * damped(r); };
      return integrate_gk(f, 0.0, r_max, rel_tol, 1e-300, 20000) / kPi;
    }
    case 2: {
      auto f = [&](double r) { return std::cyl_bessel_j(0.0, r * rho) * damped(r) * r; };
      return integrate_gk(f, 0.0, r_max, rel_tol, 1e-300, 20000) / (2.0 * kPi);
    }
    case 3: {
      auto f = [&](double r) { return r * std::sin(r * rho) * damped(r); };
      return integrate_gk(f, 0.0, r_max, rel_tol, 1e-300, 20000) / (2.0 * kPi * kPi * rho);
    }
    default:
      throw Unsupported("mollified_kernel_spectral: radial reduction implemented for d <= 3");
  }
}

MollifiedKernel::MollifiedKernel(const KernelSpec& spec, double eps, double x_max)
    : spec_(spec), eps_(eps) {
  if (!(eps > 0.0)) throw InvalidSpec("MollifiedKernel: eps must be > 0");
  origin_ = mollified_at_origin(spec, eps);
  constexpr int kTableSize = 16384;
  switch (spec.family) {
    case KernelFamily::Heat:
      heat_norm_ = std::pow(2.0 * kPi * (spec.alpha + eps), -0.5 * spec.d);
      heat_rate_ = 0.5 / (spec.alpha + eps);
      break;
    case KernelFamily::Riesz: {
      // Scale-invariant profile M(rho) = E|rho e1 + Z|^{alpha-d}:
      // (p_eps*f)(x) = gamma eps^{-(d-alpha)/2} M(|x|/sqrt(eps)).
      const double p = spec.d - spec.alpha;
      scale_ = spec.closed_form_constant() * std::pow(eps, -0.5 * p);
      arg_scale_ = 1.0 / std::sqrt(eps);
      grid_max_ = 48.0;
      table_.resize(kTableSize + 1);
      for (int i = 0; i <= kTableSize; ++i) {
        const double rho = grid_max_ * i / kTableSize;
        table_[i] = gaussian_inverse_moment(p, spec.d, rho, 1e-10);
      }
      inv_h_ = kTableSize / grid_max_;
      asym_c0_ = 1.0;
      asym_c2_ = 0.5 * p * (p + 2.0 - spec.d);
      break;
    }
    case KernelFamily::Bessel:
    case KernelFamily::Poisson: {
      scale_ = 1.0;
      arg_scale_ = 1.0;
      grid_max_ = x_max;
      table_.resize(kTableSize + 1);
      for (int i = 0; i <= kTableSize; ++i) {
        const double r = grid_max_ * i / kTableSize;
        table_[i] = mollified_kernel_radial(spec, eps, r, 1e-10);
      }
      inv_h_ = kTableSize / grid_max_;
      break;
    }
  }
}

double MollifiedKernel::lookup(double rho) const {
  if (rho >= grid_max_) {
    if (spec_.family == KernelFamily::Riesz) {
      const double p = spec_.d - spec_.alpha;
      return asym_c0_ * std::pow(rho, -p) * (1.0 + asym_c2_ / (rho * rho));
    }
    return mollified_kernel_radial(spec_, eps_, rho / arg_scale_, 1e-10) / scale_;
  }
  const double u = rho * inv_h_;
  const std::size_t i = std::size_t(u);
  const double w = u - double(i);
  return table_[i] * (1.0 - w) + table_[i + 1] * w;
}

double MollifiedKernel::at_dist2(double r2) const {
  if (spec_.family == KernelFamily::Heat) return heat_norm_ * std::exp(-heat_rate_ * r2);
  return scale_ * lookup(std::sqrt(r2) * arg_scale_);
}

double MollifiedKernel::at(std::span<const double> x) const { return at_dist2(dist2(x)); }

double KernelBoundConstants::bound_at(double u_plus_v, int d, double alpha) const {
  if (C) return *C;
  return *D * std::pow(u_plus_v, -0.5 * (d - alpha));
}

KernelBoundConstants bound_constants(const KernelSpec& spec) {
  KernelBoundConstants out;
  switch (spec.family) {
    case KernelFamily::Heat:
      out.C = std::pow(2.0 * kPi * spec.alpha, -0.5 * spec.d);
      out.provenance = KernelBoundConstants::Provenance::DerivedSharp;
      break;
    case KernelFamily::Poisson: {
      const double cd = std::pow(kPi, -0.5 * (spec.d + 1)) * std::tgamma(0.5 * (spec.d + 1));
      out.C = cd * std::pow(spec.alpha, -double(spec.d));
      out.provenance = KernelBoundConstants::Provenance::DerivedSharp;
      break;
    }
    case KernelFamily::Riesz: {
      // Supremum of J_f (u+v)^{(d-a)/2} is attained at y = z:
      // E|Z|^{-(d-a)} = 2^{-(d-a)/2} Gamma(a/2)/Gamma(d/2) over N(0, I_d).
      const double p = spec.d - spec.alpha;
      out.D = spec.closed_form_constant() * std::pow(2.0, -0.5 * p) *
              std::tgamma(0.5 * spec.alpha) / std::tgamma(0.5 * spec.d);
      out.provenance = KernelBoundConstants::Provenance::DerivedSharp;
      break;
    }
    case KernelFamily::Bessel: {
      if (!(spec.alpha < spec.d))
        throw InvalidSpec("Bessel bound constant requires alpha < d");
      const double p = spec.d - spec.alpha;
      const double k = 2.0 * spec.d / (spec.alpha * p);
      out.D = spec.closed_form_constant() * k * std::pow(2.0, 0.5 * p);
      out.provenance = KernelBoundConstants::Provenance::ProofChain;
      break;
    }
  }
  return out;
}

double j_f_closed(const KernelSpec& spec, double u, double v, std::span<const double> y,
                  std::span<const double> z) {
  if (!(u > 0.0) || !(v > 0.0)) throw InvalidSpec("j_f: u,v must be > 0");
  if (int(y.size()) != spec.d || int(z.size()) != spec.d)
    throw InvalidSpec("j_f: dimension mismatch");
  double r2 = 0.0;
  for (int i = 0; i < spec.d; ++i) r2 += (y[i] - z[i]) * (y[i] - z[i]);
  const double s = u + v;
  if (spec.family == KernelFamily::Heat) return heat_kernel(spec.alpha + s, r2, spec.d);
  if (spec.family == KernelFamily::Riesz && r2 == 0.0) {
    const double p = spec.d - spec.alpha;
    return spec.closed_form_constant() * std::pow(s, -0.5 * p) * std::pow(2.0, -0.5 * p) *
           std::tgamma(0.5 * spec.alpha) / std::tgamma(0.5 * spec.d);
  }
  throw NoClosedForm("j_f closed form: heat family, or Riesz with y = z");
}

Estimate j_f_mc(const KernelSpec& spec, double u, double v, std::span<const double> y,
                std::span<const double> z, std::uint64_t n_samples, RngStream stream) {
  if (!(u > 0.0) || !(v > 0.0)) throw InvalidSpec("j_f: u,v must be > 0");
  if (int(y.size()) != spec.d || int(z.size()) != spec.d)
    throw InvalidSpec("j_f: dimension mismatch");
  const double su = std::sqrt(u), sv = std::sqrt(v);
  StreamingStats stats;
  std::vector<double> x(spec.d);
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    for (int c = 0; c < spec.d; ++c)
      x[c] = y[c] - z[c] + su * stream.normal() - sv * stream.normal();
    stats.add(eval_kernel(spec, x));
  }
  return Estimate::from_stats(stats);
}

}  // namespace shemfc
