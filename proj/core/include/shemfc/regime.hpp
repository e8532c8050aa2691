#pragma once

#include <map>
#include <string>

#include "shemfc/analytic.hpp"

namespace shemfc {

enum class Verdict { Exists, ExistsUpToT0, NotExists, UnknownOpenRegion };

std::string to_string(Verdict v);

/// Structured existence verdict and critical times. All critical times are
/// parametric in the configured constants (beta_H, D_{alpha,d} or C_{alpha,d},
/// C*): ratios and monotonicity are exact, absolute values are not.
struct RegimeReport {
  NoiseModel model;
  double c_star = 1.0;

  bool sufficient_ok = false;
  std::string sufficient_condition;  // which condition fired, if any
  bool necessary_ok = false;         // d < 4H + alpha for rough kernels
  bool dalang_ok = false;            // d < 2 + alpha for rough; always for smooth
  bool appendix_a_ok = false;        // H > (d - alpha)/4 for rough; always for smooth
  Verdict verdict = Verdict::Exists;

  double T0 = 0.0;                   // +inf when unconstrained
  std::map<int, double> t0;          // k -> t0(k), k = 2..K
  double lambda0_coef = 0.0;         // lambda0(t) = coef * t^exponent (rough, H > 1/2)
  double lambda0_exponent = 0.0;
  double bound_constant = 0.0;       // D_{alpha,d} or C_{alpha,d}

  /// Diagnostic for the open constant-bookkeeping question:
  /// lambda0(t0(2)) / 1 with gamma = alpha_H (1 would make
  /// "k(k-1)/2 < lambda0(t) iff t < t0(k)" an identity). 0 when not applicable.
  double t0_lambda0_ratio = 0.0;

  std::string parametric_note;

  std::string to_json(int indent = 2) const;
};

/// t0(k) = [k(k-1) D 2^{-2H} beta^2 Gamma(1-1/(2H))^{2H}]^{-1/(2H-1)} when
/// d = 2+alpha and H > 1/2; +inf when d < 2+alpha or the kernel is smooth;
/// 0 beyond the proven region (no positive horizon established).
double critical_time_t0(const NoiseModel& model, int k);

/// lambda0(t) of the exponential-moment statement, with the supplied gamma:
/// (1-1/(2H))^{2H-1} D^{-1} 2 gamma^{-1} beta^{-2} Gamma(1-1/(2H))^{-2H} t^{1-2H}
/// when d = 2+alpha; +inf when d < 2+alpha. Rough kernels with H > 1/2 only.
double lambda0(const NoiseModel& model, double t, double gamma);

RegimeReport existence_report(const NoiseModel& model, int max_moment_order,
                              double c_star = 1.0);

}  // namespace shemfc
