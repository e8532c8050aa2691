#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "shemfc/analytic.hpp"
#include "shemfc/mc.hpp"

namespace shemfc {

/// A pair of time vectors (s, t) in (0, horizon)^n.
struct TimePair {
  std::vector<double> s;
  std::vector<double> t;
  double horizon = 0.0;

  TimePair() = default;
  TimePair(std::vector<double> s_vec, std::vector<double> t_vec, double horizon_t);
  int order() const { return int(s.size()); }
};

/// Symmetric PSD matrix sigma_jk = s_j ^ s_k + t_j ^ t_k  (^ = min); this is
/// the per-coordinate covariance of the Gaussian vector (B^1_{s_j} - B^2_{t_j}).
class SigmaMatrix {
 public:
  static SigmaMatrix from_time_pair(const TimePair& tp);
  static SigmaMatrix from_entries(int n, std::vector<double> row_major);

  int order() const { return n_; }
  double operator()(int j, int k) const { return a_[std::size_t(j) * n_ + k]; }
  double& entry(int j, int k) { return a_[std::size_t(j) * n_ + k]; }
  double trace() const;
  double min_eigenvalue() const;
  /// Determinant of (Sigma + shift I), via Cholesky.
  double shifted_determinant(double shift) const;
  bool diagonally_dominant(double shift) const;

 private:
  int n_ = 0;
  std::vector<double> a_;
};

SigmaMatrix sigma_matrix(const TimePair& tp);

/// psi_eps^{(n)} for the heat family, in closed form:
/// (2 pi)^{-nd/2} det(Sigma + (alpha+eps) I)^{-d/2}.
double psi_heat_closed(const NoiseModel& model, const SigmaMatrix& sigma, double eps = 0.0);

/// psi_eps^{(1)}(sigma11) = (p_{sigma11+eps} * f)(0); closed for heat and
/// Riesz, radial quadrature otherwise.
double psi_closed1(const NoiseModel& model, double sigma11, double eps = 0.0);

/// Deterministic psi_eps^{(2)} via the relative-angle reduction of the
/// double spectral integral (d <= 3; heat family any d via closed form).
double psi2_quadrature(const NoiseModel& model, const SigmaMatrix& sigma, double eps = 0.0,
                       int nodes = 96);

struct PsiClosed1 {};
struct PsiMc {
  std::uint64_t n_samples = 100000;
  RngStream stream{0, 0};
};
using PsiMethod = std::variant<PsiClosed1, PsiMc>;

struct PsiMcResult {
  Estimate est;
  std::uint64_t clip_count = 0;
  bool diag_dominant = true;
};

/// Importance-sampled spectral Monte Carlo for psi_eps^{(n)}: each block is
/// drawn from the radial proposal ~ e^{-(sigma_jj+eps)|xi|^2/2} g(xi), the
/// off-diagonal coupling enters as an exponential weight (clipped, with a
/// diagnostic, when the shifted matrix is not diagonally dominant).
PsiMcResult psi_n_mc(const NoiseModel& model, const SigmaMatrix& sigma, double eps,
                     std::uint64_t n_samples, RngStream stream, double clip_exponent = 40.0);

Estimate psi_n(const NoiseModel& model, const TimePair& tp, const PsiMethod& method,
               double eps = 0.0);

/// Chaos coefficient alpha_n(t) evaluation modes.
struct AlphaQuadrature {
  double rel_tol = 1e-8;
  int outer_nodes = 16;   // per axis, n = 2 tensor rule
  int psi2_nodes = 96;    // inner spectral reduction
  int workers = 0;
};
struct AlphaMc {
  std::uint64_t n_time_samples = 100000;
  std::uint64_t n_spectral_samples = 128;
  RngStream stream{0, 0};
  int workers = 0;
};
using AlphaMethod = std::variant<AlphaQuadrature, AlphaMc>;

enum class ChaosMode { Exact, Mc, BoundOnly };

struct ChaosCoefficient {
  int n = 0;
  Estimate value;
  double upper_bound = 0.0;
  ChaosMode mode = ChaosMode::Exact;
};

/// alpha_{n,eps}(t); eps = 0 gives alpha_n(t). Quadrature supports n <= 2.
ChaosCoefficient alpha_n(const NoiseModel& model, int n, double t, const AlphaMethod& method,
                         double eps = 0.0, double c_star = 1.0);

/// Growth bound on alpha_n(t): rough kernels C* D(t)^n (n!)^{(d-alpha)/2}
/// (requires H > (d-alpha)/4), smooth kernels C(t)^n with C(t) = C_{a,d} t^{2H}.
double alpha_n_bound(const NoiseModel& model, int n, double t, double c_star = 1.0);

/// D(t) of the alpha_n bound (rough kernels).
double alpha_bound_rate(const NoiseModel& model, double t);

struct SecondMomentResult {
  double value = 0.0;
  double std_error = 0.0;
  int truncation_order = 0;
  double tail_bound = 0.0;
  bool converged = false;
  std::vector<double> terms;  // alpha_n(t)/n! for n = 0..N
};

/// E|u_{t,x}|^2 for u0 = 1: sum_{n<=N} alpha_n(t)/n! with the analytic tail
/// bound sum_{n>N} bound(n)/n!; N is the smallest order with tail < tail_tol
/// (converged=false if n_max is reached first, e.g. near T0).
SecondMomentResult second_moment_series(const NoiseModel& model, double t, int n_max,
                                        double tail_tol, const AlphaMc& mc_config,
                                        double c_star = 1.0);

}  // namespace shemfc
