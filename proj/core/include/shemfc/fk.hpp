#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shemfc/localtime.hpp"
#include "shemfc/regime.hpp"

namespace shemfc {

/// Bounded continuous initial condition from a small builtin family.
struct InitialCondition {
  enum class Family { Constant, Cosine, GaussBump };

  Family family = Family::Constant;
  double c = 1.0;  // the constant value (Constant family only)

  static InitialCondition constant(double value) { return {Family::Constant, value}; }
  static InitialCondition cosine() { return {Family::Cosine, 1.0}; }
  static InitialCondition gauss_bump() { return {Family::GaussBump, 1.0}; }

  bool is_constant() const { return family == Family::Constant; }
  double sup_norm() const { return family == Family::Constant ? std::abs(c) : 1.0; }
  double eval(std::span<const double> x) const;
};

/// p_t u0(x) by tensor Gauss-Hermite quadrature (exact for constants and at
/// t = 0).
double heat_semigroup(const InitialCondition& u0, double t, std::span<const double> x,
                      int n_gauss = 32);

struct MomentEstimate {
  int k = 2;
  double t = 0.0;
  std::vector<double> x;
  double eps = 0.0;
  int n_steps = 0;
  std::uint64_t n_samples = 0;
  Estimate value;
  std::uint64_t clip_count = 0;
  std::string regime_note;
};

struct FkConfig {
  double eps = 0.1;
  int n_steps = 128;
  std::uint64_t n_samples = 20000;
  RngStream stream{0, 0};
  int workers = 0;
  /// Cap on the per-sample pairwise-L sum; a fixed constant so results are
  /// worker-count independent. Clips are counted and reported, never silent.
  double exponent_cap = 46.0;
};

/// Feynman-Kac moment estimator:
/// E[u_{t,x}^k] ~ mean over bundles of prod_j u0(x + B^j_t) exp(sum_{i<j} L_{t,eps}^{ij}).
MomentEstimate fk_moment(const NoiseModel& model, const InitialCondition& u0, int k, double t,
                         std::span<const double> x, const FkConfig& cfg);

struct CompareReport {
  std::vector<double> eps_values;        // eps0, eps0/2, eps0/4
  std::vector<Estimate> fk_at_eps;       // common random numbers across eps
  Estimate fk;                           // extrapolated value (heuristic)
  bool extrapolated = false;
  SecondMomentResult series;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  bool agree = false;
};

/// Two independent routes to E[u_{t,x}^2] for u0 = 1: the chaos series with
/// its analytic tail bound against the k = 2 Feynman-Kac estimate with
/// Richardson eps-extrapolation (labeled heuristic). Agreement criterion:
/// |fk - series| <= max(3 SE, 0.02 series) + tail.
CompareReport compare_with_chaos(const NoiseModel& model, double t, double tail_tol,
                                 const FkConfig& fk_cfg, const AlphaMc& series_cfg,
                                 int series_n_max = 16, double c_star = 1.0);

}  // namespace shemfc
