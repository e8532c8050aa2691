#pragma once

#include <cstdint>
#include <vector>

#include "shemfc/chaos.hpp"

namespace shemfc {

/// Time weight eta(r,s) of the weighted intersection local time.
///   Fractional: alpha_H |r-s|^{2H-2}              (H > 1/2)
///   Diagonal:   unit mass on {r = s}              (H = 1/2)
///   Mollified:  eta_delta, the two-sided window average of the fractional
///               weight (H > 1/2) or the window overlap / delta^2 (H = 1/2),
///               windows clipped to [0, horizon].
struct WeightSpec {
  enum class Kind { Fractional, Diagonal, Mollified };

  Kind kind = Kind::Diagonal;
  double H = 0.5;
  double delta = 0.0;
  double horizon = 0.0;

  static WeightSpec fractional(double H);
  static WeightSpec diagonal();
  static WeightSpec mollified(double H, double delta, double horizon);

  /// Constant gamma with eta(r,s) <= gamma |r-s|^{2H-2} (fractional weight).
  double gamma() const;
};

/// Pointwise weight value. Fractional is singular on the diagonal; the
/// diagonal weight is the indicator of {r = s} (a measure in the integrals).
double eval_weight(const WeightSpec& w, double r, double s);

/// Precomputed discretization weights on the uniform grid of [0, t]:
/// nodes sit at the centers of their cells, cell integrals of eta are exact
/// for the fractional weight (midpoint-rule areas for the mollified one),
/// and the diagonal weight reduces to trapezoidal node masses.
class LocalTimeGrid {
 public:
  LocalTimeGrid(const WeightSpec& w, double t, int n_steps);

  double t() const { return t_; }
  int n_steps() const { return n_; }
  bool diagonal() const { return diagonal_; }
  double node_weight(int i) const { return node_w_[i]; }
  double cell_weight(int i, int j) const { return cell_w_[std::size_t(i) * (n_ + 1) + j]; }
  /// Sum of all weights: t^{2H} for the fractional weight, t for the diagonal.
  double total_weight() const { return total_; }

 private:
  double t_;
  int n_;
  bool diagonal_;
  double total_ = 0.0;
  std::vector<double> node_w_;
  std::vector<double> cell_w_;
};

/// Radial table span covering path separations up to ~8 standard deviations
/// of B^1_t - B^2_t; used when building kernel tables for path loops.
double kernel_table_span(double t);

/// Discretized L_{t,eps} of paths (path_a, path_b) in the bundle:
/// sum over cells of W_ij * (p_eps * f)(B^a_{r_i} - B^b_{r_j}).
/// The grid horizon may be shorter than the bundle's as long as the step
/// sizes match (nested horizons reuse the same path).
double local_time_on_paths(const PathBundle& paths, int path_a, int path_b,
                           const LocalTimeGrid& grid, const MollifiedKernel& kernel);

/// Convenience overload: builds the grid and kernel table internally.
double local_time_on_paths(const NoiseModel& model, const WeightSpec& w,
                           const PathBundle& paths, double eps);

/// Monte Carlo E[L_{t,eps}^n] over independent path pairs.
Estimate local_time_moments(const NoiseModel& model, const WeightSpec& w, double t,
                            double eps, int n, std::uint64_t n_paths, int n_steps,
                            RngStream stream, int workers = 0);

/// Monte Carlo E[exp(lambda L_{t,eps})]. Sets *regime_warning (if given)
/// when lambda is at or above the finite exponential-moment radius.
Estimate exp_moment(const NoiseModel& model, const WeightSpec& w, double t, double eps,
                    double lambda, std::uint64_t n_paths, int n_steps, RngStream stream,
                    int workers = 0, bool* regime_warning = nullptr);

/// Upper bound for sup_eps E[exp(lambda L_{t,eps})] with the configured
/// constants: smooth kernels exp(lambda C(t)); rough kernels
/// C* Phi(lambda D(t), 1-(d-alpha)/2). +inf when divergent.
double exp_moment_bound(const NoiseModel& model, const WeightSpec& w, double t,
                        double lambda, double c_star = 1.0);

/// Radius of exponential integrability of the bound itself: 1/D(t) when
/// d = 2+alpha (rough), +inf otherwise.
double exp_moment_bound_radius(const NoiseModel& model, const WeightSpec& w, double t);

struct ConvergenceRow {
  double eps = 0.0;
  Estimate moment1;
  Estimate moment2;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  /// L2 Cauchy diagnostic between consecutive eps: E[(L_eps - L_eps')^2].
  std::vector<Estimate> successive_l2;
};

/// Per-eps moments on common random numbers (the same path bundles across
/// eps). eps_list must be strictly decreasing with >= 2 entries.
ConvergenceStudy convergence_study(const NoiseModel& model, const WeightSpec& w, double t,
                                   const std::vector<double>& eps_list, std::uint64_t n_paths,
                                   int n_steps, RngStream stream, int workers = 0);

}  // namespace shemfc
