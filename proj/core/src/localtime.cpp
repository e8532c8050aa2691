#include "shemfc/localtime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shemfc/errors.hpp"

namespace shemfc {

double kernel_table_span(double t) {
  // Covers path separations up to ~8 standard deviations of B^1_t - B^2_t.
  return 8.0 * std::sqrt(2.0 * t) + 4.0;
}

WeightSpec WeightSpec::fractional(double H) {
  if (!(H > 0.5 && H < 1.0)) throw InvalidSpec("fractional weight requires 1/2 < H < 1");
  return WeightSpec{Kind::Fractional, H, 0.0, 0.0};
}

WeightSpec WeightSpec::diagonal() { return WeightSpec{Kind::Diagonal, 0.5, 0.0, 0.0}; }

WeightSpec WeightSpec::mollified(double H, double delta, double horizon) {
  if (!(H >= 0.5 && H < 1.0)) throw InvalidSpec("mollified weight requires 1/2 <= H < 1");
  if (!(delta > 0.0) || !(horizon > 0.0))
    throw InvalidSpec("mollified weight requires delta > 0 and horizon > 0");
  return WeightSpec{Kind::Mollified, H, delta, horizon};
}

double WeightSpec::gamma() const {
  if (kind == Kind::Fractional) return H * (2.0 * H - 1.0);
  if (kind == Kind::Diagonal) return 1.0;
  throw Unsupported("gamma(): no pointwise dominating constant tracked for eta_delta");
}

namespace {

// Window [max(0, t-s-delta), t-s] of the delta-mollifier applied at time s.
void mollifier_window(double horizon, double delta, double s, double* lo, double* hi) {
  *hi = horizon - s;
  *lo = std::max(0.0, horizon - s - delta);
}

}  // namespace

double eval_weight(const WeightSpec& w, double r, double s) {
  switch (w.kind) {
    case WeightSpec::Kind::Fractional: {
      if (r == s) throw SingularPoint("fractional weight is singular on the diagonal");
      const double alpha_h = w.H * (2.0 * w.H - 1.0);
      return alpha_h * std::pow(std::abs(r - s), 2.0 * w.H - 2.0);
    }
    case WeightSpec::Kind::Diagonal:
      return r == s ? 1.0 : 0.0;
    case WeightSpec::Kind::Mollified: {
      if (!(r >= 0.0 && r <= w.horizon && s >= 0.0 && s <= w.horizon))
        throw InvalidSpec("mollified weight: arguments outside [0, horizon]");
      double a, b, c, e;
      mollifier_window(w.horizon, w.delta, r, &a, &b);
      mollifier_window(w.horizon, w.delta, s, &c, &e);
      const double inv_d2 = 1.0 / (w.delta * w.delta);
      if (w.H == 0.5) {
        const double overlap = std::max(0.0, std::min(b, e) - std::max(a, c));
        return overlap * inv_d2;
      }
      return fractional_cell_weight(w.H, a, b, c, e) * inv_d2;
    }
  }
  return 0.0;
}

LocalTimeGrid::LocalTimeGrid(const WeightSpec& w, double t, int n_steps)
    : t_(t), n_(n_steps) {
  if (!(t > 0.0) || n_steps < 1) throw InvalidSpec("LocalTimeGrid: t > 0 and n_steps >= 1");
  const double dt = t / n_steps;
  diagonal_ = (w.kind == WeightSpec::Kind::Diagonal);

  // Node i sits at the center of its cell [max(0, (i-1/2)dt), min(t, (i+1/2)dt)].
  auto cell_lo = [&](int i) { return std::max(0.0, (i - 0.5) * dt); };
  auto cell_hi = [&](int i) { return std::min(t, (i + 0.5) * dt); };

  if (diagonal_) {
    node_w_.resize(n_ + 1);
    for (int i = 0; i <= n_; ++i) {
      node_w_[i] = cell_hi(i) - cell_lo(i);
      total_ += node_w_[i];
    }
    return;
  }

  cell_w_.resize(std::size_t(n_ + 1) * (n_ + 1));
  for (int i = 0; i <= n_; ++i) {
    for (int j = 0; j <= n_; ++j) {
      double wij;
      if (w.kind == WeightSpec::Kind::Fractional) {
        wij = fractional_cell_weight(w.H, cell_lo(i), cell_hi(i), cell_lo(j), cell_hi(j));
      } else {
        const double area = (cell_hi(i) - cell_lo(i)) * (cell_hi(j) - cell_lo(j));
        wij = eval_weight(w, i * dt, j * dt) * area;
      }
      cell_w_[std::size_t(i) * (n_ + 1) + j] = wij;
      total_ += wij;
    }
  }
}

double local_time_on_paths(const PathBundle& paths, int path_a, int path_b,
                           const LocalTimeGrid& grid, const MollifiedKernel& kernel) {
  if (path_a < 0 || path_b < 0 || path_a >= paths.k || path_b >= paths.k)
    throw GridMismatch("local_time_on_paths: path index out of range");
  if (grid.n_steps() > paths.n_steps ||
      std::abs(grid.t() / grid.n_steps() - paths.dt()) > 1e-12 * paths.dt())
    throw GridMismatch("local_time_on_paths: grid and bundle step sizes differ");

  // TODO: optional Brownian-bridge refinement of the nodal values; the
  // O(sqrt(dt)) bias of reusing grid values is monitored by the
  // grid-refinement test but never corrected.
  const int n = grid.n_steps();
  const int d = paths.d;
  double acc = 0.0;
  if (grid.diagonal()) {
    for (int i = 0; i <= n; ++i) {
      const double* a = paths.point(path_a, i);
      const double* b = paths.point(path_b, i);
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) r2 += (a[c] - b[c]) * (a[c] - b[c]);
      acc += grid.node_weight(i) * kernel.at_dist2(r2);
    }
    return acc;
  }
  for (int i = 0; i <= n; ++i) {
    const double* a = paths.point(path_a, i);
    for (int j = 0; j <= n; ++j) {
      const double* b = paths.point(path_b, j);
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) r2 += (a[c] - b[c]) * (a[c] - b[c]);
      acc += grid.cell_weight(i, j) * kernel.at_dist2(r2);
    }
  }
  return acc;
}

double local_time_on_paths(const NoiseModel& model, const WeightSpec& w,
                           const PathBundle& paths, double eps) {
  if (paths.k < 2) throw GridMismatch("local_time_on_paths: bundle needs k >= 2 paths");
  const LocalTimeGrid grid(w, paths.t, paths.n_steps);
  const MollifiedKernel kernel(model.kernel, eps, kernel_table_span(paths.t));
  return local_time_on_paths(paths, 0, 1, grid, kernel);
}

Estimate local_time_moments(const NoiseModel& model, const WeightSpec& w, double t,
                            double eps, int n, std::uint64_t n_paths, int n_steps,
                            RngStream stream, int workers) {
  if (n < 1) throw InvalidSpec("local_time_moments: moment order n >= 1");
  const LocalTimeGrid grid(w, t, n_steps);
  const MollifiedKernel kernel(model.kernel, eps, kernel_table_span(t));
  auto stats = parallel_reduce_multi(
      0, n_paths, 1,
      [&](std::uint64_t i, std::span<double> out) {
        const PathBundle b = sample_bundle(stream.substream(i), 2, model.d, t, n_steps);
        const double L = local_time_on_paths(b, 0, 1, grid, kernel);
        out[0] = std::pow(L, double(n));
      },
      resolve_workers(workers));
  return Estimate::from_stats(stats[0]);
}

Estimate exp_moment(const NoiseModel& model, const WeightSpec& w, double t, double eps,
                    double lambda, std::uint64_t n_paths, int n_steps, RngStream stream,
                    int workers, bool* regime_warning) {
  if (!(lambda > 0.0)) throw InvalidSpec("exp_moment: lambda must be > 0");
  if (regime_warning) {
    const double radius = exp_moment_bound_radius(model, w, t);
    *regime_warning = lambda >= radius;
  }
  const LocalTimeGrid grid(w, t, n_steps);
  const MollifiedKernel kernel(model.kernel, eps, kernel_table_span(t));
  auto stats = parallel_reduce_multi(
      0, n_paths, 1,
      [&](std::uint64_t i, std::span<double> out) {
        const PathBundle b = sample_bundle(stream.substream(i), 2, model.d, t, n_steps);
        out[0] = std::exp(lambda * local_time_on_paths(b, 0, 1, grid, kernel));
      },
      resolve_workers(workers));
  return Estimate::from_stats(stats[0]);
}

namespace {

// D(t) of the exponential-moment bound; equals the alpha_n bound rate of the
// matching noise model (gamma = alpha_H cancels for the fractional weight,
// ||eta|| <= 1 for the diagonal one).
double bound_rate_for_weight(const NoiseModel& model, const WeightSpec& w, double t) {
  const bool fractional = w.kind == WeightSpec::Kind::Fractional;
  if (fractional && !(model.H > 0.5 && std::abs(model.H - w.H) < 1e-12))
    throw Unsupported("exp_moment_bound: fractional weight requires matching H > 1/2");
  if (w.kind == WeightSpec::Kind::Diagonal && model.H != 0.5)
    throw Unsupported("exp_moment_bound: diagonal weight requires H = 1/2");
  if (w.kind == WeightSpec::Kind::Mollified)
    throw Unsupported("exp_moment_bound: no bound tracked for eta_delta");
  return alpha_bound_rate(model, t);
}

}  // namespace

double exp_moment_bound(const NoiseModel& model, const WeightSpec& w, double t,
                        double lambda, double c_star) {
  const KernelSpec& spec = model.kernel;
  if (spec.smooth()) {
    // C(t) = C_{alpha,d} gamma t^{2H} / alpha_H = C_{alpha,d} t^{2H} for the
    // fractional weight; C_{alpha,d} t for the diagonal one.
    const double C_ad = *bound_constants(spec).C;
    const double expo = (w.kind == WeightSpec::Kind::Diagonal) ? 1.0 : 2.0 * model.H;
    return std::exp(lambda * C_ad * std::pow(t, expo));
  }
  double rate;
  try {
    rate = bound_rate_for_weight(model, w, t);
  } catch (const ConditionViolated&) {
    return std::numeric_limits<double>::infinity();
  }
  const double a = 1.0 - 0.5 * (spec.d - spec.alpha);
  const auto phi = phi_series(lambda * rate, std::max(a, 0.0));
  if (a < 0.0 || !phi) return std::numeric_limits<double>::infinity();
  return c_star * *phi;
}

double exp_moment_bound_radius(const NoiseModel& model, const WeightSpec& w, double t) {
  const KernelSpec& spec = model.kernel;
  if (spec.smooth() || spec.d < spec.alpha + 2.0 - 1e-12)
    return std::numeric_limits<double>::infinity();
  if (spec.d > spec.alpha + 2.0 + 1e-12) return 0.0;
  try {
    return 1.0 / bound_rate_for_weight(model, w, t);
  } catch (const Error&) {
    return 0.0;
  }
}

ConvergenceStudy convergence_study(const NoiseModel& model, const WeightSpec& w, double t,
                                   const std::vector<double>& eps_list, std::uint64_t n_paths,
                                   int n_steps, RngStream stream, int workers) {
  if (eps_list.size() < 2) throw InvalidEpsList("convergence_study: need >= 2 eps values");
  for (std::size_t i = 0; i + 1 < eps_list.size(); ++i)
    if (!(eps_list[i] > eps_list[i + 1]))
      throw InvalidEpsList("convergence_study: eps list must be strictly decreasing");
  for (double e : eps_list)
    if (!(e > 0.0)) throw InvalidEpsList("convergence_study: eps must be > 0");

  const int m = int(eps_list.size());
  const LocalTimeGrid grid(w, t, n_steps);
  std::vector<MollifiedKernel> kernels;
  kernels.reserve(m);
  for (double e : eps_list) kernels.emplace_back(model.kernel, e, kernel_table_span(t));

  const int n_out = 2 * m + (m - 1);
  auto stats = parallel_reduce_multi(
      0, n_paths, n_out,
      [&](std::uint64_t i, std::span<double> out) {
        const PathBundle b = sample_bundle(stream.substream(i), 2, model.d, t, n_steps);
        double prev = 0.0;
        for (int k = 0; k < m; ++k) {
          const double L = local_time_on_paths(b, 0, 1, grid, kernels[k]);
          out[2 * k] = L;
          out[2 * k + 1] = L * L;
          if (k > 0) out[2 * m + (k - 1)] = (L - prev) * (L - prev);
          prev = L;
        }
      },
      resolve_workers(workers));

  ConvergenceStudy study;
  for (int k = 0; k < m; ++k) {
    ConvergenceRow row;
    row.eps = eps_list[k];
    row.moment1 = Estimate::from_stats(stats[2 * k]);
    row.moment2 = Estimate::from_stats(stats[2 * k + 1]);
    study.rows.push_back(row);
  }
  for (int k = 0; k + 1 < m; ++k)
    study.successive_l2.push_back(Estimate::from_stats(stats[2 * m + k]));
  return study;
}

}  // namespace shemfc
