#include "shemfc/chaos.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "shemfc/errors.hpp"
#include "shemfc/quadrature.hpp"

namespace shemfc {

namespace {
constexpr double kPi = std::numbers::pi;
}

TimePair::TimePair(std::vector<double> s_vec, std::vector<double> t_vec, double horizon_t)
    : s(std::move(s_vec)), t(std::move(t_vec)), horizon(horizon_t) {
  if (s.empty() || s.size() != t.size()) throw InvalidSpec("TimePair: need |s| = |t| >= 1");
  if (!(horizon > 0.0)) throw InvalidSpec("TimePair: horizon must be > 0");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0 && s[i] < horizon && t[i] > 0.0 && t[i] < horizon))
      throw InvalidSpec("TimePair: entries must lie in (0, horizon)");
  }
}

SigmaMatrix SigmaMatrix::from_time_pair(const TimePair& tp) {
  SigmaMatrix m;
  m.n_ = tp.order();
  m.a_.resize(std::size_t(m.n_) * m.n_);
  for (int j = 0; j < m.n_; ++j)
    for (int k = 0; k < m.n_; ++k)
      m.a_[std::size_t(j) * m.n_ + k] =
          std::min(tp.s[j], tp.s[k]) + std::min(tp.t[j], tp.t[k]);
  const double floor = -1e-12 * m.trace();
  if (m.min_eigenvalue() < floor)
    throw InvalidSpec("sigma_matrix: covariance matrix is not PSD");
  return m;
}

SigmaMatrix SigmaMatrix::from_entries(int n, std::vector<double> row_major) {
  if (n < 1 || row_major.size() != std::size_t(n) * n)
    throw InvalidSpec("SigmaMatrix::from_entries: size mismatch");
  SigmaMatrix m;
  m.n_ = n;
  m.a_ = std::move(row_major);
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k)
      if (m(j, k) != m(k, j)) throw InvalidSpec("SigmaMatrix: not symmetric");
  return m;
}

double SigmaMatrix::trace() const {
  double s = 0.0;
  for (int j = 0; j < n_; ++j) s += (*this)(j, j);
  return s;
}

double SigmaMatrix::min_eigenvalue() const {
  Eigen::Map<const Eigen::MatrixXd> m(a_.data(), n_, n_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  return solver.eigenvalues().minCoeff();
}

double SigmaMatrix::shifted_determinant(double shift) const {
  Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(a_.data(), n_, n_);
  m.diagonal().array() += shift;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw InvalidSpec("SigmaMatrix: shifted matrix is not positive definite");
  double det = 1.0;
  for (int i = 0; i < n_; ++i) det *= llt.matrixL()(i, i) * llt.matrixL()(i, i);
  return det;
}

bool SigmaMatrix::diagonally_dominant(double shift) const {
  for (int j = 0; j < n_; ++j) {
    double off = 0.0;
    for (int k = 0; k < n_; ++k)
      if (k != j) off += std::abs((*this)(j, k));
    if ((*this)(j, j) + shift < off) return false;
  }
  return true;
}

SigmaMatrix sigma_matrix(const TimePair& tp) { return SigmaMatrix::from_time_pair(tp); }

double psi_heat_closed(const NoiseModel& model, const SigmaMatrix& sigma, double eps) {
  if (model.kernel.family != KernelFamily::Heat)
    throw NoClosedForm("psi_heat_closed: heat kernel only");
  const int n = sigma.order();
  const int d = model.d;
  const double det = sigma.shifted_determinant(model.kernel.alpha + eps);
  return std::pow(2.0 * kPi, -0.5 * n * d) * std::pow(det, -0.5 * d);
}

double psi_closed1(const NoiseModel& model, double sigma11, double eps) {
  return mollified_at_origin(model.kernel, sigma11 + eps);
}

namespace {

// Scaled cross-term factors for the relative-angle reduction; all return
// factor(z) * e^{-z} to pair with exponents written as -(a r^2 + b q^2)/2 + z.
double scaled_cosh(double z) { return 0.5 * (1.0 + std::exp(-2.0 * z)); }

double scaled_sinhc(double z) {
  if (z < 1e-8) return 1.0 - z;  // (1 - e^{-2z})/(2z) ~ 1 - z for small z
  return -std::expm1(-2.0 * z) / (2.0 * z);
}

double scaled_bessel_i0(double z) {
  if (z < 30.0) return std::cyl_bessel_i(0.0, z) * std::exp(-z);
  const double iz = 1.0 / z;
  // Asymptotic series for e^{-z} I0(z).
  return (1.0 + 0.125 * iz + 0.0703125 * iz * iz + 0.0732421875 * iz * iz * iz) /
         std::sqrt(2.0 * kPi * z);
}

}  // namespace

double psi2_quadrature(const NoiseModel& model, const SigmaMatrix& sigma, double eps,
                       int nodes) {
  if (sigma.order() != 2) throw InvalidSpec("psi2_quadrature: needs a 2x2 sigma matrix");
  if (model.kernel.family == KernelFamily::Heat) return psi_heat_closed(model, sigma, eps);
  const int d = model.d;
  if (d > 3) throw Unsupported("psi2_quadrature: d <= 3 outside the heat family");
  const KernelSpec& spec = model.kernel;
  const double a = sigma(0, 0) + eps;
  const double b = sigma(1, 1) + eps;
  const double c = std::abs(sigma(0, 1));
  if (!(a > 0.0 && b > 0.0)) throw InvalidSpec("psi2_quadrature: needs positive diagonal");
  const double ctil = c / std::sqrt(a * b);
  if (ctil >= 1.0 - 1e-6)
    throw InvalidSpec("psi2_quadrature: off-diagonal at the PSD boundary; increase eps");

  // After r = x/sqrt(a), q = y/sqrt(b), the exponent is
  // -(x^2+y^2)/2 + ctil x y; substitute x = u^2, y = v^2 to absorb the
  // radial-density endpoint singularity of rough kernels. Along the diagonal
  // the exponent decays like (1-ctil) x^2, which sets the box; exponentially
  // decaying spectral densities cap it independently of ctil.
  double box = 6.5 / std::sqrt(1.0 - ctil);
  const double scale = std::sqrt(std::min(a, b));
  if (spec.family == KernelFamily::Poisson)
    box = std::min(box, 45.0 / spec.alpha * scale + 10.0);
  if (box > 4000.0)
    throw InvalidSpec("psi2_quadrature: sigma matrix too close to degenerate; increase eps");
  // Keep the transverse ridge width (~1 in x, ~1/(2 sqrt(x)) in u) resolved.
  nodes = std::min(320, std::max(nodes, int(3.0 * std::sqrt(box))));
  const double u_max = std::sqrt(box);
  const QuadRule& rule = gauss_legendre(nodes);

  double prefactor = 0.0;
  switch (d) {
    case 1: prefactor = 4.0 * std::pow(2.0 * kPi, -2.0); break;
    case 2: prefactor = 4.0 * kPi * kPi * std::pow(2.0 * kPi, -4.0); break;
    case 3: prefactor = 16.0 * kPi * kPi * std::pow(2.0 * kPi, -6.0); break;
  }

  std::vector<double> xs(nodes), jac(nodes), gval(nodes);
  for (int i = 0; i < nodes; ++i) {
    const double u = 0.5 * u_max * (rule.nodes[i] + 1.0);
    const double x = u * u;
    xs[i] = x;
    // weight * (du -> dx jacobian 2u) * radial power x^{d-1}
    jac[i] = 0.5 * u_max * rule.weights[i] * 2.0 * u * std::pow(x, d - 1);
    gval[i] = spectral_density_radial(spec, x / std::sqrt(a));
  }
  std::vector<double> gval_b(nodes);
  for (int i = 0; i < nodes; ++i) gval_b[i] = spectral_density_radial(spec, xs[i] / std::sqrt(b));

  double sum = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double x = xs[i];
    double row = 0.0;
    for (int j = 0; j < nodes; ++j) {
      const double y = xs[j];
      const double z = ctil * x * y;
      double cross = 0.0;
      switch (d) {
        case 1: cross = scaled_cosh(z); break;
        case 2: cross = scaled_bessel_i0(z); break;
        case 3: cross = scaled_sinhc(z); break;
      }
      const double expo = -0.5 * (x * x + y * y) + z;
      row += jac[j] * gval_b[j] * cross * std::exp(expo);
    }
    sum += jac[i] * gval[i] * row;
  }
  // Undo the scaling r = x/sqrt(a), q = y/sqrt(b): dr dq and the radial
  // powers r^{d-1} q^{d-1} contribute (ab)^{-d/2}.
  return prefactor * sum * std::pow(a * b, -0.5 * d);
}

namespace {

// Gamma(shape, 1) sampling, Marsaglia-Tsang, deterministic given the stream.
double sample_gamma(RngStream& rng, double shape) {
  if (shape < 1.0) {
    const double u = rng.uniform();
    return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

void sample_sphere(RngStream& rng, std::span<double> out) {
  double norm2 = 0.0;
  for (double& v : out) {
    v = rng.normal();
    norm2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : out) v *= inv;
}

// Piecewise-linear radial proposal for families without an exact sampler.
// Samples r from the normalized PL interpolation of
//   u(r) = r^{d-1} g(r) e^{-a r^2 / 2},
// and reports the exact importance ratio u(r)/q(r).
class RadialProposal {
 public:
  RadialProposal(const KernelSpec& spec, int d, double a) : spec_(spec), d_(d), a_(a) {
    const double r_max = std::sqrt(2.0 * 45.0 / a) + 5.0 / std::sqrt(a);
    const int n = 4096;
    grid_.resize(n + 1);
    dens_.resize(n + 1);
    cdf_.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
      grid_[i] = r_max * i / n;
      dens_[i] = unnorm(grid_[i]);
    }
    cdf_[0] = 0.0;
    for (int i = 1; i <= n; ++i)
      cdf_[i] = cdf_[i - 1] + 0.5 * (dens_[i - 1] + dens_[i]) * (grid_[i] - grid_[i - 1]);
    total_ = cdf_[n];
    if (!(total_ > 0.0)) throw ProposalUnavailable("radial proposal has zero mass");
  }

  // Returns r and multiplies *ratio by u(r)/q(r) where q is the sampled density.
  double sample(RngStream& rng, double* ratio) const {
    const double target = rng.uniform() * total_;
    std::size_t lo = 0, hi = cdf_.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (cdf_[mid] <= target ? lo : hi) = mid;
    }
    const double h = grid_[lo + 1] - grid_[lo];
    const double d0 = dens_[lo], d1 = dens_[lo + 1];
    const double need = target - cdf_[lo];
    // Invert the quadratic CDF of the linear density piece.
    double w;
    const double slope = (d1 - d0) / h;
    if (std::abs(slope) * h < 1e-12 * (d0 + 1e-300)) {
      w = need / std::max(d0, 1e-300);
    } else {
      const double disc = d0 * d0 + 2.0 * slope * need;
      w = (std::sqrt(std::max(disc, 0.0)) - d0) / slope;
    }
    w = std::clamp(w, 0.0, h);
    const double r = grid_[lo] + w;
    const double q = (d0 + slope * w) / total_;  // sampled density at r
    *ratio *= unnorm(r) / std::max(q, 1e-300);
    return r;
  }

 private:
  double unnorm(double r) const {
    if (r == 0.0) return d_ > 1 ? 0.0 : spectral_density_radial(spec_, 0.0);
    return std::pow(r, d_ - 1) * spectral_density_radial(spec_, r) * std::exp(-0.5 * a_ * r * r);
  }

  KernelSpec spec_;
  int d_;
  double a_;
  std::vector<double> grid_, dens_, cdf_;
  double total_ = 0.0;
};

}  // namespace

PsiMcResult psi_n_mc(const NoiseModel& model, const SigmaMatrix& sigma, double eps,
                     std::uint64_t n_samples, RngStream stream, double clip_exponent) {
  const int n = sigma.order();
  const int d = model.d;
  const KernelSpec& spec = model.kernel;
  PsiMcResult out;
  out.diag_dominant = sigma.diagonally_dominant(eps);

  // Per-block normalizers Z_j = (2pi)^d psi1(sigma_jj): the estimator is
  // prod_j Z_j/(2pi)^d * E[ratio * cross-weight] with a per-family sampler.
  std::vector<double> a(n);
  double log_scale = 0.0;
  for (int j = 0; j < n; ++j) {
    a[j] = sigma(j, j) + eps;
    if (!(a[j] > 0.0)) throw InvalidSpec("psi_n_mc: needs sigma_jj + eps > 0");
  }

  enum class Sampler { Gauss, GammaRadial, Table };
  Sampler kind;
  double gamma_shape = 0.0;
  std::vector<RadialProposal> tables;
  switch (spec.family) {
    case KernelFamily::Heat:
      kind = Sampler::Gauss;
      for (int j = 0; j < n; ++j)
        log_scale += 0.5 * d * std::log(2.0 * kPi / (a[j] + spec.alpha));
      break;
    case KernelFamily::Riesz: {
      kind = Sampler::GammaRadial;
      gamma_shape = 0.5 * (d - spec.alpha);
      // Z_j = S_{d-1} 2^{k-1} Gamma(k) a_j^{-k}, k = (d-alpha)/2
      for (int j = 0; j < n; ++j)
        log_scale += std::log(sphere_surface(d)) + (gamma_shape - 1.0) * std::log(2.0) +
                     std::lgamma(gamma_shape) - gamma_shape * std::log(a[j]);
      break;
    }
    default:
      kind = Sampler::Table;
      tables.reserve(n);
      for (int j = 0; j < n; ++j) tables.emplace_back(spec, d, a[j]);
      for (int j = 0; j < n; ++j) log_scale += std::log(sphere_surface(d));
      break;
  }
  log_scale -= n * d * std::log(2.0 * kPi);

  StreamingStats stats;
  std::vector<double> xi(std::size_t(n) * d);
  std::uint64_t clips = 0;
  for (std::uint64_t it = 0; it < n_samples; ++it) {
    double log_ratio = 0.0;
    for (int j = 0; j < n; ++j) {
      std::span<double> block(xi.data() + std::size_t(j) * d, std::size_t(d));
      switch (kind) {
        case Sampler::Gauss: {
          const double sd = 1.0 / std::sqrt(a[j] + spec.alpha);
          for (double& v : block) v = sd * stream.normal();
          break;
        }
        case Sampler::GammaRadial: {
          const double r = std::sqrt(sample_gamma(stream, gamma_shape) * 2.0 / a[j]);
          sample_sphere(stream, block);
          for (double& v : block) v *= r;
          break;
        }
        case Sampler::Table: {
          double ratio = 1.0;
          const double r = tables[j].sample(stream, &ratio);
          sample_sphere(stream, block);
          for (double& v : block) v *= r;
          log_ratio += std::log(std::max(ratio, 1e-300));
          // table ratio is u/q with q normalized; Z folds into the ratio
          break;
        }
      }
    }
    double cross = 0.0;
    for (int j = 0; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        double dot = 0.0;
        for (int c = 0; c < d; ++c) dot += xi[std::size_t(j) * d + c] * xi[std::size_t(k) * d + c];
        cross -= sigma(j, k) * dot;
      }
    double expo = cross + log_ratio;
    if (expo > clip_exponent) {
      expo = clip_exponent;
      ++clips;
    }
    stats.add(std::exp(expo));
  }
  out.clip_count = clips;
  Estimate e = Estimate::from_stats(stats);
  const double scale = std::exp(log_scale);
  e.value *= scale;
  e.std_error *= scale;
  out.est = e;
  return out;
}

Estimate psi_n(const NoiseModel& model, const TimePair& tp, const PsiMethod& method,
               double eps) {
  const SigmaMatrix sigma = SigmaMatrix::from_time_pair(tp);
  if (std::holds_alternative<PsiClosed1>(method)) {
    if (tp.order() != 1) throw NoClosedForm("psi_n: Closed1 is only available for n = 1");
    return Estimate::exact(psi_closed1(model, sigma(0, 0), eps));
  }
  const auto& mc = std::get<PsiMc>(method);
  return psi_n_mc(model, sigma, eps, mc.n_samples, mc.stream).est;
}

double alpha_bound_rate(const NoiseModel& model, double t) {
  const KernelSpec& spec = model.kernel;
  if (!spec.rough()) throw Unsupported("alpha_bound_rate: rough kernels only");
  if (!(spec.alpha < spec.d)) throw InvalidSpec("alpha_bound_rate: requires alpha < d");
  const double p = spec.d - spec.alpha;
  if (!(model.H > 0.25 * p)) throw ConditionViolated("alpha bound requires H > (d-alpha)/4");
  const double D = *bound_constants(spec).D;
  const double one_ph = 1.0 - p / (4.0 * model.H);  // 1 + h with h = -(d-alpha)/(4H)
  const double expo = 2.0 * model.H - 0.5 * p;
  return D * std::pow(2.0, -0.5 * p) * model.beta_H * model.beta_H *
         std::pow(std::tgamma(one_ph), 2.0 * model.H) * std::pow(one_ph, -expo) *
         std::pow(t, expo);
}

double alpha_n_bound(const NoiseModel& model, int n, double t, double c_star) {
  if (n < 0) throw InvalidSpec("alpha_n_bound: n >= 0");
  if (!(c_star >= 1.0)) throw InvalidSpec("alpha_n_bound: C* must be >= 1");
  const KernelSpec& spec = model.kernel;
  if (spec.smooth()) {
    if (n == 0) return 1.0;
    const double C_ad = *bound_constants(spec).C;
    return std::pow(C_ad * std::pow(t, 2.0 * model.H), double(n));
  }
  if (n == 0) return c_star;
  const double rate = alpha_bound_rate(model, t);
  const double p = spec.d - spec.alpha;
  return c_star * std::exp(n * std::log(rate) + 0.5 * p * std::lgamma(double(n) + 1.0));
}

namespace {

// 1-D integral over s of the singular-weight inner integral, with the
// substitution v = (s-u)^{2H-1} that removes the |s-u|^{2H-2} factor.
double alpha1_quadrature(const NoiseModel& model, double t, double eps, double rel_tol) {
  auto psi1 = [&](double sigma11) { return psi_closed1(model, sigma11, eps); };
  if (model.white_in_time()) {
    return integrate_tanh_sinh([&](double s) { return psi1(2.0 * s); }, 0.0, t,
                               std::max(rel_tol, 1e-12));
  }
  const double H = model.H;
  const double q = 1.0 / (2.0 * H - 1.0);
  auto outer = [&](double s) {
    const double v_max = std::pow(s, 2.0 * H - 1.0);
    auto inner = [&](double v) { return psi1(2.0 * s - std::pow(v, q)); };
    return integrate_gk(inner, 0.0, v_max, rel_tol * 0.1, 1e-300, 4000);
  };
  return 2.0 * H * integrate_tanh_sinh(outer, 0.0, t, std::max(rel_tol, 1e-12));
}

double alpha2_quadrature(const NoiseModel& model, double t, double eps,
                         const AlphaQuadrature& cfg) {
  auto psi2 = [&](double s1, double t1, double s2, double t2) {
    SigmaMatrix sig = SigmaMatrix::from_entries(
        2, {s1 + t1, std::min(s1, s2) + std::min(t1, t2), std::min(s1, s2) + std::min(t1, t2),
            s2 + t2});
    if (model.kernel.family == KernelFamily::Heat) return psi_heat_closed(model, sig, eps);
    return psi2_quadrature(model, sig, eps, cfg.psi2_nodes);
  };

  // The two time pairs use interlaced rules of order m and m+1: Gauss nodes
  // of consecutive orders never coincide, so the sigma matrix stays strictly
  // nondegenerate at every tensor node (rough-kernel psi2 blows up on the
  // exact diagonal).
  const int m = cfg.outer_nodes;
  auto unit_rule = [](int n) {
    const QuadRule& rule = gauss_legendre(n);
    std::pair<std::vector<double>, std::vector<double>> out;
    out.first.resize(n);
    out.second.resize(n);
    for (int i = 0; i < n; ++i) {
      out.first[i] = 0.5 * (rule.nodes[i] + 1.0);
      out.second[i] = 0.5 * rule.weights[i];
    }
    return out;
  };
  const auto [node_a, w_a] = unit_rule(m);
  const auto [node_b, w_b] = unit_rule(m + 1);

  auto run_outer = [&](int count, const std::function<void(int)>& eval_outer,
                       std::vector<double>& partial) {
    const int workers = std::max(1, resolve_workers(cfg.workers));
    std::atomic<int> next{0};
    auto work = [&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        eval_outer(i);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers - 1; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    double sum = 0.0;
    for (double v : partial) sum += v;
    return sum;
  };

  if (model.white_in_time()) {
    // Int_{[0,t]^2} psi2(s1,s2,s1,s2); both axes substitute s = t z^2 to
    // absorb the rough spectral singularity at s -> 0.
    std::vector<double> partial(m, 0.0);
    auto eval_outer = [&](int i) {
      const double z = node_a[i];
      const double s1 = t * z * z;
      double acc = 0.0;
      for (int j = 0; j <= m; ++j) {
        const double y = node_b[j];
        const double s2 = t * y * y;
        acc += w_b[j] * 2.0 * y * psi2(s1, s1, s2, s2);
      }
      partial[i] = w_a[i] * 2.0 * z * t * t * acc;
    };
    return run_outer(m, eval_outer, partial);
  }

  // H > 1/2: two ordering classes (global s<->t swap is a symmetry), each
  // with v_j = (s_j - t_j)^{2H-1} absorbing the weight singularities.
  const double H = model.H;
  const double q = 1.0 / (2.0 * H - 1.0);
  const double pref = std::pow(model.alpha_H / (2.0 * H - 1.0), 2.0);

  std::vector<double> partial(m, 0.0);
  auto eval_outer = [&](int i1) {
    const double s1 = t * node_a[i1];
    const double vmax1 = std::pow(s1, 2.0 * H - 1.0);
    double acc = 0.0;
    for (int j1 = 0; j1 < m; ++j1) {
      const double u1 = s1 - std::pow(vmax1 * node_a[j1], q);
      for (int i2 = 0; i2 <= m; ++i2) {
        const double s2 = t * node_b[i2];
        const double vmax2 = std::pow(s2, 2.0 * H - 1.0);
        for (int j2 = 0; j2 <= m; ++j2) {
          const double u2 = s2 - std::pow(vmax2 * node_b[j2], q);
          const double w = w_a[j1] * w_b[i2] * w_b[j2] * vmax1 * vmax2 * t;
          // ordering (s_j > t_j, s_k > t_k) and (s_j > t_j, s_k < t_k)
          acc += w * (psi2(s1, u1, s2, u2) + psi2(s1, u1, u2, s2));
        }
      }
    }
    partial[i1] = w_a[i1] * t * acc;
  };
  const double sum = run_outer(m, eval_outer, partial);
  return 2.0 * pref * sum;
}

// Exact sampler for the pair density ~ |s-u|^{2H-2} on (0,t)^2:
// w = |s-u| from the power law (inverse CDF), thinned by (1 - w/t).
void sample_weighted_pair(RngStream& rng, double H, double t, double* s, double* u) {
  for (;;) {
    const double w = t * std::pow(rng.uniform(), 1.0 / (2.0 * H - 1.0));
    if (rng.uniform() > 1.0 - w / t) continue;
    const double m = rng.uniform() * (t - w);
    if (rng.uniform() < 0.5) {
      *s = m + w;
      *u = m;
    } else {
      *s = m;
      *u = m + w;
    }
    return;
  }
}

ChaosCoefficient alpha_n_mc(const NoiseModel& model, int n, double t, const AlphaMc& mc,
                            double eps, double c_star) {
  const bool heat = model.kernel.family == KernelFamily::Heat;
  auto evaluator = [&](std::uint64_t idx, std::span<double> out) {
    RngStream rng = mc.stream.substream(idx);
    std::vector<double> s(n), u(n);
    if (model.white_in_time()) {
      for (int j = 0; j < n; ++j) s[j] = u[j] = t * rng.uniform();
    } else {
      for (int j = 0; j < n; ++j) sample_weighted_pair(rng, model.H, t, &s[j], &u[j]);
    }
    SigmaMatrix sig = SigmaMatrix::from_entries(n, [&] {
      std::vector<double> a(std::size_t(n) * n);
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          a[std::size_t(j) * n + k] = std::min(s[j], s[k]) + std::min(u[j], u[k]);
      return a;
    }());
    double psi;
    if (heat) {
      psi = psi_heat_closed(model, sig, eps);
    } else if (n == 1) {
      psi = psi_closed1(model, sig(0, 0), eps);
    } else {
      psi = psi_n_mc(model, sig, eps, mc.n_spectral_samples, rng.substream(0x951)).est.value;
    }
    out[0] = psi;
  };
  auto stats = parallel_reduce_multi(0, mc.n_time_samples, 1, evaluator,
                                     resolve_workers(mc.workers));
  const double time_mass = std::pow(t, (model.white_in_time() ? 1.0 : 2.0 * model.H) * n);
  Estimate est = Estimate::from_stats(stats[0]);
  est.value *= time_mass;
  est.std_error *= time_mass;

  ChaosCoefficient out;
  out.n = n;
  out.value = est;
  out.mode = ChaosMode::Mc;
  try {
    out.upper_bound = alpha_n_bound(model, n, t, c_star);
  } catch (const Error&) {
    out.upper_bound = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

ChaosCoefficient alpha_n(const NoiseModel& model, int n, double t, const AlphaMethod& method,
                         double eps, double c_star) {
  if (n < 0) throw InvalidSpec("alpha_n: n >= 0");
  if (!(t > 0.0)) throw InvalidSpec("alpha_n: t > 0");
  ChaosCoefficient out;
  out.n = n;
  if (n == 0) {
    out.value = Estimate::exact(1.0);
    out.mode = ChaosMode::Exact;
    out.upper_bound = model.kernel.smooth() ? 1.0 : std::max(1.0, c_star);
    return out;
  }
  if (std::holds_alternative<AlphaQuadrature>(method)) {
    const auto& cfg = std::get<AlphaQuadrature>(method);
    if (n > 2) throw Unsupported("alpha_n: quadrature is implemented for n <= 2");
    const double v = (n == 1) ? alpha1_quadrature(model, t, eps, cfg.rel_tol)
                              : alpha2_quadrature(model, t, eps, cfg);
    out.value = Estimate::exact(v);
    out.mode = ChaosMode::Exact;
    try {
      out.upper_bound = alpha_n_bound(model, n, t, c_star);
    } catch (const Error&) {
      out.upper_bound = std::numeric_limits<double>::infinity();
    }
    return out;
  }
  return alpha_n_mc(model, n, t, std::get<AlphaMc>(method), eps, c_star);
}

namespace {

// sum_{n > N} bound(n)/n!; +inf when the terms do not decay.
double bound_tail(const NoiseModel& model, double t, int N, double c_star) {
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  int rising = 0;
  for (int n = N + 1; n < N + 50000; ++n) {
    double term;
    try {
      term = alpha_n_bound(model, n, t, c_star) / std::exp(std::lgamma(double(n) + 1.0));
    } catch (const ConditionViolated&) {
      return std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(term)) return std::numeric_limits<double>::infinity();
    sum += term;
    if (term >= prev) {
      if (++rising > 32) return std::numeric_limits<double>::infinity();
    } else {
      rising = 0;
    }
    if (term < 1e-16 * (sum + 1e-300) && term < prev) return sum;
    prev = term;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

SecondMomentResult second_moment_series(const NoiseModel& model, double t, int n_max,
                                        double tail_tol, const AlphaMc& mc_config,
                                        double c_star) {
  if (!(t > 0.0)) throw InvalidSpec("second_moment_series: t > 0");
  SecondMomentResult res;
  int N = 0;
  double tail = bound_tail(model, t, N, c_star);
  while (!(tail < tail_tol) && N < n_max) {
    ++N;
    tail = bound_tail(model, t, N, c_star);
  }
  res.truncation_order = N;
  res.tail_bound = tail;
  res.converged = tail < tail_tol;

  double value = 0.0;
  double var = 0.0;
  for (int n = 0; n <= N; ++n) {
    ChaosCoefficient c;
    if (n <= 2) {
      c = alpha_n(model, n, t, AlphaQuadrature{1e-8, 16, 96, mc_config.workers}, 0.0, c_star);
    } else {
      AlphaMc mc = mc_config;
      mc.stream = mc_config.stream.substream(0xA1F0 + std::uint64_t(n));
      c = alpha_n(model, n, t, mc, 0.0, c_star);
    }
    const double fact = std::exp(std::lgamma(double(n) + 1.0));
    res.terms.push_back(c.value.value / fact);
    value += c.value.value / fact;
    var += (c.value.std_error / fact) * (c.value.std_error / fact);
  }
  res.value = value;
  res.std_error = std::sqrt(var);
  return res;
}

}  // namespace shemfc
