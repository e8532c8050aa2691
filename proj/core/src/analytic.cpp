#include "shemfc/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "shemfc/errors.hpp"
#include "shemfc/mc.hpp"

namespace shemfc {

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: requires x > 0");
  return std::lgamma(x);
}

std::optional<double> simplex_integral(int n, double t, double h) {
  if (n < 1) throw InvalidSpec("simplex_integral: n must be >= 1");
  if (!(t > 0.0)) throw InvalidSpec("simplex_integral: t must be > 0");
  if (!(1.0 + h > 0.0)) return std::nullopt;
  const double log_val = n * log_gamma(1.0 + h) - log_gamma(n * (1.0 + h) + 1.0) +
                         n * (1.0 + h) * std::log(t);
  return std::exp(log_val);
}

std::optional<double> phi_series(double x, double a, double tol) {
  if (x < 0.0 || a < 0.0) throw InvalidSpec("phi_series: requires x, a >= 0");
  if (!(tol > 0.0)) throw InvalidSpec("phi_series: tol must be > 0");
  if (a == 0.0) {
    if (x >= 1.0) return std::nullopt;
    return 1.0 / (1.0 - x);  // geometric series
  }
  double sum = 1.0;
  double term = 1.0;
  for (long n = 1; n < 2000000; ++n) {
    const double ratio = x / std::pow(double(n), a);
    term *= ratio;
    sum += term;
    if (!std::isfinite(sum)) return sum;  // finite in theory, astronomically large
    if (term < tol * sum && ratio < 0.5) return sum;
  }
  return std::nullopt;
}

double fractional_cell_weight(double H, double a, double b, double c, double e) {
  auto phi = [H](double x) { return std::pow(std::abs(x), 2.0 * H); };
  return 0.5 * (phi(b - c) + phi(a - e) - phi(a - c) - phi(b - e));
}

namespace {

// Ratio alpha_H Int Int phi phi |t-s|^{2H-2} / (Int phi^{1/H})^{2H} for a
// nonnegative step function on m uniform pieces of [0,1].
class StepRatio {
 public:
  StepRatio(double H, int m) : H_(H), m_(m), cell_(std::size_t(m) * m) {
    const double dx = 1.0 / m;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        cell_[std::size_t(i) * m + j] =
            fractional_cell_weight(H, i * dx, (i + 1) * dx, j * dx, (j + 1) * dx);
  }

  double operator()(const std::vector<double>& phi) const {
    double num = 0.0;
    for (int i = 0; i < m_; ++i) {
      double row = 0.0;
      for (int j = 0; j < m_; ++j) row += cell_[std::size_t(i) * m_ + j] * phi[j];
      num += phi[i] * row;
    }
    double den = 0.0;
    const double dx = 1.0 / m_;
    for (int i = 0; i < m_; ++i) den += std::pow(phi[i], 1.0 / H_) * dx;
    if (den <= 0.0) return 0.0;
    return num / std::pow(den, 2.0 * H_);
  }

  int pieces() const { return m_; }

 private:
  double H_;
  int m_;
  std::vector<double> cell_;
};

double coordinate_ascent(const StepRatio& ratio, std::vector<double> phi, int sweeps) {
  const int m = ratio.pieces();
  double best = ratio(phi);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double improved = 0.0;
    for (int i = 0; i < m; ++i) {
      // Golden-section on phi[i] in [0, 4*current_scale].
      double scale = 0.0;
      for (double v : phi) scale = std::max(scale, v);
      double lo = 0.0, hi = 4.0 * std::max(scale, 1e-3);
      const double gr = 0.6180339887498949;
      double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
      auto eval_at = [&](double v) {
        const double save = phi[i];
        phi[i] = v;
        const double r = ratio(phi);
        phi[i] = save;
        return r;
      };
      double f1 = eval_at(x1), f2 = eval_at(x2);
      for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + gr * (hi - lo);
          f2 = eval_at(x2);
        } else {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - gr * (hi - lo);
          f1 = eval_at(x1);
        }
      }
      const double xb = 0.5 * (lo + hi);
      const double fb = eval_at(xb);
      if (fb > best) {
        phi[i] = xb;
        improved += fb - best;
        best = fb;
      }
    }
    if (improved < 1e-10 * best) break;
  }
  return best;
}

std::mutex g_beta_mutex;
std::map<std::pair<double, int>, double> g_ratio_cache;

}  // namespace

double beta_h_ratio_sup(double H, int pieces) {
  if (!(H > 0.5 && H < 1.0)) throw InvalidSpec("beta_h_ratio_sup: requires 1/2 < H < 1");
  {
    std::lock_guard<std::mutex> g(g_beta_mutex);
    auto it = g_ratio_cache.find({H, pieces});
    if (it != g_ratio_cache.end()) return it->second;
  }
  StepRatio ratio(H, pieces);
  double best = 0.0;
  // Flat start plus a few deterministic random restarts.
  {
    std::vector<double> flat(pieces, 1.0);
    best = std::max(best, coordinate_ascent(ratio, flat, 20));
  }
  RngStream rng(0x5EBAu, 0xB417u);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<double> phi(pieces);
    for (double& v : phi) v = rng.uniform();
    best = std::max(best, coordinate_ascent(ratio, phi, 12));
  }
  std::lock_guard<std::mutex> g(g_beta_mutex);
  g_ratio_cache[{H, pieces}] = best;
  return best;
}

double beta_h_constant(double H, std::optional<double> override) {
  if (!(H >= 0.5 && H < 1.0)) throw InvalidSpec("beta_h_constant: requires 1/2 <= H < 1");
  if (H == 0.5) return 1.0;
  if (override) {
    if (!(*override > 0.0)) throw InvalidSpec("beta_h_constant: override must be > 0");
    return *override;
  }
  return std::sqrt(1.05 * beta_h_ratio_sup(H));
}

NoiseModel::NoiseModel(double hurst, KernelSpec k, std::optional<double> beta_override)
    : H(hurst), d(k.d), kernel(k) {
  if (!(H >= 0.5 && H < 1.0)) throw InvalidSpec("NoiseModel: requires 1/2 <= H < 1");
  alpha_H = H * (2.0 * H - 1.0);
  beta_H = beta_h_constant(H, beta_override);
}

}  // namespace shemfc
