#include "shemfc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>

#include "shemfc/errors.hpp"

namespace shemfc {

namespace {

// 15-point Kronrod extension of 7-point Gauss (QUADPACK constants).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct SegmentResult {
  double integral;
  double error;
};

SegmentResult gk15(const Integrand& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double result_g = fc * kWg[3];
  double result_k = fc * kWgk[7];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kXgk[i];
    const double fsum = f(c - dx) + f(c + dx);
    result_k += fsum * kWgk[i];
    if (i % 2 == 1) result_g += fsum * kWg[i / 2];
  }
  result_g *= h;
  result_k *= h;
  return {result_k, std::abs(result_k - result_g)};
}

struct Segment {
  double a, b, integral, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

}  // namespace

double integrate_gk(const Integrand& f, double a, double b, double rel_tol,
                    double abs_tol, int max_segments) {
  if (a == b) return 0.0;
  std::priority_queue<Segment> queue;
  SegmentResult r = gk15(f, a, b);
  queue.push({a, b, r.integral, r.error});
  double total = r.integral;
  double total_err = r.error;
  int segments = 1;
  while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (segments >= max_segments)
      throw QuadratureFailure("integrate_gk: tolerance not reached after " +
                              std::to_string(segments) + " segments");
    Segment worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    SegmentResult left = gk15(f, worst.a, mid);
    SegmentResult right = gk15(f, mid, worst.b);
    total += left.integral + right.integral - worst.integral;
    total_err += left.error + right.error - worst.error;
    queue.push({worst.a, mid, left.integral, left.error});
    queue.push({mid, worst.b, right.integral, right.error});
    ++segments;
  }
  return total;
}

namespace {

double tanh_sinh_ladder(const IntegrandWithDistance& f, double a, double b, double tol,
                        int max_level) {
  if (a == b) return 0.0;
  const double m = 0.5 * (b - a);
  const double half_pi = 0.5 * std::numbers::pi;

  // Endpoint distances come from the stable forms
  // 1 -+ tanh(s) = 2/(1 + e^{+-2s}), so singular endpoint factors can be
  // evaluated without cancellation however deep the node ladder goes.
  auto eval = [&](double t) -> double {
    const double s = half_pi * std::sinh(t);
    const double w = half_pi * std::cosh(t) / (std::cosh(s) * std::cosh(s));
    double da, db, x;
    if (t >= 0.0) {
      db = m * (2.0 / (1.0 + std::exp(2.0 * s)));
      da = (b - a) - db;
      x = b - db;
    } else {
      da = m * (2.0 / (1.0 + std::exp(-2.0 * s)));
      db = (b - a) - da;
      x = a + da;
    }
    const double v = f(x, da, db);
    return std::isfinite(v) ? v * w : 0.0;
  };

  const double t_max = 4.0;  // endpoint distance ~ exp(-pi/2 sinh 4) << eps
  double h = 1.0;
  double sum = eval(0.0);
  for (double t = h; t <= t_max; t += h) sum += eval(t) + eval(-t);
  double integral = h * sum;

  int settled = 0;
  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    double add = 0.0;
    for (double t = h; t <= t_max; t += 2.0 * h) add += eval(t) + eval(-t);
    const double next = 0.5 * integral + h * add;
    const double err = std::abs(next - integral);
    integral = next;
    // The level-to-level difference overstates the achieved accuracy by
    // roughly one level, so require two consecutive passes.
    if (level >= 3 && err <= tol * std::max(1e-300, std::abs(integral))) {
      if (++settled >= 2) return m * integral;
    } else {
      settled = 0;
    }
  }
  // Tanh-sinh converges doubly exponentially; reaching max_level without the
  // step-to-step difference settling signals a non-integrable singularity.
  throw QuadratureFailure("integrate_tanh_sinh: no convergence at max level");
}

}  // namespace

double integrate_tanh_sinh(const IntegrandWithDistance& f, double a, double b, double tol,
                           int max_level) {
  return tanh_sinh_ladder(f, a, b, tol, max_level);
}

double integrate_tanh_sinh(const Integrand& f, double a, double b, double tol,
                           int max_level) {
  return tanh_sinh_ladder([&](double x, double, double) { return f(x); }, a, b, tol,
                          max_level);
}

double integrate_zero_inf(const Integrand& f, double tol) {
  const double head = integrate_tanh_sinh(f, 0.0, 1.0, tol);
  // x = e^s maps (1,inf) to s in (0,inf); truncate where a decaying
  // integrand is below tol relative to the head part.
  auto tail_f = [&](double s) {
    const double x = std::exp(s);
    const double v = f(x) * x;
    return std::isfinite(v) ? v : 0.0;
  };
  double tail = 0.0;
  double s0 = 0.0;
  for (int block = 0; block < 64; ++block) {
    const double piece = integrate_tanh_sinh(tail_f, s0, s0 + 1.0, tol);
    tail += piece;
    s0 += 1.0;
    const double scale = std::max(std::abs(head + tail), 1e-300);
    if (std::abs(piece) < 0.25 * tol * scale) break;
  }
  return head + tail;
}

namespace {

QuadRule compute_gauss_legendre(int n) {
  QuadRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  return r;
}

QuadRule compute_gauss_hermite(int n) {
  QuadRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  const int m = (n + 1) / 2;
  double x = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      x -= 1.14 * std::pow(double(n), 0.426) / x;
    } else if (i == 2) {
      x = 1.86 * x - 0.86 * r.nodes[n - 1];
    } else if (i == 3) {
      x = 1.91 * x - 0.91 * r.nodes[n - 2];
    } else {
      x = 2.0 * x - r.nodes[n - i + 1];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = x * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(double(j) / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-14) break;
    }
    r.nodes[n - 1 - i] = x;
    r.nodes[i] = -x;
    r.weights[n - 1 - i] = 2.0 / (pp * pp);
    r.weights[i] = r.weights[n - 1 - i];
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

std::mutex g_rule_mutex;
std::map<int, QuadRule> g_gl_rules;
std::map<int, QuadRule> g_gh_rules;

}  // namespace

const QuadRule& gauss_legendre(int n) {
  std::lock_guard<std::mutex> g(g_rule_mutex);
  auto it = g_gl_rules.find(n);
  if (it == g_gl_rules.end()) it = g_gl_rules.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

const QuadRule& gauss_hermite(int n) {
  std::lock_guard<std::mutex> g(g_rule_mutex);
  auto it = g_gh_rules.find(n);
  if (it == g_gh_rules.end()) it = g_gh_rules.emplace(n, compute_gauss_hermite(n)).first;
  return it->second;
}

}  // namespace shemfc
