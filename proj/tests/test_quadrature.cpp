#include <doctest.h>

#include <cmath>
#include <numbers>

#include "shemfc/errors.hpp"
#include "shemfc/quadrature.hpp"

using namespace shemfc;
namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("adaptive Gauss-Kronrod on smooth integrands") {
  CHECK(integrate_gk([](double x) { return std::sin(x); }, 0.0, kPi) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(integrate_gk([](double x) { return std::exp(-x * x); }, -8.0, 8.0) ==
        doctest::Approx(std::sqrt(kPi)).epsilon(1e-12));
  CHECK(integrate_gk([](double x) { return std::cos(40.0 * x); }, 0.0, 1.0) ==
        doctest::Approx(std::sin(40.0) / 40.0).epsilon(1e-10));
}

TEST_CASE("tanh-sinh handles endpoint singularities") {
  // int_0^1 x^{-1/2} dx = 2 (left endpoint at zero: the abscissa is exact)
  CHECK(integrate_tanh_sinh([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0) ==
        doctest::Approx(2.0).epsilon(1e-10));
  // int_0^1 log(x) dx = -1
  CHECK(integrate_tanh_sinh([](double x) { return std::log(x); }, 0.0, 1.0) ==
        doctest::Approx(-1.0).epsilon(1e-10));
  // Beta(1/2, 1/2) = pi. Reconstructing 1-x from the rounded abscissa caps
  // the plain interface near 1e-8; the distance-aware one is clean.
  CHECK(integrate_tanh_sinh(
            [](double x) { return 1.0 / std::sqrt(x * (1.0 - x)); }, 0.0, 1.0) ==
        doctest::Approx(kPi).epsilon(1e-7));
  const IntegrandWithDistance beta_f = [](double, double da, double db) {
    return 1.0 / std::sqrt(da * db);
  };
  CHECK(integrate_tanh_sinh(beta_f, 0.0, 1.0) == doctest::Approx(kPi).epsilon(1e-12));
}

TEST_CASE("half-line integral with endpoint singularity and decay") {
  // int_0^inf w^{-1/2} e^{-w} dw = Gamma(1/2)
  CHECK(integrate_zero_inf([](double w) { return std::exp(-w) / std::sqrt(w); }) ==
        doctest::Approx(std::sqrt(kPi)).epsilon(1e-9));
  // int_0^inf e^{-w} dw = 1
  CHECK(integrate_zero_inf([](double w) { return std::exp(-w); }) ==
        doctest::Approx(1.0).epsilon(1e-10));
  // int_0^inf w^3 e^{-w^2/2} dw = 2
  CHECK(integrate_zero_inf([](double w) { return w * w * w * std::exp(-0.5 * w * w); }) ==
        doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  for (int n : {4, 16, 48, 96}) {
    const QuadRule& rule = gauss_legendre(n);
    double sum_w = 0.0, sum_x2 = 0.0;
    for (int i = 0; i < n; ++i) {
      sum_w += rule.weights[i];
      sum_x2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
    }
    CHECK(sum_w == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(sum_x2 == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    // degree 2n-1 monomial
    double high = 0.0;
    const int p = 2 * n - 2;
    for (int i = 0; i < n; ++i) high += rule.weights[i] * std::pow(rule.nodes[i], p);
    CHECK(high == doctest::Approx(2.0 / (p + 1)).epsilon(1e-10));
  }
}

TEST_CASE("gauss-hermite moments of the e^{-x^2} weight") {
  for (int n : {8, 32, 64}) {
    const QuadRule& rule = gauss_hermite(n);
    double m0 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
      m0 += rule.weights[i];
      m2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
      m4 += rule.weights[i] * std::pow(rule.nodes[i], 4);
    }
    CHECK(m0 == doctest::Approx(std::sqrt(kPi)).epsilon(1e-12));
    CHECK(m2 == doctest::Approx(0.5 * std::sqrt(kPi)).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(0.75 * std::sqrt(kPi)).epsilon(1e-12));
  }
}

TEST_CASE("quadrature failure is reported") {
  // Non-integrable singularity.
  CHECK_THROWS_AS(integrate_tanh_sinh([](double x) { return 1.0 / x; }, 0.0, 1.0, 1e-12),
                  QuadratureFailure);
}
