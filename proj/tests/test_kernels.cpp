#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "shemfc/errors.hpp"
#include "shemfc/kernels.hpp"
#include "shemfc/mc.hpp"
#include "shemfc/quadrature.hpp"

using namespace shemfc;

namespace {
constexpr double kPi = std::numbers::pi;
const double kInvTwoPi = 0.15915494309189535;    // 1/(2 pi)
const double kInvPi = 0.3183098861837907;        // 1/pi
const double kQuarterGauss = 0.28209479177387814;  // (4 pi)^{-1/2}
}  // namespace

TEST_CASE("closed-form kernel values") {
  SUBCASE("Riesz d=2 alpha=1 at |x|=1") {
    const KernelSpec spec(KernelFamily::Riesz, 1.0, 2);
    const double x[2] = {1.0, 0.0};
    CHECK(eval_kernel(spec, x) == doctest::Approx(kInvTwoPi).epsilon(1e-12));
  }
  SUBCASE("heat d=2 alpha=1 at the origin") {
    const KernelSpec spec(KernelFamily::Heat, 1.0, 2);
    const double x[2] = {0.0, 0.0};
    CHECK(eval_kernel(spec, x) == doctest::Approx(kInvTwoPi).epsilon(1e-12));
  }
  SUBCASE("Poisson d=1 alpha=1 at the origin") {
    const KernelSpec spec(KernelFamily::Poisson, 1.0, 1);
    const double x[1] = {0.0};
    CHECK(eval_kernel(spec, x) == doctest::Approx(kInvPi).epsilon(1e-12));
  }
  SUBCASE("Bessel d=1 alpha=2 equals e^{-|x|}/2") {
    const KernelSpec spec(KernelFamily::Bessel, 2.0, 1);
    const double x[1] = {1.0};
    CHECK(eval_kernel(spec, x) == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-8));
    const double x2[1] = {2.5};
    CHECK(eval_kernel(spec, x2) == doctest::Approx(0.5 * std::exp(-2.5)).epsilon(1e-8));
  }
}

TEST_CASE("kernel / spectral density are a Fourier pair (d = 1 cosine route)") {
  // f(x) = (1/pi) int_0^inf cos(r x) g(r) dr for integrable g.
  for (KernelFamily family : {KernelFamily::Bessel, KernelFamily::Heat, KernelFamily::Poisson}) {
    const double alpha = family == KernelFamily::Bessel ? 3.0 : 1.0;
    const KernelSpec spec(family, alpha, 1);
    const double x = 0.8;
    const double direct = eval_kernel_radial(spec, x);
    const double via_spectrum =
        integrate_gk([&](double r) { return std::cos(r * x) * spectral_density_radial(spec, r); },
                     0.0, 400.0, 1e-11, 1e-13, 20000) /
        kPi;
    CHECK(direct == doctest::Approx(via_spectrum).epsilon(1e-6));
  }
}

TEST_CASE("spectral density examples") {
  const double xi1[2] = {1.0, 0.0};
  CHECK(eval_spectral_density(KernelSpec(KernelFamily::Bessel, 2.0, 2), xi1) ==
        doctest::Approx(0.5).epsilon(1e-14));
  const double xi0[1] = {0.0};
  CHECK(eval_spectral_density(KernelSpec(KernelFamily::Heat, 1.0, 1), xi0) == 1.0);
  const double xi2[3] = {2.0, 0.0, 0.0};
  CHECK(eval_spectral_density(KernelSpec(KernelFamily::Riesz, 1.0, 3), xi2) ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("kernels are radial and positive") {
  RngStream r(7, 3);
  const std::vector<KernelSpec> specs = {
      KernelSpec(KernelFamily::Riesz, 1.3, 2), KernelSpec(KernelFamily::Bessel, 1.1, 2),
      KernelSpec(KernelFamily::Heat, 0.7, 2), KernelSpec(KernelFamily::Poisson, 2.0, 2)};
  for (const auto& spec : specs) {
    for (int rep = 0; rep < 20; ++rep) {
      const double rho = 0.05 + 3.0 * r.uniform();
      const double phi = 2.0 * kPi * r.uniform();
      const double x[2] = {rho * std::cos(phi), rho * std::sin(phi)};
      const double mx[2] = {-x[0], -x[1]};
      const double fx = eval_kernel(spec, x);
      CHECK(fx > 0.0);
      CHECK(eval_kernel(spec, mx) == doctest::Approx(fx).epsilon(1e-12));
      CHECK(fx == doctest::Approx(eval_kernel_radial(spec, rho)).epsilon(1e-12));
      CHECK(eval_spectral_density(spec, x) >= 0.0);
    }
  }
}

TEST_CASE("heat mollification is the semigroup") {
  RngStream r(8, 1);
  for (int rep = 0; rep < 30; ++rep) {
    const double alpha = 0.2 + 2.0 * r.uniform();
    const double eps = 0.1 + 1.5 * r.uniform();
    const double x[2] = {2.0 * r.normal(), 2.0 * r.normal()};
    const KernelSpec base(KernelFamily::Heat, alpha, 2);
    const KernelSpec shifted(KernelFamily::Heat, alpha + eps, 2);
    CHECK(mollified_kernel(base, eps, x) ==
          doctest::Approx(eval_kernel(shifted, x)).epsilon(1e-10));
  }
}

TEST_CASE("mollified kernel reference values and oracles") {
  SUBCASE("heat d=1: (p_1 * p_1)(0) = p_2(0)") {
    const KernelSpec spec(KernelFamily::Heat, 1.0, 1);
    const double x[1] = {0.0};
    CHECK(mollified_kernel(spec, 1.0, x) == doctest::Approx(kQuarterGauss).epsilon(1e-12));
  }

  SUBCASE("Riesz d=2 vs Monte Carlo E[f(sqrt(eps) Z)]") {
    const KernelSpec spec(KernelFamily::Riesz, 1.0, 2);
    const double x0[2] = {0.0, 0.0};
    const double value = mollified_kernel(spec, 0.5, x0);
    CHECK(std::isfinite(value));
    RngStream r(15, 0);
    StreamingStats mc;
    const double se_scale = std::sqrt(0.5);
    std::vector<double> y(2);
    for (int i = 0; i < 1000000; ++i) {
      y[0] = se_scale * r.normal();
      y[1] = se_scale * r.normal();
      mc.add(eval_kernel(spec, y));
    }
    CHECK(std::abs(value - mc.mean) < 3.0 * mc.std_error());
  }

  SUBCASE("spectral radial reduction agrees at x != 0 (d = 1, 2, 3)") {
    const std::vector<KernelSpec> specs = {KernelSpec(KernelFamily::Riesz, 0.6, 1),
                                           KernelSpec(KernelFamily::Riesz, 1.0, 2),
                                           KernelSpec(KernelFamily::Riesz, 1.4, 3),
                                           KernelSpec(KernelFamily::Poisson, 1.0, 2),
                                           KernelSpec(KernelFamily::Bessel, 1.5, 2)};
    for (const auto& spec : specs) {
      for (double rho : {0.0, 0.4, 1.7}) {
        const double a = mollified_kernel_radial(spec, 0.3, rho);
        const double b = mollified_kernel_spectral(spec, 0.3, rho, 1e-10);
        CHECK(a == doctest::Approx(b).epsilon(1e-6));
      }
    }
  }

  SUBCASE("smoothing decreases the origin value monotonically") {
    for (KernelFamily family :
         {KernelFamily::Riesz, KernelFamily::Bessel, KernelFamily::Heat, KernelFamily::Poisson}) {
      const double alpha = family == KernelFamily::Riesz ? 1.0 : 1.2;
      const KernelSpec spec(family, alpha, 2);
      double prev = std::numeric_limits<double>::infinity();
      for (double eps : {1.0, 2.0, 4.0, 8.0}) {
        const double v = mollified_at_origin(spec, eps);
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
      }
    }
  }

  SUBCASE("small eps recovers the kernel away from the origin") {
    const KernelSpec spec(KernelFamily::Poisson, 1.0, 2);
    const double x[2] = {0.9, -0.4};
    CHECK(mollified_kernel(spec, 1e-4, x) ==
          doctest::Approx(eval_kernel(spec, x)).epsilon(1e-3));
  }
}

TEST_CASE("fast mollified evaluator matches the direct quadrature") {
  RngStream r(77, 7);
  const std::vector<KernelSpec> specs = {
      KernelSpec(KernelFamily::Riesz, 1.0, 2), KernelSpec(KernelFamily::Riesz, 0.7, 3),
      KernelSpec(KernelFamily::Bessel, 1.4, 2), KernelSpec(KernelFamily::Heat, 1.0, 1),
      KernelSpec(KernelFamily::Poisson, 0.8, 1)};
  for (const auto& spec : specs) {
    const double eps = 0.15;
    const MollifiedKernel fast(spec, eps, 12.0);
    for (int rep = 0; rep < 25; ++rep) {
      const double rho = 14.0 * r.uniform();  // exercises the beyond-table branch too
      const double direct = mollified_kernel_radial(spec, eps, rho, 1e-10);
      CHECK(fast.at_dist2(rho * rho) == doctest::Approx(direct).epsilon(2e-5));
    }
    CHECK(fast.at_origin() == doctest::Approx(mollified_at_origin(spec, eps)).epsilon(1e-9));
  }
}

TEST_CASE("J_f closed forms and Monte Carlo") {
  SUBCASE("heat: J_f = p_{alpha+u+v}(y-z)") {
    const KernelSpec spec(KernelFamily::Heat, 1.0, 1);
    const double y[1] = {0.0}, z[1] = {0.0};
    CHECK(j_f_closed(spec, 0.5, 0.5, y, z) == doctest::Approx(kQuarterGauss).epsilon(1e-12));
    const Estimate mc = j_f_mc(spec, 0.5, 0.5, y, z, 1000000, RngStream(3, 30));
    CHECK(std::abs(mc.value - kQuarterGauss) < 3.0 * mc.std_error);
  }
  SUBCASE("Riesz at y = z") {
    const KernelSpec spec(KernelFamily::Riesz, 1.0, 2);
    const double y[2] = {0.3, -0.7};
    CHECK(j_f_closed(spec, 0.5, 0.5, y, y) ==
          doctest::Approx(0.19947114020071635).epsilon(1e-12));
    const Estimate mc = j_f_mc(spec, 0.5, 0.5, y, y, 1000000, RngStream(4, 40));
    CHECK(std::abs(mc.value - 0.19947114020071635) < 3.0 * mc.std_error);
  }
  SUBCASE("no closed form off the heat family away from y = z") {
    const KernelSpec spec(KernelFamily::Riesz, 1.0, 2);
    const double y[2] = {0.0, 0.0}, z[2] = {1.0, 0.0};
    CHECK_THROWS_AS(j_f_closed(spec, 0.5, 0.5, y, z), NoClosedForm);
  }
}

TEST_CASE("bound constants") {
  CHECK(*bound_constants(KernelSpec(KernelFamily::Heat, 1.0, 2)).C ==
        doctest::Approx(kInvTwoPi).epsilon(1e-12));
  CHECK(*bound_constants(KernelSpec(KernelFamily::Poisson, 2.0, 1)).C ==
        doctest::Approx(kInvTwoPi).epsilon(1e-12));
  CHECK(*bound_constants(KernelSpec(KernelFamily::Riesz, 1.0, 2)).D ==
        doctest::Approx(0.19947114020071635).epsilon(1e-12));
  CHECK(bound_constants(KernelSpec(KernelFamily::Riesz, 1.0, 2)).provenance ==
        KernelBoundConstants::Provenance::DerivedSharp);
  CHECK(bound_constants(KernelSpec(KernelFamily::Bessel, 1.2, 2)).provenance ==
        KernelBoundConstants::Provenance::ProofChain);
  CHECK_THROWS_AS(bound_constants(KernelSpec(KernelFamily::Bessel, 2.5, 2)), InvalidSpec);
}

TEST_CASE("J_f bound holds stochastically") {
  const std::vector<KernelSpec> specs = {
      KernelSpec(KernelFamily::Heat, 0.8, 2), KernelSpec(KernelFamily::Poisson, 1.1, 1),
      KernelSpec(KernelFamily::Riesz, 1.0, 2), KernelSpec(KernelFamily::Bessel, 1.2, 2)};
  RngStream r(55, 5);
  for (const auto& spec : specs) {
    const auto bc = bound_constants(spec);
    for (int rep = 0; rep < 25; ++rep) {
      const double u = 0.05 + r.uniform();
      const double v = 0.05 + r.uniform();
      std::vector<double> y(spec.d), z(spec.d);
      for (auto& c : y) c = r.normal();
      for (auto& c : z) c = r.normal();
      const Estimate est = j_f_mc(spec, u, v, y, z, 20000, r.substream(rep + 1));
      const double bound = bc.bound_at(u + v, spec.d, spec.alpha);
      CHECK(est.value <= bound * (1.0 + 3.0 * est.std_error / est.value) + 1e-12);
    }
  }
}

TEST_CASE("Riesz y = z normalizes the sharp bound") {
  // sup over (y,z) of J_f (u+v)^{(d-alpha)/2} is attained at y = z.
  const KernelSpec spec(KernelFamily::Riesz, 1.0, 2);
  const double D = *bound_constants(spec).D;
  RngStream r(66, 6);
  for (int rep = 0; rep < 40; ++rep) {
    const double u = 0.05 + r.uniform(), v = 0.05 + r.uniform();
    std::vector<double> y = {r.normal(), r.normal()};
    std::vector<double> z = {r.normal(), r.normal()};
    const Estimate est = j_f_mc(spec, u, v, y, z, 20000, r.substream(100 + rep));
    const double normalized = est.value * std::pow(u + v, 0.5 * (spec.d - spec.alpha));
    CHECK(normalized <= D * (1.0 + 3.0 * est.std_error / est.value) + 1e-12);
  }
  // and equality at y = z up to quadrature tolerance
  const double y0[2] = {0.4, 0.1};
  CHECK(j_f_closed(spec, 0.3, 0.4, y0, y0) * std::pow(0.7, 0.5) ==
        doctest::Approx(D).epsilon(1e-12));
}

TEST_CASE("kernel error paths") {
  const double zero2[2] = {0.0, 0.0};
  CHECK_THROWS_AS(eval_kernel(KernelSpec(KernelFamily::Riesz, 1.0, 2), zero2), SingularPoint);
  CHECK_THROWS_AS(eval_spectral_density(KernelSpec(KernelFamily::Riesz, 1.0, 2), zero2),
                  SingularPoint);
  CHECK_THROWS_AS(eval_kernel(KernelSpec(KernelFamily::Bessel, 1.0, 2), zero2), SingularPoint);
  CHECK_THROWS_AS(KernelSpec(KernelFamily::Riesz, 2.0, 2), InvalidSpec);
  CHECK_THROWS_AS(KernelSpec(KernelFamily::Heat, -1.0, 2), InvalidSpec);
  CHECK_THROWS_AS(KernelSpec(KernelFamily::Heat, 1.0, 0), InvalidSpec);
  const double x1[1] = {1.0};
  CHECK_THROWS_AS(eval_kernel(KernelSpec(KernelFamily::Heat, 1.0, 2), x1), InvalidSpec);
  CHECK_THROWS_AS(mollified_kernel(KernelSpec(KernelFamily::Heat, 1.0, 1), 0.0, x1),
                  InvalidSpec);
  // Bessel with alpha > d is bounded at the origin
  const double zero1[1] = {0.0};
  CHECK(eval_kernel(KernelSpec(KernelFamily::Bessel, 2.0, 1), zero1) ==
        doctest::Approx(0.5).epsilon(1e-10));
}
