#include "shemfc/regime.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "shemfc/errors.hpp"

namespace shemfc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDimTol = 1e-12;

enum class DimClass { Subcritical, Critical, Supercritical };

DimClass dim_class(const KernelSpec& spec) {
  const double gap = spec.d - spec.alpha - 2.0;
  if (gap < -kDimTol) return DimClass::Subcritical;
  if (gap > kDimTol) return DimClass::Supercritical;
  return DimClass::Critical;
}

double rough_bound_constant(const KernelSpec& spec) { return *bound_constants(spec).D; }

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Exists: return "exists";
    case Verdict::ExistsUpToT0: return "exists_up_to_T0";
    case Verdict::NotExists: return "not_exists";
    case Verdict::UnknownOpenRegion: return "unknown_open_region";
  }
  return "?";
}

double critical_time_t0(const NoiseModel& model, int k) {
  if (k < 2) throw InvalidSpec("critical_time_t0: k >= 2");
  const KernelSpec& spec = model.kernel;
  if (spec.smooth()) return kInf;
  switch (dim_class(spec)) {
    case DimClass::Subcritical:
      return kInf;
    case DimClass::Supercritical:
      return 0.0;
    case DimClass::Critical: {
      if (model.H == 0.5) return 0.0;  // d = 2+alpha is outside the H = 1/2 regime
      const double H = model.H;
      const double D = rough_bound_constant(spec);
      const double g = std::tgamma(1.0 - 1.0 / (2.0 * H));
      const double base = k * (k - 1.0) * D * std::pow(2.0, -2.0 * H) * model.beta_H *
                          model.beta_H * std::pow(g, 2.0 * H);
      return std::pow(base, -1.0 / (2.0 * H - 1.0));
    }
  }
  return kInf;
}

double lambda0(const NoiseModel& model, double t, double gamma) {
  const KernelSpec& spec = model.kernel;
  if (spec.smooth() || !(model.H > 0.5))
    throw Unsupported("lambda0: rough kernels with H > 1/2 only");
  if (!(t > 0.0) || !(gamma > 0.0)) throw InvalidSpec("lambda0: t > 0, gamma > 0");
  switch (dim_class(spec)) {
    case DimClass::Subcritical:
      return kInf;
    case DimClass::Supercritical:
      return 0.0;
    case DimClass::Critical: {
      const double H = model.H;
      const double D = rough_bound_constant(spec);
      const double one_ph = 1.0 - 1.0 / (2.0 * H);
      const double g = std::tgamma(one_ph);
      return std::pow(one_ph, 2.0 * H - 1.0) * (2.0 / (D * gamma)) /
             (model.beta_H * model.beta_H) * std::pow(g, -2.0 * H) *
             std::pow(t, 1.0 - 2.0 * H);
    }
  }
  return kInf;
}

RegimeReport existence_report(const NoiseModel& model, int max_moment_order, double c_star) {
  if (max_moment_order < 2) throw InvalidSpec("existence_report: K >= 2");
  if (!(c_star >= 1.0)) throw InvalidSpec("existence_report: C* >= 1");
  RegimeReport rep;
  rep.model = model;
  rep.c_star = c_star;
  rep.parametric_note =
      "critical times depend on beta_H, the kernel bound constant, and C* as configured";

  const KernelSpec& spec = model.kernel;
  const bool rough = spec.rough();
  if (!rough) {
    rep.sufficient_ok = true;
    rep.sufficient_condition = "smooth kernel: solution exists for all t, d, H";
    rep.necessary_ok = true;
    rep.dalang_ok = true;
    rep.appendix_a_ok = true;
    rep.verdict = Verdict::Exists;
    rep.T0 = kInf;
    for (int k = 2; k <= max_moment_order; ++k) rep.t0[k] = kInf;
    rep.bound_constant = *bound_constants(spec).C;
    return rep;
  }

  if (!(spec.alpha < spec.d))
    throw InvalidSpec("existence_report: rough kernels require alpha < d");

  const double H = model.H;
  const DimClass cls = dim_class(spec);
  rep.bound_constant = rough_bound_constant(spec);

  if (H > 0.5) {
    rep.sufficient_ok = cls != DimClass::Supercritical;
    rep.sufficient_condition =
        rep.sufficient_ok ? "H > 1/2 and d <= 2 + alpha" : "none (d > 2 + alpha)";
  } else {
    rep.sufficient_ok = cls == DimClass::Subcritical;
    rep.sufficient_condition =
        rep.sufficient_ok ? "H = 1/2 and d < 2 + alpha" : "none (d >= 2 + alpha)";
  }
  rep.necessary_ok = spec.d < 4.0 * H + spec.alpha - kDimTol;
  rep.dalang_ok = cls == DimClass::Subcritical;
  rep.appendix_a_ok = H > 0.25 * (spec.d - spec.alpha) + kDimTol;

  if (H == 0.5) {
    rep.verdict = cls == DimClass::Subcritical ? Verdict::Exists : Verdict::NotExists;
    rep.T0 = rep.verdict == Verdict::Exists ? kInf : 0.0;
  } else {
    switch (cls) {
      case DimClass::Subcritical:
        rep.verdict = Verdict::Exists;
        rep.T0 = kInf;
        break;
      case DimClass::Critical: {
        rep.verdict = Verdict::ExistsUpToT0;
        const double g = std::tgamma(1.0 - 1.0 / (2.0 * H));
        const double base = (1.0 - 1.0 / (2.0 * H)) * rep.bound_constant * 0.5 *
                            model.beta_H * model.beta_H * std::pow(g, 2.0 * H);
        rep.T0 = std::pow(base, -1.0 / (2.0 * H - 1.0));
        break;
      }
      case DimClass::Supercritical:
        // Between d = 2+alpha and d = 4H+alpha the paper leaves existence
        // open; it is reported as unknown (inclusive of the upper boundary).
        rep.verdict = spec.d <= 4.0 * H + spec.alpha + kDimTol ? Verdict::UnknownOpenRegion
                                                               : Verdict::NotExists;
        rep.T0 = 0.0;
        break;
    }
  }

  if (rep.verdict == Verdict::Exists || rep.verdict == Verdict::ExistsUpToT0) {
    for (int k = 2; k <= max_moment_order; ++k) rep.t0[k] = critical_time_t0(model, k);
  }
  if (H > 0.5 && cls == DimClass::Critical) {
    const double l1 = lambda0(model, 1.0, model.alpha_H);
    rep.lambda0_coef = l1;
    rep.lambda0_exponent = 1.0 - 2.0 * H;
    const double t02 = rep.t0.count(2) ? rep.t0.at(2) : critical_time_t0(model, 2);
    if (std::isfinite(t02) && t02 > 0.0)
      rep.t0_lambda0_ratio = l1 * std::pow(t02, rep.lambda0_exponent);
  } else if (H > 0.5 && cls == DimClass::Subcritical) {
    rep.lambda0_coef = kInf;
    rep.lambda0_exponent = 1.0 - 2.0 * H;
  }
  return rep;
}

namespace {

nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

}  // namespace

std::string RegimeReport::to_json(int indent) const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["model"] = {{"kernel", to_string(model.kernel.family)},
                {"alpha", model.kernel.alpha},
                {"d", model.d},
                {"H", model.H}};
  j["constants"] = {{"beta_H", model.beta_H},
                    {"alpha_H", model.alpha_H},
                    {"bound_constant", bound_constant},
                    {"c_star", c_star}};
  j["sufficient_ok"] = sufficient_ok;
  j["sufficient_condition"] = sufficient_condition;
  j["necessary_ok"] = necessary_ok;
  j["dalang_ok"] = dalang_ok;
  j["appendix_a_ok"] = appendix_a_ok;
  j["verdict"] = to_string(verdict);
  j["T0"] = json_number(T0);
  nlohmann::json t0_json = nlohmann::json::object();
  for (const auto& [k, v] : t0) t0_json[std::to_string(k)] = json_number(v);
  j["t0"] = t0_json;
  if (lambda0_exponent != 0.0) {
    j["lambda0"] = {{"coef", json_number(lambda0_coef)}, {"exponent", lambda0_exponent}};
    if (t0_lambda0_ratio != 0.0) j["diagnostics"] = {{"lambda0_at_t0_over_required",
                                                      t0_lambda0_ratio}};
  }
  j["parametric_note"] = parametric_note;
  return j.dump(indent);
}

}  // namespace shemfc
