#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <optional>
#include <sstream>

#include "shemfc/analytic.hpp"
#include "shemfc/chaos.hpp"
#include "shemfc/errors.hpp"
#include "shemfc/fk.hpp"
#include "shemfc/kernels.hpp"
#include "shemfc/localtime.hpp"
#include "shemfc/mc.hpp"
#include "shemfc/quadrature.hpp"
#include "shemfc/regime.hpp"

namespace shemfc {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::string join_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt17(v[i]);
  }
  return out;
}

// All knobs of all subcommands; each subcommand registers only its own.
struct Params {
  std::string kernel = "heat";
  double alpha = 1.0;
  int d = 1;
  double hurst = 0.5;
  double beta_h = 0.0;  // 0 = estimate/default
  double c_star = 1.0;
  double t = 1.0;
  double eps = 0.1;
  std::string eps_list = "0.4,0.2,0.1,0.05";
  double u = 0.5;
  double v = 0.5;
  std::string x;
  std::string y;
  std::string z;
  std::string s_list;
  std::string t_vec;
  double horizon = 0.0;  // 0 = derive from entries
  int n = 1;
  int k = 2;
  double lambda = 1.0;
  int n_steps = 256;
  std::uint64_t n_paths = 20000;
  std::uint64_t n_samples = 100000;
  std::uint64_t n_time_samples = 100000;
  std::uint64_t n_spectral_samples = 128;
  int n_max = 16;
  double tail_tol = 1e-3;
  double tol = 1e-8;
  std::string method;
  std::uint64_t seed = 42;
  int workers = 0;
  int max_order = 5;  // K of the regime report
  double r_max = 4.0;
  int n_points = 64;
  std::string u0 = "constant";
  double u0_value = 1.0;
  std::string out;
  std::string format;
};

InitialCondition make_u0(const Params& p) {
  if (p.u0 == "constant") return InitialCondition::constant(p.u0_value);
  if (p.u0 == "cosine") return InitialCondition::cosine();
  if (p.u0 == "gauss-bump") return InitialCondition::gauss_bump();
  throw InvalidSpec("u0 must be one of constant|cosine|gauss-bump");
}

struct Emitter {
  std::string command;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::map<std::string, double> constants;

  json meta() const {
    json m;
    m["schema_version"] = kSchemaVersion;
    m["version"] = kVersion;
    m["command"] = command;
    m["seed"] = seed;
    json cfg = json::object();
    for (const auto& [key, value] : config) cfg[key] = value;
    m["config"] = cfg;
    if (!constants.empty()) {
      json c = json::object();
      for (const auto& [key, value] : constants) c[key] = json_number(value);
      m["constants"] = c;
    }
    return m;
  }

  std::string json_document(const json& data) const {
    json doc;
    doc["meta"] = meta();
    doc["data"] = data;
    return doc.dump(2) + "\n";
  }

  std::string csv_document(const std::string& header,
                           const std::vector<std::vector<std::string>>& rows) const {
    std::string out;
    out += "# schema_version = " + std::to_string(kSchemaVersion) + "\n";
    out += "# version = " + std::string(kVersion) + "\n";
    out += "# command = " + command + "\n";
    out += "# seed = " + std::to_string(seed) + "\n";
    for (const auto& [key, value] : constants)
      out += "# constants." + key + " = " + fmt17(value) + "\n";
    for (const auto& [key, value] : config) out += "# config." + key + " = " + value + "\n";
    out += header + "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ",";
        out += row[i];
      }
      out += "\n";
    }
    return out;
  }
};

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidSpec("cannot open output file: " + path);
  f << content;
}

json estimate_json(const Estimate& e) {
  return {{"value", json_number(e.value)},
          {"std_error", json_number(e.std_error)},
          {"n", e.n},
          {"ci95", {json_number(e.ci95_low()), json_number(e.ci95_high())}}};
}

KernelSpec make_kernel(const Params& p) {
  return KernelSpec(kernel_family_from_string(p.kernel), p.alpha, p.d);
}

NoiseModel make_model(const Params& p) {
  std::optional<double> beta;
  if (p.beta_h > 0.0) beta = p.beta_h;
  return NoiseModel(p.hurst, make_kernel(p), beta);
}

void echo_kernel(Emitter& em, const Params& p) {
  em.config["kernel"] = p.kernel;
  em.config["alpha"] = fmt17(p.alpha);
  em.config["d"] = std::to_string(p.d);
}

void echo_model(Emitter& em, const Params& p, const NoiseModel& model) {
  echo_kernel(em, p);
  em.config["H"] = fmt17(p.hurst);
  if (p.beta_h > 0.0) em.config["beta-H"] = fmt17(p.beta_h);
  em.constants["beta_H"] = model.beta_H;
  em.constants["alpha_H"] = model.alpha_H;
  const auto bc = bound_constants(model.kernel);
  em.constants[model.kernel.rough() ? "D_alpha_d" : "C_alpha_d"] = bc.D ? *bc.D : *bc.C;
}

std::vector<double> point_or_zero(const std::string& text, int d, const char* what) {
  if (text.empty()) return std::vector<double>(d, 0.0);
  auto v = parse_list(text);
  if (int(v.size()) != d)
    throw InvalidSpec(std::string(what) + ": expected " + std::to_string(d) + " coordinates");
  return v;
}

// ---------------------------------------------------------------------------
// Subcommand handlers. Each returns the process exit code.

int run_kernel_eval(const Params& p) {
  const KernelSpec spec = make_kernel(p);
  Emitter em{"kernel-eval", p.seed, {}, {}};
  echo_kernel(em, p);
  em.config["tol"] = fmt17(p.tol);
  const bool with_mollified = p.eps > 0.0;
  if (with_mollified) em.config["eps"] = fmt17(p.eps);

  if (!p.x.empty()) {
    em.config["x"] = join_list(parse_list(p.x));
    const auto xv = point_or_zero(p.x, p.d, "x");
    json data;
    data["f"] = json_number(eval_kernel(spec, xv, p.tol));
    data["g"] = json_number(eval_spectral_density(spec, xv));
    if (with_mollified) data["mollified"] = json_number(mollified_kernel(spec, p.eps, xv, p.tol));
    write_output(p.out, em.json_document(data));
    return 0;
  }

  em.config["r-max"] = fmt17(p.r_max);
  em.config["n-points"] = std::to_string(p.n_points);
  std::vector<std::vector<std::string>> rows;
  for (int i = 1; i <= p.n_points; ++i) {
    const double r = p.r_max * i / p.n_points;
    std::vector<std::string> row{fmt17(r), fmt17(eval_kernel_radial(spec, r, p.tol)),
                                 fmt17(spectral_density_radial(spec, r))};
    if (with_mollified) row.push_back(fmt17(mollified_kernel_radial(spec, p.eps, r, p.tol)));
    rows.push_back(std::move(row));
  }
  const std::string header = with_mollified ? "r,f,g,mollified" : "r,f,g";
  write_output(p.out, em.csv_document(header, rows));
  return 0;
}

int run_jf(const Params& p) {
  const KernelSpec spec = make_kernel(p);
  const auto yv = point_or_zero(p.y, p.d, "y");
  const auto zv = point_or_zero(p.z, p.d, "z");
  Emitter em{"jf", p.seed, {}, {}};
  echo_kernel(em, p);
  em.config["u"] = fmt17(p.u);
  em.config["v"] = fmt17(p.v);
  em.config["y"] = join_list(yv);
  em.config["z"] = join_list(zv);
  const std::string method = p.method.empty() ? "mc" : p.method;
  em.config["method"] = method;

  Estimate est;
  if (method == "closed") {
    est = Estimate::exact(j_f_closed(spec, p.u, p.v, yv, zv));
  } else if (method == "mc") {
    em.config["n-samples"] = std::to_string(p.n_samples);
    est = j_f_mc(spec, p.u, p.v, yv, zv, p.n_samples, RngStream(p.seed, 0x1F));
  } else {
    throw InvalidSpec("jf: method must be closed or mc");
  }
  json data;
  data["estimate"] = estimate_json(est);
  const auto bc = bound_constants(spec);
  const double bound = bc.bound_at(p.u + p.v, spec.d, spec.alpha);
  data["bound"] = json_number(bound);
  data["bound_holds"] = est.value <= bound * (1.0 + 3.0 * est.std_error /
                                                        std::max(est.value, 1e-300));
  em.constants[spec.rough() ? "D_alpha_d" : "C_alpha_d"] = bc.D ? *bc.D : *bc.C;
  write_output(p.out, em.json_document(data));
  return 0;
}

int run_psi(const Params& p) {
  const NoiseModel model = make_model(p);
  const auto s = parse_list(p.s_list);
  const auto tv = parse_list(p.t_vec);
  if (s.empty() || s.size() != tv.size())
    throw InvalidSpec("psi: --s and --t-vec must be nonempty lists of equal length");
  double horizon = p.horizon;
  if (horizon <= 0.0) {
    for (double val : s) horizon = std::max(horizon, val);
    for (double val : tv) horizon = std::max(horizon, val);
    horizon *= 1.0 + 1e-9;
  }
  const TimePair tp(s, tv, horizon);

  Emitter em{"psi", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["s"] = join_list(s);
  em.config["t-vec"] = join_list(tv);
  em.config["horizon"] = fmt17(horizon);
  em.config["eps"] = fmt17(p.eps);
  const std::string method = p.method.empty() ? (s.size() == 1 ? "closed1" : "mc") : p.method;
  em.config["method"] = method;

  Estimate est;
  if (method == "closed1") {
    est = psi_n(model, tp, PsiClosed1{}, p.eps);
  } else if (method == "mc") {
    em.config["n-samples"] = std::to_string(p.n_samples);
    est = psi_n(model, tp, PsiMc{p.n_samples, RngStream(p.seed, 0x51)}, p.eps);
  } else {
    throw InvalidSpec("psi: method must be closed1 or mc");
  }
  json data;
  data["estimate"] = estimate_json(est);
  const SigmaMatrix sigma = sigma_matrix(tp);
  json sig = json::array();
  for (int i = 0; i < sigma.order(); ++i) {
    json row = json::array();
    for (int j = 0; j < sigma.order(); ++j) row.push_back(sigma(i, j));
    sig.push_back(row);
  }
  data["sigma"] = sig;
  write_output(p.out, em.json_document(data));
  return 0;
}

int run_alpha(const Params& p) {
  const NoiseModel model = make_model(p);
  Emitter em{"alpha", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["n"] = std::to_string(p.n);
  em.config["t"] = fmt17(p.t);
  em.config["eps"] = fmt17(p.eps);
  em.config["c-star"] = fmt17(p.c_star);
  const std::string method = p.method.empty() ? (p.n <= 2 ? "quadrature" : "mc") : p.method;
  em.config["method"] = method;

  ChaosCoefficient c;
  if (method == "quadrature") {
    c = alpha_n(model, p.n, p.t, AlphaQuadrature{p.tol, 16, 96, p.workers}, p.eps, p.c_star);
  } else if (method == "mc") {
    em.config["n-time-samples"] = std::to_string(p.n_time_samples);
    em.config["n-spectral-samples"] = std::to_string(p.n_spectral_samples);
    c = alpha_n(model, p.n, p.t,
                AlphaMc{p.n_time_samples, p.n_spectral_samples, RngStream(p.seed, 0xA1),
                        p.workers},
                p.eps, p.c_star);
  } else {
    throw InvalidSpec("alpha: method must be quadrature or mc");
  }
  json data;
  data["estimate"] = estimate_json(c.value);
  data["upper_bound"] = json_number(c.upper_bound);
  data["mode"] = c.mode == ChaosMode::Exact ? "exact" : "mc";
  em.constants["c_star"] = p.c_star;
  write_output(p.out, em.json_document(data));
  return 0;
}

int run_second_moment(const Params& p) {
  const NoiseModel model = make_model(p);
  Emitter em{"second-moment", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["t"] = fmt17(p.t);
  em.config["n-max"] = std::to_string(p.n_max);
  em.config["tail-tol"] = fmt17(p.tail_tol);
  em.config["n-time-samples"] = std::to_string(p.n_time_samples);
  em.config["n-spectral-samples"] = std::to_string(p.n_spectral_samples);
  em.config["c-star"] = fmt17(p.c_star);
  em.constants["c_star"] = p.c_star;

  const auto res = second_moment_series(
      model, p.t, p.n_max, p.tail_tol,
      AlphaMc{p.n_time_samples, p.n_spectral_samples, RngStream(p.seed, 0x2E), p.workers},
      p.c_star);
  json data;
  data["value"] = json_number(res.value);
  data["std_error"] = json_number(res.std_error);
  data["truncation_order"] = res.truncation_order;
  data["tail_bound"] = json_number(res.tail_bound);
  data["converged"] = res.converged;
  json terms = json::array();
  for (double term : res.terms) terms.push_back(json_number(term));
  data["terms"] = terms;
  write_output(p.out, em.json_document(data));
  return res.converged ? 0 : 3;
}

WeightSpec weight_from_model(const NoiseModel& model) {
  return model.white_in_time() ? WeightSpec::diagonal() : WeightSpec::fractional(model.H);
}

int run_localtime_moments(const Params& p) {
  const NoiseModel model = make_model(p);
  Emitter em{"localtime-moments", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["t"] = fmt17(p.t);
  em.config["eps"] = fmt17(p.eps);
  em.config["n"] = std::to_string(p.n);
  em.config["n-paths"] = std::to_string(p.n_paths);
  em.config["n-steps"] = std::to_string(p.n_steps);

  const Estimate est = local_time_moments(model, weight_from_model(model), p.t, p.eps, p.n,
                                          p.n_paths, p.n_steps, RngStream(p.seed, 0x17),
                                          p.workers);
  json data;
  data["estimate"] = estimate_json(est);
  write_output(p.out, em.json_document(data));
  return 0;
}

int run_exp_moment(const Params& p) {
  const NoiseModel model = make_model(p);
  Emitter em{"exp-moment", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["t"] = fmt17(p.t);
  em.config["eps"] = fmt17(p.eps);
  em.config["lambda"] = fmt17(p.lambda);
  em.config["n-paths"] = std::to_string(p.n_paths);
  em.config["n-steps"] = std::to_string(p.n_steps);
  em.config["c-star"] = fmt17(p.c_star);

  const WeightSpec w = weight_from_model(model);
  bool warning = false;
  const Estimate est = exp_moment(model, w, p.t, p.eps, p.lambda, p.n_paths, p.n_steps,
                                  RngStream(p.seed, 0xE1), p.workers, &warning);
  json data;
  data["estimate"] = estimate_json(est);
  data["bound"] = json_number(exp_moment_bound(model, w, p.t, p.lambda, p.c_star));
  data["bound_radius"] = json_number(exp_moment_bound_radius(model, w, p.t));
  data["regime_warning"] = warning;
  write_output(p.out, em.json_document(data));
  return 0;
}

int run_convergence(const Params& p) {
  const NoiseModel model = make_model(p);
  const auto eps_values = parse_list(p.eps_list);
  Emitter em{"convergence", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["t"] = fmt17(p.t);
  em.config["eps-list"] = join_list(eps_values);
  em.config["n-paths"] = std::to_string(p.n_paths);
  em.config["n-steps"] = std::to_string(p.n_steps);

  const auto study = convergence_study(model, weight_from_model(model), p.t, eps_values,
                                       p.n_paths, p.n_steps, RngStream(p.seed, 0xC0),
                                       p.workers);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < study.rows.size(); ++i) {
    const auto& row = study.rows[i];
    std::vector<std::string> cells{fmt17(row.eps),
                                   fmt17(row.moment1.value),
                                   fmt17(row.moment1.std_error),
                                   fmt17(row.moment2.value),
                                   fmt17(row.moment2.std_error)};
    cells.push_back(i == 0 ? "" : fmt17(study.successive_l2[i - 1].value));
    rows.push_back(std::move(cells));
  }
  write_output(p.out, em.csv_document("eps,m1,m1_se,m2,m2_se,l2_diff_prev", rows));
  return 0;
}

int run_fk_moment(const Params& p) {
  const NoiseModel model = make_model(p);
  const auto xv = point_or_zero(p.x, p.d, "x");
  Emitter em{"fk-moment", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["k"] = std::to_string(p.k);
  em.config["t"] = fmt17(p.t);
  em.config["x"] = join_list(xv);
  em.config["eps"] = fmt17(p.eps);
  em.config["n-steps"] = std::to_string(p.n_steps);
  em.config["n-samples"] = std::to_string(p.n_samples);
  em.config["u0"] = p.u0;
  em.config["u0-value"] = fmt17(p.u0_value);

  FkConfig cfg;
  cfg.eps = p.eps;
  cfg.n_steps = p.n_steps;
  cfg.n_samples = p.n_samples;
  cfg.stream = RngStream(p.seed, 0xF0);
  cfg.workers = p.workers;
  const MomentEstimate est = fk_moment(model, make_u0(p), p.k, p.t, xv, cfg);
  json data;
  data["estimate"] = estimate_json(est.value);
  data["clip_count"] = est.clip_count;
  data["regime_note"] = est.regime_note;
  data["t0_k"] = json_number(critical_time_t0(model, p.k));
  write_output(p.out, em.json_document(data));
  return 0;
}

int run_compare(const Params& p) {
  const NoiseModel model = make_model(p);
  Emitter em{"compare", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["t"] = fmt17(p.t);
  em.config["tail-tol"] = fmt17(p.tail_tol);
  em.config["eps"] = fmt17(p.eps);
  em.config["n-steps"] = std::to_string(p.n_steps);
  em.config["n-samples"] = std::to_string(p.n_samples);
  em.config["n-time-samples"] = std::to_string(p.n_time_samples);
  em.config["n-spectral-samples"] = std::to_string(p.n_spectral_samples);
  em.config["n-max"] = std::to_string(p.n_max);
  em.config["c-star"] = fmt17(p.c_star);
  em.constants["c_star"] = p.c_star;

  FkConfig cfg;
  cfg.eps = p.eps;
  cfg.n_steps = p.n_steps;
  cfg.n_samples = p.n_samples;
  cfg.stream = RngStream(p.seed, 0xCA);
  cfg.workers = p.workers;
  const auto rep = compare_with_chaos(
      model, p.t, p.tail_tol, cfg,
      AlphaMc{p.n_time_samples, p.n_spectral_samples, RngStream(p.seed, 0x5E), p.workers},
      p.n_max, p.c_star);

  json data;
  json fk_levels = json::array();
  for (std::size_t i = 0; i < rep.eps_values.size(); ++i)
    fk_levels.push_back(
        {{"eps", rep.eps_values[i]}, {"estimate", estimate_json(rep.fk_at_eps[i])}});
  data["fk_at_eps"] = fk_levels;
  data["fk"] = estimate_json(rep.fk);
  data["fk_extrapolated"] = rep.extrapolated;
  data["series"] = {{"value", json_number(rep.series.value)},
                    {"std_error", json_number(rep.series.std_error)},
                    {"truncation_order", rep.series.truncation_order},
                    {"tail_bound", json_number(rep.series.tail_bound)},
                    {"converged", rep.series.converged}};
  data["discrepancy"] = json_number(rep.discrepancy);
  data["tolerance"] = json_number(rep.tolerance);
  data["agree"] = rep.agree;
  if (!rep.series.converged) data["reason"] = "series tail bound did not converge";
  write_output(p.out, em.json_document(data));
  return rep.series.converged ? 0 : 3;
}

int run_regime(const Params& p) {
  const NoiseModel model = make_model(p);
  Emitter em{"regime", p.seed, {}, {}};
  echo_model(em, p, model);
  em.config["K"] = std::to_string(p.max_order);
  em.config["c-star"] = fmt17(p.c_star);
  em.constants["c_star"] = p.c_star;

  const RegimeReport rep = existence_report(model, p.max_order, p.c_star);
  write_output(p.out, em.json_document(json::parse(rep.to_json())));
  return 0;
}

int run_selftest(const Params& p) {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    RngStream a(7, 9), b(7, 9);
    bool same = true;
    for (int i = 0; i < 64; ++i) same = same && a.next_u64() == b.next_u64();
    check("counter rng determinism", same);
  }
  {
    StreamingStats s1, s2, all;
    for (int i = 0; i < 100; ++i) {
      const double x = std::sin(i * 0.7) * 3.0;
      (i < 50 ? s1 : s2).add(x);
      all.add(x);
    }
    const auto merged = StreamingStats::merged(s1, s2);
    check("streaming stats merge",
          std::abs(merged.mean - all.mean) < 1e-13 && std::abs(merged.m2 - all.m2) < 1e-10);
  }
  {
    const auto v = simplex_integral(2, 1.0, -0.5);
    check("simplex integral closed form", v && std::abs(*v - std::numbers::pi) < 1e-12);
  }
  {
    const KernelSpec spec(KernelFamily::Heat, 1.0, 1);
    const double direct = eval_kernel_radial(KernelSpec(KernelFamily::Heat, 1.5, 1), 0.7);
    const double mollified = mollified_kernel_radial(spec, 0.5, 0.7);
    check("heat mollification semigroup", std::abs(direct - mollified) < 1e-12);
  }
  {
    const NoiseModel model(0.75, KernelSpec(KernelFamily::Riesz, 1.0, 3));
    const double ratio = critical_time_t0(model, 3) / critical_time_t0(model, 2);
    check("t0 ratio identity", std::abs(ratio - std::pow(3.0, -2.0)) < 1e-12);
  }
  {
    const WeightSpec w = WeightSpec::fractional(0.75);
    const LocalTimeGrid grid(w, 1.0, 32);
    check("fractional cell weights sum to t^{2H}", std::abs(grid.total_weight() - 1.0) < 1e-12);
  }
  {
    const InitialCondition u0 = InitialCondition::cosine();
    const double x0[1] = {0.3};
    const double got = heat_semigroup(u0, 0.5, std::span<const double>(x0, 1));
    check("heat semigroup cosine eigenfunction",
          std::abs(got - std::exp(-0.25) * std::cos(0.3)) < 1e-10);
  }
  {
    const NoiseModel model(0.5, KernelSpec(KernelFamily::Heat, 1.0, 1));
    const Estimate m1 = local_time_moments(model, WeightSpec::diagonal(), 0.5, 0.2, 1, 400,
                                           64, RngStream(p.seed, 0x7E57), p.workers);
    const auto quad = alpha_n(model, 1, 0.5, AlphaQuadrature{1e-9}, 0.2);
    check("local-time first moment vs quadrature",
          std::abs(m1.value - quad.value.value) < 4.0 * m1.std_error + 2e-3);
  }
  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------

void add_kernel_options(CLI::App* cmd, Params& p) {
  cmd->add_option("--kernel", p.kernel, "Kernel family: riesz|bessel|heat|poisson");
  cmd->add_option("--alpha", p.alpha, "Kernel order alpha");
  cmd->add_option("--d", p.d, "Spatial dimension");
}

void add_model_options(CLI::App* cmd, Params& p) {
  add_kernel_options(cmd, p);
  cmd->add_option("--H", p.hurst, "Hurst index in [1/2, 1)");
  cmd->add_option("--beta-H", p.beta_h, "Override for the beta_H constant (0 = estimate)");
}

void add_common_options(CLI::App* cmd, Params& p) {
  cmd->add_option("--seed", p.seed, "RNG seed");
  cmd->add_option("--workers", p.workers, "Worker threads (0 = SHE_MFC_WORKERS or hardware)");
  cmd->add_option("--out", p.out, "Output file (default stdout)");
}

std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidSpec("cannot open config file: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw InvalidSpec(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidSpec("config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_number_integer()) {
      text = std::to_string(value.get<long long>());
    } else if (value.is_number()) {
      text = fmt17(value.get<double>());
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_array()) {
      std::vector<double> vals;
      for (const auto& item : value) vals.push_back(item.get<double>());
      text = join_list(vals);
    } else {
      throw InvalidSpec("config key '" + key + "' has an unsupported value type");
    }
    tokens.push_back("--" + key + "=" + text);
  }
  return tokens;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  Params p;
  CLI::App app{"Numerical toolkit for the heat equation with multiplicative "
               "fractional-colored noise"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* c_kernel = app.add_subcommand("kernel-eval", "Evaluate f, g and p_eps*f");
  add_kernel_options(c_kernel, p);
  add_common_options(c_kernel, p);
  c_kernel->add_option("--x", p.x, "Evaluation point (comma list); omit for a radial sweep");
  c_kernel->add_option("--eps", p.eps, "Mollification parameter (adds the mollified column)");
  c_kernel->add_option("--r-max", p.r_max, "Radial sweep upper end");
  c_kernel->add_option("--n-points", p.n_points, "Radial sweep resolution");
  c_kernel->add_option("--tol", p.tol, "Relative quadrature tolerance");

  auto* c_jf = app.add_subcommand("jf", "Double-Gaussian functional J_f(u,v,y,z)");
  add_kernel_options(c_jf, p);
  add_common_options(c_jf, p);
  c_jf->add_option("--u", p.u);
  c_jf->add_option("--v", p.v);
  c_jf->add_option("--y", p.y, "First center (comma list, default 0)");
  c_jf->add_option("--z", p.z, "Second center (comma list, default 0)");
  c_jf->add_option("--method", p.method, "closed|mc");
  c_jf->add_option("--n-samples", p.n_samples);

  auto* c_psi = app.add_subcommand("psi", "Spectral integrand psi^(n)(s,t)");
  add_model_options(c_psi, p);
  add_common_options(c_psi, p);
  c_psi->add_option("--s", p.s_list, "Time vector s (comma list)")->required();
  c_psi->add_option("--t-vec", p.t_vec, "Time vector t (comma list)")->required();
  c_psi->add_option("--horizon", p.horizon, "Horizon (default: max entry)");
  c_psi->add_option("--eps", p.eps, "Spectral damping eps (0 = none)");
  c_psi->add_option("--method", p.method, "closed1|mc");
  c_psi->add_option("--n-samples", p.n_samples);

  auto* c_alpha = app.add_subcommand("alpha", "Chaos coefficient alpha_n(t)");
  add_model_options(c_alpha, p);
  add_common_options(c_alpha, p);
  c_alpha->add_option("--n", p.n, "Chaos order")->required();
  c_alpha->add_option("--t", p.t)->required();
  c_alpha->add_option("--eps", p.eps, "Regularization (0 = exact coefficient)");
  c_alpha->add_option("--method", p.method, "quadrature|mc");
  c_alpha->add_option("--n-time-samples", p.n_time_samples);
  c_alpha->add_option("--n-spectral-samples", p.n_spectral_samples);
  c_alpha->add_option("--c-star", p.c_star);
  c_alpha->add_option("--tol", p.tol);

  auto* c_series = app.add_subcommand("second-moment", "Chaos series for E|u_{t,x}|^2, u0=1");
  add_model_options(c_series, p);
  add_common_options(c_series, p);
  c_series->add_option("--t", p.t)->required();
  c_series->add_option("--n-max", p.n_max);
  c_series->add_option("--tail-tol", p.tail_tol);
  c_series->add_option("--n-time-samples", p.n_time_samples);
  c_series->add_option("--n-spectral-samples", p.n_spectral_samples);
  c_series->add_option("--c-star", p.c_star);

  auto* c_lt = app.add_subcommand("localtime-moments", "E[L_{t,eps}^n] by path simulation");
  add_model_options(c_lt, p);
  add_common_options(c_lt, p);
  c_lt->add_option("--t", p.t)->required();
  c_lt->add_option("--eps", p.eps);
  c_lt->add_option("--n", p.n, "Moment order");
  c_lt->add_option("--n-paths", p.n_paths);
  c_lt->add_option("--n-steps", p.n_steps);

  auto* c_exp = app.add_subcommand("exp-moment", "E[exp(lambda L_{t,eps})]");
  add_model_options(c_exp, p);
  add_common_options(c_exp, p);
  c_exp->add_option("--t", p.t)->required();
  c_exp->add_option("--eps", p.eps);
  c_exp->add_option("--lambda", p.lambda);
  c_exp->add_option("--n-paths", p.n_paths);
  c_exp->add_option("--n-steps", p.n_steps);
  c_exp->add_option("--c-star", p.c_star);

  auto* c_conv = app.add_subcommand("convergence", "eps-convergence study of L_{t,eps}");
  add_model_options(c_conv, p);
  add_common_options(c_conv, p);
  c_conv->add_option("--t", p.t)->required();
  c_conv->add_option("--eps-list", p.eps_list, "Strictly decreasing eps values");
  c_conv->add_option("--n-paths", p.n_paths);
  c_conv->add_option("--n-steps", p.n_steps);

  auto* c_fk = app.add_subcommand("fk-moment", "Feynman-Kac moment estimator E[u_{t,x}^k]");
  add_model_options(c_fk, p);
  add_common_options(c_fk, p);
  c_fk->add_option("--k", p.k, "Moment order (>= 2)");
  c_fk->add_option("--t", p.t)->required();
  c_fk->add_option("--x", p.x, "Spatial point (comma list, default 0)");
  c_fk->add_option("--eps", p.eps);
  c_fk->add_option("--n-steps", p.n_steps);
  c_fk->add_option("--n-samples", p.n_samples);
  c_fk->add_option("--u0", p.u0, "Initial condition: constant|cosine|gauss-bump");
  c_fk->add_option("--u0-value", p.u0_value, "Value of the constant initial condition");

  auto* c_cmp = app.add_subcommand("compare", "Two-route second moment: FK vs chaos series");
  add_model_options(c_cmp, p);
  add_common_options(c_cmp, p);
  c_cmp->add_option("--t", p.t)->required();
  c_cmp->add_option("--tail-tol", p.tail_tol);
  c_cmp->add_option("--eps", p.eps, "Coarsest FK regularization (halved twice)");
  c_cmp->add_option("--n-steps", p.n_steps);
  c_cmp->add_option("--n-samples", p.n_samples);
  c_cmp->add_option("--n-time-samples", p.n_time_samples);
  c_cmp->add_option("--n-spectral-samples", p.n_spectral_samples);
  c_cmp->add_option("--n-max", p.n_max);
  c_cmp->add_option("--c-star", p.c_star);

  auto* c_regime = app.add_subcommand("regime", "Existence report and critical times");
  add_model_options(c_regime, p);
  add_common_options(c_regime, p);
  c_regime->add_option("--K", p.max_order, "Largest moment order for t0(k)");
  c_regime->add_option("--c-star", p.c_star);

  auto* c_self = app.add_subcommand("selftest", "Run the built-in invariant checks");
  add_common_options(c_self, p);

  // --config FILE: JSON defaults inserted before the explicit flags
  // (TakeLast makes explicit flags win).
  std::vector<std::string> tokens;
  if (!args.empty()) {
    tokens.push_back(args[0]);
    std::vector<std::string> rest(args.begin() + 1, args.end());
    std::string config_path;
    std::vector<std::string> user;
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (rest[i] == "--config" && i + 1 < rest.size()) {
        config_path = rest[++i];
      } else if (rest[i].rfind("--config=", 0) == 0) {
        config_path = rest[i].substr(9);
      } else {
        user.push_back(rest[i]);
      }
    }
    try {
      if (!config_path.empty())
        for (auto& tok : config_tokens(config_path)) tokens.push_back(tok);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    for (auto& tok : user) tokens.push_back(tok);
  }

  try {
    std::vector<const char*> argv;
    argv.push_back("she_mfc");
    for (const auto& tok : tokens) argv.push_back(tok.c_str());
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (c_kernel->parsed()) return run_kernel_eval(p);
    if (c_jf->parsed()) return run_jf(p);
    if (c_psi->parsed()) return run_psi(p);
    if (c_alpha->parsed()) return run_alpha(p);
    if (c_series->parsed()) return run_second_moment(p);
    if (c_lt->parsed()) return run_localtime_moments(p);
    if (c_exp->parsed()) return run_exp_moment(p);
    if (c_conv->parsed()) return run_convergence(p);
    if (c_fk->parsed()) return run_fk_moment(p);
    if (c_cmp->parsed()) return run_compare(p);
    if (c_regime->parsed()) return run_regime(p);
    if (c_self->parsed()) return run_selftest(p);
  } catch (const QuadratureFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const EvaluatorError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ProposalUnavailable& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

int cli_run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_run(args);
}

}  // namespace shemfc
