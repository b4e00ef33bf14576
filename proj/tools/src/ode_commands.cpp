#include <cmath>
#include <ostream>

#include "odenet/errors.hpp"
#include "odenet/modeq.hpp"
#include "odenet/odeschemes.hpp"
#include "odenet/sdeschemes.hpp"
#include "odenet_lab/commands.hpp"
#include "odenet_lab/csv.hpp"

namespace odenet::lab {

namespace {

ode::SchemeSpec read_scheme(const Config& cfg, const std::string& sec) {
  ode::SchemeSpec spec = ode::SchemeSpec::of(ode::parse_scheme_kind(cfg.text(sec, "scheme")));
  switch (spec.kind) {
    case ode::SchemeKind::lm:
      spec.lm_k = cfg.real(sec, "lm_k");
      break;
    case ode::SchemeKind::lmm: {
      ode::SchemeCoefficients c;
      c.alpha = cfg.reals(sec, "alpha");
      c.beta = cfg.reals(sec, "beta");
      c.k = c.beta.size();
      try {
        c.validate();
      } catch (const ContractError& e) {
        throw ConfigError(sec + ".alpha/beta: " + e.what());
      }
      spec.coeffs = c;
      break;
    }
    case ode::SchemeKind::backward_euler:
      spec.newton.tol = cfg.real(sec, "newton_tol", spec.newton.tol);
      spec.newton.max_iter = static_cast<int>(cfg.count(sec, "newton_max_iter", 50));
      if (!(spec.newton.tol > 0.0)) throw ConfigError(sec + ".newton_tol: must be positive");
      break;
    default:
      break;
  }
  return spec;
}

TestProblem read_problem(const Config& cfg, const std::string& sec) {
  const std::string name = cfg.text(sec, "problem");
  std::optional<State> u0;
  if (cfg.has(sec, "u0")) u0 = cfg.reals(sec, "u0");
  try {
    return make_test_problem(name, u0);
  } catch (const DimensionError& e) {
    throw ConfigError(sec + ".u0: " + e.what());
  }
}

std::vector<double> default_order_dts() { return modeq::geometric_steps(1.0 / 16.0, 0.5, 6); }

}  // namespace

ExitCode cmd_integrate(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const std::string sec = "integrate";
  const TestProblem problem = read_problem(cfg, sec);
  const ode::SchemeSpec scheme = read_scheme(cfg, sec);
  const double t0 = cfg.real(sec, "t0", 0.0);
  const double t_end = cfg.real(sec, "t_end", problem.horizon);
  const double dt = cfg.real(sec, "dt");
  cfg.check_all_used();
  if (!(dt > 0.0)) throw ConfigError("integrate.dt: must be positive");
  if (t_end < t0) throw ConfigError("integrate.t_end: must be >= integrate.t0");

  const Trajectory traj = ode::integrate(scheme, problem.field, problem.u0, t0, t_end, dt);
  std::vector<std::string> header{"step", "t"};
  for (std::size_t i = 0; i < problem.u0.size(); ++i) header.push_back("u_" + std::to_string(i));
  CsvWriter csv(ctx.out / "trajectory.csv", header);
  for (std::size_t s = 0; s < traj.size(); ++s) {
    csv.add(s).add(traj.times[s]);
    for (double v : traj.states[s]) csv.add(v);
    csv.end_row();
  }
  csv.close();
  ctx.log << "integrate: " << ode::to_string(scheme.kind) << " on " << problem.name << ", " << traj.size() - 1
          << " steps, final u_0 = " << format_real(traj.back()[0]) << "\n";
  return ExitCode::ok;
}

ExitCode cmd_order(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const std::string sec = "order";
  const TestProblem problem = read_problem(cfg, sec);
  const ode::SchemeSpec scheme = read_scheme(cfg, sec);
  const std::string reference_name = cfg.text(sec, "reference", "exact");
  const double t0 = 0.0;
  const double horizon = cfg.real(sec, "t_end", problem.horizon);
  const std::vector<double> dts = cfg.reals(sec, "dts", default_order_dts());
  cfg.check_all_used();
  if (!(horizon > t0)) throw ConfigError("order.t_end: must be positive");
  if (dts.size() < 4) throw ConfigError("order.dts: need at least 4 step sizes");

  const VectorField f = problem.field;
  modeq::Reference reference;
  if (reference_name == "exact") {
    reference = modeq::ExactReference{problem.exact};
  } else if (reference_name == "original") {
    reference = modeq::FieldReference{[f](double) { return f; }};
  } else if (reference_name == "modified") {
    modeq::ReductionKind kind;
    if (scheme.kind == ode::SchemeKind::forward_euler) {
      kind = modeq::ForwardEulerKind{};
    } else if (scheme.kind == ode::SchemeKind::lm) {
      kind = modeq::LMKind{scheme.lm_k};
    } else {
      throw ConfigError("order.reference: 'modified' is defined for forward_euler and lm only");
    }
    reference = modeq::FieldReference{[f, kind](double dt) { return modeq::reduced_modified_field(f, dt, kind); }};
  } else {
    throw ConfigError("order.reference: unknown reference '" + reference_name + "' (valid: exact, original, modified)");
  }

  modeq::Stepper stepper;
  if (scheme.kind == ode::SchemeKind::lm) {
    // The two-step recurrence starts on the curve it is compared with.
    auto first_step = [reference, u0 = problem.u0, t0](double h) -> State {
      if (const auto* exact = std::get_if<modeq::ExactReference>(&reference)) return exact->exact(t0 + h);
      const auto& field = std::get<modeq::FieldReference>(reference);
      return modeq::rk4_solution(field.field_for_dt(h), u0, t0, t0 + h, h / 100.0);
    };
    stepper = modeq::lm_stepper(scheme.lm_k, f, problem.u0, t0, horizon, first_step);
  } else {
    stepper = modeq::scheme_stepper(scheme, f, problem.u0, t0, horizon);
  }
  const modeq::OrderReport report = modeq::estimate_order(stepper, reference, problem.u0, t0, horizon, dts);

  CsvWriter csv(ctx.out / "order.csv", {"dt", "error"});
  for (std::size_t i = 0; i < report.dts.size(); ++i) {
    csv.add(report.dts[i]).add(report.errors[i]);
    csv.end_row();
  }
  csv.add("slope").add(report.slope);
  csv.end_row();
  csv.add("r_squared").add(report.r_squared);
  csv.end_row();
  csv.add("fit_residual").add(report.fit_residual);
  csv.end_row();
  csv.add("reliable").add(report.reliable);
  csv.end_row();
  csv.close();
  ctx.log << "order: " << ode::to_string(scheme.kind) << " vs " << reference_name << " on " << problem.name
          << ", slope " << format_real(report.slope) << ", R^2 " << format_real(report.r_squared) << "\n";
  if (!report.reliable) {
    ctx.log << "order: fit flagged unreliable (R^2 < 0.99)\n";
    return ExitCode::flagged;
  }
  return ExitCode::ok;
}

ExitCode cmd_weak(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const std::string sec = "weak";
  const std::string problem_name = cfg.text(sec, "problem", "gbm");
  if (problem_name != "gbm") throw ConfigError("weak.problem: unknown problem '" + problem_name + "' (valid: gbm)");
  const double mu = cfg.real(sec, "mu", 0.5);
  const double sigma = cfg.real(sec, "sigma", 0.2);
  const double x0 = cfg.real(sec, "x0", 1.0);
  const double horizon = cfg.real(sec, "horizon", 1.0);
  const sde::IncrementKind increments = sde::parse_increment_kind(cfg.text(sec, "increments", "gaussian"));
  std::optional<sde::IncrementKind> twin;
  if (cfg.has(sec, "twin")) twin = sde::parse_increment_kind(cfg.text(sec, "twin"));
  const std::string phi = cfg.text(sec, "phi", "identity");
  const std::vector<double> dts = cfg.reals(sec, "dts");
  const std::uint64_t paths = cfg.count(sec, "paths", 100000);
  cfg.check_all_used();
  if (paths == 0) throw ConfigError("weak.paths: must be at least 1");
  if (!(horizon > 0.0)) throw ConfigError("weak.horizon: must be positive");
  for (double dt : dts)
    if (!(dt > 0.0)) throw ConfigError("weak.dts: step sizes must be positive");
  if (phi != "identity" && phi != "square") {
    throw ConfigError("weak.phi: unknown test function '" + phi + "' (valid: identity, square)");
  }

  const sde::SDEProblem problem = sde::gbm_problem(mu, sigma, x0, horizon);
  const sde::WeakErrorReport report = sde::weak_error_sweep(problem, increments, phi, dts, paths, ctx.seed);
  std::optional<sde::WeakErrorReport> twin_report;
  if (twin) twin_report = sde::weak_error_sweep(problem, *twin, phi, dts, paths, ctx.seed);

  std::vector<std::string> header{"dt", "estimate", "ci_halfwidth", "analytic", "abs_bias"};
  if (twin) header.insert(header.end(), {"twin_estimate", "twin_ci_halfwidth", "agree"});
  CsvWriter csv(ctx.out / "weak.csv", header);
  bool all_agree = true;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    csv.add(r.dt).add(r.estimate).add(r.half_width).add(r.analytic).add(r.abs_bias);
    if (twin_report) {
      const auto& w = twin_report->rows[i];
      // Intervals overlap.
      const bool agree = std::abs(r.estimate - w.estimate) <= r.half_width + w.half_width;
      all_agree = all_agree && agree;
      csv.add(w.estimate).add(w.half_width).add(agree);
    }
    csv.end_row();
  }
  auto footer = [&](std::string_view label, std::string value) {
    csv.add(label).add(std::string_view(value));
    for (std::size_t c = 2; c < header.size(); ++c) csv.add("");
    csv.end_row();
  };
  footer("bias_slope", report.bias_slope ? format_real(*report.bias_slope) : "undefined");
  footer("inconclusive", report.inconclusive ? "1" : "0");
  csv.close();

  ctx.log << "weak: " << sde::to_string(increments) << " increments, " << paths << " paths, bias slope "
          << (report.bias_slope ? format_real(*report.bias_slope) : "undefined") << "\n";
  if (report.inconclusive) ctx.log << "weak: inconclusive (every CI is wider than its bias)\n";
  if (!all_agree) ctx.log << "weak: twin estimates disagree at one or more step sizes\n";
  return report.inconclusive || !all_agree ? ExitCode::flagged : ExitCode::ok;
}

}  // namespace odenet::lab
