#include "odenet/modeq.hpp"

#include <algorithm>
#include <cmath>

#include "odenet/errors.hpp"

namespace odenet::modeq {

VectorField reduced_modified_field(const VectorField& f, double dt, const ReductionKind& kind) {
  if (!f.has_jacobian()) throw ContractError("reduced_modified_field: field has no jacobian");
  double lead = 1.0;
  double correction = 0.5 * dt;
  if (const auto* lm = std::get_if<LMKind>(&kind)) {
    const double one_plus_k = 1.0 + lm->k;
    if (one_plus_k == 0.0) throw ContractError("reduced_modified_field: singular reduction, 1 + k = 0");
    lead = 1.0 / one_plus_k;
    correction = dt * (1.0 - lm->k) / (2.0 * one_plus_k * one_plus_k * one_plus_k);
  }
  VectorField out;
  out.dim = f.dim;
  out.evaluate = [f, lead, correction](const State& u, double t) {
    const State fu = f(u, t);
    const State jf = matvec(f.jacobian(u, t), fu);
    State v(fu.size());
    for (std::size_t i = 0; i < fu.size(); ++i) v[i] = lead * fu[i] - correction * jf[i];
    return v;
  };
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ContractError("fit_line: need >= 2 matching points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ContractError("fit_line: x values are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  fit.rms_residual = std::sqrt(ss_res / static_cast<double>(n));
  return fit;
}

std::vector<double> geometric_steps(double first, double ratio, std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  double dt = first;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(dt);
    dt *= ratio;
  }
  return out;
}

State rk4_solution(const VectorField& field, const State& u0, double t0, double horizon, double dt_ref) {
  return ode::integrate(ode::SchemeSpec::of(ode::SchemeKind::rk4), field, u0, t0, horizon, dt_ref).back();
}

OrderReport estimate_order(const Stepper& stepper, const Reference& reference, const State& u0, double t0,
                           double horizon, const std::vector<double>& dts) {
  if (dts.size() < 4) throw ContractError("estimate_order: need at least 4 step sizes");
  const double ratio = dts[1] / dts[0];
  for (std::size_t i = 1; i < dts.size(); ++i) {
    if (!(dts[i] > 0.0) || std::abs(dts[i] / dts[i - 1] - ratio) > 1e-9 * std::abs(ratio)) {
      throw ContractError("estimate_order: step sizes must be geometrically spaced");
    }
  }
  const double dt_ref = *std::min_element(dts.begin(), dts.end()) / 100.0;

  OrderReport report;
  report.dts = dts;
  std::vector<double> log_dt, log_err;
  for (double dt : dts) {
    State approx;
    try {
      approx = stepper(dt);
    } catch (const OverflowError& e) {
      throw OverflowError(std::string(e.what()) + " at dt=" + std::to_string(dt), e.step());
    }
    State ref;
    if (const auto* exact = std::get_if<ExactReference>(&reference)) {
      ref = exact->exact(horizon);
    } else {
      const auto& field = std::get<FieldReference>(reference);
      ref = rk4_solution(field.field_for_dt(dt), u0, t0, horizon, dt_ref);
    }
    const double err = norm2(sub(approx, ref));
    if (!(err > 0.0)) throw ContractError("estimate_order: zero error at dt=" + std::to_string(dt));
    report.errors.push_back(err);
    log_dt.push_back(std::log(dt));
    log_err.push_back(std::log(err));
  }
  const LineFit fit = fit_line(log_dt, log_err);
  report.slope = fit.slope;
  report.intercept = fit.intercept;
  report.r_squared = fit.r_squared;
  report.fit_residual = fit.rms_residual;
  report.reliable = fit.r_squared >= 0.99;
  return report;
}

Stepper scheme_stepper(const ode::SchemeSpec& scheme, const VectorField& f, const State& u0, double t0,
                       double horizon) {
  return [=](double dt) { return ode::integrate(scheme, f, u0, t0, horizon, dt).back(); };
}

Stepper lm_stepper(double k, const VectorField& f, const State& u0, double t0, double horizon,
                   std::function<State(double dt)> first_step) {
  return [=](double dt) {
    const std::size_t n = ode::step_count(t0, horizon, dt);
    if (n == 0) return u0;
    const double h = (horizon - t0) / static_cast<double>(n);
    State prev = u0;
    State cur = first_step(h);
    for (std::size_t i = 1; i < n; ++i) {
      const double t = t0 + static_cast<double>(i) * h;
      State next;
      try {
        next = ode::lm_architecture_step(k, cur, prev, f(cur, t), h);
      } catch (const OverflowError&) {
        throw OverflowError("lm_stepper: overflow", i + 1);
      }
      prev = std::move(cur);
      cur = std::move(next);
    }
    return cur;
  };
}

std::vector<double> gradient_flow_energy(const Matrix& jacobian, const State& u0, double k, double dt,
                                         std::size_t steps) {
  auto energy = [&](const State& u) { return -0.5 * dot(u, matvec(jacobian, u)); };
  std::vector<double> out;
  out.reserve(steps + 1);
  State prev = u0;
  State cur = u0;
  out.push_back(energy(cur));
  for (std::size_t i = 0; i < steps; ++i) {
    State next = ode::lm_architecture_step(k, cur, prev, matvec(jacobian, cur), dt);
    prev = std::move(cur);
    cur = std::move(next);
    out.push_back(energy(cur));
  }
  return out;
}

}  // namespace odenet::modeq
