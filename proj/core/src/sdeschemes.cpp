#include "odenet/sdeschemes.hpp"

#include <cmath>
#include <string>

#include "odenet/errors.hpp"
#include "odenet/modeq.hpp"

namespace odenet::sde {

IncrementKind parse_increment_kind(std::string_view name) {
  if (name == "gaussian") return IncrementKind::gaussian;
  if (name == "two_point") return IncrementKind::two_point;
  if (name == "uniform") return IncrementKind::uniform;
  if (name == "constant_shift") return IncrementKind::constant_shift;
  throw ConfigError("unknown increment distribution '" + std::string(name) +
                    "' (valid: gaussian, two_point, uniform, constant_shift)");
}

std::string_view to_string(IncrementKind kind) {
  switch (kind) {
    case IncrementKind::gaussian: return "gaussian";
    case IncrementKind::two_point: return "two_point";
    case IncrementKind::uniform: return "uniform";
    case IncrementKind::constant_shift: return "constant_shift";
  }
  return "unknown";
}

double sample_increment(const IncrementDistribution& dist, Rng& rng) {
  if (!(dist.dt > 0.0)) throw ContractError("sample_increment: dt must be positive");
  const double root = std::sqrt(dist.dt);
  switch (dist.kind) {
    case IncrementKind::gaussian: return root * rng.normal();
    case IncrementKind::two_point: return rng.bernoulli(0.5) ? root : -root;
    case IncrementKind::uniform: {
      const double half = std::sqrt(3.0 * dist.dt);
      return rng.uniform(-half, half);
    }
    case IncrementKind::constant_shift: return root;
  }
  return 0.0;
}

MomentCheck moment_condition_check(const IncrementDistribution& dist, double k_const) {
  if (!(dist.dt > 0.0)) throw ContractError("moment_condition_check: dt must be positive");
  MomentCheck m;
  switch (dist.kind) {
    // Symmetric laws parameterized by their variance: odd moments vanish and
    // E W^2 equals dt by construction.
    case IncrementKind::gaussian:
    case IncrementKind::two_point:
    case IncrementKind::uniform: break;
    case IncrementKind::constant_shift: {
      const double root = std::sqrt(dist.dt);
      m.abs_mean = root;
      m.abs_third = dist.dt * root;
      m.abs_second_minus_dt = 0.0;
      break;
    }
  }
  const double bound = k_const * dist.dt * dist.dt;
  m.pass = m.abs_mean <= bound && m.abs_third <= bound && m.abs_second_minus_dt <= bound;
  return m;
}

EmpiricalMoments empirical_moments(const IncrementDistribution& dist, std::size_t draws, Rng& rng) {
  if (draws == 0) throw ContractError("empirical_moments: need at least one draw");
  EmpiricalMoments m;
  for (std::size_t i = 0; i < draws; ++i) {
    const double w = sample_increment(dist, rng);
    m.mean += w;
    m.second += w * w;
    m.third += w * w * w;
  }
  const double n = static_cast<double>(draws);
  m.mean /= n;
  m.second /= n;
  m.third /= n;
  m.variance = m.second - m.mean * m.mean;
  return m;
}

SDEProblem gbm_problem(double mu, double sigma, double x0, double horizon) {
  SDEProblem p;
  p.drift = linear_field(Matrix(1, 1, mu));
  p.diffusion = [sigma](const State& x, double) { return State{sigma * x[0]}; };
  p.x0 = State{x0};
  p.horizon = horizon;
  p.analytic_expectation = [mu, sigma, x0](std::string_view phi, double t) -> std::optional<double> {
    if (phi == "identity") return x0 * std::exp(mu * t);
    if (phi == "square") return x0 * x0 * std::exp((2.0 * mu + sigma * sigma) * t);
    return std::nullopt;
  };
  return p;
}

double apply_test_function(std::string_view phi, const State& x) {
  if (x.empty()) throw DimensionError("apply_test_function: empty state");
  if (phi == "identity") return x[0];
  if (phi == "square") return x[0] * x[0];
  throw ConfigError("unknown test function '" + std::string(phi) + "' (valid: identity, square)");
}

State euler_maruyama_step(const SDEProblem& prob, const State& x, double t, double dt, double dw) {
  if (!(dt > 0.0)) throw ContractError("euler_maruyama_step: dt must be positive");
  const State f = prob.drift(x, t);
  const State g = prob.diffusion(x, t);
  if (g.size() != x.size()) throw DimensionError("euler_maruyama_step: diffusion changes dimension");
  State out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + dt * f[i] + g[i] * dw;
  if (!all_finite(out)) throw OverflowError("euler_maruyama_step: non-finite state", 0);
  return out;
}

ExpectationEstimate simulate_expectation(const SDEProblem& prob, IncrementKind kind, std::string_view phi,
                                         double dt, std::size_t paths, std::uint64_t seed) {
  if (paths < 2) throw ContractError("simulate_expectation: need at least 2 paths");
  const std::size_t n_steps = ode::step_count(0.0, prob.horizon, dt);
  const double h = n_steps == 0 ? dt : prob.horizon / static_cast<double>(n_steps);
  const IncrementDistribution dist{kind, h};
  const Rng base = Rng(seed).stream("paths");

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t p = 0; p < paths; ++p) {
    Rng rng = base.substream(p);
    State x = prob.x0;
    for (std::size_t i = 0; i < n_steps; ++i) {
      const double t = static_cast<double>(i) * h;
      try {
        x = euler_maruyama_step(prob, x, t, h, sample_increment(dist, rng));
      } catch (const OverflowError&) {
        throw OverflowError("simulate_expectation: path " + std::to_string(p) + " overflowed", i + 1);
      }
    }
    const double v = apply_test_function(phi, x);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(paths);
  ExpectationEstimate est;
  est.paths = paths;
  est.estimate = sum / n;
  const double var = std::max(0.0, (sum_sq - n * est.estimate * est.estimate) / (n - 1.0));
  est.std_dev = std::sqrt(var);
  est.half_width = 1.959963984540054 * est.std_dev / std::sqrt(n);
  return est;
}

WeakErrorReport weak_error_sweep(const SDEProblem& prob, IncrementKind kind, std::string_view phi,
                                 const std::vector<double>& dts, std::size_t paths, std::uint64_t seed) {
  if (!prob.analytic_expectation) throw ContractError("weak_error_sweep: problem has no analytic expectation");
  const std::optional<double> analytic = prob.analytic_expectation(phi, prob.horizon);
  if (!analytic) throw ContractError("weak_error_sweep: no analytic expectation for phi=" + std::string(phi));
  if (dts.empty()) throw ContractError("weak_error_sweep: empty step-size list");

  WeakErrorReport report;
  std::vector<double> log_dt, log_bias;
  bool any_resolved = false;
  for (double dt : dts) {
    const ExpectationEstimate est = simulate_expectation(prob, kind, phi, dt, paths, seed);
    WeakErrorRow row{dt, est.estimate, est.half_width, *analytic, std::abs(est.estimate - *analytic)};
    if (row.abs_bias > row.half_width) {
      any_resolved = true;
      log_dt.push_back(std::log(dt));
      log_bias.push_back(std::log(row.abs_bias));
    }
    report.rows.push_back(row);
  }
  report.inconclusive = !any_resolved;
  if (log_dt.size() >= 2) report.bias_slope = modeq::fit_line(log_dt, log_bias).slope;
  return report;
}

// ---- stochastic residual updates ----------------------------------------------

namespace {

void require_same(const State& a, const State& b, const char* op) {
  if (a.size() != b.size()) throw DimensionError(std::string(op) + ": size mismatch");
}

}  // namespace

State shake_shake_step(const State& f1_val, const State& f2_val, const State& x, double dt, double eta) {
  require_same(f1_val, x, "shake_shake_step");
  require_same(f2_val, x, "shake_shake_step");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ContractError("shake_shake_step: eta must lie in [0, 1]");
  if (!(dt > 0.0)) throw ContractError("shake_shake_step: dt must be positive");
  const double root = std::sqrt(dt);
  const double c1 = 0.5 * dt + root * (eta - 0.5);
  const double c2 = 0.5 * dt + root * (0.5 - eta);
  State out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + c1 * f1_val[i] + c2 * f2_val[i];
  return out;
}

State stochastic_depth_step(const State& f_val, const State& x, double dt, double p, int eta) {
  require_same(f_val, x, "stochastic_depth_step");
  if (eta != 0 && eta != 1) throw ContractError("stochastic_depth_step: eta must be 0 or 1");
  if (!(p > 0.0 && p < 1.0)) throw ContractError("stochastic_depth_step: p must lie in (0, 1)");
  if (!(dt > 0.0)) throw ContractError("stochastic_depth_step: dt must be positive");
  // sqrt(dt) (eta - p) / sqrt(p(1-p)) * sqrt(p(1-p)) simplifies to sqrt(dt) (eta - p).
  const double c = dt * p + std::sqrt(dt) * (static_cast<double>(eta) - p);
  State out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + c * f_val[i];
  return out;
}

State stochastic_lm_step(const State& x_n, const State& x_prev, const State& f_val, double g, int eta) {
  require_same(x_n, x_prev, "stochastic_lm_step");
  require_same(x_n, f_val, "stochastic_lm_step");
  if (eta != 0 && eta != 1) throw ContractError("stochastic_lm_step: eta must be 0 or 1");
  const double a = 2.0 + g;
  const double b = -(1.0 + g);
  const double e = static_cast<double>(eta);
  State out(x_n.size());
  for (std::size_t i = 0; i < x_n.size(); ++i) out[i] = a * x_n[i] + b * x_prev[i] + e * f_val[i];
  return out;
}

}  // namespace odenet::sde
