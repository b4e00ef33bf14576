#include "odenet/odeschemes.hpp"

#include <cmath>
#include <limits>

#include "odenet/errors.hpp"

namespace odenet::ode {

namespace {

void require_positive_step(double dt, const char* op) {
  if (!(dt > 0.0)) throw ContractError(std::string(op) + ": dt must be positive");
}

void require_finite(const State& u, const char* op, std::size_t step = 0) {
  if (!all_finite(u)) throw OverflowError(std::string(op) + ": non-finite state", step);
}

}  // namespace

// ---- coefficient sets -------------------------------------------------------

void SchemeCoefficients::validate() const {
  if (k == 0) throw ContractError("SchemeCoefficients: k must be >= 1");
  if (alpha.size() != k + 1) throw ContractError("SchemeCoefficients: alpha needs k + 1 entries");
  if (beta.size() != k) throw ContractError("SchemeCoefficients: beta needs k entries");
  if (alpha[0] == 0.0) throw ContractError("SchemeCoefficients: alpha_0 must be nonzero");
  bool any = beta_implicit != 0.0;
  for (std::size_t j = 0; j <= k; ++j) {
    if (alpha[j] != 0.0) any = true;
    if (j < k && beta[j] != 0.0) any = true;
  }
  if (!any) throw ContractError("SchemeCoefficients: all coefficients vanish");
}

SchemeCoefficients SchemeCoefficients::forward_euler() { return {1, {1.0, -1.0}, {1.0}, 0.0}; }

SchemeCoefficients SchemeCoefficients::adams_bashforth2() {
  return {2, {1.0, -1.0, 0.0}, {1.5, -0.5}, 0.0};
}

bool RKTableau::is_explicit() const {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i; j < a[i].size(); ++j)
      if (a[i][j] != 0.0) return false;
  return true;
}

void RKTableau::validate() const {
  const std::size_t s = b.size();
  if (s == 0 || a.size() != s || c.size() != s) throw ContractError("RKTableau: inconsistent stage counts");
  for (const auto& row : a)
    if (row.size() > s) throw ContractError("RKTableau: stage row too long");
  if (!is_explicit()) throw ContractError("RKTableau: only explicit (strictly lower triangular) tableaus");
}

RKTableau RKTableau::rk2() { return {{{}, {1.0}}, {0.5, 0.5}, {0.0, 1.0}}; }

RKTableau RKTableau::rk4() {
  return {{{}, {0.5}, {0.0, 0.5}, {0.0, 0.0, 1.0}},
          {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0},
          {0.0, 0.5, 0.5, 1.0}};
}

// ---- single steps -------------------------------------------------------------

State forward_euler_step(const VectorField& f, const State& u, double t, double dt) {
  require_positive_step(dt, "forward_euler_step");
  const State fu = f(u, t);
  State out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + dt * fu[i];
  require_finite(out, "forward_euler_step");
  return out;
}

State backward_euler_step(const VectorField& f, const State& u, double t, double dt, const NewtonOptions& options) {
  require_positive_step(dt, "backward_euler_step");
  if (!(options.tol > 0.0)) throw ContractError("backward_euler_step: tol must be positive");
  const double t_next = t + dt;
  const std::size_t n = u.size();
  auto residual_of = [&](const State& v) {
    const State fv = f(v, t_next);
    State r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = v[i] - u[i] - dt * fv[i];
    return r;
  };

  State v = u;
  State r = residual_of(v);
  double rnorm = norm2(r);
  for (int it = 0; it < options.max_iter && rnorm > options.tol; ++it) {
    if (f.has_jacobian()) {
      Matrix jac = f.jacobian(v, t_next);
      Matrix system(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) system(i, j) = (i == j ? 1.0 : 0.0) - dt * jac(i, j);
      const State delta = solve(std::move(system), scaled(-1.0, r));
      for (std::size_t i = 0; i < n; ++i) v[i] += delta[i];
    } else {
      const State fv = f(v, t_next);
      for (std::size_t i = 0; i < n; ++i)
        v[i] = (1.0 - options.damping) * v[i] + options.damping * (u[i] + dt * fv[i]);
    }
    if (!all_finite(v)) throw ConvergenceError("backward_euler_step: iterate diverged", rnorm);
    r = residual_of(v);
    rnorm = norm2(r);
  }
  if (!(rnorm <= options.tol)) throw ConvergenceError("backward_euler_step: no convergence", rnorm);
  return v;
}

NeumannResult neumann_inverse_report(const Matrix& a, double dt, std::size_t order, const State& u) {
  if (a.rows() != a.cols() || a.cols() != u.size()) throw DimensionError("neumann_inverse_apply: shape mismatch");
  const Matrix step = scaled(dt, a);
  NeumannResult result;
  result.spectral_radius = spectral_radius_estimate(step, 100);
  if (result.spectral_radius >= 1.0) {
    throw DivergenceError("neumann_inverse_apply: spectral radius of dt*A is " +
                              std::to_string(result.spectral_radius) + " >= 1; series invalid",
                          result.spectral_radius);
  }
  result.borderline = result.spectral_radius >= 0.95;
  State term = u;
  result.value = u;
  for (std::size_t j = 1; j <= order; ++j) {
    term = matvec(step, term);
    for (std::size_t i = 0; i < term.size(); ++i) result.value[i] += term[i];
  }
  return result;
}

State neumann_inverse_apply(const Matrix& a, double dt, std::size_t order, const State& u) {
  return neumann_inverse_report(a, dt, order, u).value;
}

double neumann_error_bound(const Matrix& a, double dt, std::size_t order, const State& u) {
  const double q = frobenius_norm(scaled(dt, a));
  if (q >= 1.0) return std::numeric_limits<double>::infinity();
  return std::pow(q, static_cast<double>(order + 1)) * norm2(u) / (1.0 - q);
}

State explicit_rk_step(const RKTableau& tableau, const VectorField& f, const State& u, double t, double dt) {
  tableau.validate();
  require_positive_step(dt, "explicit_rk_step");
  const std::size_t s = tableau.stages();
  const std::size_t n = u.size();
  std::vector<State> k(s);
  for (std::size_t i = 0; i < s; ++i) {
    State stage = u;
    for (std::size_t j = 0; j < tableau.a[i].size() && j < i; ++j) {
      const double aij = tableau.a[i][j];
      if (aij == 0.0) continue;
      for (std::size_t m = 0; m < n; ++m) stage[m] += dt * aij * k[j][m];
    }
    if (!all_finite(stage)) throw OverflowError("explicit_rk_step: non-finite stage", 0);
    k[i] = f(stage, t + tableau.c[i] * dt);
  }
  State out = u;
  for (std::size_t i = 0; i < s; ++i) {
    const double bi = tableau.b[i];
    for (std::size_t m = 0; m < n; ++m) out[m] += dt * bi * k[i][m];
  }
  require_finite(out, "explicit_rk_step");
  return out;
}

State lmm_step(const SchemeCoefficients& coeffs, const VectorField& f, std::span<const HistoryPoint> history,
               double dt) {
  coeffs.validate();
  if (!coeffs.is_explicit()) throw ContractError("lmm_step: implicit coefficients are not supported");
  if (history.size() != coeffs.k) {
    throw ContractError("lmm_step: need " + std::to_string(coeffs.k) + " history points, got " +
                        std::to_string(history.size()));
  }
  require_positive_step(dt, "lmm_step");
  const std::size_t n = history[0].u.size();
  State rhs(n, 0.0);
  for (std::size_t j = 1; j <= coeffs.k; ++j) {
    const State& uj = history[j - 1].u;
    if (uj.size() != n) throw DimensionError("lmm_step: history dimensions differ");
    const double c = -coeffs.alpha[j];
    for (std::size_t m = 0; m < n; ++m) rhs[m] += c * uj[m];
  }
  State fsum(n, 0.0);
  for (std::size_t j = 0; j < coeffs.k; ++j) {
    if (coeffs.beta[j] == 0.0) continue;
    const State fj = f(history[j].u, history[j].t);
    for (std::size_t m = 0; m < n; ++m) fsum[m] += coeffs.beta[j] * fj[m];
  }
  State out(n);
  for (std::size_t m = 0; m < n; ++m) out[m] = (rhs[m] + dt * fsum[m]) / coeffs.alpha[0];
  require_finite(out, "lmm_step");
  return out;
}

State lm_architecture_step(double k, const State& u_n, const State& u_prev, const State& f_val, double dt) {
  const std::size_t n = u_n.size();
  if (u_prev.size() != n || f_val.size() != n) throw DimensionError("lm_architecture_step: size mismatch");
  State out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 - k) * u_n[i] + k * u_prev[i] + dt * f_val[i];
  require_finite(out, "lm_architecture_step");
  return out;
}

// ---- stability ----------------------------------------------------------------

CharacteristicRoots characteristic_roots(double k) {
  CharacteristicRoots r;
  r.first = {1.0, 0.0};
  r.second = {-k, 0.0};
  r.zero_stable = std::abs(k) <= 1.0 && k != -1.0;
  return r;
}

StabilityAudit audit_lm_stability(const LMStepParams& params) {
  StabilityAudit audit;
  for (std::size_t i = 0; i < params.k.size(); ++i) {
    const double k = params.k[i];
    const double mag = std::abs(k);
    if (mag > 1.0 || !std::isfinite(k)) {
      audit.outside.push_back(i + 1);
    } else if (mag == 1.0) {
      audit.boundary.push_back(i + 1);
    } else {
      ++audit.inside_open_interval;
    }
    if (!characteristic_roots(k).zero_stable) audit.all_zero_stable = false;
  }
  return audit;
}

// ---- driver -------------------------------------------------------------------

SchemeKind parse_scheme_kind(std::string_view name) {
  if (name == "forward_euler") return SchemeKind::forward_euler;
  if (name == "backward_euler") return SchemeKind::backward_euler;
  if (name == "rk2") return SchemeKind::rk2;
  if (name == "rk4") return SchemeKind::rk4;
  if (name == "ab2") return SchemeKind::ab2;
  if (name == "lm") return SchemeKind::lm;
  throw ConfigError("unknown scheme '" + std::string(name) +
                    "' (valid: forward_euler, backward_euler, rk2, rk4, ab2, lm)");
}

std::string_view to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::forward_euler: return "forward_euler";
    case SchemeKind::backward_euler: return "backward_euler";
    case SchemeKind::rk2: return "rk2";
    case SchemeKind::rk4: return "rk4";
    case SchemeKind::ab2: return "ab2";
    case SchemeKind::lm: return "lm";
    case SchemeKind::lmm: return "lmm";
  }
  return "unknown";
}

std::size_t scheme_steps(const SchemeSpec& spec) {
  switch (spec.kind) {
    case SchemeKind::ab2:
    case SchemeKind::lm: return 2;
    case SchemeKind::lmm:
      if (!spec.coeffs) throw ContractError("SchemeSpec: lmm requires coefficients");
      return spec.coeffs->k;
    default: return 1;
  }
}

std::size_t step_count(double t0, double t_end, double dt) {
  require_positive_step(dt, "integrate");
  if (!(t_end >= t0)) throw ContractError("integrate: t_end must not precede t0");
  if (t_end == t0) return 0;
  const double ratio = (t_end - t0) / dt;
  if (!(ratio < static_cast<double>(kMaxSteps))) throw ContractError("integrate: step budget exceeded");
  // Guard against ratios like 10.000000000000002 from inexact dt.
  const double n = std::ceil(ratio * (1.0 - 1e-12));
  return static_cast<std::size_t>(std::max(1.0, n));
}

Trajectory integrate(const SchemeSpec& scheme, const VectorField& f, const State& u0, double t0, double t_end,
                     double dt) {
  const std::size_t n_steps = step_count(t0, t_end, dt);
  Trajectory traj;
  traj.push(t0, u0);
  if (n_steps == 0) return traj;
  const double h = (t_end - t0) / static_cast<double>(n_steps);
  auto time_at = [&](std::size_t i) { return i == n_steps ? t_end : t0 + static_cast<double>(i) * h; };

  const std::size_t k = scheme_steps(scheme);
  const RKTableau bootstrap = k <= 2 ? RKTableau::rk2() : RKTableau::rk4();
  const SchemeCoefficients coeffs = scheme.kind == SchemeKind::ab2   ? SchemeCoefficients::adams_bashforth2()
                                    : scheme.kind == SchemeKind::lmm ? *scheme.coeffs
                                                                     : SchemeCoefficients::forward_euler();
  const RKTableau rk2 = RKTableau::rk2();
  const RKTableau rk4 = RKTableau::rk4();

  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = traj.times.back();
    const State& u = traj.states.back();
    State next;
    try {
      if (k > 1 && i + 1 < k) {
        next = explicit_rk_step(bootstrap, f, u, t, h);
      } else {
        switch (scheme.kind) {
          case SchemeKind::forward_euler: next = forward_euler_step(f, u, t, h); break;
          case SchemeKind::backward_euler: next = backward_euler_step(f, u, t, h, scheme.newton); break;
          case SchemeKind::rk2: next = explicit_rk_step(rk2, f, u, t, h); break;
          case SchemeKind::rk4: next = explicit_rk_step(rk4, f, u, t, h); break;
          case SchemeKind::lm: {
            const State& prev = traj.states[traj.states.size() - 2];
            next = lm_architecture_step(scheme.lm_k, u, prev, f(u, t), h);
            break;
          }
          case SchemeKind::ab2:
          case SchemeKind::lmm: {
            std::vector<HistoryPoint> history;
            history.reserve(k);
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t idx = traj.states.size() - 1 - j;
              history.push_back({traj.times[idx], traj.states[idx]});
            }
            next = lmm_step(coeffs, f, history, h);
            break;
          }
        }
      }
    } catch (const OverflowError&) {
      throw OverflowError(std::string("integrate: ") + std::string(to_string(scheme.kind)) + " overflowed", i + 1);
    }
    if (!all_finite(next)) {
      throw OverflowError(std::string("integrate: ") + std::string(to_string(scheme.kind)) + " overflowed", i + 1);
    }
    traj.push(time_at(i + 1), std::move(next));
  }
  return traj;
}

}  // namespace odenet::ode
