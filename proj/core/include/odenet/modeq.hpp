#pragma once

// Order-of-accuracy measurement against modified (backward-error) vector
// fields of forward Euler and of the two-step LM update.
//
// The modified equations are second order in time:
//   forward Euler:  u' + (dt/2) u''            = f(u)
//   LM(k):          (1+k) u' + (1-k)(dt/2) u'' = f(u)
// They are reduced to first order with the leading-order substitution
// u'' ~ J_f(u) u', giving
//   forward Euler:  u' = f - (dt/2) J_f f
//   LM(k):          u' = f/(1+k) - dt (1-k) / (2 (1+k)^3) J_f f

#include <cstddef>
#include <functional>
#include <variant>
#include <vector>

#include "odenet/dyncore.hpp"
#include "odenet/odeschemes.hpp"

namespace odenet::modeq {

struct ForwardEulerKind {};
struct LMKind {
  double k = 0.0;
};
using ReductionKind = std::variant<ForwardEulerKind, LMKind>;

/// Throws ContractError when f has no jacobian, ContractError (singular
/// reduction) when 1 + k == 0.
VectorField reduced_modified_field(const VectorField& f, double dt, const ReductionKind& kind);

struct OrderReport {
  std::vector<double> dts;
  std::vector<double> errors;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double fit_residual = 0.0;  // root-mean-square residual of the log-log fit
  bool reliable = false;      // r_squared >= 0.99
};

/// Maps a step size to the state the stepper reaches at the horizon.
using Stepper = std::function<State(double dt)>;

/// What a stepper is compared against: a closed-form solution, or a field
/// (possibly dt-dependent, like a modified field) integrated with RK4 at
/// dt_ref = min(dts) / 100.
struct ExactReference {
  std::function<State(double t)> exact;
};
struct FieldReference {
  std::function<VectorField(double dt)> field_for_dt;
};
using Reference = std::variant<ExactReference, FieldReference>;

/// Least-squares slope of log(error) against log(dt). Requires >= 4
/// geometrically spaced step sizes and strictly positive errors.
OrderReport estimate_order(const Stepper& stepper, const Reference& reference, const State& u0, double t0,
                           double horizon, const std::vector<double>& dts);

/// Straight-line least squares on (x, y) pairs.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double rms_residual = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// dts[0] * ratio^i for i in [0, count).
std::vector<double> geometric_steps(double first, double ratio, std::size_t count);

/// Final state of integrate(scheme, ...) as a Stepper.
Stepper scheme_stepper(const ode::SchemeSpec& scheme, const VectorField& f, const State& u0, double t0,
                       double horizon);

/// LM(k) stepper whose first step is taken on a supplied starting curve
/// (typically the reference solution), so the two-step recurrence starts on
/// the trajectory it is being compared with.
Stepper lm_stepper(double k, const VectorField& f, const State& u0, double t0, double horizon,
                   std::function<State(double dt)> first_step);

/// RK4 solution of `field` at the horizon with step dt_ref.
State rk4_solution(const VectorField& field, const State& u0, double t0, double horizon, double dt_ref);

/// Energy g(u_n) = -u^T J u / 2 along LM(k) iterates of a linear gradient flow
/// u' = J u (J symmetric negative definite), starting with u_{-1} = u_0.
/// k = 0 is forward Euler. Reported for comparison only; no threshold applies.
std::vector<double> gradient_flow_energy(const Matrix& jacobian, const State& u0, double k, double dt,
                                         std::size_t steps);

}  // namespace odenet::modeq
