#pragma once

// Deterministic time steppers: forward/backward Euler, explicit Runge-Kutta,
// explicit linear multi-step methods and the two-step LM-architecture update,
// plus the zero-stability analysis of that update.

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "odenet/dyncore.hpp"

namespace odenet::ode {

/// Coefficients of a k-step linear multi-step method
///
///   sum_{j=0..k} alpha[j] u_{n+1-j} = dt * ( beta_implicit f(u_{n+1})
///                                           + sum_{j=0..k-1} beta[j] f(u_{n-j}) ).
///
/// `beta[j]` multiplies the derivative at the j-th most recent known state, so
/// Adams-Bashforth 2 is alpha = {1, -1, 0}, beta = {3/2, -1/2}. The method is
/// explicit iff beta_implicit == 0.
struct SchemeCoefficients {
  std::size_t k = 1;
  std::vector<double> alpha;
  std::vector<double> beta;
  double beta_implicit = 0.0;

  bool is_explicit() const noexcept { return beta_implicit == 0.0; }
  /// Throws ContractError when sizes or the alpha_0 != 0 condition fail.
  void validate() const;

  static SchemeCoefficients forward_euler();
  static SchemeCoefficients adams_bashforth2();
};

/// Explicit Butcher tableau.
struct RKTableau {
  std::vector<std::vector<double>> a;  // stage matrix, strictly lower triangular
  std::vector<double> b;
  std::vector<double> c;

  std::size_t stages() const noexcept { return b.size(); }
  bool is_explicit() const;
  void validate() const;

  /// u* = u + dt f(u); u+ = u + dt/2 (f(u) + f(u*)).
  static RKTableau rk2();
  static RKTableau rk4();
};

/// Per-layer k_n values of the LM update with their stability audit.
struct LMStepParams {
  std::vector<double> k;
};

// ---- single steps -----------------------------------------------------------

State forward_euler_step(const VectorField& f, const State& u, double t, double dt);

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  double damping = 0.5;  // fixed-point relaxation when no jacobian is available
};

/// Solves v = u + dt f(v, t + dt). Newton when f has a jacobian, damped
/// fixed-point iteration otherwise. Throws ConvergenceError on failure.
State backward_euler_step(const VectorField& f, const State& u, double t, double dt,
                          const NewtonOptions& options = {});

struct NeumannResult {
  State value;
  double spectral_radius = 0.0;  // power-iteration estimate for dt A
  bool borderline = false;       // spectral radius in [0.95, 1)
};

/// sum_{j=0..order} (dt A)^j u, the truncated series for (I - dt A)^{-1} u.
/// Throws DivergenceError when the estimated spectral radius of dt A is >= 1.
NeumannResult neumann_inverse_report(const Matrix& a, double dt, std::size_t order, const State& u);
State neumann_inverse_apply(const Matrix& a, double dt, std::size_t order, const State& u);

/// ||dt A||_F^{order+1} ||u|| / (1 - ||dt A||_F); +inf when ||dt A||_F >= 1.
double neumann_error_bound(const Matrix& a, double dt, std::size_t order, const State& u);

State explicit_rk_step(const RKTableau& tableau, const VectorField& f, const State& u, double t, double dt);

/// One (t, u) pair of multistep history.
struct HistoryPoint {
  double t = 0.0;
  State u;
};

/// history[0] is the newest point (t_n, u_n), history[k-1] the oldest.
State lmm_step(const SchemeCoefficients& coeffs, const VectorField& f, std::span<const HistoryPoint> history,
               double dt);

/// (1 - k) u_n + k u_prev + dt * f_val.
State lm_architecture_step(double k, const State& u_n, const State& u_prev, const State& f_val, double dt);

// ---- stability ----------------------------------------------------------------

struct CharacteristicRoots {
  std::complex<double> first;
  std::complex<double> second;
  bool zero_stable = false;
};

/// Roots of z^2 - (1 - k) z - k = (z - 1)(z + k). Zero-stable iff |k| <= 1 and
/// k != -1 (k = -1 is a double root on the unit circle).
CharacteristicRoots characteristic_roots(double k);

struct StabilityAudit {
  std::vector<std::size_t> outside;   // 1-based layers with |k| > 1
  std::vector<std::size_t> boundary;  // layers with |k| == 1
  std::size_t inside_open_interval = 0;
  bool all_zero_stable = true;
};

StabilityAudit audit_lm_stability(const LMStepParams& params);

// ---- integration driver -------------------------------------------------------

enum class SchemeKind { forward_euler, backward_euler, rk2, rk4, ab2, lm, lmm };

struct SchemeSpec {
  SchemeKind kind = SchemeKind::forward_euler;
  double lm_k = 0.0;                        // kind == lm
  std::optional<SchemeCoefficients> coeffs;  // kind == lmm
  NewtonOptions newton;                     // kind == backward_euler

  static SchemeSpec lm(double k) { return {SchemeKind::lm, k, std::nullopt, {}}; }
  static SchemeSpec of(SchemeKind kind) { return {kind, 0.0, std::nullopt, {}}; }
};

SchemeKind parse_scheme_kind(std::string_view name);
std::string_view to_string(SchemeKind kind);
/// Number of history states the scheme consumes per step.
std::size_t scheme_steps(const SchemeSpec& spec);

/// Upper bound on steps a single integrate() call will take.
inline constexpr std::size_t kMaxSteps = 50'000'000;

/// Integrates from t0 to t_end with N = ceil((t_end - t0) / dt) uniform steps of
/// size (t_end - t0) / N. Two-step schemes bootstrap their first step with RK2,
/// longer ones with RK4. Throws OverflowError carrying the failing step index.
Trajectory integrate(const SchemeSpec& scheme, const VectorField& f, const State& u0, double t0, double t_end,
                     double dt);

/// Number of uniform steps integrate() takes.
std::size_t step_count(double t0, double t_end, double dt);

}  // namespace odenet::ode
