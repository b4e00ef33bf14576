#pragma once

// Ito dynamics with scalar driving noise: Euler-Maruyama and the simplified
// weak Euler scheme with non-Gaussian increments, the weak moment condition,
// Monte Carlo weak-error sweeps, and the stochastic residual-block updates
// (shake-shake, stochastic depth, stochastic LM) read as weak schemes.
//
// Training with these updates can be framed as the stochastic control problem
//   min_theta E[ L(X(T)) + int_0^T R(theta) ]  s.t.  dX = f(X, theta) dt + g(X, theta) dB_t.
// The library only simulates the dynamics; it does not solve that problem.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "odenet/dyncore.hpp"

namespace odenet::sde {

enum class IncrementKind {
  gaussian,        // N(0, dt)
  two_point,       // +-sqrt(dt) with probability 1/2
  uniform,         // U[-sqrt(3 dt), +sqrt(3 dt)]
  constant_shift,  // always +sqrt(dt); violates the moment condition
};

IncrementKind parse_increment_kind(std::string_view name);
std::string_view to_string(IncrementKind kind);

struct IncrementDistribution {
  IncrementKind kind = IncrementKind::gaussian;
  double dt = 0.0;
};

double sample_increment(const IncrementDistribution& dist, Rng& rng);

struct MomentCheck {
  double abs_mean = 0.0;               // |E W|
  double abs_third = 0.0;              // |E W^3|
  double abs_second_minus_dt = 0.0;    // |E W^2 - dt|
  bool pass = false;                   // each term <= K dt^2
};

/// Closed-form moments of the increment law against |.| <= K dt^2 (K = 1).
MomentCheck moment_condition_check(const IncrementDistribution& dist, double k_const = 1.0);

/// Monte Carlo estimates of E W, E W^2, E W^3.
struct EmpiricalMoments {
  double mean = 0.0;
  double second = 0.0;
  double third = 0.0;
  double variance = 0.0;
};
EmpiricalMoments empirical_moments(const IncrementDistribution& dist, std::size_t draws, Rng& rng);

/// dX = drift(X, t) dt + diffusion(X, t) dB_t with one scalar Brownian motion
/// driving every coordinate.
struct SDEProblem {
  VectorField drift;
  std::function<State(const State&, double)> diffusion;
  State x0;
  double horizon = 1.0;
  /// E[phi(X_T)] for the named test functions, when known.
  std::function<std::optional<double>(std::string_view phi, double horizon)> analytic_expectation;
};

/// Geometric Brownian motion dX = mu X dt + sigma X dB (scalar).
SDEProblem gbm_problem(double mu, double sigma, double x0, double horizon = 1.0);

/// Test functions phi applied to X_T. "identity" and "square" act on the
/// first coordinate.
double apply_test_function(std::string_view phi, const State& x);

/// X + drift(X, t) dt + diffusion(X, t) dW.
State euler_maruyama_step(const SDEProblem& prob, const State& x, double t, double dt, double dw);

struct ExpectationEstimate {
  double estimate = 0.0;
  double half_width = 0.0;  // 95% normal-theory half-width
  double std_dev = 0.0;
  std::size_t paths = 0;
};

/// Monte Carlo E[phi(X_T)]; path i draws from Rng(seed).stream("paths").substream(i),
/// so results do not depend on scheduling.
ExpectationEstimate simulate_expectation(const SDEProblem& prob, IncrementKind kind, std::string_view phi,
                                         double dt, std::size_t paths, std::uint64_t seed);

struct WeakErrorRow {
  double dt = 0.0;
  double estimate = 0.0;
  double half_width = 0.0;
  double analytic = 0.0;
  double abs_bias = 0.0;
};

struct WeakErrorReport {
  std::vector<WeakErrorRow> rows;
  std::optional<double> bias_slope;  // undefined with fewer than 2 resolvable step sizes
  bool inconclusive = false;         // every CI is wider than its bias
};

/// Bias of the Monte Carlo estimate per dt. The same per-path seeds are used
/// at every dt (common random numbers across the sweep).
WeakErrorReport weak_error_sweep(const SDEProblem& prob, IncrementKind kind, std::string_view phi,
                                 const std::vector<double>& dts, std::size_t paths, std::uint64_t seed);

// ---- stochastic residual updates ----------------------------------------------

/// X + (dt/2 + sqrt(dt)(eta - 1/2)) f1 + (dt/2 + sqrt(dt)(1/2 - eta)) f2, eta in [0, 1].
State shake_shake_step(const State& f1_val, const State& f2_val, const State& x, double dt, double eta);

/// X + (dt p + sqrt(dt)(eta - p)) f with eta in {0, 1}; at dt = 1 this is X + eta f.
State stochastic_depth_step(const State& f_val, const State& x, double dt, double p, int eta);

/// (2 + g) X_n - (1 + g) X_prev + eta f, eta in {0, 1}.
State stochastic_lm_step(const State& x_n, const State& x_prev, const State& f_val, double g, int eta);

}  // namespace odenet::sde
