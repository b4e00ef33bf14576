#include <cmath>

#include <gtest/gtest.h>

#include "odenet/errors.hpp"
#include "odenet/odeschemes.hpp"
#include "odenet/sdeschemes.hpp"

using namespace odenet;
using namespace odenet::sde;

TEST(Increments, TwoPointValues) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double w = sample_increment({IncrementKind::two_point, 0.01}, rng);
    ASSERT_TRUE(w == 0.1 || w == -0.1) << w;
  }
}

TEST(Increments, UniformSupport) {
  Rng rng(2);
  const double edge = std::sqrt(0.03);
  for (int i = 0; i < 10000; ++i) {
    const double w = sample_increment({IncrementKind::uniform, 0.01}, rng);
    ASSERT_LE(std::abs(w), edge);
  }
  EXPECT_NEAR(edge, 0.17320, 1e-5);
}

TEST(Increments, GaussianVarianceWithinSamplingBand) {
  Rng rng(3);
  const double dt = 0.01;
  const std::size_t n = 1000000;
  const auto m = empirical_moments({IncrementKind::gaussian, dt}, n, rng);
  // Var of the sample variance of N(0, dt) is 2 dt^2 / n.
  EXPECT_NEAR(m.variance, dt, 3.0 * std::sqrt(2.0 / static_cast<double>(n)) * dt);
}

TEST(MomentCondition, SymmetricLawsAreExact) {
  for (double dt : {1.0, 0.1, 0.001}) {
    for (auto kind : {IncrementKind::two_point, IncrementKind::uniform, IncrementKind::gaussian}) {
      const auto c = moment_condition_check({kind, dt});
      EXPECT_EQ(c.abs_mean, 0.0);
      EXPECT_EQ(c.abs_third, 0.0);
      EXPECT_EQ(c.abs_second_minus_dt, 0.0);
      EXPECT_TRUE(c.pass);
    }
  }
}

TEST(MomentCondition, ConstantShiftFails) {
  const double dt = 0.01;
  const auto c = moment_condition_check({IncrementKind::constant_shift, dt});
  EXPECT_DOUBLE_EQ(c.abs_mean, std::sqrt(dt));
  EXPECT_DOUBLE_EQ(c.abs_third, std::pow(dt, 1.5));
  EXPECT_EQ(c.abs_second_minus_dt, 0.0);
  EXPECT_FALSE(c.pass);
}

TEST(EulerMaruyama, NoDriftNoDiffusion) {
  SDEProblem p;
  p.drift = linear_field(Matrix(2, 2, 0.0));
  p.diffusion = [](const State& x, double) { return State(x.size(), 0.0); };
  EXPECT_EQ(euler_maruyama_step(p, {1.0, 2.0}, 0.0, 0.1, 0.7), (State{1.0, 2.0}));
}

TEST(EulerMaruyama, ZeroDiffusionIsForwardEulerBitwise) {
  Rng rng(5);
  SDEProblem p;
  p.drift = linear_field(Matrix::from_rows({{0.3, -1.2}, {0.8, -0.1}}));
  p.diffusion = [](const State& x, double) { return State(x.size(), 0.0); };
  for (int i = 0; i < 100; ++i) {
    const State x{rng.normal(), rng.normal()};
    const double dt = rng.uniform(0.001, 0.5);
    EXPECT_EQ(euler_maruyama_step(p, x, 0.0, dt, rng.normal()), ode::forward_euler_step(p.drift, x, 0.0, dt));
  }
  SDEProblem q;
  q.drift = linear_field(Matrix(1, 1, 1.0));
  q.diffusion = [](const State& x, double) { return State(x.size(), 0.0); };
  EXPECT_DOUBLE_EQ(euler_maruyama_step(q, {1.0}, 0.0, 0.1, 0.3)[0], 1.1);
}

TEST(Gbm, AnalyticMoments) {
  const auto p = gbm_problem(0.5, 0.2, 1.0);
  EXPECT_NEAR(*p.analytic_expectation("identity", 1.0), std::exp(0.5), 1e-15);
  EXPECT_NEAR(*p.analytic_expectation("square", 1.0), std::exp(1.04), 1e-14);
}

TEST(WeakSweep, SingleStepSizeLeavesSlopeUndefined) {
  const auto p = gbm_problem(0.5, 0.2, 1.0);
  const auto r = weak_error_sweep(p, IncrementKind::gaussian, "identity", {0.25}, 2000, 7);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_FALSE(r.bias_slope.has_value());
}

TEST(WeakSweep, GaussianBiasSlopeNearOne) {
  const auto p = gbm_problem(0.5, 0.2, 1.0);
  const auto r = weak_error_sweep(p, IncrementKind::gaussian, "identity", {0.5, 0.25, 0.125, 0.0625}, 100000, 42);
  ASSERT_TRUE(r.bias_slope.has_value());
  EXPECT_NEAR(*r.bias_slope, 1.0, 0.3);
  EXPECT_FALSE(r.inconclusive);
}

TEST(WeakSweep, TwoPointAgreesWithGaussian) {
  const auto p = gbm_problem(0.5, 0.2, 1.0);
  const std::vector<double> dts{0.5, 0.25, 0.125, 0.0625};
  const auto g = weak_error_sweep(p, IncrementKind::gaussian, "identity", dts, 100000, 42);
  const auto t = weak_error_sweep(p, IncrementKind::two_point, "identity", dts, 100000, 42);
  for (std::size_t i = 0; i < dts.size(); ++i) {
    EXPECT_LE(std::abs(g.rows[i].estimate - t.rows[i].estimate), g.rows[i].half_width + t.rows[i].half_width);
  }
}

TEST(WeakSweep, TinyBiasIsInconclusive) {
  const auto p = gbm_problem(0.5, 0.2, 1.0);
  const auto r = weak_error_sweep(p, IncrementKind::gaussian, "identity", {0.001, 0.0005}, 200, 1);
  EXPECT_TRUE(r.inconclusive);
}

TEST(Simulation, IndependentOfPathOrder) {
  const auto p = gbm_problem(0.5, 0.2, 1.0);
  const auto a = simulate_expectation(p, IncrementKind::gaussian, "identity", 0.1, 500, 9);
  const auto b = simulate_expectation(p, IncrementKind::gaussian, "identity", 0.1, 500, 9);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.half_width, b.half_width);
}

TEST(ShakeShake, UnitStepIsConvexCombination) {
  const State f1{1.0, -2.0}, f2{0.5, 4.0}, x{0.25, 0.75};
  for (int j = 0; j <= 64; ++j) {
    const double eta = j / 64.0;
    const State expected{x[0] + eta * f1[0] + (1.0 - eta) * f2[0], x[1] + eta * f1[1] + (1.0 - eta) * f2[1]};
    EXPECT_EQ(shake_shake_step(f1, f2, x, 1.0, eta), expected) << eta;
  }
}

TEST(ShakeShake, HalfIsMidpoint) {
  const State f1{1.0, -2.0}, f2{0.5, 4.0}, x{0.25, 0.75};
  const double dt = 0.3;
  const State s = shake_shake_step(f1, f2, x, dt, 0.5);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(s[i], x[i] + dt / 2 * (f1[i] + f2[i]), 1e-15);
}

TEST(ShakeShake, IdenticalBranchesCancelNoise) {
  Rng rng(3);
  const State f{0.7, -1.1}, x{1.0, 2.0};
  for (int i = 0; i < 50; ++i) {
    const double dt = rng.uniform(0.01, 1.0);
    const State s = shake_shake_step(f, f, x, dt, rng.uniform());
    for (std::size_t d = 0; d < 2; ++d) EXPECT_NEAR(s[d], x[d] + dt * f[d], 1e-14);
  }
}

TEST(ShakeShake, EtaOutsideUnitIntervalRejected) {
  EXPECT_THROW(shake_shake_step({1.0}, {1.0}, {0.0}, 1.0, 1.5), ContractError);
}

TEST(StochasticDepth, UnitStepDropsOrKeeps) {
  const State f{0.3, -0.2}, x{1.0, 1.0};
  EXPECT_EQ(stochastic_depth_step(f, x, 1.0, 0.7, 0), x);
  EXPECT_EQ(stochastic_depth_step(f, x, 1.0, 0.7, 1), (State{1.3, 0.8}));
  EXPECT_THROW(stochastic_depth_step(f, x, 1.0, 0.7, 2), ContractError);
  EXPECT_THROW(stochastic_depth_step(f, x, 1.0, 1.0, 1), ContractError);
}

TEST(StochasticDepth, MonteCarloMeanAndVariance) {
  Rng rng(12);
  const double p = 0.7;
  const State f{0.3, -0.2}, x{1.0, 1.0};
  const std::size_t n = 100000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int eta = rng.bernoulli(p) ? 1 : 0;
    const double y = stochastic_depth_step(f, x, 1.0, p, eta)[0];
    sum += y;
    sq += y * y;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double true_var = p * (1 - p) * f[0] * f[0];
  EXPECT_NEAR(mean, x[0] + p * f[0], 3.0 * std::sqrt(true_var / n));
  // Standard error of a Bernoulli-driven sample variance.
  const double var_se = f[0] * f[0] * std::sqrt(p * (1 - p) * (1 - 4 * p * (1 - p)) / n);
  EXPECT_NEAR(var, true_var, 3.0 * var_se);
}

TEST(StochasticLM, PureMomentum) {
  EXPECT_EQ(stochastic_lm_step({2.0}, {1.5}, {9.0}, 0.0, 0), State{2.5});
}

TEST(StochasticLM, EqualHistoryAddsBranch) {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const double g = rng.uniform(-3.0, 3.0);
    const State s = stochastic_lm_step({0.5}, {0.5}, {0.25}, g, 1);
    EXPECT_NEAR(s[0], 0.75, 1e-14);
  }
}

TEST(StochasticLM, MatchesLMArchitectureStepOnDyadicK) {
  Rng rng(7);
  for (int j = -64; j <= 64; ++j) {
    const double k = j / 64.0;
    const State xn{rng.normal(), rng.normal()}, xp{rng.normal(), rng.normal()}, f{rng.normal(), rng.normal()};
    EXPECT_EQ(stochastic_lm_step(xn, xp, f, -1.0 - k, 1), ode::lm_architecture_step(k, xn, xp, f, 1.0)) << k;
  }
}

TEST(StochasticLM, MatchesLMArchitectureStepToRoundingForRandomK) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double k = rng.uniform(-1.0, 1.0);
    const State xn{rng.normal()}, xp{rng.normal()}, f{rng.normal()};
    const double a = stochastic_lm_step(xn, xp, f, -1.0 - k, 1)[0];
    const double b = ode::lm_architecture_step(k, xn, xp, f, 1.0)[0];
    EXPECT_NEAR(a, b, 1e-14 * (1.0 + std::abs(b)));
  }
}
