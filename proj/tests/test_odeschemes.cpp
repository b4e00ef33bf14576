#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "odenet/errors.hpp"
#include "odenet/modeq.hpp"
#include "odenet/odeschemes.hpp"

using namespace odenet;
using namespace odenet::ode;

namespace {

VectorField scalar_linear(double a) { return linear_field(Matrix(1, 1, a)); }

VectorField zero_field(std::size_t d) { return linear_field(Matrix(d, d, 0.0)); }

}  // namespace

TEST(ForwardEuler, Growth) {
  EXPECT_EQ(forward_euler_step(scalar_linear(1.0), {1.0}, 0.0, 0.1), State{1.1});
}

TEST(ForwardEuler, ZeroFieldIsIdentity) {
  EXPECT_EQ(forward_euler_step(zero_field(2), {3.0, -4.0}, 0.0, 0.5), (State{3.0, -4.0}));
}

TEST(ForwardEuler, BeyondStabilityBoundaryGrows) {
  const auto f = scalar_linear(-1.0);
  State u{1.0};
  u = forward_euler_step(f, u, 0.0, 2.5);
  EXPECT_DOUBLE_EQ(u[0], -1.5);
  double prev = std::abs(u[0]);
  for (int i = 0; i < 5; ++i) {
    u = forward_euler_step(f, u, 0.0, 2.5);
    EXPECT_GT(std::abs(u[0]), prev);
    prev = std::abs(u[0]);
  }
}

TEST(ForwardEuler, OverflowIsReported) {
  EXPECT_THROW(forward_euler_step(scalar_linear(1e308), {1e308}, 0.0, 10.0), OverflowError);
  EXPECT_THROW(forward_euler_step(scalar_linear(1.0), {1.0}, 0.0, 0.0), ContractError);
}

TEST(BackwardEuler, ScalarLinearSolve) {
  const State v = backward_euler_step(scalar_linear(-1.0), {1.0}, 0.0, 0.1);
  EXPECT_NEAR(v[0], 1.0 / 1.1, 1e-10);
}

TEST(BackwardEuler, ZeroField) {
  EXPECT_EQ(backward_euler_step(zero_field(1), {2.0}, 0.0, 0.1), State{2.0});
}

TEST(BackwardEuler, StiffScalar) {
  const State v = backward_euler_step(scalar_linear(-100.0), {1.0}, 0.0, 1.0);
  EXPECT_NEAR(v[0], 1.0 / 101.0, 1e-10);
}

TEST(BackwardEuler, FixedPointWithoutJacobian) {
  VectorField f = scalar_linear(-1.0);
  f.jacobian = nullptr;
  const State v = backward_euler_step(f, {1.0}, 0.0, 0.1);
  EXPECT_NEAR(v[0], 1.0 / 1.1, 1e-9);
}

TEST(BackwardEuler, NonConvergenceCarriesResidual) {
  VectorField f = scalar_linear(-100.0);
  f.jacobian = nullptr;  // damped fixed point diverges for this stiffness
  try {
    backward_euler_step(f, {1.0}, 0.0, 1.0, NewtonOptions{1e-10, 20, 0.5});
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual(), 1e-10);
  }
}

TEST(Neumann, GeometricSeries) {
  const Matrix a(1, 1, 5.0);
  EXPECT_DOUBLE_EQ(neumann_inverse_apply(a, 0.1, 2, {1.0})[0], 1.75);
  EXPECT_DOUBLE_EQ(neumann_error_bound(a, 0.1, 2, {1.0}), 0.25);
  EXPECT_EQ(neumann_inverse_apply(a, 0.1, 0, {1.0}), State{1.0});
  EXPECT_NEAR(neumann_inverse_apply(a, 0.1, 10, {1.0})[0], 1.999023, 1e-6);
}

TEST(Neumann, DivergentSeriesIsError) {
  EXPECT_THROW(neumann_inverse_apply(Matrix(1, 1, 20.0), 0.1, 3, {1.0}), DivergenceError);
}

TEST(Neumann, BorderlineIsFlaggedButComputed) {
  const auto r = neumann_inverse_report(Matrix(1, 1, 9.7), 0.1, 3, {1.0});
  EXPECT_TRUE(r.borderline);
  EXPECT_NEAR(r.spectral_radius, 0.97, 1e-9);
}

TEST(Neumann, ErrorDecaysGeometricallyInOrder) {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a(3, 3);
    for (double& v : a.values()) v = rng.normal();
    const double target = rng.uniform(0.2, 0.6);
    a = scaled(target / frobenius_norm(a), a);
    const State u{1.0, -2.0, 0.5};
    Matrix i_minus = scaled(-1.0, a);
    for (std::size_t d = 0; d < 3; ++d) i_minus(d, d) += 1.0;
    const State exact = solve(i_minus, u);
    std::vector<double> errors;
    for (std::size_t m = 1; m <= 8; ++m) errors.push_back(norm2(sub(exact, neumann_inverse_apply(a, 1.0, m, u))));
    for (std::size_t m = 1; m < errors.size(); ++m) EXPECT_LE(errors[m], target * errors[m - 1] * (1 + 1e-9) + 1e-15);
  }
}

TEST(RungeKutta, Rk2TwoStageForm) {
  EXPECT_NEAR(explicit_rk_step(RKTableau::rk2(), scalar_linear(1.0), {1.0}, 0.0, 0.1)[0], 1.105, 1e-15);
}

TEST(RungeKutta, ZeroField) {
  EXPECT_EQ(explicit_rk_step(RKTableau::rk4(), zero_field(2), {1.0, 2.0}, 0.0, 0.1), (State{1.0, 2.0}));
}

TEST(RungeKutta, Rk4OneStepExpDecay) {
  EXPECT_NEAR(explicit_rk_step(RKTableau::rk4(), scalar_linear(-1.0), {1.0}, 0.0, 0.1)[0], std::exp(-0.1), 1e-6);
  EXPECT_NEAR(explicit_rk_step(RKTableau::rk4(), scalar_linear(-1.0), {1.0}, 0.0, 0.1)[0], 0.9048375, 1e-6);
}

TEST(RungeKutta, ImplicitTableauRejected) {
  RKTableau t = RKTableau::rk2();
  t.a[0] = {0.5};  // diagonal entry on the first stage
  EXPECT_THROW(explicit_rk_step(t, scalar_linear(1.0), {1.0}, 0.0, 0.1), ContractError);
}

TEST(Multistep, AdamsBashforth2Arithmetic) {
  const std::vector<HistoryPoint> h{{0.1, {1.1}}, {0.0, {1.0}}};
  const State u = lmm_step(SchemeCoefficients::adams_bashforth2(), scalar_linear(1.0), h, 0.1);
  EXPECT_NEAR(u[0], 1.215, 1e-15);
}

TEST(Multistep, ForwardEulerCoefficientsBitwise) {
  Rng rng(2);
  const auto p = make_test_problem("harmonic");
  for (int i = 0; i < 50; ++i) {
    const State u{rng.normal(), rng.normal()};
    const double dt = rng.uniform(0.001, 0.5);
    const std::vector<HistoryPoint> h{{0.3, u}};
    EXPECT_EQ(lmm_step(SchemeCoefficients::forward_euler(), p.field, h, dt), forward_euler_step(p.field, u, 0.3, dt));
  }
}

TEST(Multistep, InsufficientHistoryIsContractError) {
  const std::vector<HistoryPoint> h{{0.0, {1.0}}};
  EXPECT_THROW(lmm_step(SchemeCoefficients::adams_bashforth2(), scalar_linear(1.0), h, 0.1), ContractError);
}

TEST(Multistep, ExplicitMeansNoImplicitBeta) {
  SchemeCoefficients c = SchemeCoefficients::adams_bashforth2();
  EXPECT_TRUE(c.is_explicit());
  c.beta_implicit = 0.5;
  EXPECT_FALSE(c.is_explicit());
  const std::vector<HistoryPoint> h{{0.1, {1.1}}, {0.0, {1.0}}};
  EXPECT_THROW(lmm_step(c, scalar_linear(1.0), h, 0.1), ContractError);
  SchemeCoefficients bad = SchemeCoefficients::adams_bashforth2();
  bad.alpha[0] = 0.0;
  EXPECT_THROW(bad.validate(), ContractError);
}

TEST(LMArchitecture, ZeroKIsForwardEulerBitwise) {
  Rng rng(4);
  const auto p = make_test_problem("quadratic_gradflow");
  for (int i = 0; i < 100; ++i) {
    const State u{rng.normal(), rng.normal()};
    const State prev{rng.normal(), rng.normal()};
    const double dt = rng.uniform(0.0, 1.0);
    EXPECT_EQ(lm_architecture_step(0.0, u, prev, p.field(u, 0.0), dt), forward_euler_step(p.field, u, 0.0, dt));
  }
}

TEST(LMArchitecture, Arithmetic) {
  EXPECT_DOUBLE_EQ(lm_architecture_step(-0.5, {2.0}, {1.0}, {0.1}, 1.0)[0], 2.6);
}

TEST(LMArchitecture, KOneReturnsPrevious) {
  EXPECT_EQ(lm_architecture_step(1.0, {2.0, 3.0}, {-1.0, 0.25}, {0.0, 0.0}, 1.0), (State{-1.0, 0.25}));
}

TEST(Stability, CharacteristicRoots) {
  auto r = characteristic_roots(0.5);
  EXPECT_EQ(r.first, std::complex<double>(1.0, 0.0));
  EXPECT_EQ(r.second, std::complex<double>(-0.5, 0.0));
  EXPECT_TRUE(r.zero_stable);
  r = characteristic_roots(0.0);
  EXPECT_EQ(r.second, std::complex<double>(0.0, 0.0));
  EXPECT_TRUE(r.zero_stable);
  r = characteristic_roots(-1.0);
  EXPECT_EQ(r.first, r.second);
  EXPECT_FALSE(r.zero_stable);
  EXPECT_TRUE(characteristic_roots(1.0).zero_stable);
  EXPECT_FALSE(characteristic_roots(1.0000001).zero_stable);
  EXPECT_FALSE(characteristic_roots(-1.5).zero_stable);
}

TEST(Stability, RootsSatisfyPolynomial) {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double k = rng.uniform(-3.0, 3.0);
    const auto r = characteristic_roots(k);
    for (auto z : {r.first, r.second}) EXPECT_NEAR(std::abs(z * z - (1.0 - k) * z - k), 0.0, 1e-12);
  }
}

TEST(Stability, AuditSeparatesBoundary) {
  const auto audit = audit_lm_stability(LMStepParams{{0.2, -1.0, 1.5, 1.0, -0.3}});
  EXPECT_EQ(audit.outside, std::vector<std::size_t>{3});
  EXPECT_EQ(audit.boundary, (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(audit.inside_open_interval, 2u);
  EXPECT_FALSE(audit.all_zero_stable);
}

TEST(Stability, StiffContrast) {
  const auto f = scalar_linear(-100.0);
  State fe{1.0}, be{1.0};
  for (int i = 0; i < 10; ++i) {
    const State fe_next = forward_euler_step(f, fe, 0.0, 0.1);
    const State be_next = backward_euler_step(f, be, 0.0, 0.1);
    EXPECT_GT(std::abs(fe_next[0]), std::abs(fe[0]));
    EXPECT_LT(std::abs(be_next[0]), std::abs(be[0]));
    EXPECT_GT(be_next[0], 0.0);
    fe = fe_next;
    be = be_next;
  }
}

TEST(Integrate, ForwardEulerExpDecay) {
  const auto p = make_test_problem("exp_decay");
  const auto traj = integrate(SchemeSpec::of(SchemeKind::forward_euler), p.field, p.u0, 0.0, 1.0, 1e-3);
  EXPECT_EQ(traj.size(), 1001u);
  EXPECT_NEAR(traj.back()[0], std::exp(-1.0), 1e-3);
}

TEST(Integrate, ZeroHorizonGivesInitialState) {
  const auto p = make_test_problem("harmonic");
  for (auto kind : {SchemeKind::forward_euler, SchemeKind::backward_euler, SchemeKind::rk2, SchemeKind::rk4,
                    SchemeKind::ab2, SchemeKind::lm}) {
    const auto traj = integrate(SchemeSpec::of(kind), p.field, p.u0, 0.0, 0.0, 0.1);
    ASSERT_EQ(traj.size(), 1u);
    EXPECT_EQ(traj.back(), p.u0);
  }
}

TEST(Integrate, CompoundForwardEuler) {
  const auto p = make_test_problem("exp_decay");
  const auto traj = integrate(SchemeSpec::of(SchemeKind::forward_euler), p.field, p.u0, 0.0, 1.0, 0.1);
  EXPECT_EQ(traj.size(), 11u);
  EXPECT_NEAR(traj.back()[0], 0.34868, 1e-5);
}

TEST(Integrate, OverflowCarriesStepIndex) {
  const auto f = scalar_linear(-1000.0);
  try {
    integrate(SchemeSpec::of(SchemeKind::forward_euler), f, {1.0}, 0.0, 100.0, 0.1);
    FAIL() << "expected OverflowError";
  } catch (const OverflowError& e) {
    EXPECT_GT(e.step(), 1u);
    EXPECT_LE(e.step(), 1000u);
  }
}

TEST(Integrate, LMWithNegativeKRescalesTime) {
  // (1+k) u' = -u, so at k = -0.5 the solution decays like exp(-2t).
  const auto p = make_test_problem("exp_decay");
  const auto traj = integrate(SchemeSpec::lm(-0.5), p.field, p.u0, 0.0, 1.0, 1e-3);
  EXPECT_NEAR(traj.back()[0], std::exp(-2.0), 5e-3);
}

TEST(Integrate, UnknownSchemeNamesValidOnes) {
  try {
    parse_scheme_kind("euler");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("forward_euler"), std::string::npos);
  }
}

struct OrderCase {
  SchemeKind kind;
  double expected;
  double tol;
};

class SchemeOrder : public ::testing::TestWithParam<OrderCase> {};

TEST_P(SchemeOrder, SlopeOnExpDecayAndHarmonic) {
  const auto c = GetParam();
  const auto dts = modeq::geometric_steps(1.0 / 16.0, 0.5, 6);
  for (const char* name : {"exp_decay", "harmonic"}) {
    const auto p = make_test_problem(name);
    const auto report = modeq::estimate_order(modeq::scheme_stepper(SchemeSpec::of(c.kind), p.field, p.u0, 0.0, 1.0),
                                              modeq::ExactReference{p.exact}, p.u0, 0.0, 1.0, dts);
    EXPECT_NEAR(report.slope, c.expected, c.tol) << to_string(c.kind) << " on " << name;
    EXPECT_TRUE(report.reliable);
  }
}

INSTANTIATE_TEST_SUITE_P(Schemes, SchemeOrder,
                         ::testing::Values(OrderCase{SchemeKind::forward_euler, 1.0, 0.1},
                                           OrderCase{SchemeKind::backward_euler, 1.0, 0.1},
                                           OrderCase{SchemeKind::rk2, 2.0, 0.15},
                                           OrderCase{SchemeKind::rk4, 4.0, 0.3},
                                           OrderCase{SchemeKind::ab2, 2.0, 0.15}));
