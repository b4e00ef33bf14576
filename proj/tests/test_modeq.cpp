#include <cmath>

#include <gtest/gtest.h>

#include "odenet/errors.hpp"
#include "odenet/modeq.hpp"

using namespace odenet;
using namespace odenet::modeq;

namespace {

const std::vector<double> kDts = geometric_steps(1.0 / 16.0, 0.5, 6);

Reference modified_reference(const VectorField& f, ReductionKind kind) {
  return FieldReference{[f, kind](double dt) { return reduced_modified_field(f, dt, kind); }};
}

Stepper lm_on_modified(double k, const TestProblem& p) {
  auto first = [k, p](double h) {
    return rk4_solution(reduced_modified_field(p.field, h, LMKind{k}), p.u0, 0.0, h, h / 100.0);
  };
  return lm_stepper(k, p.field, p.u0, 0.0, 1.0, first);
}

}  // namespace

TEST(ReducedField, ForwardEulerScalar) {
  const auto g = reduced_modified_field(linear_field(Matrix(1, 1, -1.0)), 0.1, ForwardEulerKind{});
  EXPECT_NEAR(g({1.0}, 0.0)[0], -1.05, 1e-15);
}

TEST(ReducedField, LMAtZeroEqualsForwardEuler) {
  Rng rng(1);
  const auto p = make_test_problem("quadratic_gradflow");
  for (double dt : {0.01, 0.1, 0.3}) {
    const auto fe = reduced_modified_field(p.field, dt, ForwardEulerKind{});
    const auto lm = reduced_modified_field(p.field, dt, LMKind{0.0});
    for (int i = 0; i < 10; ++i) {
      const State u{rng.normal(), rng.normal()};
      EXPECT_EQ(fe(u, 0.0), lm(u, 0.0));
    }
  }
}

TEST(ReducedField, LMNegativeHalf) {
  const auto g = reduced_modified_field(linear_field(Matrix(1, 1, -1.0)), 0.1, LMKind{-0.5});
  EXPECT_NEAR(g({1.0}, 0.0)[0], -2.6, 1e-14);
}

TEST(ReducedField, SingularAndMissingJacobian) {
  EXPECT_THROW(reduced_modified_field(linear_field(Matrix(1, 1, -1.0)), 0.1, LMKind{-1.0}), ContractError);
  VectorField f = linear_field(Matrix(1, 1, -1.0));
  f.jacobian = nullptr;
  EXPECT_THROW(reduced_modified_field(f, 0.1, ForwardEulerKind{}), ContractError);
}

TEST(ReducedField, JacobianOfReducedFieldIsConsistent) {
  const auto p = make_test_problem("harmonic");
  const auto g = reduced_modified_field(p.field, 0.1, LMKind{-0.3});
  if (g.has_jacobian()) EXPECT_LE(jacobian_check(g, {0.3, -0.7}, 0.0), 1e-5);
}

TEST(Order, ForwardEulerAgainstOriginal) {
  const auto p = make_test_problem("exp_decay");
  const auto r = estimate_order(scheme_stepper(ode::SchemeSpec::of(ode::SchemeKind::forward_euler), p.field, p.u0,
                                               0.0, 1.0),
                                ExactReference{p.exact}, p.u0, 0.0, 1.0, kDts);
  EXPECT_NEAR(r.slope, 1.0, 0.1);
}

TEST(Order, ForwardEulerAgainstModifiedOnEveryProblem) {
  for (const char* name : {"exp_decay", "harmonic", "quadratic_gradflow"}) {
    const auto p = make_test_problem(name);
    const auto stepper = scheme_stepper(ode::SchemeSpec::of(ode::SchemeKind::forward_euler), p.field, p.u0, 0.0, 1.0);
    const auto r = estimate_order(stepper, modified_reference(p.field, ForwardEulerKind{}), p.u0, 0.0, 1.0, kDts);
    EXPECT_NEAR(r.slope, 2.0, 0.15) << name;
    EXPECT_TRUE(r.reliable) << name;
  }
}

TEST(Order, ModifiedOverOriginalRatioShrinksLinearly) {
  for (const char* name : {"exp_decay", "harmonic", "quadratic_gradflow"}) {
    const auto p = make_test_problem(name);
    const auto stepper = scheme_stepper(ode::SchemeSpec::of(ode::SchemeKind::forward_euler), p.field, p.u0, 0.0, 1.0);
    const auto mod = estimate_order(stepper, modified_reference(p.field, ForwardEulerKind{}), p.u0, 0.0, 1.0, kDts);
    const auto orig = estimate_order(stepper, ExactReference{p.exact}, p.u0, 0.0, 1.0, kDts);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < kDts.size(); ++i) {
      lx.push_back(std::log(kDts[i]));
      ly.push_back(std::log(mod.errors[i] / orig.errors[i]));
    }
    EXPECT_NEAR(fit_line(lx, ly).slope, 1.0, 0.2) << name;
  }
}

TEST(Order, LMAgainstItsModifiedField) {
  const auto p = make_test_problem("exp_decay");
  const auto r = estimate_order(lm_on_modified(-0.5, p), modified_reference(p.field, LMKind{-0.5}), p.u0, 0.0, 1.0,
                                kDts);
  EXPECT_NEAR(r.slope, 2.0, 0.15);
}

TEST(Order, LMAgainstRawFieldDoesNotConverge) {
  const auto p = make_test_problem("exp_decay");
  const auto r = estimate_order(lm_on_modified(-0.5, p), ExactReference{p.exact}, p.u0, 0.0, 1.0, kDts);
  EXPECT_NEAR(r.slope, 0.0, 0.1);
  EXPECT_GT(r.errors.back(), 0.1);
}

TEST(Order, PreconditionsAreEnforced) {
  const auto p = make_test_problem("exp_decay");
  const auto s = scheme_stepper(ode::SchemeSpec::of(ode::SchemeKind::forward_euler), p.field, p.u0, 0.0, 1.0);
  EXPECT_THROW(estimate_order(s, ExactReference{p.exact}, p.u0, 0.0, 1.0, {0.1, 0.05, 0.025}), ContractError);
  EXPECT_THROW(estimate_order(s, ExactReference{p.exact}, p.u0, 0.0, 1.0, {0.1, 0.05, 0.04, 0.01}), ContractError);
  // Zero error: the stepper reproduces the reference exactly.
  const Stepper exact_stepper = [&](double) { return p.exact(1.0); };
  EXPECT_THROW(estimate_order(exact_stepper, ExactReference{p.exact}, p.u0, 0.0, 1.0, kDts), ContractError);
}

TEST(Order, OverflowIsAnnotatedWithStep) {
  const auto f = linear_field(Matrix(1, 1, -5000.0));
  const auto s = scheme_stepper(ode::SchemeSpec::of(ode::SchemeKind::forward_euler), f, {1.0}, 0.0, 100.0);
  EXPECT_THROW(estimate_order(s, ExactReference{[](double) { return State{0.0}; }}, {1.0}, 0.0, 100.0, kDts),
               OverflowError);
}

TEST(FitLine, ExactLine) {
  const auto fit = fit_line({0.0, 1.0, 2.0, 3.0}, {1.0, 3.0, 5.0, 7.0});
  EXPECT_NEAR(fit.slope, 2.0, 1e-14);
  EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-14);
}

TEST(GradientFlow, EnergyIsReportedForBothSchemes) {
  const auto p = make_test_problem("quadratic_gradflow");
  const Matrix j = p.field.jacobian(p.u0, 0.0);
  const auto fe = gradient_flow_energy(j, p.u0, 0.0, 0.05, 40);
  const auto lm = gradient_flow_energy(j, p.u0, -0.3, 0.05, 40);
  ASSERT_EQ(fe.size(), 41u);
  ASSERT_EQ(lm.size(), 41u);
  EXPECT_LT(fe.back(), fe.front());
  EXPECT_LT(lm.back(), lm.front());
}
