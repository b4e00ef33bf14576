#include <cmath>

#include <gtest/gtest.h>

#include "odenet/autodiff.hpp"
#include "odenet/errors.hpp"

using namespace odenet;
using namespace odenet::ad;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

}  // namespace

TEST(Record, Scale) {
  Tape t;
  EXPECT_EQ(scale(3.0, t.constant(Matrix(1, 1, 2.0))).value(), Matrix(1, 1, 6.0));
}

TEST(Record, Relu) {
  Tape t;
  const Var y = relu(t.constant(Matrix::row(std::vector<double>{-1.0, 2.0})));
  EXPECT_EQ(y.value(), Matrix::row(std::vector<double>{0.0, 2.0}));
}

TEST(Record, SoftmaxCrossEntropyUniform) {
  Tape t;
  const std::vector<int> labels{0};
  const Var loss = softmax_cross_entropy(t.constant(Matrix(1, 2, 0.0)), labels);
  EXPECT_NEAR(loss.scalar(), std::log(2.0), 1e-12);
}

TEST(Record, ShapeMismatchIsDimensionError) {
  Tape t;
  EXPECT_THROW(add(t.constant(Matrix(1, 2)), t.constant(Matrix(2, 1))), DimensionError);
  EXPECT_THROW(matmul(t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3))), DimensionError);
}

TEST(Backward, SquareGivesTwoX) {
  ParamStore p;
  p.add("x", Matrix(1, 1, 3.0));
  Tape t;
  const Var x = t.parameter(p, "x");
  t.backward(elementwise_mul(x, x));
  EXPECT_DOUBLE_EQ(p.grad("x")[0], 6.0);
}

TEST(Backward, SoftmaxMinusOneHot) {
  ParamStore p;
  p.add("z", Matrix(1, 2, 0.0));
  Tape t;
  const std::vector<int> labels{0};
  t.backward(softmax_cross_entropy(t.parameter(p, "z"), labels));
  EXPECT_NEAR(p.grad("z")[0], -0.5, 1e-15);
  EXPECT_NEAR(p.grad("z")[1], 0.5, 1e-15);
}

TEST(Backward, QuadraticFormGradient) {
  ParamStore p;
  p.add("W", Matrix::identity(2));
  Tape t;
  const Var w = t.parameter(p, "W");
  const Var y = matvec(w, t.constant(Matrix::column(std::vector<double>{1.0, 2.0})));
  t.backward(scale(0.5, sum(elementwise_mul(y, y))));
  EXPECT_EQ(p.grad("W"), Matrix::from_rows({{1.0, 2.0}, {2.0, 4.0}}));
}

TEST(Backward, NonScalarRootIsContractError) {
  Tape t;
  EXPECT_THROW(t.backward(t.constant(Matrix(2, 1))), ContractError);
}

TEST(Backward, SecondCallWithoutResetIsContractError) {
  ParamStore p;
  p.add("x", Matrix(1, 1, 1.0));
  Tape t;
  const Var x = t.parameter(p, "x");
  const Var y = elementwise_mul(x, x);
  t.backward(y);
  EXPECT_THROW(t.backward(y), ContractError);
  t.reset_adjoints();
  p.zero_grad();
  EXPECT_NO_THROW(t.backward(y));
  EXPECT_DOUBLE_EQ(p.grad("x")[0], 2.0);
}

TEST(Backward, SharedParameterAccumulates) {
  ParamStore p;
  p.add("a", Matrix(1, 1, 2.0));
  Tape t;
  const Var a1 = t.parameter(p, "a");
  const Var a2 = t.parameter(p, "a");
  t.backward(add(scale(3.0, a1), scale(5.0, a2)));
  EXPECT_DOUBLE_EQ(p.grad("a")[0], 8.0);
}

TEST(Backward, ReluDerivativeAtZeroIsZero) {
  ParamStore p;
  p.add("x", Matrix(1, 1, 0.0));
  Tape t;
  t.backward(sum(relu(t.parameter(p, "x"))));
  EXPECT_EQ(p.grad("x")[0], 0.0);
}

TEST(Gradcheck, SumOfSquares) {
  Rng rng(3);
  ParamStore p;
  p.add("a", random_matrix(rng, 3, 2));
  p.add("b", random_matrix(rng, 1, 4));
  const LossBuilder f = [](Tape& t, ParamStore& ps) {
    const Var a = t.parameter(ps, "a");
    const Var b = t.parameter(ps, "b");
    return add(sum(elementwise_mul(a, a)), sum(elementwise_mul(b, b)));
  };
  EXPECT_LE(gradcheck(f, p), 1e-7);
}

TEST(Gradcheck, EveryOpOverRandomSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    ParamStore p;
    p.add("x", random_matrix(rng, 4, 3));
    p.add("W", random_matrix(rng, 5, 3));
    p.add("b", random_matrix(rng, 1, 5));
    p.add("s", Matrix(1, 1, rng.normal()));
    p.add("M", random_matrix(rng, 3, 3));
    p.add("v", random_matrix(rng, 3, 1));
    const std::vector<int> labels{0, 2, 1, 4};
    const LossBuilder f = [&labels](Tape& t, ParamStore& ps) {
      const Var x = t.parameter(ps, "x");
      const Var h = affine(tanh(x), t.parameter(ps, "W"), t.parameter(ps, "b"));
      const Var g = scalar_mul(t.parameter(ps, "s"), relu(h));
      const Var mixed = concat_cols(slice_cols(g, 0, 2), slice_cols(sub(g, h), 2, 3));
      const Var logits = add(mixed, elementwise_mul(h, h));
      const Var mv = matvec(t.parameter(ps, "M"), t.parameter(ps, "v"));
      const Var mm = matmul(x, t.parameter(ps, "M"));
      return add(add(softmax_cross_entropy(logits, labels), scale(0.1, sum(elementwise_mul(mv, mv)))),
                 scale(0.01, sum(tanh(mm))));
    };
    const auto report = gradcheck_report(f, p);
    EXPECT_LE(report.max_relative_error, 1e-5) << "seed " << seed << " worst " << report.worst_parameter;
  }
}

TEST(Gradcheck, NonPositiveEpsIsContractError) {
  ParamStore p;
  p.add("x", Matrix(1, 1, 1.0));
  const LossBuilder f = [](Tape& t, ParamStore& ps) { return sum(t.parameter(ps, "x")); };
  EXPECT_THROW(gradcheck(f, p, 0.0), ContractError);
}

TEST(ParamStoreTest, DuplicateAndUnknownNames) {
  ParamStore p;
  p.add("w", Matrix(2, 2));
  EXPECT_THROW(p.add("w", Matrix(1, 1)), ContractError);
  EXPECT_THROW(p.value("nope"), ContractError);
  EXPECT_EQ(p.scalar_count(), 4u);
  EXPECT_TRUE(p.decays("w"));
}
