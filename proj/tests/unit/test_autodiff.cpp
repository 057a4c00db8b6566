#include <gtest/gtest.h>

#include <cmath>

#include "sgim/autodiff.hpp"
#include "sgim/errors.hpp"
#include "sgim/rng.hpp"

using namespace sgim;
using ad::Array;

namespace {

Array seeded(std::uint64_t seed, std::size_t r, std::size_t c) {
  Rng rng(seed);
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.normal();
  return Array({r, c}, std::move(v));
}

}  // namespace

TEST(Array, RejectsNonFiniteAndBadShape) {
  EXPECT_THROW(Array({1, 2}, {1.0, NAN}), NumericError);
  EXPECT_THROW(Array({1, 2}, {1.0, INFINITY}), NumericError);
  EXPECT_THROW(Array({2, 2}, {1.0}), DimensionError);
}

TEST(Matmul, HandExpansion) {
  const auto id = ad::constant(Array::from_rows({{1, 0}, {0, 1}}));
  const auto b = ad::constant(Array::from_rows({{2, 3}, {4, 5}}));
  EXPECT_EQ(ad::matmul(id, b).value(), Array::from_rows({{2, 3}, {4, 5}}));
  const auto r = ad::matmul(ad::constant(Array::from_rows({{1, 2}})), ad::constant(Array::from_rows({{3}, {4}})));
  EXPECT_DOUBLE_EQ(r.item(), 11.0);
  EXPECT_THROW(ad::matmul(id, ad::constant(Array::from_rows({{1, 2, 3}}))), DimensionError);
}

TEST(Matmul, GradientOfSumMatchesHandValue) {
  const auto a = ad::parameter(Array::from_rows({{1, 2}}));
  const auto b = ad::constant(Array::from_rows({{3}, {4}}));
  ad::backward(ad::sum(ad::matmul(a, b)));
  EXPECT_DOUBLE_EQ(a.grad().at(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(a.grad().at(0, 1), 4.0);
}

TEST(RowSoftmax, ClosedForms) {
  const double e = std::exp(1.0), e2 = std::exp(2.0);
  auto s = ad::row_softmax(ad::constant(Array::from_rows({{0, 0}})), 1.0).value();
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  s = ad::row_softmax(ad::constant(Array::from_rows({{1, 0}})), 1.0).value();
  EXPECT_NEAR(s[0], e / (e + 1), 1e-15);
  EXPECT_NEAR(s[0], 0.73106, 1e-5);
  EXPECT_NEAR(s[1], 0.26894, 1e-5);
  s = ad::row_softmax(ad::constant(Array::from_rows({{1, 0}})), 0.5).value();
  EXPECT_NEAR(s[0], e2 / (e2 + 1), 1e-15);
  EXPECT_NEAR(s[0], 0.88080, 1e-5);
  EXPECT_THROW(ad::row_softmax(ad::constant(Array::from_rows({{1, 0}})), 0.0), ParameterError);
}

TEST(RowSoftmax, RowsSumToOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = ad::row_softmax(ad::constant(seeded(seed, 4, 7)), 0.07).value();
    for (std::size_t r = 0; r < 4; ++r) {
      double t = 0;
      for (double v : s.row_span(r)) t += v;
      EXPECT_NEAR(t, 1.0, 1e-12);
    }
  }
}

TEST(L2Normalize, UnitRowsAndZeroGuard) {
  const auto n = ad::l2_normalize_rows(ad::constant(Array::from_rows({{3, 4}}))).value();
  EXPECT_DOUBLE_EQ(n[0], 0.6);
  EXPECT_DOUBLE_EQ(n[1], 0.8);
  EXPECT_EQ(ad::l2_normalize_rows(ad::constant(Array::from_rows({{1, 0}}))).value(), Array::from_rows({{1, 0}}));
  EXPECT_THROW(ad::l2_normalize_rows(ad::constant(Array::from_rows({{0, 0}}))), DegenerateInputError);
  const auto m = ad::l2_normalize_rows(ad::constant(seeded(3, 5, 6))).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double t = 0;
    for (double v : m.row_span(r)) t += v * v;
    EXPECT_NEAR(std::sqrt(t), 1.0, 1e-12);
  }
}

TEST(Primitives, Trivia) {
  EXPECT_EQ(ad::max_with_zero(ad::constant(Array::scalar(-2))).item(), 0.0);
  EXPECT_EQ(ad::log(ad::constant(Array::scalar(1))).item(), 0.0);
  const auto x = ad::parameter(Array::scalar(0.0));
  ad::backward(ad::tanh(x));
  EXPECT_DOUBLE_EQ(x.grad().item(), 1.0);
  EXPECT_THROW(ad::add(ad::constant(Array::zeros(1, 2)), ad::constant(Array::zeros(2, 1))), DimensionError);
  EXPECT_THROW(ad::log(ad::constant(Array::scalar(0.0))), ParameterError);
  EXPECT_THROW(ad::reshape(ad::constant(Array::zeros(2, 3)), 4, 2), DimensionError);
}

TEST(Backward, GradShapesMatchValuesAndRepeatIsIdempotent) {
  const auto a = ad::parameter(seeded(1, 3, 4));
  const auto b = ad::parameter(seeded(2, 4, 2));
  const auto loss = ad::sum(ad::tanh(ad::matmul(a, b)));
  ad::backward(loss);
  EXPECT_EQ(a.grad().shape(), a.value().shape());
  EXPECT_EQ(b.grad().shape(), b.value().shape());
  const Array first = a.grad();
  ad::backward(loss);
  EXPECT_EQ(a.grad(), first);
  EXPECT_THROW(ad::backward(ad::matmul(a, b)), UsageError);
}

TEST(Backward, ConstantsReceiveNoGradient) {
  const auto a = ad::constant(seeded(1, 2, 2));
  const auto b = ad::parameter(seeded(2, 2, 2));
  ad::backward(ad::sum(ad::mul(a, b)));
  EXPECT_FALSE(a.requires_grad());
  EXPECT_EQ(b.grad(), a.value());
}

TEST(FiniteDifference, FlagsAWrongBackwardRule) {
  // x^2 with a deliberately wrong derivative (x instead of 2x).
  auto broken = [](const ad::Var& x) {
    auto n = std::make_shared<ad::Node>();
    Array v = x.value();
    for (double& e : v.mutable_data()) e = e * e;
    n->value = v;
    n->op = "broken_square";
    n->parents = {x.node()};
    n->requires_grad = x.requires_grad();
    n->backward = [](ad::Node& self) {
      const auto& p = *self.parents[0];
      std::vector<double> g(p.value.size());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * p.value[i];
      self.parents[0]->accumulate(g);
    };
    return ad::sum(ad::Var(n));
  };
  EXPECT_GT(ad::finite_difference_check(broken, Array::from_rows({{0.7, -1.3}}), 1e-6), 0.4);
  auto right = [](const ad::Var& x) { return ad::sum(ad::mul(x, x)); };
  EXPECT_LT(ad::finite_difference_check(right, Array::from_rows({{0.7, -1.3}}), 1e-6), 1e-8);
}
