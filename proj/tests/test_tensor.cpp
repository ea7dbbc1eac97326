#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"

using namespace grurec;
using grurec::testing::naive_matmul;
using grurec::testing::random_matrix;

TEST(Matmul, MatchesTripleLoop) {
  SeededRng rng(3);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 5, 2}, {17, 9, 31}, {64, 33, 8}}) {
    const auto a = random_matrix(m, k, rng);
    const auto b = random_matrix(k, n, rng);
    EXPECT_LT((matmul(a, b) - naive_matmul(a, b)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  EXPECT_THROW(matmul(Matrix<double>(2, 3), Matrix<double>(4, 2)), ShapeError);
}

TEST(Softmax, SumsToOneAndSurvivesLargeLogits) {
  Vector<double> v(3);
  v << 1000.0, 1000.0, -1000.0;
  const Vector<double> p = softmax(v);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_TRUE(p.allFinite());
}

TEST(Softmax, RowsIndependent) {
  Matrix<double> logits(2, 3);
  logits << 0, 0, 0, 1, 2, 3;
  const auto p = softmax_rows(logits);
  EXPECT_NEAR(p(0, 1), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(p.row(1).sum(), 1.0, 1e-12);
}

TEST(Activation, SigmoidTanhRelu) {
  Matrix<double> x(1, 3);
  x << -2.0, 0.0, 3.0;
  const Matrix<double> s = activate(x, Activation::sigmoid);
  EXPECT_NEAR(s(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(s(0, 0), 1.0 / (1.0 + std::exp(2.0)), 1e-15);
  const Matrix<double> r = activate(x, Activation::relu);
  EXPECT_EQ(r(0, 0), 0.0);
  EXPECT_EQ(r(0, 2), 3.0);
  const Matrix<double> t = activate(x, Activation::tanh);
  EXPECT_NEAR(t(0, 2), std::tanh(3.0), 1e-15);
}

TEST(Rng, SameKeySameSequence) {
  SeededRng a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, ForkDependsOnKeysOnly) {
  const SeededRng root(5);
  SeededRng used(5);
  used.next_u64();
  EXPECT_EQ(root.fork(RngPurpose::augment, 3, 9).next_u64(), SeededRng(5).fork(RngPurpose::augment, 3, 9).next_u64());
  EXPECT_NE(root.fork(RngPurpose::augment, 3, 9).next_u64(), root.fork(RngPurpose::augment, 9, 3).next_u64());
}

TEST(Rng, UniformRangesAndMean) {
  SeededRng rng(1);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform(-2.0, 3.0);
    ASSERT_GE(u, -2.0);
    ASSERT_LT(u, 3.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000.0, 0.5, 0.05);
  for (int i = 0; i < 1000; ++i) {
    const auto k = rng.uniform_int(-3, 3);
    ASSERT_GE(k, -3);
    ASSERT_LE(k, 3);
  }
}

TEST(Rng, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  SeededRng rng(9);
  shuffle(v, rng);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(FiniteDiff, QuadraticGradientIsExact) {
  Vector<double> x(3);
  x << 1.0, -2.0, 0.5;
  const auto f = [](const Vector<double>& v) { return v.squaredNorm() + 3.0 * v[0]; };
  for (Stencil s : {Stencil::two_point, Stencil::four_point}) {
    const Vector<double> g = finite_diff_grad(f, x, 1e-4, s);
    EXPECT_NEAR(g[0], 5.0, 1e-8);
    EXPECT_NEAR(g[1], -4.0, 1e-8);
    EXPECT_NEAR(g[2], 1.0, 1e-8);
  }
}

TEST(FiniteDiff, FourPointBeatsTwoPointOnCubic) {
  Vector<double> x(1);
  x << 0.7;
  const auto f = [](const Vector<double>& v) { return std::sin(3.0 * v[0]); };
  const double exact = 3.0 * std::cos(2.1);
  const double e2 = std::abs(finite_diff_grad(f, x, 1e-2, Stencil::two_point)[0] - exact);
  const double e4 = std::abs(finite_diff_grad(f, x, 1e-2, Stencil::four_point)[0] - exact);
  EXPECT_LT(e4, e2 / 100.0);
}

TEST(FiniteDiff, InPlaceVariantRestoresParameter) {
  Matrix<double> p(2, 2);
  p << 1, 2, 3, 4;
  const Matrix<double> before = p;
  const Matrix<double> g = finite_diff_grad(p, [&] { return p.squaredNorm(); }, 1e-5);
  EXPECT_EQ(p, before);
  EXPECT_LT((g - 2.0 * before).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FiniteDiff, NonFiniteObjectiveIsAnOracleError) {
  Vector<double> x = Vector<double>::Zero(2);
  const auto f = [](const Vector<double>& v) { return std::log(v[0]); };
  EXPECT_THROW(finite_diff_grad(f, x, 1e-5), OracleError);
}

TEST(FiniteDiff, RelativeErrorUsesFloor) {
  Matrix<double> a(1, 2), n(1, 2);
  a << 1.0, 1e-12;
  n << 1.0 + 1e-6, 0.0;
  EXPECT_NEAR(max_relative_error(a, n, 1e-6), 1e-6, 1e-9);
}
