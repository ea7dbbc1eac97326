#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"

using namespace grurec;
using grurec::testing::naive_matmul;
using grurec::testing::random_matrix;

namespace {

GruParams<double> zero_gru(Index in, Index h) { return GruParams<double>::zeros(in, h); }

GruParams<double> random_gru(Index in, Index h, SeededRng& rng) {
  GruParams<double> p = zero_gru(in, h);
  init_uniform(p, rng);
  p.b_x = random_matrix(1, 3 * h, rng, 0.3);
  p.b_h = random_matrix(1, 3 * h, rng, 0.3);
  return p;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Tensor, SpecMatmulCases) {
  Matrix<double> i2 = Matrix<double>::Identity(2, 2);
  Matrix<double> a(2, 2), b(2, 1), expect(2, 1);
  a << 1, 2, 3, 4;
  b << 5, 6;
  expect << 17, 39;
  EXPECT_EQ(matmul(i2, a), a);
  EXPECT_EQ(matmul(Matrix<double>::Zero(2, 2).eval(), a), Matrix<double>::Zero(2, 2));
  EXPECT_EQ(matmul(a, b), expect);
}

TEST(Tensor, SoftmaxOfLogs) {
  Vector<double> v(3);
  v << std::log(1.0), std::log(2.0), std::log(3.0);
  const Vector<double> p = softmax(v);
  EXPECT_NEAR(p[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(p[2], 0.5, 1e-15);
}

TEST(GruCell, ZeroParamsHalveState) {
  const auto p = zero_gru(3, 4);
  SeededRng rng(1);
  const auto x = random_matrix(2, 3, rng);
  const auto h = random_matrix(2, 4, rng);
  EXPECT_LT((gru_cell_forward(x, h, p) - 0.5 * h).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(gru_cell_forward(x, Matrix<double>::Zero(2, 4).eval(), p), Matrix<double>::Zero(2, 4));
}

TEST(GruCell, ScalarMatchesHandEvaluation) {
  SeededRng rng(8);
  const auto p = random_gru(1, 1, rng);
  const double x = 0.7, hp = -0.4;
  // gate order in the stacked weights: reset, update, candidate
  const double r = sig(p.w_x(0, 0) * x + p.b_x(0, 0) + p.w_h(0, 0) * hp + p.b_h(0, 0));
  const double u = sig(p.w_x(1, 0) * x + p.b_x(0, 1) + p.w_h(1, 0) * hp + p.b_h(0, 1));
  const double c = std::tanh(p.w_x(2, 0) * x + p.b_x(0, 2) + r * (p.w_h(2, 0) * hp + p.b_h(0, 2)));
  const double expect = u * hp + (1.0 - u) * c;
  Matrix<double> xm(1, 1), hm(1, 1);
  xm << x;
  hm << hp;
  EXPECT_NEAR(gru_cell_forward(xm, hm, p)(0, 0), expect, 1e-14);
}

TEST(GruCell, WrongInputWidthThrows) {
  const auto p = zero_gru(3, 4);
  EXPECT_THROW(gru_cell_forward(Matrix<double>::Zero(2, 5).eval(), Matrix<double>::Zero(2, 4).eval(), p), ShapeError);
}

TEST(GruLayer, LengthOneEqualsOneCellStep) {
  SeededRng rng(2);
  const auto p = random_gru(3, 5, rng);
  const auto x = random_matrix(4, 3, rng);
  const std::vector<Index> lengths(4, 1);
  const auto out = gru_layer_forward(x, lengths, p);
  const auto cell = gru_cell_forward(x, Matrix<double>::Zero(4, 5).eval(), p);
  EXPECT_LT((out.hidden_all - cell).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((out.h_last - cell).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GruLayer, PaddingLeavesFinalStateUnchanged) {
  SeededRng rng(3);
  const auto p = random_gru(3, 6, rng);
  const auto seq = random_matrix(4, 3, rng);
  const std::vector<Index> one{4};
  const auto plain = gru_layer_forward(seq, one, p);
  Matrix<double> padded = Matrix<double>::Zero(9, 3);
  padded.topRows(4) = seq;
  const auto padded_out = gru_layer_forward(padded, one, p);
  EXPECT_EQ(plain.h_last, padded_out.h_last);
}

TEST(GruLayer, ZeroParamsGiveZeroState) {
  SeededRng rng(4);
  const auto x = random_matrix(3 * 2, 3, rng);
  const std::vector<Index> lengths{3, 2};
  EXPECT_EQ(gru_layer_forward(x, lengths, zero_gru(3, 4)).h_last, Matrix<double>::Zero(2, 4));
}

TEST(GruLayer, ZeroLengthThrows) {
  const std::vector<Index> lengths{0, 2};
  EXPECT_THROW(gru_layer_forward(Matrix<double>::Zero(4, 3).eval(), lengths, zero_gru(3, 4)), EmptySequenceError);
}

TEST(GruLayer, ZeroUpstreamGivesZeroGradients) {
  SeededRng rng(5);
  const auto p = random_gru(3, 4, rng);
  const auto x = random_matrix(6, 3, rng);
  const std::vector<Index> lengths{3, 2};
  GruLayerCache<double> cache;
  gru_layer_forward(x, lengths, p, &cache);
  GruParams<double> grads = zero_gru(3, 4);
  const Matrix<double> dx = gru_layer_backward(p, cache, Matrix<double>::Zero(6, 4).eval(),
                                               Matrix<double>::Zero(2, 4).eval(), grads);
  EXPECT_EQ(dx, Matrix<double>::Zero(6, 3));
  EXPECT_EQ(grads.w_x, Matrix<double>::Zero(12, 3));
  EXPECT_EQ(grads.w_h, Matrix<double>::Zero(12, 4));
}

namespace {

AttentionParams<double> random_attention(Index h, SeededRng& rng) {
  auto p = AttentionParams<double>::zeros(h);
  init_uniform(p, rng);
  return p;
}

}  // namespace

TEST(Attention, IdenticalStatesGiveUniformWeights) {
  SeededRng rng(6);
  const auto p = random_attention(4, rng);
  const Matrix<double> h = random_matrix(1, 4, rng);
  Matrix<double> all(5, 4);
  for (Index t = 0; t < 5; ++t) all.row(t) = h.row(0);
  const std::vector<Index> lengths{5};
  AttentionCache<double> cache;
  const auto out = attention_forward(all, h, lengths, p, &cache);
  for (Index t = 0; t < 5; ++t) EXPECT_NEAR(cache.weights(0, t), 0.2, 1e-15);
  EXPECT_LT((out.leftCols(4) - h).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(out.cols(), 8);
}

TEST(Attention, LengthOneAttendsToFirstStep) {
  SeededRng rng(7);
  const auto p = random_attention(3, rng);
  const auto all = random_matrix(2 * 4, 3, rng);
  const std::vector<Index> lengths{1, 4};
  AttentionCache<double> cache;
  const auto out = attention_forward(all, random_matrix(2, 3, rng), lengths, p, &cache);
  EXPECT_EQ(cache.weights(0, 0), 1.0);
  EXPECT_EQ(out.row(0).leftCols(3), all.row(0));
  EXPECT_EQ(cache.weights(0, 3), 0.0);
  EXPECT_NEAR(cache.weights.row(1).sum(), 1.0, 1e-14);
}

TEST(Attention, WrongWidthThrows) {
  SeededRng rng(8);
  const auto p = random_attention(3, rng);
  const std::vector<Index> lengths{2};
  EXPECT_THROW(attention_forward(random_matrix(2, 4, rng), random_matrix(1, 4, rng), lengths, p), ShapeError);
}

namespace {

BatchNormParams<double> unit_bn(Index d) { return BatchNormParams<double>::identity(d); }

}  // namespace

TEST(BatchNorm, ConstantBatchMapsToZero) {
  const Matrix<double> x = Matrix<double>::Constant(4, 3, 2.5);
  EXPECT_EQ(batchnorm_apply(x, unit_bn(3), Mode::train), Matrix<double>::Zero(4, 3));
}

TEST(BatchNorm, PlusMinusOneBatch) {
  Matrix<double> x(2, 2);
  x << -1, 1, 1, -1;
  const auto y = batchnorm_apply(x, unit_bn(2), Mode::train);
  EXPECT_NEAR(y(0, 0), -1.0 / std::sqrt(1.0 + 1e-5), 1e-12);
  EXPECT_NEAR(y(1, 0), 0.999995, 1e-6);
}

TEST(BatchNorm, EvalWithUnitStatsIsIdentityUpToEpsilon) {
  SeededRng rng(9);
  const auto x = random_matrix(3, 4, rng);
  const auto y = batchnorm_apply(x, unit_bn(4), Mode::eval);
  EXPECT_LT((y - x / std::sqrt(1.0 + 1e-5)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((y - x).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(BatchNorm, TrainNeedsTwoRows) {
  EXPECT_THROW(batchnorm_apply(Matrix<double>::Zero(1, 3).eval(), unit_bn(3), Mode::train), BatchTooSmallError);
  EXPECT_NO_THROW(batchnorm_apply(Matrix<double>::Zero(1, 3).eval(), unit_bn(3), Mode::eval));
}

TEST(BatchNorm, ApplyIsPureAndRunningUpdateUsesUnbiasedVariance) {
  Matrix<double> x(2, 1);
  x << 0.0, 2.0;
  auto p = unit_bn(1);
  BatchNormCache<double> cache;
  batchnorm_apply(x, p, Mode::train, &cache);
  EXPECT_EQ(p.running_mean(0, 0), 0.0);
  batchnorm_update_running(p, cache);
  EXPECT_NEAR(p.running_mean(0, 0), 0.1, 1e-15);
  // batch var 1 biased, 2 unbiased
  EXPECT_NEAR(p.running_var(0, 0), 0.9 + 0.1 * 2.0, 1e-15);
}

TEST(Dropout, EvalAndRateZeroAreIdentity) {
  SeededRng rng(10);
  const auto x = random_matrix(5, 7, rng);
  EXPECT_EQ(dropout_forward(x, 0.5, Mode::eval, rng), x);
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::train, rng), x);
}

TEST(Dropout, InvertedScalingAndRate) {
  const Matrix<double> x = Matrix<double>::Ones(200, 50);
  const auto y = dropout_forward(x, 0.5, Mode::train, SeededRng(11));
  Index kept = 0;
  for (Index i = 0; i < y.size(); ++i) {
    const double v = y.data()[i];
    ASSERT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_NEAR(static_cast<double>(kept) / static_cast<double>(y.size()), 0.5, 0.02);
}

TEST(Dropout, RowMaskIndependentOfBatchComposition) {
  const Matrix<double> x = Matrix<double>::Ones(4, 30);
  const SeededRng rng(12);
  const auto full = dropout_forward(x, 0.3, Mode::train, rng);
  const auto head = dropout_forward(Matrix<double>(x.topRows(2)), 0.3, Mode::train, rng);
  EXPECT_EQ(full.topRows(2), head);
}

TEST(Dropout, RateOneIsAConfigError) {
  EXPECT_THROW(dropout_forward(Matrix<double>::Ones(2, 2).eval(), 1.0, Mode::train, SeededRng(0)), ConfigError);
}

TEST(Dense, ZeroWeightsGiveBias) {
  DenseParams<double> p;
  p.weight = Matrix<double>::Zero(3, 4);
  p.bias.resize(1, 3);
  p.bias << 1, 2, 3;
  SeededRng rng(13);
  const auto y = dense_forward(random_matrix(5, 4, rng), p);
  for (Index i = 0; i < 5; ++i) EXPECT_EQ(y.row(i), p.bias);
}

TEST(Dense, IdentityAndNaiveOracle) {
  SeededRng rng(14);
  DenseParams<double> p;
  p.weight = Matrix<double>::Identity(4, 4);
  p.bias = Matrix<double>::Zero(1, 4);
  const auto x = random_matrix(3, 4, rng);
  EXPECT_EQ(dense_forward(x, p), x);

  p.weight = random_matrix(2, 4, rng);
  p.bias = random_matrix(1, 2, rng);
  Matrix<double> expect = naive_matmul(x, p.weight.transpose());
  expect.rowwise() += p.bias.row(0);
  EXPECT_LT((dense_forward(x, p) - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CrossEntropy, SpecValues) {
  const std::vector<Index> labels{2};
  EXPECT_NEAR(cross_entropy(Matrix<double>::Zero(1, 4).eval(), std::span<const Index>(labels)).loss, std::log(4.0), 1e-12);
  Matrix<double> right = Matrix<double>::Zero(1, 4);
  right(0, 2) = 100.0;
  EXPECT_LT(cross_entropy(right, std::span<const Index>(labels)).loss, 1e-40);
  Matrix<double> wrong = Matrix<double>::Zero(1, 4);
  wrong(0, 0) = 100.0;
  EXPECT_NEAR(cross_entropy(wrong, std::span<const Index>(labels)).loss, 100.0, 1e-10);
}

TEST(CrossEntropy, GradientRowsSumToZero) {
  SeededRng rng(15);
  const std::vector<Index> labels{0, 3, 1};
  const auto r = cross_entropy(random_matrix(3, 4, rng), std::span<const Index>(labels));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(r.grad_logits.row(i).sum(), 0.0, 1e-15);
}

TEST(CrossEntropy, LabelOutOfRangeIsDataError) {
  const std::vector<Index> labels{4};
  EXPECT_THROW(cross_entropy(Matrix<double>::Zero(1, 4).eval(), std::span<const Index>(labels)), DataError);
}

TEST(Backward, CacheMismatchIsContractError) {
  BatchNormCache<double> cache;
  BatchNormParams<double> grads = unit_bn(3);
  EXPECT_THROW(batchnorm_backward(unit_bn(3), cache, Matrix<double>::Zero(2, 3).eval(), grads), ContractError);
}

TEST(Gradcheck, AllComponentsPass) {
  const GradcheckReport report = run_gradcheck({});
  ASSERT_EQ(report.components.size(), gradcheck_components().size());
  for (const auto& c : report.components) EXPECT_TRUE(c.passed) << c.name << " " << c.max_rel_error;
  EXPECT_TRUE(report.passed);
}

TEST(Gradcheck, CorruptedGradientIsCaught) {
  for (const std::string name : {"gru_layer", "model"}) {
    GradcheckOptions opt;
    opt.instantiations = 2;
    opt.perturb = name;
    const GradcheckReport report = run_gradcheck(opt);
    EXPECT_FALSE(report.passed) << name;
    for (const auto& c : report.components) EXPECT_EQ(c.passed, c.name != name) << c.name;
  }
}

TEST(Gradcheck, UnknownPerturbTargetIsConfigError) {
  GradcheckOptions opt;
  opt.perturb = "nonexistent";
  EXPECT_THROW(run_gradcheck(opt), ConfigError);
}
