#include <gtest/gtest.h>

#include <cmath>

#include "grad_cases.h"
#include "sens/autodiff.h"
#include "sens/error.h"
#include "test_util.h"

namespace sens {
namespace {

using testing::AllGradCases;
using testing::RandomTensor;
using testing::WorstGradError;

TEST(MatMul, IdentityLeavesOperand) {
  Tape<float> t(false);
  auto a = t.Constant(Tensor<float>::Matrix({{1, 0}, {0, 1}}));
  auto b = t.Constant(Tensor<float>::Matrix({{3, 4}, {5, 6}}));
  auto c = t.MatMul(a, b).value();
  EXPECT_EQ(c.storage(), (std::vector<float>{3, 4, 5, 6}));
}

TEST(MatMul, RowTimesColumn) {
  Tape<float> t(false);
  auto c = t.MatMul(t.Constant(Tensor<float>::Matrix({{1, 2}})),
                    t.Constant(Tensor<float>::Matrix({{3}, {4}})));
  ASSERT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c.value()[0], 11.0f);
}

TEST(MatMul, InnerMismatchNamesShapes) {
  Tape<float> t(false);
  auto a = t.Constant(Tensor<float>({2, 3}));
  auto b = t.Constant(Tensor<float>({2, 3}));
  try {
    t.MatMul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(MatMul, RandomGradientAgainstFiniteDifferences) {
  CounterRng rng(11);
  Parameter<float> a("a", RandomTensor<float>({4, 5}, rng));
  Parameter<float> b("b", RandomTensor<float>({5, 3}, rng));
  Tensor<float> r = RandomTensor<float>({4, 3}, rng);
  auto loss = [&](Tape<float>& t) {
    return t.Sum(t.Mul(t.MatMul(t.Param(a), t.Param(b)), t.Constant(r)));
  };
  auto res = oracle::CheckGradients<float>(loss, {&a, &b}, testing::kGradStep);
  EXPECT_LT(res.max_rel_error, testing::kFloatGradTolerance) << res.worst;
}

TEST(MatMul, Associative) {
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tape<float> t(false);
    auto a = t.Constant(RandomTensor<float>({3, 4}, rng));
    auto b = t.Constant(RandomTensor<float>({4, 2}, rng));
    auto c = t.Constant(RandomTensor<float>({2, 5}, rng));
    auto left = t.MatMul(t.MatMul(a, b), c).value();
    auto right = t.MatMul(a, t.MatMul(b, c)).value();
    EXPECT_LT(testing::MaxAbsDiff(left, right), 1e-5);
  }
}

TEST(MaskedSoftmax, UniformScores) {
  Tape<float> t(false);
  const std::vector<uint8_t> mask = {1, 1, 1};
  auto y = t.MaskedSoftmax(t.Constant(Tensor<float>::Row({0, 0, 0})), mask).value();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y[i], 1.0 / 3.0, 1e-6);
}

TEST(MaskedSoftmax, MaskedPositionGetsExactZero) {
  Tape<float> t(false);
  const std::vector<uint8_t> mask = {1, 0, 1};
  auto y = t.MaskedSoftmax(t.Constant(Tensor<float>::Row({5, 100, 5})), mask).value();
  EXPECT_NEAR(y[0], 0.5, 1e-6);
  EXPECT_EQ(y[1], 0.0f);
  EXPECT_NEAR(y[2], 0.5, 1e-6);
}

TEST(MaskedSoftmax, TwoScores) {
  Tape<float> t(false);
  auto y = t.Softmax(t.Constant(Tensor<float>::Row({1, 2}))).value();
  const double e = std::exp(1.0);
  EXPECT_NEAR(y[0], 1.0 / (1.0 + e), 1e-5);
  EXPECT_NEAR(y[1], e / (1.0 + e), 1e-5);
  EXPECT_NEAR(y[0], 0.26894, 1e-5);
  EXPECT_NEAR(y[1], 0.73106, 1e-5);
}

TEST(MaskedSoftmax, AllZeroRowRejected) {
  Tape<float> t(false);
  const std::vector<uint8_t> mask = {1, 1, 0, 0};
  EXPECT_THROW(t.MaskedSoftmax(t.Constant(Tensor<float>({2, 2})), mask), ParameterError);
}

TEST(MaskedSoftmax, RowsSumToOneAndMaskedAreZero) {
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + static_cast<int>(rng.UniformInt(5));
    const int cols = 1 + static_cast<int>(rng.UniformInt(7));
    std::vector<uint8_t> mask(rows * cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) mask[r * cols + c] = rng.Bernoulli(0.6);
      mask[r * cols + rng.UniformInt(cols)] = 1;
    }
    Tape<float> t(false);
    auto y = t.MaskedSoftmax(t.Constant(RandomTensor<float>({rows, cols}, rng, 5.0)), mask)
                 .value();
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < cols; ++c) {
        if (!mask[r * cols + c]) {
          EXPECT_EQ(y.at(r, c), 0.0f);
        }
        s += y.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(MaskedSoftmax, ShiftInvariantOverMaskedInScores) {
  CounterRng rng(8);
  const std::vector<uint8_t> mask = {1, 0, 1, 1, 0, 1};
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<float> s = RandomTensor<float>({1, 6}, rng);
    Tensor<float> shifted = s;
    const float c = static_cast<float>(rng.Uniform(-10.0, 10.0));
    for (int i = 0; i < 6; ++i) {
      if (mask[i]) shifted[i] += c;
    }
    Tape<float> t(false);
    auto a = t.MaskedSoftmax(t.Constant(s), mask).value();
    auto b = t.MaskedSoftmax(t.Constant(shifted), mask).value();
    EXPECT_LT(testing::MaxAbsDiff(a, b), 1e-6);
  }
}

TEST(Backward, SumGivesOnes) {
  Parameter<float> w("w", Tensor<float>::Matrix({{1, -2, 3}, {0.5f, 7, 9}}));
  Tape<float> t;
  t.Backward(t.Sum(t.Param(w)));
  t.AccumulateParamGrads();
  for (float g : w.grad.storage()) EXPECT_EQ(g, 1.0f);
}

TEST(Backward, MeanSquareOfScalar) {
  Parameter<float> w("w", Tensor<float>::Scalar(2));
  Tape<float> t;
  t.Backward(t.MeanSquaredError(t.Param(w), t.Constant(Tensor<float>::Scalar(0))));
  t.AccumulateParamGrads();
  EXPECT_FLOAT_EQ(w.grad[0], 4.0f);
}

TEST(Backward, NonScalarLossRejected) {
  Parameter<float> w("w", Tensor<float>({2, 2}, 1.0f));
  Tape<float> t;
  auto y = t.Mul(t.Param(w), t.Param(w));
  EXPECT_THROW(t.Backward(y), DimensionError);
}

TEST(Backward, GradientShapeMatchesValue) {
  CounterRng rng(2);
  Parameter<float> a("a", RandomTensor<float>({3, 4}, rng));
  Parameter<float> g("g", RandomTensor<float>({1, 4}, rng));
  Parameter<float> b("b", RandomTensor<float>({1, 4}, rng));
  Tape<float> t;
  auto x = t.Param(a);
  auto y = t.LayerNorm(x, t.Param(g), t.Param(b));
  t.Backward(t.Sum(t.Tanh(y)));
  ASSERT_NE(t.Grad(x), nullptr);
  EXPECT_EQ(t.Grad(x)->shape(), x.shape());
  EXPECT_EQ(t.Grad(y)->shape(), y.shape());
}

TEST(Forward, FiniteOnFiniteInputs) {
  CounterRng rng(4);
  for (const auto& gc : AllGradCases<float>()) {
    for (int i = 0; i < 5; ++i) {
      Tape<float> t(false);
      std::vector<Var<float>> args;
      for (const auto& s : gc.inputs) args.push_back(t.Constant(RandomTensor<float>(s, rng, 3.0)));
      auto y = gc.op(t, args).value();
      for (float v : y.storage()) ASSERT_TRUE(std::isfinite(v)) << gc.name;
      EXPECT_EQ(ShapeSize(y.shape()), y.size()) << gc.name;
    }
  }
}

class FloatGradients : public ::testing::TestWithParam<std::size_t> {};

TEST_P(FloatGradients, MatchCentralDifferences) {
  const auto cases = AllGradCases<float>();
  const auto& gc = cases.at(GetParam());
  auto r = WorstGradError(gc, 20, 1000 + GetParam());
  EXPECT_LT(r.max_rel_error, testing::kFloatGradTolerance) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(AllOps, FloatGradients,
                         ::testing::Range<std::size_t>(0, AllGradCases<float>().size()),
                         [](const auto& info) { return AllGradCases<float>()[info.param].name; });

class DoubleGradients : public ::testing::TestWithParam<std::size_t> {};

TEST_P(DoubleGradients, MatchCentralDifferences) {
  const auto cases = AllGradCases<double>();
  const auto& gc = cases.at(GetParam());
  auto r = WorstGradError(gc, 20, 2000 + GetParam());
  EXPECT_LT(r.max_rel_error, testing::kDoubleGradTolerance) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(AllOps, DoubleGradients,
                         ::testing::Range<std::size_t>(0, AllGradCases<double>().size()),
                         [](const auto& info) { return AllGradCases<double>()[info.param].name; });

TEST(CompositeLoss, TinyModelGradientsMatch) {
  auto r = testing::CompositeGradError(testing::TinyModelConfig(), 2, 77);
  EXPECT_LT(r.max_rel_error, testing::kFloatGradTolerance) << r.worst;
}

}  // namespace
}  // namespace sens
