#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "scenarios.h"
#include "sens/distillation.h"
#include "sens/error.h"
#include "sens/rng.h"
#include "test_util.h"

namespace sens {
namespace {

double Mse(std::vector<std::vector<float>> contexts, std::vector<float> teacher) {
  Tape<float> t(false);
  std::vector<Var<float>> cs;
  for (auto& c : contexts) cs.push_back(t.Constant(Tensor<float>::Row(c)));
  return MseLoss(t, cs, Tensor<float>::Row(teacher)).value()[0];
}

TEST(MseLoss, Examples) {
  EXPECT_EQ(Mse({{0.3f, -1.0f}, {0.3f, -1.0f}}, {0.3f, -1.0f}), 0.0);
  EXPECT_DOUBLE_EQ(Mse({{0, 0}}, {1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(Mse({{0}, {2}}, {1}), 1.0);
  EXPECT_NEAR(Mse({{0, 0}, {3, 1}}, {1, 1}), (1 + 1 + 4 + 0) / 4.0, 1e-7);
}

TEST(MseLoss, Errors) {
  Tape<float> t(false);
  EXPECT_THROW(MseLoss<float>(t, {}, Tensor<float>::Row({1})), ParameterError);
  EXPECT_THROW(MseLoss<float>(t, {t.Constant(Tensor<float>::Row({1, 2}))}, Tensor<float>::Row({1})),
               DimensionError);
}

TEST(TotalLoss, Examples) {
  EXPECT_DOUBLE_EQ(TotalLoss(2.0, 0.0, {0.2, 0.006}), 2.0);
  EXPECT_DOUBLE_EQ(TotalLoss(2.0, 1.0, {0.2, 0.006}), 2.2);
  EXPECT_DOUBLE_EQ(TotalLoss(0.0, 3.0, {0.0, 0.006}), 0.0);
  Tape<float> t(false);
  auto v = TotalLoss(t, t.Constant(Tensor<float>::Scalar(2)), t.Constant(Tensor<float>::Scalar(1)),
                     LossWeights{0.2, 0.006});
  EXPECT_FLOAT_EQ(v.value()[0], 2.2f);
}

TEST(TotalLoss, DerivativeWrtMseIsAlpha) {
  for (double alpha : {0.0, 0.2, 1.5}) {
    Parameter<float> rnnt("rnnt", Tensor<float>::Scalar(3)), mse("mse", Tensor<float>::Scalar(0.7f));
    Tape<float> t;
    t.Backward(TotalLoss(t, t.Param(rnnt), t.Param(mse), LossWeights{alpha, 0.0}));
    t.AccumulateParamGrads();
    EXPECT_EQ(mse.grad[0], static_cast<float>(alpha));
    EXPECT_EQ(rnnt.grad[0], 1.0f);
  }
}

TEST(LossWeights, Validation) {
  EXPECT_THROW((LossWeights{-0.1, 0.0}.Validate()), ParameterError);
  EXPECT_THROW((LossWeights{0.2, -0.1}.Validate()), ParameterError);
  EXPECT_NO_THROW((LossWeights{0.2, 0.006}.Validate()));
}

TEST(HashTeacher, Fnv1aVectors) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(HashTeacher, StableUnitVectors) {
  HashTeacher teacher(16);
  auto a = teacher.Embed("u1", "the cat sees the dog");
  auto b = teacher.Embed("u2", "the cat sees the dog");
  auto c = teacher.Embed("u1", "the dog sees the cat");
  ASSERT_EQ(a.size(), 16u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  double n = 0.0;
  for (float v : a) n += double(v) * v;
  EXPECT_NEAR(n, 1.0, 1e-6);
  // Same value from an independent construction: FNV-1a seeds the counter
  // generator, normals are drawn in order, then normalized.
  CounterRng rng(Fnv1a64("the cat sees the dog"));
  std::vector<double> x(16);
  double s = 0.0;
  for (double& v : x) {
    v = rng.Normal();
    s += v * v;
  }
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(a[i], x[i] / std::sqrt(s), 1e-6);
}

TEST(Base64, Rfc4648Vectors) {
  const std::pair<const char*, const char*> cases[] = {
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="},
      {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
  for (auto [plain, coded] : cases) {
    std::vector<uint8_t> bytes(plain, plain + std::strlen(plain));
    EXPECT_EQ(Base64Encode(bytes), coded);
    EXPECT_EQ(Base64Decode(coded), bytes);
  }
  EXPECT_THROW(Base64Decode("Zm9"), FormatError);
  EXPECT_THROW(Base64Decode("Zm9*"), FormatError);
}

TEST(FileTeacher, RoundTrip) {
  const std::string dir = testing::TempDir("file_teacher");
  std::map<std::string, std::vector<float>> table = {
      {"utt0001", {0.5f, -0.25f, 1e-7f}}, {"utt0002", {3.0f, 0.0f, -1.5f}}};
  FileTeacher::Save(dir + "/t.emb", 3, table);
  FileTeacher loaded = FileTeacher::Load(dir + "/t.emb");
  EXPECT_EQ(loaded.dim(), 3);
  EXPECT_EQ(loaded.Embed("utt0001", "ignored"), table["utt0001"]);
  EXPECT_EQ(loaded.Embed("utt0002", ""), table["utt0002"]);
  EXPECT_THROW(loaded.Embed("utt9999", ""), IoError);
}

TEST(FileTeacher, DimensionChecked) {
  EXPECT_THROW(FileTeacher(2, {{"a", {1.0f, 2.0f, 3.0f}}}), DimensionError);
  const std::string dir = testing::TempDir("file_teacher_bad");
  std::ofstream(dir + "/bad.emb") << "#dim=2\nutt\t" << Base64Encode(std::vector<uint8_t>(12, 0)) << "\n";
  EXPECT_THROW(FileTeacher::Load(dir + "/bad.emb"), Error);
  std::ofstream(dir + "/nohdr.emb") << "utt\tAAAA\n";
  EXPECT_THROW(FileTeacher::Load(dir + "/nohdr.emb"), FormatError);
}

TEST(Distillation, FrozenEncoderHalvesMse) {
  auto curve = testing::FrozenEncoderDistillation(5, 200);
  EXPECT_LE(curve.final, 0.5 * curve.initial) << curve.initial << " -> " << curve.final;
}

}  // namespace
}  // namespace sens
