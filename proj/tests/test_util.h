#ifndef SENS_TESTS_TEST_UTIL_H_
#define SENS_TESTS_TEST_UTIL_H_

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "sens/model.h"
#include "sens/rng.h"
#include "sens/tensor.h"

namespace sens::testing {

template <typename T>
Tensor<T> RandomTensor(Shape shape, CounterRng& rng, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(scale * rng.Normal());
  return t;
}

template <typename T>
double MaxAbsDiff(const Tensor<T>& a, const Tensor<T>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

// A model small enough for exhaustive probes and finite differences.
inline ModelConfig TinyModelConfig() {
  ModelConfig c;
  c.encoder.feat_dim = 4;
  c.encoder.num_layers = 1;
  c.encoder.d_model = 8;
  c.encoder.num_heads = 2;
  c.encoder.ffn_dim = 8;
  c.encoder.conv_kernel = 3;
  c.encoder.frontend_channels = 6;
  c.encoder.max_positions = 64;
  c.context.num_decoder_layers = 1;
  c.context.teacher_dim = 4;
  c.vocab_size = 5;
  c.predictor_hidden = 4;
  c.joint_dim = 6;
  return c;
}

template <typename T>
Parameter<T>& FindParam(const ParameterList<T>& params, const std::string& name) {
  for (auto* p : params) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("no parameter " + name);
}

template <typename T>
void ZeroAll(const ParameterList<T>& params) {
  for (auto* p : params) p->value.Fill(T(0));
}

inline std::string TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sens_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace sens::testing

#endif  // SENS_TESTS_TEST_UTIL_H_
