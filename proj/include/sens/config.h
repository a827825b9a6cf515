#ifndef SENS_CONFIG_H_
#define SENS_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sens/chunk_mask.h"
#include "sens/distillation.h"
#include "sens/model.h"

namespace sens {

struct OptimizerConfig {
  std::string kind = "sgd";  // "sgd" or "adam"
  double learning_rate = 0.05;
  double weight_decay = 0.01;  // decoupled
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 5.0;  // global L2 norm; 0 disables

  void Validate() const;
};

struct TrainConfig {
  int batch_size = 8;
  int steps = 2000;
  int log_every = 50;
  int checkpoint_every = 500;
  int threads = 1;
  // Parameters whose names start with any of these are not updated.
  std::vector<std::string> frozen_prefixes;

  void Validate() const;
};

struct RunConfig {
  ModelConfig model;
  DctPolicy dct;
  LossWeights loss;
  OptimizerConfig optimizer;
  TrainConfig train;
  uint64_t seed = 1;

  void Validate() const;
  // Applies one "key = value" setting; unknown keys raise ParameterError.
  void Set(const std::string& key, const std::string& value);
  // Every key with its current value, one "key = value" per line.
  std::string ToString() const;
  std::vector<std::string> Keys() const;
};

// "key = value" lines, '#' starts a comment.
void ApplyConfigText(RunConfig& config, const std::string& text, const std::string& origin);
RunConfig LoadRunConfig(const std::string& path);

// "unlimited"/"inf"/"-1" map to kUnlimitedContext.
int ParseContextChunks(const std::string& value);
std::string FormatContextChunks(int chunks);

}  // namespace sens

#endif  // SENS_CONFIG_H_
