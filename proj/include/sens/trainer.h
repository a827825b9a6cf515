#ifndef SENS_TRAINER_H_
#define SENS_TRAINER_H_

#include <functional>
#include <string>
#include <vector>

#include "sens/config.h"
#include "sens/io.h"
#include "sens/model.h"

namespace sens {

struct TrainExample {
  std::string id;
  std::string text;
  Tensor<float> features;
  std::vector<int> targets;
  std::vector<float> teacher;  // empty when the context module is disabled
};

struct StepStats {
  int step = 0;
  double rnnt = 0.0;
  double mse = 0.0;
  double total = 0.0;
};

// SGD or Adam, both with decoupled weight decay; optional global-norm clip.
template <typename T>
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const ParameterList<T>& params);
  // Applies Parameter::grad to each parameter, skipping those marked frozen.
  void Step(const std::vector<bool>& frozen);
  void Step() { Step(std::vector<bool>(params_.size(), false)); }
  int steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  ParameterList<T> params_;
  std::vector<Tensor<T>> m_, v_;
  int steps_ = 0;
};

template <typename T>
class Trainer {
 public:
  Trainer(SensAsrModel<T>& model, const RunConfig& config);

  // One batch: one DCT spec per batch drawn from the step seed, mean loss,
  // backward, optimizer update. Throws NumericError on a non-finite loss.
  StepStats Step(const std::vector<const TrainExample*>& batch);
  // Runs config.train.steps steps with seeded batch sampling.
  void Train(const std::vector<TrainExample>& data,
             const std::function<void(const StepStats&)>& on_log,
             const std::function<void(int)>& on_checkpoint);

  int step() const { return step_; }

 private:
  SensAsrModel<T>* model_;
  RunConfig config_;
  ParameterList<T> params_;
  std::vector<bool> frozen_;
  Optimizer<T> optimizer_;
  int step_ = 0;
};

// Tokenizes `text`; the teacher may be null when the context module is off.
TrainExample MakeExample(std::string id, std::string text, Tensor<float> features,
                         const Vocabulary& vocab, const TeacherProvider* teacher);
// Reads every feature file and checks it against `feat_dim`.
std::vector<TrainExample> LoadExamples(const std::vector<ManifestEntry>& manifest,
                                       const Vocabulary& vocab, const TeacherProvider* teacher,
                                       int feat_dim);

// (reference, hypothesis) per example from offline greedy decoding with
// chunk size `chunk` (0 = full context), `left` past chunks and a context
// window of `context_window` chunks.
template <typename T>
std::vector<std::pair<std::string, std::string>> DecodeCorpus(
    SensAsrModel<T>& model, const std::vector<TrainExample>& examples, const Vocabulary& vocab,
    int chunk, int left, int context_window);

}  // namespace sens

#endif  // SENS_TRAINER_H_
