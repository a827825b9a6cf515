#ifndef SENS_MODEL_H_
#define SENS_MODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sens/context_module.h"
#include "sens/distillation.h"
#include "sens/encoder.h"
#include "sens/transducer.h"

namespace sens {

struct ModelConfig {
  EncoderConfig encoder;
  ContextConfig context;
  int vocab_size = 12;
  int predictor_hidden = 16;
  int joint_dim = 32;
  int max_symbols_per_frame = 5;

  void Validate() const;
  int enriched_dim() const {
    return encoder.d_model + (context.enabled ? context.teacher_dim : 0);
  }
};

template <typename T>
struct EncodeResult {
  Var<T> encoded;   // H, [T, d_model]
  Var<T> enriched;  // H with context attached per chunk
  std::vector<Var<T>> contexts;  // one [1, teacher_dim] per chunk
};

template <typename T>
struct LossResult {
  Var<T> rnnt;
  std::optional<Var<T>> mse;  // absent when the context module is disabled
  Var<T> total;
};

template <typename T>
class SensAsrModel {
 public:
  SensAsrModel(const ModelConfig& config, uint64_t seed);
  SensAsrModel(const SensAsrModel&) = delete;
  SensAsrModel& operator=(const SensAsrModel&) = delete;

  const ModelConfig& config() const { return config_; }
  Encoder<T>& encoder() { return encoder_; }
  ContextModule<T>& context() { return context_; }
  Predictor<T>& predictor() { return predictor_; }
  Joint<T>& joint() { return joint_; }
  ParameterList<T> Parameters();

  // Attaches per-chunk context to H following `spec`; past windows use
  // `context_window` chunks.
  EncodeResult<T> Enrich(Tape<T>& tape, Var<T> encoded, const ChunkSpec& spec,
                         int context_window);
  // spec.total_frames must equal EncoderFrames(raw.rows()).
  EncodeResult<T> Encode(Tape<T>& tape, const Tensor<T>& raw, const ChunkSpec& spec,
                         int context_window);
  LossResult<T> Loss(Tape<T>& tape, const Tensor<T>& raw, std::span<const int> targets,
                     const Tensor<T>* teacher, const ChunkSpec& spec, const LossWeights& w);

  std::vector<Emission> DecodeOffline(const Tensor<T>& raw, const ChunkSpec& spec,
                                      int context_window);

 private:
  ModelConfig config_;
  Encoder<T> encoder_;
  ContextModule<T> context_;
  Predictor<T> predictor_;
  Joint<T> joint_;
};

}  // namespace sens

#endif  // SENS_MODEL_H_
