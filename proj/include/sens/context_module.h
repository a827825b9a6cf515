#ifndef SENS_CONTEXT_MODULE_H_
#define SENS_CONTEXT_MODULE_H_

#include <optional>
#include <vector>

#include "sens/autodiff.h"
#include "sens/chunk_mask.h"
#include "sens/layers.h"

namespace sens {

struct ContextConfig {
  bool enabled = true;
  int num_decoder_layers = 2;
  int teacher_dim = 16;
  int window_chunks = kUnlimitedContext;  // P_ctx

  void Validate() const;
};

// Rows of H covering chunks [gamma - window, gamma - 1] (clipped at 0).
// Returns {begin, end}; begin == end when the past is empty.
std::pair<int, int> PastRows(int gamma, int chunk_size, int window_chunks, int total_frames);

template <typename T>
class ContextModule {
 public:
  ContextModule() = default;
  ContextModule(const ContextConfig& config, int d_model, int num_heads, int ffn_dim,
                CounterRng& rng);

  const ContextConfig& config() const { return config_; }
  int teacher_dim() const { return config_.teacher_dim; }

  // Attention pooling of `past` ([m, d_model]) into [1, teacher_dim]. An
  // empty past yields the projection of the bare learned query.
  Var<T> Compute(Tape<T>& tape, std::optional<Var<T>> past);
  // [s, d] ++ [1, teacher_dim] -> [s, d + teacher_dim]
  Var<T> Attach(Tape<T>& tape, Var<T> h_chunk, Var<T> context);

  void Collect(ParameterList<T>& out);

 private:
  struct DecoderLayer {
    MultiHeadAttention<T> cross;
    LayerNormModule<T> cross_norm;
    PositionwiseFfn<T> ffn;
    LayerNormModule<T> ffn_norm;
  };

  ContextConfig config_;
  Parameter<T> query_;
  std::vector<DecoderLayer> layers_;
  Linear<T> proj_;
};

}  // namespace sens

#endif  // SENS_CONTEXT_MODULE_H_
