#ifndef SENS_ENCODER_H_
#define SENS_ENCODER_H_

#include <memory>
#include <span>
#include <vector>

#include "sens/autodiff.h"
#include "sens/chunk_mask.h"
#include "sens/layers.h"

namespace sens {

struct EncoderConfig {
  int feat_dim = 16;
  int num_layers = 2;
  int d_model = 32;
  int num_heads = 2;
  int ffn_dim = 64;
  int conv_kernel = 7;
  int frontend_channels = 32;
  int max_positions = 4096;

  void Validate() const;
};

// Encoder frames produced from raw feature frames (frontend pads to a
// multiple of 4).
int EncoderFrames(int raw_frames);

// Past state fed to one conformer layer when processing a chunk.
template <typename T>
struct LayerHistory {
  Tensor<T> keys;       // [m, d] or empty
  Tensor<T> values;     // [m, d] or empty
  Tensor<T> conv_tail;  // last (kernel-1) GLU rows, or fewer, or empty
};

template <typename T>
struct LayerStep {
  Var<T> out;
  Var<T> keys;    // keys of the new rows only
  Var<T> values;
  Var<T> glu;     // conv-module GLU rows of the new rows
};

template <typename T>
class ConformerLayer {
 public:
  ConformerLayer() = default;
  ConformerLayer(const std::string& name, const EncoderConfig& config, CounterRng& rng);

  // x:[n,d]. mask has n*(m+n) entries where m is the history length, or is
  // empty for full visibility.
  LayerStep<T> Forward(Tape<T>& tape, Var<T> x, const LayerHistory<T>* history,
                       std::span<const uint8_t> mask);
  void Collect(ParameterList<T>& out);
  int kernel() const { return conv_weight.value.rows(); }

  LayerNormModule<T> ffn1_norm;
  PositionwiseFfn<T> ffn1;
  LayerNormModule<T> attn_norm;
  MultiHeadAttention<T> attn;
  LayerNormModule<T> conv_norm;
  Linear<T> conv_in;  // d -> 2d, then GLU
  Parameter<T> conv_weight;
  Parameter<T> conv_bias;
  LayerNormModule<T> conv_mid_norm;
  Linear<T> conv_out;
  LayerNormModule<T> ffn2_norm;
  PositionwiseFfn<T> ffn2;
  LayerNormModule<T> final_norm;
};

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& config, CounterRng& rng);

  const EncoderConfig& config() const { return config_; }

  // raw:[4k, feat_dim] -> [k, d_model]. Callers pad; see Frontend().
  Var<T> FrontendDownsample(Tape<T>& tape, Var<T> raw);
  // Pads to a multiple of 4 with zero rows, downsamples and adds positions
  // starting at `first_position`. Throws DimensionError on fewer than 4 rows
  // unless `allow_short` (the streaming tail).
  Var<T> Frontend(Tape<T>& tape, const Tensor<T>& raw, int first_position,
                  bool allow_short = false);
  // Full-utterance masked forward. mask.frames() must equal EncoderFrames().
  Var<T> Forward(Tape<T>& tape, const Tensor<T>& raw, const MaskMatrix& mask);
  // Layers only, on frontend output.
  Var<T> ForwardLayers(Tape<T>& tape, Var<T> x, const MaskMatrix& mask);

  int num_layers() const { return static_cast<int>(layers_.size()); }
  ConformerLayer<T>& layer(int i) { return layers_[i]; }
  void Collect(ParameterList<T>& out);

 private:
  EncoderConfig config_;
  Parameter<T> conv1_weight_, conv1_bias_;
  Parameter<T> conv2_weight_, conv2_bias_;
  Linear<T> proj_;
  Parameter<T> positions_;
  std::vector<ConformerLayer<T>> layers_;
};

}  // namespace sens

#endif  // SENS_ENCODER_H_
