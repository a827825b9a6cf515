#include "sens/encoder.h"

#include <algorithm>
#include <numeric>
#include <string>

#include "sens/error.h"

namespace sens {

void EncoderConfig::Validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ParameterError(std::string("encoder: ") + what + " must be >= 1");
  };
  positive(feat_dim, "feat_dim");
  positive(num_layers, "num_layers");
  positive(d_model, "d_model");
  positive(num_heads, "num_heads");
  positive(ffn_dim, "ffn_dim");
  positive(frontend_channels, "frontend_channels");
  positive(max_positions, "max_positions");
  if (d_model % num_heads != 0) {
    throw ParameterError("encoder: d_model " + std::to_string(d_model) +
                         " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ParameterError("encoder: conv_kernel must be odd, got " +
                         std::to_string(conv_kernel));
  }
}

int EncoderFrames(int raw_frames) { return (raw_frames + 3) / 4; }

template <typename T>
ConformerLayer<T>::ConformerLayer(const std::string& name, const EncoderConfig& c,
                                  CounterRng& rng)
    : ffn1_norm(name + ".ffn1_norm", c.d_model),
      ffn1(name + ".ffn1", c.d_model, c.ffn_dim, rng),
      attn_norm(name + ".attn_norm", c.d_model),
      attn(name + ".attn", c.d_model, c.num_heads, rng),
      conv_norm(name + ".conv_norm", c.d_model),
      conv_in(name + ".conv_in", c.d_model, 2 * c.d_model, rng),
      conv_weight(name + ".conv.weight",
                  UniformInit<T>({c.conv_kernel, c.d_model}, c.conv_kernel, rng)),
      conv_bias(name + ".conv.bias", Tensor<T>({1, c.d_model})),
      conv_mid_norm(name + ".conv_mid_norm", c.d_model),
      conv_out(name + ".conv_out", c.d_model, c.d_model, rng),
      ffn2_norm(name + ".ffn2_norm", c.d_model),
      ffn2(name + ".ffn2", c.d_model, c.ffn_dim, rng),
      final_norm(name + ".final_norm", c.d_model) {}

template <typename T>
LayerStep<T> ConformerLayer<T>::Forward(Tape<T>& tape, Var<T> x,
                                        const LayerHistory<T>* history,
                                        std::span<const uint8_t> mask) {
  LayerStep<T> step;
  const int n = x.rows();

  x = tape.Add(x, tape.Scale(ffn1.Forward(tape, ffn1_norm.Forward(tape, x)), T(0.5)));

  Var<T> a = attn_norm.Forward(tape, x);
  Var<T> q = attn.Queries(tape, a);
  step.keys = attn.Keys(tape, a);
  step.values = attn.Values(tape, a);
  Var<T> keys = step.keys, values = step.values;
  if (history != nullptr && !history->keys.empty()) {
    keys = tape.ConcatRows({tape.Constant(history->keys), step.keys});
    values = tape.ConcatRows({tape.Constant(history->values), step.values});
  }
  if (!mask.empty() &&
      mask.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(keys.rows())) {
    throw DimensionError("conformer layer: mask has " + std::to_string(mask.size()) +
                         " entries for " + std::to_string(n) + "x" +
                         std::to_string(keys.rows()) + " scores");
  }
  x = tape.Add(x, attn.Attend(tape, q, keys, values, mask));

  // Causal depthwise convolution; history supplies the left padding.
  Var<T> c = conv_norm.Forward(tape, x);
  step.glu = tape.Glu(conv_in.Forward(tape, c));
  Var<T> conv_input = step.glu;
  int tail = 0;
  if (history != nullptr && !history->conv_tail.empty()) {
    tail = history->conv_tail.rows();
    conv_input = tape.ConcatRows({tape.Constant(history->conv_tail), step.glu});
  }
  Var<T> conv = tape.DepthwiseConvCausal(conv_input, tape.Param(conv_weight),
                                         tape.Param(conv_bias));
  if (tail > 0) conv = tape.SliceRows(conv, tail, tail + n);
  conv = tape.Swish(conv_mid_norm.Forward(tape, conv));
  x = tape.Add(x, conv_out.Forward(tape, conv));

  x = tape.Add(x, tape.Scale(ffn2.Forward(tape, ffn2_norm.Forward(tape, x)), T(0.5)));
  step.out = final_norm.Forward(tape, x);
  return step;
}

template <typename T>
void ConformerLayer<T>::Collect(ParameterList<T>& out) {
  ffn1_norm.Collect(out);
  ffn1.Collect(out);
  attn_norm.Collect(out);
  attn.Collect(out);
  conv_norm.Collect(out);
  conv_in.Collect(out);
  out.push_back(&conv_weight);
  out.push_back(&conv_bias);
  conv_mid_norm.Collect(out);
  conv_out.Collect(out);
  ffn2_norm.Collect(out);
  ffn2.Collect(out);
  final_norm.Collect(out);
}

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& config, CounterRng& rng) : config_(config) {
  config.Validate();
  const int f = config.feat_dim, ch = config.frontend_channels;
  conv1_weight_ = Parameter<T>("frontend.conv1.weight", UniformInit<T>({2 * f, ch}, 2 * f, rng));
  conv1_bias_ = Parameter<T>("frontend.conv1.bias", Tensor<T>({1, ch}));
  conv2_weight_ = Parameter<T>("frontend.conv2.weight", UniformInit<T>({2 * ch, ch}, 2 * ch, rng));
  conv2_bias_ = Parameter<T>("frontend.conv2.bias", Tensor<T>({1, ch}));
  proj_ = Linear<T>("frontend.proj", ch, config.d_model, rng);
  CounterRng pos_rng = rng.Fork(0x706f73);
  Tensor<T> pos({config.max_positions, config.d_model});
  for (auto& v : pos.storage()) v = static_cast<T>(1.0 * pos_rng.Normal());
  positions_ = Parameter<T>("frontend.positions", std::move(pos));
  layers_.reserve(config.num_layers);
  for (int i = 0; i < config.num_layers; ++i) {
    layers_.emplace_back("encoder.layer" + std::to_string(i), config, rng);
  }
}

template <typename T>
Var<T> Encoder<T>::FrontendDownsample(Tape<T>& tape, Var<T> raw) {
  if (raw.rows() < 4 || raw.rows() % 4 != 0) {
    throw DimensionError("frontend: expected a positive multiple of 4 frames, got " +
                         std::to_string(raw.rows()));
  }
  if (raw.cols() != config_.feat_dim) {
    throw DimensionError("frontend: feature dim " + std::to_string(raw.cols()) +
                         " != configured " + std::to_string(config_.feat_dim));
  }
  Var<T> x = tape.Swish(tape.StridedConv2(raw, tape.Param(conv1_weight_), tape.Param(conv1_bias_)));
  x = tape.Swish(tape.StridedConv2(x, tape.Param(conv2_weight_), tape.Param(conv2_bias_)));
  return proj_.Forward(tape, x);
}

template <typename T>
Var<T> Encoder<T>::Frontend(Tape<T>& tape, const Tensor<T>& raw, int first_position,
                            bool allow_short) {
  if (raw.empty() || raw.rank() != 2) throw DimensionError("frontend: expected [frames, dim]");
  const int rows = raw.rows();
  if (rows < 4 && !allow_short) {
    throw DimensionError("frontend: input too short, " + std::to_string(rows) +
                         " frames (need >= 4)");
  }
  Tensor<T> padded = raw;
  const int padded_rows = EncoderFrames(rows) * 4;
  if (padded_rows != rows) {
    padded.AppendRows(Tensor<T>({padded_rows - rows, raw.cols()}));
  }
  Var<T> x = FrontendDownsample(tape, tape.Constant(std::move(padded)));
  std::vector<int> ids(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    ids[i] = std::min(first_position + i, config_.max_positions - 1);
  }
  return tape.Add(x, tape.Embedding(tape.Param(positions_), ids));
}

template <typename T>
Var<T> Encoder<T>::ForwardLayers(Tape<T>& tape, Var<T> x, const MaskMatrix& mask) {
  if (mask.frames() != x.rows()) {
    throw DimensionError("encoder: mask is " + std::to_string(mask.frames()) +
                         " frames but input has " + std::to_string(x.rows()));
  }
  std::span<const uint8_t> bits = mask.AllOnes() ? std::span<const uint8_t>() : mask.bits();
  for (auto& layer : layers_) x = layer.Forward(tape, x, nullptr, bits).out;
  return x;
}

template <typename T>
Var<T> Encoder<T>::Forward(Tape<T>& tape, const Tensor<T>& raw, const MaskMatrix& mask) {
  if (!raw.empty() && mask.frames() != EncoderFrames(raw.rows())) {
    throw DimensionError("encoder: mask is " + std::to_string(mask.frames()) +
                         " frames but input downsamples to " +
                         std::to_string(EncoderFrames(raw.rows())));
  }
  return ForwardLayers(tape, Frontend(tape, raw, 0), mask);
}

template <typename T>
void Encoder<T>::Collect(ParameterList<T>& out) {
  out.push_back(&conv1_weight_);
  out.push_back(&conv1_bias_);
  out.push_back(&conv2_weight_);
  out.push_back(&conv2_bias_);
  proj_.Collect(out);
  out.push_back(&positions_);
  for (auto& layer : layers_) layer.Collect(out);
}

template class ConformerLayer<float>;
template class ConformerLayer<double>;
template class Encoder<float>;
template class Encoder<double>;

}  // namespace sens
