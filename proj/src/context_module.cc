#include "sens/context_module.h"

#include <algorithm>
#include <string>

#include "sens/error.h"

namespace sens {

void ContextConfig::Validate() const {
  if (teacher_dim < 1) throw ParameterError("context: teacher_dim must be >= 1");
  if (num_decoder_layers < 1) throw ParameterError("context: num_decoder_layers must be >= 1");
  if (window_chunks < 1 && window_chunks != kUnlimitedContext) {
    throw ParameterError("context: window must be a positive chunk count or unlimited");
  }
}

std::pair<int, int> PastRows(int gamma, int chunk_size, int window_chunks, int total_frames) {
  const int first = window_chunks == kUnlimitedContext ? 0 : std::max(0, gamma - window_chunks);
  const int begin = std::min(total_frames, first * chunk_size);
  const int end = std::min(total_frames, gamma * chunk_size);
  return {begin, std::max(begin, end)};
}

template <typename T>
ContextModule<T>::ContextModule(const ContextConfig& config, int d_model, int num_heads,
                                int ffn_dim, CounterRng& rng)
    : config_(config) {
  config.Validate();
  query_ = Parameter<T>("context.query", UniformInit<T>({1, d_model}, d_model, rng));
  layers_.resize(config.num_decoder_layers);
  for (int i = 0; i < config.num_decoder_layers; ++i) {
    const std::string name = "context.layer" + std::to_string(i);
    layers_[i].cross = MultiHeadAttention<T>(name + ".cross", d_model, num_heads, rng);
    layers_[i].cross_norm = LayerNormModule<T>(name + ".cross_norm", d_model);
    layers_[i].ffn = PositionwiseFfn<T>(name + ".ffn", d_model, ffn_dim, rng);
    layers_[i].ffn_norm = LayerNormModule<T>(name + ".ffn_norm", d_model);
  }
  proj_ = Linear<T>("context.proj", d_model, config.teacher_dim, rng);
}

template <typename T>
Var<T> ContextModule<T>::Compute(Tape<T>& tape, std::optional<Var<T>> past) {
  Var<T> y = tape.Param(query_);
  if (past.has_value() && past->rows() > 0) {
    for (auto& layer : layers_) {
      y = layer.cross_norm.Forward(tape, tape.Add(y, layer.cross.Forward(tape, y, *past, {})));
      y = layer.ffn_norm.Forward(tape, tape.Add(y, layer.ffn.Forward(tape, y)));
    }
  }
  return proj_.Forward(tape, y);
}

template <typename T>
Var<T> ContextModule<T>::Attach(Tape<T>& tape, Var<T> h_chunk, Var<T> context) {
  if (context.rows() != 1 || context.cols() != config_.teacher_dim) {
    throw DimensionError("attach context: expected [1, " + std::to_string(config_.teacher_dim) +
                         "], got " + ShapeString(context.shape()));
  }
  return tape.ConcatCols({h_chunk, tape.BroadcastRows(context, h_chunk.rows())});
}

template <typename T>
void ContextModule<T>::Collect(ParameterList<T>& out) {
  out.push_back(&query_);
  for (auto& layer : layers_) {
    layer.cross.Collect(out);
    layer.cross_norm.Collect(out);
    layer.ffn.Collect(out);
    layer.ffn_norm.Collect(out);
  }
  proj_.Collect(out);
}

template class ContextModule<float>;
template class ContextModule<double>;

}  // namespace sens
