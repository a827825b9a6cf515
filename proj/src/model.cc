#include "sens/model.h"

#include <string>

#include "sens/error.h"

namespace sens {

void ModelConfig::Validate() const {
  encoder.Validate();
  context.Validate();
  if (vocab_size < 2) throw ParameterError("model: vocab_size must be >= 2");
  if (predictor_hidden < 1) throw ParameterError("model: predictor_hidden must be >= 1");
  if (joint_dim < 1) throw ParameterError("model: joint_dim must be >= 1");
  if (max_symbols_per_frame < 1) throw ParameterError("model: max_symbols_per_frame must be >= 1");
}

namespace {

CounterRng Stream(uint64_t seed, uint64_t id) { return CounterRng(seed).Fork(id); }

}  // namespace

template <typename T>
SensAsrModel<T>::SensAsrModel(const ModelConfig& config, uint64_t seed) : config_(config) {
  config.Validate();
  CounterRng enc_rng = Stream(seed, 1), ctx_rng = Stream(seed, 2);
  CounterRng pred_rng = Stream(seed, 3), joint_rng = Stream(seed, 4);
  const auto& e = config.encoder;
  encoder_ = Encoder<T>(e, enc_rng);
  // Built even when disabled so checkpoints keep one layout per config.
  context_ = ContextModule<T>(config.context, e.d_model, e.num_heads, e.ffn_dim, ctx_rng);
  predictor_ = Predictor<T>(config.vocab_size, config.predictor_hidden, pred_rng);
  joint_ = Joint<T>(config.enriched_dim(), config.predictor_hidden, config.joint_dim,
                    config.vocab_size, joint_rng);
}

template <typename T>
ParameterList<T> SensAsrModel<T>::Parameters() {
  ParameterList<T> out;
  encoder_.Collect(out);
  if (config_.context.enabled) context_.Collect(out);
  predictor_.Collect(out);
  joint_.Collect(out);
  return out;
}

template <typename T>
EncodeResult<T> SensAsrModel<T>::Enrich(Tape<T>& tape, Var<T> encoded, const ChunkSpec& spec,
                                        int context_window) {
  EncodeResult<T> r;
  r.encoded = encoded;
  if (!config_.context.enabled) {
    r.enriched = encoded;
    return r;
  }
  const int frames = encoded.rows();
  std::vector<Var<T>> rows;
  for (int g = 0; g < spec.NumChunks(); ++g) {
    const auto [pb, pe] = PastRows(g, spec.chunk_size, context_window, frames);
    std::optional<Var<T>> past;
    if (pe > pb) past = tape.SliceRows(encoded, pb, pe);
    Var<T> c = context_.Compute(tape, past);
    r.contexts.push_back(c);
    const int b = g * spec.chunk_size;
    const int e = std::min(frames, b + spec.chunk_size);
    rows.push_back(context_.Attach(tape, tape.SliceRows(encoded, b, e), c));
  }
  r.enriched = rows.size() == 1 ? rows[0] : tape.ConcatRows(rows);
  return r;
}

template <typename T>
EncodeResult<T> SensAsrModel<T>::Encode(Tape<T>& tape, const Tensor<T>& raw,
                                        const ChunkSpec& spec, int context_window) {
  Var<T> h = encoder_.Forward(tape, raw, BuildMask(spec));
  return Enrich(tape, h, spec, context_window);
}

template <typename T>
LossResult<T> SensAsrModel<T>::Loss(Tape<T>& tape, const Tensor<T>& raw,
                                    std::span<const int> targets, const Tensor<T>* teacher,
                                    const ChunkSpec& spec, const LossWeights& w) {
  w.Validate();
  EncodeResult<T> enc = Encode(tape, raw, spec, config_.context.window_chunks);
  Var<T> lattice = joint_.LatticeLogProbs(tape, joint_.ProjectEncoder(tape, enc.enriched),
                                          joint_.ProjectPredictor(tape, predictor_.Forward(tape, targets)));
  LossResult<T> r;
  r.rnnt = tape.RnntLoss(lattice, enc.encoded.rows(), targets, w.fastemit_lambda, kBlankId);
  r.total = r.rnnt;
  if (config_.context.enabled) {
    if (teacher == nullptr) throw ParameterError("model loss: context enabled but no teacher embedding");
    r.mse = MseLoss(tape, enc.contexts, *teacher);
    r.total = TotalLoss(tape, r.rnnt, *r.mse, w);
  }
  return r;
}

template <typename T>
std::vector<Emission> SensAsrModel<T>::DecodeOffline(const Tensor<T>& raw, const ChunkSpec& spec,
                                                     int context_window) {
  Tape<T> tape(false);
  EncodeResult<T> enc = Encode(tape, raw, spec, context_window);
  Tensor<T> proj = joint_.ProjectEncoder(tape, enc.enriched).value();
  GreedyDecoder<T> decoder(predictor_, joint_, config_.max_symbols_per_frame);
  return decoder.Advance(proj, 0);
}

template class SensAsrModel<float>;
template class SensAsrModel<double>;

}  // namespace sens
