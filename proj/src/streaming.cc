#include "sens/streaming.h"

#include <limits>
#include <string>

#include "sens/error.h"

namespace sens {

void StreamOptions::Validate() const {
  if (chunk_size < 1) throw ParameterError("stream: chunk size must be >= 1");
  if (left_chunks < 0 && left_chunks != kUnlimitedContext) {
    throw ParameterError("stream: left chunks must be >= 0 or unlimited");
  }
  if (context_window < 1 && context_window != kUnlimitedContext) {
    throw ParameterError("stream: context window must be >= 1 or unlimited");
  }
}

template <typename T>
Stream<T>::Stream(SensAsrModel<T>& model, const StreamOptions& options)
    : model_(&model),
      options_(options),
      decoder_(model.predictor(), model.joint(), model.config().max_symbols_per_frame) {
  options.Validate();
  layers_.resize(model.encoder().num_layers());
}

namespace {

template <typename T>
void DropFrontRows(Tensor<T>& t, int n) {
  if (n <= 0 || t.empty()) return;
  t.KeepLastRows(t.rows() - n);
}

}  // namespace

template <typename T>
std::vector<Emission> Stream<T>::Push(const Tensor<T>& raw_frames) {
  if (closed_) throw StateError("push after close");
  if (raw_frames.empty()) return {};
  const int feat = model_->config().encoder.feat_dim;
  if (raw_frames.rank() != 2 || raw_frames.cols() != feat) {
    throw DimensionError("stream: expected [n, " + std::to_string(feat) + "] frames, got " +
                         ShapeString(raw_frames.shape()));
  }
  raw_remainder_.AppendRows(raw_frames);
  const int usable = raw_remainder_.rows() / 4 * 4;
  if (usable > 0) {
    Tensor<T> group = raw_remainder_.RowSlice(0, usable);
    DropFrontRows(raw_remainder_, usable);
    ProcessFrames(group);
  }
  return TakeNew();
}

template <typename T>
StreamResult<T> Stream<T>::Close() {
  if (closed_) throw StateError("stream already closed");
  if (!raw_remainder_.empty()) {
    Tensor<T> rest = std::move(raw_remainder_);
    raw_remainder_ = Tensor<T>();
    ProcessFrames(rest);  // frontend zero-pads to a group of 4
  }
  if (!pending_frames_.empty()) {
    Tensor<T> last = std::move(pending_frames_);
    pending_frames_ = Tensor<T>();
    ProcessChunk(last);
  }
  closed_ = true;
  StreamResult<T> r;
  r.emissions = TakeNew();
  r.transcript = transcript_;
  return r;
}

template <typename T>
void Stream<T>::ProcessFrames(const Tensor<T>& raw) {
  Tape<T> tape(false);
  const int first_position = frames_done_ + (pending_frames_.empty() ? 0 : pending_frames_.rows());
  pending_frames_.AppendRows(model_->encoder().Frontend(tape, raw, first_position, true).value());
  const int s = options_.chunk_size;
  while (!pending_frames_.empty() && pending_frames_.rows() >= s) {
    Tensor<T> chunk = pending_frames_.RowSlice(0, s);
    DropFrontRows(pending_frames_, s);
    ProcessChunk(chunk);
  }
}

template <typename T>
void Stream<T>::ProcessChunk(const Tensor<T>& chunk) {
  Tape<T> tape(false);
  const int n = chunk.rows();
  Var<T> x = tape.Constant(chunk);
  for (int l = 0; l < model_->encoder().num_layers(); ++l) {
    ConformerLayer<T>& layer = model_->encoder().layer(l);
    LayerCache& cache = layers_[l];
    LayerStep<T> step = layer.Forward(tape, x, &cache.history, {});
    x = step.out;

    cache.history.keys.AppendRows(step.keys.value());
    cache.history.values.AppendRows(step.values.value());
    cache.chunk_rows.push_back(n);
    if (options_.left_chunks != kUnlimitedContext) {
      while (static_cast<int>(cache.chunk_rows.size()) > options_.left_chunks) {
        DropFrontRows(cache.history.keys, cache.chunk_rows.front());
        DropFrontRows(cache.history.values, cache.chunk_rows.front());
        cache.chunk_rows.pop_front();
      }
    }
    cache.history.conv_tail.AppendRows(step.glu.value());
    cache.history.conv_tail.KeepLastRows(layer.kernel() - 1);
  }
  const Tensor<T> h_chunk = x.value();
  if (options_.record_encoder_output) encoder_output_.AppendRows(h_chunk);

  Var<T> enriched = x;
  ContextModule<T>& context = model_->context();
  if (model_->config().context.enabled) {
    std::optional<Var<T>> past;
    if (!past_chunks_.empty()) {
      std::vector<Var<T>> parts;
      for (const auto& p : past_chunks_) parts.push_back(tape.Constant(p));
      past = parts.size() == 1 ? parts[0] : tape.ConcatRows(parts);
    }
    // Strictly past chunks only; the current chunk goes in afterwards.
    Var<T> c = context.Compute(tape, past);
    enriched = context.Attach(tape, x, c);
    past_chunks_.push_back(h_chunk);
    if (options_.context_window != kUnlimitedContext) {
      while (static_cast<int>(past_chunks_.size()) > options_.context_window) {
        past_chunks_.pop_front();
      }
    }
  }
  Tensor<T> proj = model_->joint().ProjectEncoder(tape, enriched).value();
  for (const Emission& e : decoder_.Advance(proj, frames_done_)) transcript_.push_back(e);
  frames_done_ += n;
  ++chunks_done_;
}

template <typename T>
std::vector<Emission> Stream<T>::TakeNew() {
  std::vector<Emission> out(transcript_.begin() + static_cast<std::ptrdiff_t>(reported_),
                            transcript_.end());
  reported_ = transcript_.size();
  return out;
}

template <typename T>
std::size_t Stream<T>::CacheFloats() const {
  std::size_t n = raw_remainder_.size() + pending_frames_.size();
  for (const auto& c : layers_) {
    n += c.history.keys.size() + c.history.values.size() + c.history.conv_tail.size();
  }
  for (const auto& p : past_chunks_) n += p.size();
  return n;
}

template <typename T>
std::size_t Stream<T>::CacheBound() const {
  const bool ctx = model_->config().context.enabled;
  if (options_.left_chunks == kUnlimitedContext ||
      (ctx && options_.context_window == kUnlimitedContext)) {
    return std::numeric_limits<std::size_t>::max();
  }
  const auto& e = model_->config().encoder;
  const std::size_t s = options_.chunk_size, d = e.d_model;
  std::size_t bound = 3 * static_cast<std::size_t>(e.feat_dim) + (s - 1) * d;
  bound += e.num_layers * (2 * options_.left_chunks * s * d + (e.conv_kernel - 1) * d);
  if (ctx) bound += options_.context_window * s * d;
  return bound;
}

template class Stream<float>;
template class Stream<double>;

}  // namespace sens
