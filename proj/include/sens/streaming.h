#ifndef SENS_STREAMING_H_
#define SENS_STREAMING_H_

#include <cstddef>
#include <deque>
#include <vector>

#include "sens/model.h"

namespace sens {

struct StreamOptions {
  int chunk_size = 4;                        // S, encoder frames
  int left_chunks = kUnlimitedContext;       // P
  int context_window = kUnlimitedContext;    // P_ctx
  // Keep every encoder output row (tests compare against offline H).
  bool record_encoder_output = false;

  void Validate() const;
};

template <typename T>
struct StreamResult {
  std::vector<Emission> emissions;  // produced by this call
  std::vector<Emission> transcript; // everything emitted so far
};

// One incremental decoding session over a shared, read-only model. Not
// thread-safe; distinct streams may run concurrently.
template <typename T>
class Stream {
 public:
  Stream(SensAsrModel<T>& model, const StreamOptions& options);

  // Any number of raw frames; processing happens in whole chunks.
  std::vector<Emission> Push(const Tensor<T>& raw_frames);
  // Flushes the remainder (zero-padded) and the final partial chunk.
  StreamResult<T> Close();

  bool closed() const { return closed_; }
  int chunks_done() const { return chunks_done_; }
  int frames_done() const { return frames_done_; }
  const std::vector<Emission>& transcript() const { return transcript_; }
  const Tensor<T>& encoder_output() const { return encoder_output_; }

  // Floats currently held by caches and buffers.
  std::size_t CacheFloats() const;
  // Upper bound on CacheFloats() for these options; SIZE_MAX when any
  // context is unlimited.
  std::size_t CacheBound() const;

 private:
  struct LayerCache {
    LayerHistory<T> history;
    std::deque<int> chunk_rows;  // rows per cached chunk, oldest first
  };

  void ProcessFrames(const Tensor<T>& frames);
  void ProcessChunk(const Tensor<T>& chunk);
  std::vector<Emission> TakeNew();

  SensAsrModel<T>* model_;
  StreamOptions options_;
  GreedyDecoder<T> decoder_;
  Tensor<T> raw_remainder_;   // < 4 raw frames
  Tensor<T> pending_frames_;  // < S encoder frames
  std::vector<LayerCache> layers_;
  std::deque<Tensor<T>> past_chunks_;
  std::vector<Emission> transcript_;
  std::size_t reported_ = 0;
  Tensor<T> encoder_output_;
  int frames_done_ = 0;
  int chunks_done_ = 0;
  bool closed_ = false;
};

}  // namespace sens

#endif  // SENS_STREAMING_H_
