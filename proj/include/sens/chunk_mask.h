#ifndef SENS_CHUNK_MASK_H_
#define SENS_CHUNK_MASK_H_

#include <cstdint>
#include <span>
#include <vector>

#include "sens/rng.h"

namespace sens {

// Left context in chunks; kUnlimitedContext lets a chunk see every earlier
// chunk.
inline constexpr int kUnlimitedContext = -1;

struct ChunkSpec {
  int chunk_size = 1;     // S, encoder frames per chunk
  int left_chunks = 0;    // P, or kUnlimitedContext
  int total_frames = 1;   // T

  int NumChunks() const { return (total_frames + chunk_size - 1) / chunk_size; }
  int ChunkOf(int frame) const { return frame / chunk_size; }
  bool unlimited() const { return left_chunks == kUnlimitedContext; }
  // Throws ParameterError unless 1 <= S <= T and P >= 0 or unlimited.
  void Validate() const;

  static ChunkSpec FullContext(int frames) { return {frames, 0, frames}; }
};

// T x T attention mask: m[t,u] = 1 iff chunk(t) - P <= chunk(u) <= chunk(t).
class MaskMatrix {
 public:
  MaskMatrix() = default;
  MaskMatrix(int frames, std::vector<uint8_t> bits);

  int frames() const { return frames_; }
  bool at(int t, int u) const { return bits_[static_cast<std::size_t>(t) * frames_ + u] != 0; }
  std::span<const uint8_t> row(int t) const {
    return std::span<const uint8_t>(bits_).subspan(static_cast<std::size_t>(t) * frames_,
                                                   frames_);
  }
  std::span<const uint8_t> bits() const { return bits_; }
  bool AllOnes() const;

  friend bool operator==(const MaskMatrix&, const MaskMatrix&) = default;

 private:
  int frames_ = 0;
  std::vector<uint8_t> bits_;
};

MaskMatrix BuildMask(const ChunkSpec& spec);

// Dynamic chunk training policy: a fraction of batches get a random chunk
// size within [chunk_ms_min, chunk_ms_max]; the rest see full context.
struct DctPolicy {
  double chunked_batch_fraction = 0.6;
  double chunk_ms_min = 160.0;
  double chunk_ms_max = 1280.0;
  double frame_ms = 40.0;

  void Validate() const;
};

// round(ms / frame_ms), at least 1.
int MsToFrames(double ms, double frame_ms);

ChunkSpec SampleDctConfig(const DctPolicy& policy, int frames, CounterRng& rng);

}  // namespace sens

#endif  // SENS_CHUNK_MASK_H_
