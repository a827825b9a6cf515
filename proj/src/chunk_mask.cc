#include "sens/chunk_mask.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "sens/error.h"

namespace sens {

void ChunkSpec::Validate() const {
  if (total_frames < 1) throw ParameterError("chunk spec: T must be >= 1");
  if (chunk_size < 1 || chunk_size > total_frames) {
    throw ParameterError("chunk spec: chunk size " + std::to_string(chunk_size) +
                         " outside [1, " + std::to_string(total_frames) + "]");
  }
  if (left_chunks < 0 && left_chunks != kUnlimitedContext) {
    throw ParameterError("chunk spec: left context must be >= 0 or unlimited");
  }
}

MaskMatrix::MaskMatrix(int frames, std::vector<uint8_t> bits)
    : frames_(frames), bits_(std::move(bits)) {
  if (bits_.size() != static_cast<std::size_t>(frames) * frames) {
    throw DimensionError("mask matrix: expected " + std::to_string(frames) + "x" +
                         std::to_string(frames) + " entries");
  }
}

bool MaskMatrix::AllOnes() const {
  return std::all_of(bits_.begin(), bits_.end(), [](uint8_t b) { return b != 0; });
}

MaskMatrix BuildMask(const ChunkSpec& spec) {
  spec.Validate();
  const int T = spec.total_frames;
  std::vector<uint8_t> bits(static_cast<std::size_t>(T) * T, 0);
  for (int t = 0; t < T; ++t) {
    const int ct = spec.ChunkOf(t);
    const int first_chunk = spec.unlimited() ? 0 : std::max(0, ct - spec.left_chunks);
    const int begin = first_chunk * spec.chunk_size;
    const int end = std::min(T, (ct + 1) * spec.chunk_size);
    std::fill(bits.begin() + static_cast<std::ptrdiff_t>(t) * T + begin,
              bits.begin() + static_cast<std::ptrdiff_t>(t) * T + end, 1);
  }
  return MaskMatrix(T, std::move(bits));
}

void DctPolicy::Validate() const {
  if (chunked_batch_fraction < 0.0 || chunked_batch_fraction > 1.0) {
    throw ParameterError("dct policy: chunked fraction must lie in [0, 1]");
  }
  if (chunk_ms_min > chunk_ms_max) {
    throw ParameterError("dct policy: chunk_ms_min exceeds chunk_ms_max");
  }
  if (frame_ms <= 0.0) throw ParameterError("dct policy: frame_ms must be positive");
}

int MsToFrames(double ms, double frame_ms) {
  if (frame_ms <= 0.0) throw ParameterError("frame_ms must be positive");
  if (ms <= 0.0) throw ParameterError("chunk duration must be positive");
  return std::max(1, static_cast<int>(std::lround(ms / frame_ms)));
}

ChunkSpec SampleDctConfig(const DctPolicy& policy, int frames, CounterRng& rng) {
  policy.Validate();
  if (frames < 1) throw ParameterError("dct sampling: T must be >= 1");
  if (!rng.Bernoulli(policy.chunked_batch_fraction)) {
    return ChunkSpec::FullContext(frames);
  }
  const int lo = std::clamp(MsToFrames(policy.chunk_ms_min, policy.frame_ms), 1, frames);
  const int hi = std::clamp(MsToFrames(policy.chunk_ms_max, policy.frame_ms), 1, frames);
  ChunkSpec spec;
  spec.total_frames = frames;
  spec.chunk_size = static_cast<int>(rng.UniformInt(lo, hi));
  spec.left_chunks = rng.Bernoulli(0.5) ? 0 : kUnlimitedContext;
  return spec;
}

}  // namespace sens
