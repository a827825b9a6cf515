#ifndef SENS_RNG_H_
#define SENS_RNG_H_

#include <cstdint>
#include <string_view>

namespace sens {

// Counter-based generator: the i-th draw of stream `key` is a pure function
// of (key, i), so sequences are identical across platforms and can be
// forked per utterance or per resample without shared state.
class CounterRng {
 public:
  explicit CounterRng(uint64_t key = 0, uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }

  uint64_t NextU64() { return Mix(key_, counter_++); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n), unbiased (rejection on the top range).
  uint64_t UniformInt(uint64_t n);
  // Uniform integer in [lo, hi] inclusive.
  int64_t UniformInt(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(UniformInt(static_cast<uint64_t>(hi - lo) + 1));
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via Box-Muller; consumes two draws.
  double Normal();

  // Independent child stream; does not advance this generator.
  CounterRng Fork(uint64_t stream) const {
    return CounterRng(Mix(key_ ^ 0x9e3779b97f4a7c15ULL, stream ^ 0xd1b54a32d192ed03ULL));
  }

  static uint64_t Mix(uint64_t key, uint64_t counter);

 private:
  uint64_t key_;
  uint64_t counter_;
};

// 64-bit FNV-1a.
uint64_t Fnv1a64(std::string_view text);

}  // namespace sens

#endif  // SENS_RNG_H_
