// Serial reference kernels vs the OpenMP ones, plus a streaming decode.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "sens/kernels.h"
#include "sens/rng.h"
#include "sens/streaming.h"

namespace sens {
namespace {

std::vector<float> Random(std::size_t n, uint64_t seed) {
  CounterRng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.Normal());
  return v;
}

template <bool kParallel>
void BM_MatMul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = Random(std::size_t(n) * n, 1), b = Random(std::size_t(n) * n, 2);
  std::vector<float> c(std::size_t(n) * n);
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::MatMul<float>(a, b, c, n, n, n);
    } else {
      kernels::reference::MatMul<float>(a, b, c, n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * int64_t(n) * n * n);
}
BENCHMARK(BM_MatMul<false>)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_MatMul<true>)->Arg(64)->Arg(256)->Arg(512);

template <bool kParallel>
void BM_MaskedSoftmax(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto x = Random(std::size_t(n) * n, 3);
  std::vector<uint8_t> mask(std::size_t(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mask[std::size_t(i) * n + j] = j / 16 <= i / 16;
  std::vector<float> y(x.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::SoftmaxRows<float>(x, mask, y, n, n);
    } else {
      kernels::reference::SoftmaxRows<float>(x, mask, y, n, n);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_MaskedSoftmax<false>)->Arg(256)->Arg(1024);
BENCHMARK(BM_MaskedSoftmax<true>)->Arg(256)->Arg(1024);

template <bool kParallel>
void BM_LayerNorm(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0)), cols = 256;
  auto x = Random(std::size_t(rows) * cols, 4);
  std::vector<float> gamma(cols, 1.0f), beta(cols, 0.0f), y(x.size()), mean(rows), rstd(rows);
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::LayerNormRows<float>(x, gamma, beta, y, mean, rstd, rows, cols, 1e-5f);
    } else {
      kernels::reference::LayerNormRows<float>(x, gamma, beta, y, mean, rstd, rows, cols, 1e-5f);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t(rows) * cols);
}
BENCHMARK(BM_LayerNorm<false>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_LayerNorm<true>)->Arg(1024)->Arg(8192);

// Default-size model, 4-frame (160 ms) chunks; reports real-time factor
// against 10 ms raw frames.
void BM_StreamDecode(benchmark::State& state) {
  ModelConfig cfg;
  cfg.vocab_size = 11;
  SensAsrModel<float> model(cfg, 1);
  const int raw_frames = static_cast<int>(state.range(0));
  CounterRng rng(5);
  Tensor<float> raw({raw_frames, cfg.encoder.feat_dim});
  for (float& x : raw.storage()) x = static_cast<float>(rng.Normal());
  for (auto _ : state) {
    Stream<float> s(model, {4, 4, 4, false});
    for (int b = 0; b < raw_frames; b += 16) s.Push(raw.RowSlice(b, std::min(raw_frames, b + 16)));
    benchmark::DoNotOptimize(s.Close().transcript.size());
  }
  state.counters["audio_s"] = raw_frames * 0.01;
  state.counters["rtf"] = benchmark::Counter(raw_frames * 0.01 * state.iterations(),
                                             benchmark::Counter::kIsRate | benchmark::Counter::kInvert);
}
BENCHMARK(BM_StreamDecode)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace sens

BENCHMARK_MAIN();
