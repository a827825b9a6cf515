#ifndef SENS_KERNELS_H_
#define SENS_KERNELS_H_

// Dense row kernels. The default namespace holds the OpenMP versions used by
// the model; sens::kernels::reference keeps plain serial loops for tests and
// benchmarks. Both perform the same per-element arithmetic in the same order
// (parallelism is only across output rows), so results are bit-identical and
// a row's value never depends on how many other rows are computed with it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace sens::kernels {

// Below this many multiply-adds a kernel stays on the calling thread.
inline constexpr std::size_t kParallelWork = 1 << 15;

// Additive mask value for excluded attention positions.
inline constexpr double kMaskedScore = -1e9;

namespace reference {

// C (+)= A[m x k] * B[k x n]
template <typename T>
void MatMul(std::span<const T> a, std::span<const T> b, std::span<T> c, int m,
            int k, int n, bool accumulate = false) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T s = T(0);
      for (int p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

// C (+)= A[m x k] * B[n x k]^T
template <typename T>
void MatMulNT(std::span<const T> a, std::span<const T> b, std::span<T> c, int m,
              int k, int n, bool accumulate = false) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T s = T(0);
      for (int p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

// C (+)= A[k x m]^T * B[k x n]
template <typename T>
void MatMulTN(std::span<const T> a, std::span<const T> b, std::span<T> c, int k,
              int m, int n, bool accumulate = false) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T s = T(0);
      for (int p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

// Row softmax with an optional 0/1 mask (size cols to broadcast, or
// rows*cols). Masked positions get exactly zero.
template <typename T>
void SoftmaxRows(std::span<const T> x, std::span<const uint8_t> mask,
                 std::span<T> y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const uint8_t* m = mask.empty()
                           ? nullptr
                           : mask.data() + (mask.size() == static_cast<std::size_t>(cols)
                                                ? 0
                                                : static_cast<std::size_t>(r) * cols);
    const T* xr = x.data() + static_cast<std::size_t>(r) * cols;
    T* yr = y.data() + static_cast<std::size_t>(r) * cols;
    T mx = -std::numeric_limits<T>::infinity();
    for (int c = 0; c < cols; ++c) {
      const T v = (m && !m[c]) ? xr[c] + T(kMaskedScore) : xr[c];
      yr[c] = v;
      mx = std::max(mx, v);
    }
    T sum = T(0);
    for (int c = 0; c < cols; ++c) {
      yr[c] = std::exp(yr[c] - mx);
      sum += yr[c];
    }
    for (int c = 0; c < cols; ++c) {
      yr[c] = (m && !m[c]) ? T(0) : yr[c] / sum;
    }
  }
}

template <typename T>
void LogSoftmaxRows(std::span<const T> x, std::span<T> y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const T* xr = x.data() + static_cast<std::size_t>(r) * cols;
    T* yr = y.data() + static_cast<std::size_t>(r) * cols;
    // log-sum-exp in double so each output is rounded once; this feeds the
    // transducer loss, where float accumulation noise shows up directly
    const double mx = *std::max_element(xr, xr + cols);
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) sum += std::exp(static_cast<double>(xr[c]) - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < cols; ++c) yr[c] = static_cast<T>(xr[c] - lse);
  }
}

// y = (x - mean) * rstd * gamma + beta per row; mean and rstd are saved.
template <typename T>
void LayerNormRows(std::span<const T> x, std::span<const T> gamma,
                   std::span<const T> beta, std::span<T> y, std::span<T> mean,
                   std::span<T> rstd, int rows, int cols, T eps) {
  for (int r = 0; r < rows; ++r) {
    const T* xr = x.data() + static_cast<std::size_t>(r) * cols;
    T* yr = y.data() + static_cast<std::size_t>(r) * cols;
    T mu = T(0);
    for (int c = 0; c < cols; ++c) mu += xr[c];
    mu /= T(cols);
    T var = T(0);
    for (int c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= T(cols);
    const T rs = T(1) / std::sqrt(var + eps);
    for (int c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * rs * gamma[c] + beta[c];
    mean[r] = mu;
    rstd[r] = rs;
  }
}

}  // namespace reference

template <typename T>
void MatMul(std::span<const T> a, std::span<const T> b, std::span<T> c, int m,
            int k, int n, bool accumulate = false) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
#pragma omp parallel if (work > kParallelWork)
  {
    std::vector<T> acc(n);
#pragma omp for schedule(static)
    for (int i = 0; i < m; ++i) {
      std::fill(acc.begin(), acc.end(), T(0));
      const T* ar = a.data() + static_cast<std::size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const T av = ar[p];
        const T* br = b.data() + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) acc[j] += av * br[j];
      }
      T* cr = c.data() + static_cast<std::size_t>(i) * n;
      if (accumulate) {
        for (int j = 0; j < n; ++j) cr[j] += acc[j];
      } else {
        std::copy(acc.begin(), acc.end(), cr);
      }
    }
  }
}

template <typename T>
void MatMulNT(std::span<const T> a, std::span<const T> b, std::span<T> c, int m,
              int k, int n, bool accumulate = false) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int i = 0; i < m; ++i) {
    const T* ar = a.data() + static_cast<std::size_t>(i) * k;
    T* cr = c.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* br = b.data() + static_cast<std::size_t>(j) * k;
      T s = T(0);
      for (int p = 0; p < k; ++p) s += ar[p] * br[p];
      cr[j] = accumulate ? cr[j] + s : s;
    }
  }
}

template <typename T>
void MatMulTN(std::span<const T> a, std::span<const T> b, std::span<T> c, int k,
              int m, int n, bool accumulate = false) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
#pragma omp parallel if (work > kParallelWork)
  {
    std::vector<T> acc(n);
#pragma omp for schedule(static)
    for (int i = 0; i < m; ++i) {
      std::fill(acc.begin(), acc.end(), T(0));
      for (int p = 0; p < k; ++p) {
        const T av = a[static_cast<std::size_t>(p) * m + i];
        const T* br = b.data() + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) acc[j] += av * br[j];
      }
      T* cr = c.data() + static_cast<std::size_t>(i) * n;
      if (accumulate) {
        for (int j = 0; j < n; ++j) cr[j] += acc[j];
      } else {
        std::copy(acc.begin(), acc.end(), cr);
      }
    }
  }
}

template <typename T>
void SoftmaxRows(std::span<const T> x, std::span<const uint8_t> mask,
                 std::span<T> y, int rows, int cols) {
  const std::size_t work = static_cast<std::size_t>(rows) * cols * 8;
  const bool broadcast = mask.size() == static_cast<std::size_t>(cols);
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    std::span<const uint8_t> mrow;
    if (!mask.empty()) mrow = broadcast ? mask : mask.subspan(off, cols);
    reference::SoftmaxRows<T>(x.subspan(off, cols), mrow, y.subspan(off, cols), 1,
                              cols);
  }
}

template <typename T>
void LogSoftmaxRows(std::span<const T> x, std::span<T> y, int rows, int cols) {
  const std::size_t work = static_cast<std::size_t>(rows) * cols * 8;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    reference::LogSoftmaxRows<T>(x.subspan(off, cols), y.subspan(off, cols), 1,
                                 cols);
  }
}

template <typename T>
void LayerNormRows(std::span<const T> x, std::span<const T> gamma,
                   std::span<const T> beta, std::span<T> y, std::span<T> mean,
                   std::span<T> rstd, int rows, int cols, T eps) {
  const std::size_t work = static_cast<std::size_t>(rows) * cols * 6;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    reference::LayerNormRows<T>(x.subspan(off, cols), gamma, beta,
                                y.subspan(off, cols), mean.subspan(r, 1),
                                rstd.subspan(r, 1), 1, cols, eps);
  }
}

}  // namespace sens::kernels

#endif  // SENS_KERNELS_H_
