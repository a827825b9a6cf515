#include "sens/rnnt_lattice.h"

#include <cmath>
#include <limits>
#include <string>

#include "sens/error.h"

namespace sens {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

template <typename T>
void ValidateRnntInputs(std::span<const T> log_probs, int frames,
                        std::span<const int> targets, int vocab, int blank) {
  if (frames < 1) throw ParameterError("rnnt: need at least one frame");
  if (vocab < 2) throw ParameterError("rnnt: vocabulary must have >= 2 symbols");
  if (blank < 0 || blank >= vocab) throw ParameterError("rnnt: blank out of range");
  const std::size_t nodes =
      static_cast<std::size_t>(frames) * (targets.size() + 1);
  if (log_probs.size() != nodes * vocab) {
    throw DimensionError("rnnt: lattice has " + std::to_string(log_probs.size()) +
                         " entries, expected " + std::to_string(frames) + "x" +
                         std::to_string(targets.size() + 1) + "x" +
                         std::to_string(vocab));
  }
  for (int y : targets) {
    if (y < 0 || y >= vocab || y == blank) {
      throw VocabularyError("rnnt: target id " + std::to_string(y) +
                            " is blank or outside the vocabulary");
    }
  }
}

template <typename T>
LatticeVariables ComputeLatticeVariables(std::span<const T> log_probs, int frames,
                                         std::span<const int> targets, int vocab,
                                         int blank, bool label_only) {
  ValidateRnntInputs(log_probs, frames, targets, vocab, blank);
  const int U = static_cast<int>(targets.size());
  const int U1 = U + 1;
  auto lb = [&](int t, int u) -> double {
    if (label_only) return 0.0;
    return static_cast<double>(log_probs[(static_cast<std::size_t>(t) * U1 + u) * vocab + blank]);
  };
  auto ly = [&](int t, int u) -> double {
    return static_cast<double>(
        log_probs[(static_cast<std::size_t>(t) * U1 + u) * vocab + targets[u]]);
  };

  LatticeVariables lv;
  lv.frames = frames;
  lv.labels = U;
  lv.log_alpha.assign(static_cast<std::size_t>(frames) * U1, kNegInf);
  lv.log_beta.assign(static_cast<std::size_t>(frames) * U1, kNegInf);
  auto A = [&](int t, int u) -> double& { return lv.log_alpha[t * U1 + u]; };
  auto B = [&](int t, int u) -> double& { return lv.log_beta[t * U1 + u]; };

  for (int t = 0; t < frames; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) {
        A(0, 0) = 0.0;
        continue;
      }
      double v = kNegInf;
      if (t > 0) v = LogAdd(v, A(t - 1, u) + lb(t - 1, u));
      if (u > 0) v = LogAdd(v, A(t, u - 1) + ly(t, u - 1));
      A(t, u) = v;
    }
  }
  for (int t = frames - 1; t >= 0; --t) {
    for (int u = U; u >= 0; --u) {
      if (t == frames - 1 && u == U) {
        B(t, u) = lb(t, u);
        continue;
      }
      double v = kNegInf;
      if (t + 1 < frames) v = LogAdd(v, B(t + 1, u) + lb(t, u));
      if (u < U) v = LogAdd(v, B(t, u + 1) + ly(t, u));
      B(t, u) = v;
    }
  }
  lv.log_total = A(frames - 1, U) + lb(frames - 1, U);
  return lv;
}

template <typename T>
double RnntNegLogLikelihood(std::span<const T> log_probs, int frames,
                            std::span<const int> targets, int vocab, int blank) {
  return -ComputeLatticeVariables(log_probs, frames, targets, vocab, blank).log_total;
}

template <typename T>
RnntLossResult RnntLossWithGrad(std::span<const T> log_probs, int frames,
                                std::span<const int> targets, int vocab,
                                double fastemit_lambda, int blank) {
  if (fastemit_lambda < 0.0) {
    throw ParameterError("fastemit lambda must be non-negative");
  }
  const LatticeVariables lv =
      ComputeLatticeVariables(log_probs, frames, targets, vocab, blank);
  const int U = lv.labels;
  const int U1 = U + 1;
  RnntLossResult out;
  out.nll = -lv.log_total;
  out.loss = out.nll;
  out.grad.assign(log_probs.size(), 0.0);
  auto at = [&](int t, int u, int k) {
    return (static_cast<std::size_t>(t) * U1 + u) * vocab + k;
  };

  for (int t = 0; t < frames; ++t) {
    for (int u = 0; u <= U; ++u) {
      const double a = lv.alpha(t, u);
      const std::size_t bi = at(t, u, blank);
      if (t + 1 < frames) {
        out.grad[bi] = -std::exp(a + log_probs[bi] + lv.beta(t + 1, u) - lv.log_total);
      } else if (u == U) {
        out.grad[bi] = -std::exp(a + log_probs[bi] - lv.log_total);
      }
      if (u < U) {
        const std::size_t yi = at(t, u, targets[u]);
        out.grad[yi] = -std::exp(a + log_probs[yi] + lv.beta(t, u + 1) - lv.log_total);
      }
    }
  }

  if (fastemit_lambda > 0.0) {
    const LatticeVariables le =
        ComputeLatticeVariables(log_probs, frames, targets, vocab, blank, true);
    out.label_term = -le.log_total;
    out.loss = out.nll + fastemit_lambda * out.label_term;
    for (int t = 0; t < frames; ++t) {
      for (int u = 0; u < U; ++u) {
        const std::size_t yi = at(t, u, targets[u]);
        out.grad[yi] -= fastemit_lambda *
                        std::exp(le.alpha(t, u) + log_probs[yi] +
                                 le.beta(t, u + 1) - le.log_total);
      }
    }
  }
  return out;
}

#define SENS_INSTANTIATE(T)                                                    \
  template void ValidateRnntInputs<T>(std::span<const T>, int,                \
                                      std::span<const int>, int, int);        \
  template LatticeVariables ComputeLatticeVariables<T>(                       \
      std::span<const T>, int, std::span<const int>, int, int, bool);         \
  template double RnntNegLogLikelihood<T>(std::span<const T>, int,            \
                                          std::span<const int>, int, int);    \
  template RnntLossResult RnntLossWithGrad<T>(                                \
      std::span<const T>, int, std::span<const int>, int, double, int);

SENS_INSTANTIATE(float)
SENS_INSTANTIATE(double)
#undef SENS_INSTANTIATE

}  // namespace sens
