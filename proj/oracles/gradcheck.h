#ifndef SENS_ORACLES_GRADCHECK_H_
#define SENS_ORACLES_GRADCHECK_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "sens/autodiff.h"

namespace sens::oracle {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "param[index]" of the worst coordinate
  int coordinates = 0;
};

// |a - n| / max(1, |a|, |n|): relative for large derivatives, absolute for
// small ones where float cancellation dominates.
inline double GradRelativeError(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Compares reverse-mode gradients of `loss_fn` against central differences,
// perturbing each parameter coordinate by +-step. At most `max_coords`
// coordinates per parameter are probed (evenly strided).
template <typename T>
GradCheckResult CheckGradients(const std::function<Var<T>(Tape<T>&)>& loss_fn,
                               const ParameterList<T>& params, double step,
                               int max_coords = 64) {
  for (auto* p : params) p->ZeroGrad();
  {
    Tape<T> tape;
    tape.Backward(loss_fn(tape));
    tape.AccumulateParamGrads();
  }
  auto eval = [&] {
    Tape<T> tape(false);
    return static_cast<double>(loss_fn(tape).value()[0]);
  };
  GradCheckResult r;
  for (auto* p : params) {
    const std::size_t n = p->value.size();
    const std::size_t stride = std::max<std::size_t>(1, n / std::max(1, max_coords));
    for (std::size_t i = 0; i < n; i += stride) {
      const T saved = p->value[i];
      p->value[i] = static_cast<T>(saved + step);
      const T up = p->value[i];
      const double f_plus = eval();
      p->value[i] = static_cast<T>(saved - step);
      const T down = p->value[i];
      const double f_minus = eval();
      p->value[i] = saved;
      // divide by the step actually taken after rounding to T
      const double numeric = (f_plus - f_minus) / (static_cast<double>(up) - down);
      const double err = GradRelativeError(p->grad[i], numeric);
      ++r.coordinates;
      if (err >= r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

// Same check for a non-scalar op: the scalar is <op(x), weights>. The
// reverse pass sees the weights as the upstream gradient; the numeric side
// takes the dot product in 64 bit so only the op's own rounding is measured.
template <typename T>
GradCheckResult CheckProjectedGradients(const std::function<Var<T>(Tape<T>&)>& op_fn,
                                        const Tensor<T>& weights, const ParameterList<T>& params,
                                        double step, int max_coords = 64) {
  for (auto* p : params) p->ZeroGrad();
  {
    Tape<T> tape;
    tape.Backward(tape.Sum(tape.Mul(op_fn(tape), tape.Constant(weights))));
    tape.AccumulateParamGrads();
  }
  auto eval = [&] {
    Tape<T> tape(false);
    const Tensor<T>& out = op_fn(tape).value();
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      s += static_cast<double>(out[i]) * static_cast<double>(weights[i]);
    }
    return s;
  };
  GradCheckResult r;
  for (auto* p : params) {
    const std::size_t n = p->value.size();
    const std::size_t stride = std::max<std::size_t>(1, n / std::max(1, max_coords));
    for (std::size_t i = 0; i < n; i += stride) {
      const T saved = p->value[i];
      p->value[i] = static_cast<T>(saved + step);
      const T up = p->value[i];
      const double f_plus = eval();
      p->value[i] = static_cast<T>(saved - step);
      const T down = p->value[i];
      const double f_minus = eval();
      p->value[i] = saved;
      const double numeric = (f_plus - f_minus) / (static_cast<double>(up) - down);
      const double err = GradRelativeError(p->grad[i], numeric);
      ++r.coordinates;
      if (err >= r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

}  // namespace sens::oracle

#endif  // SENS_ORACLES_GRADCHECK_H_
