#ifndef SENS_LAYERS_H_
#define SENS_LAYERS_H_

#include <span>
#include <string>

#include "sens/autodiff.h"

namespace sens {

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in_dim, int out_dim, CounterRng& rng);

  Var<T> Forward(Tape<T>& tape, Var<T> x);
  void Collect(ParameterList<T>& out);
  int in_dim() const { return weight.value.rows(); }
  int out_dim() const { return weight.value.cols(); }

  Parameter<T> weight;  // [in, out]
  Parameter<T> bias;    // [1, out]
};

template <typename T>
class LayerNormModule {
 public:
  LayerNormModule() = default;
  LayerNormModule(const std::string& name, int dim);

  Var<T> Forward(Tape<T>& tape, Var<T> x);
  void Collect(ParameterList<T>& out);

  Parameter<T> gamma;
  Parameter<T> beta;
};

// Linear -> swish -> Linear.
template <typename T>
class PositionwiseFfn {
 public:
  PositionwiseFfn() = default;
  PositionwiseFfn(const std::string& name, int dim, int hidden, CounterRng& rng);

  Var<T> Forward(Tape<T>& tape, Var<T> x);
  void Collect(ParameterList<T>& out);

  Linear<T> up;
  Linear<T> down;
};

// Multi-head scaled dot-product attention with separate projections so that
// callers can cache keys and values.
template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int dim, int num_heads, CounterRng& rng);

  Var<T> Queries(Tape<T>& tape, Var<T> x) { return wq.Forward(tape, x); }
  Var<T> Keys(Tape<T>& tape, Var<T> x) { return wk.Forward(tape, x); }
  Var<T> Values(Tape<T>& tape, Var<T> x) { return wv.Forward(tape, x); }

  // queries:[n,d], keys/values:[m,d]; `mask` is empty, one row of m, or n*m.
  Var<T> Attend(Tape<T>& tape, Var<T> queries, Var<T> keys, Var<T> values,
                std::span<const uint8_t> mask);
  // Projects and attends in one call (no caching).
  Var<T> Forward(Tape<T>& tape, Var<T> query_in, Var<T> memory,
                 std::span<const uint8_t> mask);
  void Collect(ParameterList<T>& out);
  int num_heads() const { return num_heads_; }

  Linear<T> wq, wk, wv, wo;

 private:
  int num_heads_ = 1;
};

}  // namespace sens

#endif  // SENS_LAYERS_H_
