#include "sens/layers.h"

#include <cmath>

namespace sens {

template <typename T>
Linear<T>::Linear(const std::string& name, int in_dim, int out_dim, CounterRng& rng)
    : weight(name + ".weight", UniformInit<T>({in_dim, out_dim}, in_dim, rng)),
      bias(name + ".bias", Tensor<T>({1, out_dim})) {}

template <typename T>
Var<T> Linear<T>::Forward(Tape<T>& tape, Var<T> x) {
  return tape.AddRowBroadcast(tape.MatMul(x, tape.Param(weight)), tape.Param(bias));
}

template <typename T>
void Linear<T>::Collect(ParameterList<T>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

template <typename T>
LayerNormModule<T>::LayerNormModule(const std::string& name, int dim)
    : gamma(name + ".gamma", Tensor<T>({1, dim}, T(1))),
      beta(name + ".beta", Tensor<T>({1, dim})) {}

template <typename T>
Var<T> LayerNormModule<T>::Forward(Tape<T>& tape, Var<T> x) {
  return tape.LayerNorm(x, tape.Param(gamma), tape.Param(beta));
}

template <typename T>
void LayerNormModule<T>::Collect(ParameterList<T>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

template <typename T>
PositionwiseFfn<T>::PositionwiseFfn(const std::string& name, int dim, int hidden,
                                    CounterRng& rng)
    : up(name + ".up", dim, hidden, rng), down(name + ".down", hidden, dim, rng) {}

template <typename T>
Var<T> PositionwiseFfn<T>::Forward(Tape<T>& tape, Var<T> x) {
  return down.Forward(tape, tape.Swish(up.Forward(tape, x)));
}

template <typename T>
void PositionwiseFfn<T>::Collect(ParameterList<T>& out) {
  up.Collect(out);
  down.Collect(out);
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(const std::string& name, int dim,
                                          int num_heads, CounterRng& rng)
    : wq(name + ".query", dim, dim, rng),
      wk(name + ".key", dim, dim, rng),
      wv(name + ".value", dim, dim, rng),
      wo(name + ".out", dim, dim, rng),
      num_heads_(num_heads) {
  if (num_heads < 1 || dim % num_heads != 0) {
    throw ParameterError("attention: dim " + std::to_string(dim) +
                         " not divisible by " + std::to_string(num_heads) + " heads");
  }
}

template <typename T>
Var<T> MultiHeadAttention<T>::Attend(Tape<T>& tape, Var<T> queries, Var<T> keys,
                                     Var<T> values, std::span<const uint8_t> mask) {
  const int dim = queries.cols();
  const int head_dim = dim / num_heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  std::vector<Var<T>> heads;
  heads.reserve(num_heads_);
  for (int h = 0; h < num_heads_; ++h) {
    const int b = h * head_dim, e = b + head_dim;
    Var<T> qh = num_heads_ == 1 ? queries : tape.SliceCols(queries, b, e);
    Var<T> kh = num_heads_ == 1 ? keys : tape.SliceCols(keys, b, e);
    Var<T> vh = num_heads_ == 1 ? values : tape.SliceCols(values, b, e);
    Var<T> scores = tape.Scale(tape.MatMulNT(qh, kh), scale);
    heads.push_back(tape.MatMul(tape.MaskedSoftmax(scores, mask), vh));
  }
  Var<T> merged = num_heads_ == 1 ? heads[0] : tape.ConcatCols(heads);
  return wo.Forward(tape, merged);
}

template <typename T>
Var<T> MultiHeadAttention<T>::Forward(Tape<T>& tape, Var<T> query_in, Var<T> memory,
                                      std::span<const uint8_t> mask) {
  return Attend(tape, Queries(tape, query_in), Keys(tape, memory),
                Values(tape, memory), mask);
}

template <typename T>
void MultiHeadAttention<T>::Collect(ParameterList<T>& out) {
  wq.Collect(out);
  wk.Collect(out);
  wv.Collect(out);
  wo.Collect(out);
}

template class Linear<float>;
template class Linear<double>;
template class LayerNormModule<float>;
template class LayerNormModule<double>;
template class PositionwiseFfn<float>;
template class PositionwiseFfn<double>;
template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;

}  // namespace sens
