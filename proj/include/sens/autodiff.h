#ifndef SENS_AUTODIFF_H_
#define SENS_AUTODIFF_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sens/rng.h"
#include "sens/tensor.h"

namespace sens {

// A trainable tensor that outlives any single tape.
template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void ZeroGrad() { grad.Fill(T(0)); }

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <typename T>
using ParameterList = std::vector<Parameter<T>*>;

// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)).
template <typename T>
Tensor<T> UniformInit(Shape shape, int fan_in, CounterRng& rng);

template <typename T>
class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid while the tape
// lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records executed operations in order; Backward() replays them in exact
// reverse order. Single-owner: never share one tape between threads.
template <typename T>
class Tape {
 public:
  // With grad disabled, nothing is marked differentiable and no backward
  // closures are kept (inference).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  const char* op_name(std::size_t id) const { return nodes_.at(id).op; }

  // ---- leaves ----
  Var<T> Constant(Tensor<T> value);
  Var<T> Input(Tensor<T> value, bool requires_grad);
  Var<T> Param(Parameter<T>& p);

  // ---- linear algebra ----
  Var<T> MatMul(Var<T> a, Var<T> b);    // [m,k] x [k,n]
  Var<T> MatMulNT(Var<T> a, Var<T> b);  // [m,k] x [n,k]^T
  Var<T> Transpose(Var<T> a);

  // ---- elementwise ----
  Var<T> Add(Var<T> a, Var<T> b);
  Var<T> Sub(Var<T> a, Var<T> b);
  Var<T> Mul(Var<T> a, Var<T> b);
  Var<T> Scale(Var<T> a, T s);
  Var<T> AddRowBroadcast(Var<T> a, Var<T> row);  // a[m,n] + row[1,n]
  Var<T> Sigmoid(Var<T> a);
  Var<T> Tanh(Var<T> a);
  Var<T> Swish(Var<T> a);
  Var<T> Relu(Var<T> a);
  Var<T> Glu(Var<T> a);  // [m,2n] -> first half * sigmoid(second half)

  // ---- normalization / probabilities ----
  Var<T> LayerNorm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));
  // `mask` has cols entries (one row broadcast) or rows*cols entries. Every
  // row needs at least one unmasked position; masked outputs are exactly 0.
  Var<T> MaskedSoftmax(Var<T> scores, std::span<const uint8_t> mask);
  Var<T> Softmax(Var<T> scores) { return MaskedSoftmax(scores, {}); }
  Var<T> LogSoftmax(Var<T> x);

  // ---- structure ----
  Var<T> ConcatCols(const std::vector<Var<T>>& parts);
  Var<T> ConcatRows(const std::vector<Var<T>>& parts);
  Var<T> SliceRows(Var<T> a, int begin, int end);
  Var<T> SliceCols(Var<T> a, int begin, int end);
  Var<T> Reshape(Var<T> a, Shape shape);
  Var<T> BroadcastRows(Var<T> row, int count);      // [1,n] -> [count,n]
  Var<T> OuterAddRows(Var<T> a, Var<T> b);          // row t*Ub+u = a[t]+b[u]
  Var<T> Embedding(Var<T> table, std::span<const int> ids);

  // ---- convolutions over time (rows) ----
  // Depthwise causal: y[t] = bias + sum_j w[j] * x[t - (K-1) + j], zero
  // before the first row. x:[T,D] w:[K,D] bias:[1,D].
  Var<T> DepthwiseConvCausal(Var<T> x, Var<T> w, Var<T> bias);
  // Kernel 2 stride 2 over rows: y[t] = [x[2t]; x[2t+1]] W + b.
  // x:[2N,C] w:[2C,O] bias:[1,O].
  Var<T> StridedConv2(Var<T> x, Var<T> w, Var<T> bias);

  // ---- reductions / losses ----
  Var<T> Sum(Var<T> a);
  Var<T> Mean(Var<T> a);
  Var<T> MeanSquaredError(Var<T> a, Var<T> b);
  // Transducer negative log-likelihood plus `fastemit_lambda` times the
  // label-only lattice term; log_probs rows are lattice nodes t*(U+1)+u.
  Var<T> RnntLoss(Var<T> log_probs, int frames, std::span<const int> targets,
                  double fastemit_lambda, int blank = 0);

  // ---- differentiation ----
  // Requires a single-element loss; fills gradients for every node that
  // depends on a differentiable leaf.
  void Backward(Var<T> loss);
  // Gradient of a node after Backward(), or nullptr if none reached it.
  const Tensor<T>* Grad(Var<T> v) const;
  // Adds every parameter leaf's gradient into Parameter::grad.
  void AccumulateParamGrads();
  // Same, but into caller-owned buffers keyed by position in `params`.
  void AccumulateParamGrads(const ParameterList<T>& params,
                            std::vector<Tensor<T>>& grads) const;

  // Index and op name of the first node with a non-finite value.
  std::optional<std::pair<std::size_t, std::string>> FirstNonFinite() const;

 private:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;
  struct Node {
    const char* op = "";
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  bool Requires(std::initializer_list<Var<T>> inputs) const;
  Var<T> Push(const char* op, Tensor<T> value, bool requires_grad,
              BackwardFn backward);
  Tensor<T>& GradOf(std::size_t id);  // allocates zeros on first use
  const Tensor<T>& OutGrad(std::size_t id) const { return nodes_[id].grad; }
  bool NeedsGrad(Var<T> v) const { return nodes_[v.id()].requires_grad; }
  void CheckTape(Var<T> v) const;

  bool grad_enabled_;
  std::deque<Node> nodes_;  // deque: value() references survive later pushes
  std::unordered_map<const Parameter<T>*, std::size_t> param_ids_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

}  // namespace sens

#endif  // SENS_AUTODIFF_H_
