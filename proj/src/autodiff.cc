#include "sens/autodiff.h"

#include <cmath>
#include <memory>
#include <string>

#include "sens/kernels.h"
#include "sens/rnnt_lattice.h"

namespace sens {
namespace {

template <typename T>
T SigmoidScalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void AddInto(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

void RequireSameShape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + ShapeString(a) +
                         " vs " + ShapeString(b));
  }
}

}  // namespace

template <typename T>
Tensor<T> UniformInit(Shape shape, int fan_in, CounterRng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = static_cast<T>(rng.Uniform(-bound, bound));
  return t;
}

// ---------------------------------------------------------------------------
// bookkeeping

template <typename T>
bool Tape<T>::Requires(std::initializer_list<Var<T>> inputs) const {
  if (!grad_enabled_) return false;
  for (const auto& v : inputs) {
    if (nodes_[v.id()].requires_grad) return true;
  }
  return false;
}

template <typename T>
Var<T> Tape<T>::Push(const char* op, Tensor<T> value, bool requires_grad,
                     BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Tape<T>::GradOf(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::CheckTape(Var<T> v) const {
  if (v.tape() != this) throw StateError("variable belongs to a different tape");
}

template <typename T>
Var<T> Tape<T>::Constant(Tensor<T> value) {
  return Push("constant", std::move(value), false, nullptr);
}

template <typename T>
Var<T> Tape<T>::Input(Tensor<T> value, bool requires_grad) {
  return Push("input", std::move(value), requires_grad, nullptr);
}

template <typename T>
Var<T> Tape<T>::Param(Parameter<T>& p) {
  // One leaf per parameter per tape.
  auto it = param_ids_.find(&p);
  if (it != param_ids_.end()) return Var<T>(this, it->second);
  Var<T> v = Push("param", p.value, true, nullptr);
  nodes_[v.id()].param = &p;
  param_ids_.emplace(&p, v.id());
  return v;
}

// ---------------------------------------------------------------------------
// linear algebra

template <typename T>
Var<T> Tape<T>::MatMul(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ: " +
                         ShapeString(av.shape()) + " x " + ShapeString(bv.shape()));
  }
  const int m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<T> out({m, n});
  kernels::MatMul<T>(av.values(), bv.values(), out.values(), m, k, n);
  const std::size_t ai = a.id(), bi = b.id();
  return Push("matmul", std::move(out), Requires({a, b}),
              [ai, bi, m, k, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                if (t.nodes_[ai].requires_grad) {
                  kernels::MatMulNT<T>(dy.values(), t.value(bi).values(),
                                       t.GradOf(ai).values(), m, n, k, true);
                }
                if (t.nodes_[bi].requires_grad) {
                  kernels::MatMulTN<T>(t.value(ai).values(), dy.values(),
                                       t.GradOf(bi).values(), m, k, n, true);
                }
              });
}

template <typename T>
Var<T> Tape<T>::MatMulNT(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ: " +
                         ShapeString(av.shape()) + " x " +
                         ShapeString(bv.shape()) + "^T");
  }
  const int m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor<T> out({m, n});
  kernels::MatMulNT<T>(av.values(), bv.values(), out.values(), m, k, n);
  const std::size_t ai = a.id(), bi = b.id();
  return Push("matmul_nt", std::move(out), Requires({a, b}),
              [ai, bi, m, k, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                if (t.nodes_[ai].requires_grad) {
                  kernels::MatMul<T>(dy.values(), t.value(bi).values(),
                                     t.GradOf(ai).values(), m, n, k, true);
                }
                if (t.nodes_[bi].requires_grad) {
                  kernels::MatMulTN<T>(dy.values(), t.value(ai).values(),
                                       t.GradOf(bi).values(), m, n, k, true);
                }
              });
}

template <typename T>
Var<T> Tape<T>::Transpose(Var<T> a) {
  const Tensor<T>& av = a.value();
  const int m = av.rows(), n = av.cols();
  Tensor<T> out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = av.at(i, j);
  const std::size_t ai = a.id();
  return Push("transpose", std::move(out), Requires({a}),
              [ai, m, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                Tensor<T>& da = t.GradOf(ai);
                for (int i = 0; i < m; ++i)
                  for (int j = 0; j < n; ++j) da.at(i, j) += dy.at(j, i);
              });
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
Var<T> Tape<T>::Add(Var<T> a, Var<T> b) {
  RequireSameShape("add", a.shape(), b.shape());
  Tensor<T> out = a.value();
  AddInto(out, b.value());
  const std::size_t ai = a.id(), bi = b.id();
  return Push("add", std::move(out), Requires({a, b}), [ai, bi](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    if (t.nodes_[ai].requires_grad) AddInto(t.GradOf(ai), dy);
    if (t.nodes_[bi].requires_grad) AddInto(t.GradOf(bi), dy);
  });
}

template <typename T>
Var<T> Tape<T>::Sub(Var<T> a, Var<T> b) {
  RequireSameShape("sub", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return Push("sub", std::move(out), Requires({a, b}), [ai, bi](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    if (t.nodes_[ai].requires_grad) AddInto(t.GradOf(ai), dy);
    if (t.nodes_[bi].requires_grad) {
      Tensor<T>& db = t.GradOf(bi);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
    }
  });
}

template <typename T>
Var<T> Tape<T>::Mul(Var<T> a, Var<T> b) {
  RequireSameShape("mul", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return Push("mul", std::move(out), Requires({a, b}), [ai, bi](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    if (t.nodes_[ai].requires_grad) {
      Tensor<T>& da = t.GradOf(ai);
      const Tensor<T>& bv = t.value(bi);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv[i];
    }
    if (t.nodes_[bi].requires_grad) {
      Tensor<T>& db = t.GradOf(bi);
      const Tensor<T>& av = t.value(ai);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
    }
  });
}

template <typename T>
Var<T> Tape<T>::Scale(Var<T> a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= s;
  const std::size_t ai = a.id();
  return Push("scale", std::move(out), Requires({a}), [ai, s](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    Tensor<T>& da = t.GradOf(ai);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += s * dy[i];
  });
}

template <typename T>
Var<T> Tape<T>::AddRowBroadcast(Var<T> a, Var<T> row) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& rv = row.value();
  if (rv.size() != static_cast<std::size_t>(av.cols())) {
    throw DimensionError("add_row: row " + ShapeString(rv.shape()) +
                         " does not broadcast over " + ShapeString(av.shape()));
  }
  const int m = av.rows(), n = av.cols();
  Tensor<T> out = av;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) += rv[j];
  const std::size_t ai = a.id(), ri = row.id();
  return Push("add_row", std::move(out), Requires({a, row}),
              [ai, ri, m, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                if (t.nodes_[ai].requires_grad) AddInto(t.GradOf(ai), dy);
                if (t.nodes_[ri].requires_grad) {
                  Tensor<T>& dr = t.GradOf(ri);
                  for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) dr[j] += dy.at(i, j);
                }
              });
}

template <typename T>
Var<T> Tape<T>::Sigmoid(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = SigmoidScalar(v);
  const std::size_t ai = a.id();
  return Push("sigmoid", std::move(out), Requires({a}), [ai](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    const Tensor<T>& y = t.value(self);
    Tensor<T>& da = t.GradOf(ai);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> Tape<T>::Tanh(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = std::tanh(v);
  const std::size_t ai = a.id();
  return Push("tanh", std::move(out), Requires({a}), [ai](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    const Tensor<T>& y = t.value(self);
    Tensor<T>& da = t.GradOf(ai);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var<T> Tape<T>::Swish(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = v * SigmoidScalar(v);
  const std::size_t ai = a.id();
  return Push("swish", std::move(out), Requires({a}), [ai](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    const Tensor<T>& x = t.value(ai);
    Tensor<T>& da = t.GradOf(ai);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const T s = SigmoidScalar(x[i]);
      da[i] += dy[i] * (s + x[i] * s * (T(1) - s));
    }
  });
}

template <typename T>
Var<T> Tape<T>::Relu(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = v > T(0) ? v : T(0);
  const std::size_t ai = a.id();
  return Push("relu", std::move(out), Requires({a}), [ai](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    const Tensor<T>& x = t.value(ai);
    Tensor<T>& da = t.GradOf(ai);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (x[i] > T(0)) da[i] += dy[i];
    }
  });
}

template <typename T>
Var<T> Tape<T>::Glu(Var<T> a) {
  const Tensor<T>& av = a.value();
  if (av.cols() % 2 != 0) {
    throw DimensionError("glu: feature width must be even, got " +
                         ShapeString(av.shape()));
  }
  const int m = av.rows(), n = av.cols() / 2;
  Tensor<T> out({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.at(i, j) = av.at(i, j) * SigmoidScalar(av.at(i, j + n));
  const std::size_t ai = a.id();
  return Push("glu", std::move(out), Requires({a}), [ai, m, n](Tape& t, std::size_t self) {
    const Tensor<T>& dy = t.OutGrad(self);
    const Tensor<T>& x = t.value(ai);
    Tensor<T>& da = t.GradOf(ai);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        const T s = SigmoidScalar(x.at(i, j + n));
        da.at(i, j) += dy.at(i, j) * s;
        da.at(i, j + n) += dy.at(i, j) * x.at(i, j) * s * (T(1) - s);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// normalization / probabilities

template <typename T>
Var<T> Tape<T>::LayerNorm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  const Tensor<T>& xv = x.value();
  const int m = xv.rows(), n = xv.cols();
  if (gamma.value().size() != static_cast<std::size_t>(n) ||
      beta.value().size() != static_cast<std::size_t>(n)) {
    throw DimensionError("layer_norm: affine parameters do not match " +
                         ShapeString(xv.shape()));
  }
  Tensor<T> out({m, n});
  auto stats = std::make_shared<std::vector<T>>(2 * static_cast<std::size_t>(m));
  std::span<T> mean(stats->data(), m), rstd(stats->data() + m, m);
  kernels::LayerNormRows<T>(xv.values(), gamma.value().values(), beta.value().values(),
                            out.values(), mean, rstd, m, n, eps);
  const std::size_t xi = x.id(), gi = gamma.id(), bi = beta.id();
  return Push("layer_norm", std::move(out), Requires({x, gamma, beta}),
              [xi, gi, bi, m, n, stats](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                const Tensor<T>& xv = t.value(xi);
                const Tensor<T>& g = t.value(gi);
                const T* mean = stats->data();
                const T* rstd = stats->data() + m;
                const bool need_x = t.nodes_[xi].requires_grad;
                const bool need_g = t.nodes_[gi].requires_grad;
                const bool need_b = t.nodes_[bi].requires_grad;
                Tensor<T>* dx = need_x ? &t.GradOf(xi) : nullptr;
                Tensor<T>* dg = need_g ? &t.GradOf(gi) : nullptr;
                Tensor<T>* db = need_b ? &t.GradOf(bi) : nullptr;
                std::vector<T> xhat(n), dxhat(n);
                for (int i = 0; i < m; ++i) {
                  T sum_d = 0, sum_dx = 0;
                  for (int j = 0; j < n; ++j) {
                    xhat[j] = (xv.at(i, j) - mean[i]) * rstd[i];
                    dxhat[j] = dy.at(i, j) * g[j];
                    sum_d += dxhat[j];
                    sum_dx += dxhat[j] * xhat[j];
                    if (dg) (*dg)[j] += dy.at(i, j) * xhat[j];
                    if (db) (*db)[j] += dy.at(i, j);
                  }
                  if (dx) {
                    const T inv_n = T(1) / T(n);
                    for (int j = 0; j < n; ++j) {
                      dx->at(i, j) += rstd[i] * (dxhat[j] - sum_d * inv_n -
                                                 xhat[j] * sum_dx * inv_n);
                    }
                  }
                }
              });
}

template <typename T>
Var<T> Tape<T>::MaskedSoftmax(Var<T> scores, std::span<const uint8_t> mask) {
  const Tensor<T>& sv = scores.value();
  const int m = sv.rows(), n = sv.cols();
  std::vector<uint8_t> saved_mask(mask.begin(), mask.end());
  if (!mask.empty()) {
    const bool broadcast = mask.size() == static_cast<std::size_t>(n);
    if (!broadcast && mask.size() != static_cast<std::size_t>(m) * n) {
      throw DimensionError("masked_softmax: mask of " + std::to_string(mask.size()) +
                           " entries does not fit scores " + ShapeString(sv.shape()));
    }
    const int mask_rows = broadcast ? 1 : m;
    for (int r = 0; r < mask_rows; ++r) {
      bool any = false;
      for (int c = 0; c < n; ++c) any = any || mask[static_cast<std::size_t>(r) * n + c];
      if (!any) {
        throw ParameterError("masked_softmax: mask row " + std::to_string(r) +
                             " has no attendable position");
      }
    }
  }
  Tensor<T> out({m, n});
  kernels::SoftmaxRows<T>(sv.values(), mask, out.values(), m, n);
  const std::size_t si = scores.id();
  return Push("masked_softmax", std::move(out), Requires({scores}),
              [si, m, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                const Tensor<T>& y = t.value(self);
                Tensor<T>& ds = t.GradOf(si);
                for (int i = 0; i < m; ++i) {
                  T dot = 0;
                  for (int j = 0; j < n; ++j) dot += dy.at(i, j) * y.at(i, j);
                  for (int j = 0; j < n; ++j)
                    ds.at(i, j) += y.at(i, j) * (dy.at(i, j) - dot);
                }
              });
}

template <typename T>
Var<T> Tape<T>::LogSoftmax(Var<T> x) {
  const Tensor<T>& xv = x.value();
  const int m = xv.rows(), n = xv.cols();
  Tensor<T> out({m, n});
  kernels::LogSoftmaxRows<T>(xv.values(), out.values(), m, n);
  if (xv.rank() != 2) out = out.Reshaped(xv.shape());
  const std::size_t xi = x.id();
  return Push("log_softmax", std::move(out), Requires({x}),
              [xi, m, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                const Tensor<T>& y = t.value(self);
                Tensor<T>& dx = t.GradOf(xi);
                for (int i = 0; i < m; ++i) {
                  T sum = 0;
                  for (int j = 0; j < n; ++j) sum += dy.at(i, j);
                  for (int j = 0; j < n; ++j)
                    dx.at(i, j) += dy.at(i, j) - std::exp(y.at(i, j)) * sum;
                }
              });
}

// ---------------------------------------------------------------------------
// structure

template <typename T>
Var<T> Tape<T>::ConcatCols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const int m = parts[0].rows();
  int n = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + ShapeString(parts[0].shape()) +
                           " vs " + ShapeString(p.shape()));
    }
    widths.push_back(p.cols());
    n += p.cols();
  }
  Tensor<T> out({m, n});
  int off = 0;
  for (const auto& p : parts) {
    const Tensor<T>& pv = p.value();
    for (int i = 0; i < m; ++i)
      std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + off);
    off += pv.cols();
  }
  bool req = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    req = req || (grad_enabled_ && nodes_[p.id()].requires_grad);
    ids.push_back(p.id());
  }
  return Push("concat_cols", std::move(out), req,
              [ids, widths, m](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                int off = 0;
                for (std::size_t k = 0; k < ids.size(); ++k) {
                  if (t.nodes_[ids[k]].requires_grad) {
                    Tensor<T>& dp = t.GradOf(ids[k]);
                    for (int i = 0; i < m; ++i)
                      for (int j = 0; j < widths[k]; ++j) dp.at(i, j) += dy.at(i, off + j);
                  }
                  off += widths[k];
                }
              });
}

template <typename T>
Var<T> Tape<T>::ConcatRows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const int n = parts[0].cols();
  int m = 0;
  std::vector<int> heights;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw DimensionError("concat_rows: column mismatch " +
                           ShapeString(parts[0].shape()) + " vs " +
                           ShapeString(p.shape()));
    }
    heights.push_back(p.rows());
    m += p.rows();
  }
  std::vector<T> data;
  data.reserve(static_cast<std::size_t>(m) * n);
  bool req = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    const auto& s = p.value().storage();
    data.insert(data.end(), s.begin(), s.end());
    req = req || (grad_enabled_ && nodes_[p.id()].requires_grad);
    ids.push_back(p.id());
  }
  return Push("concat_rows", Tensor<T>({m, n}, std::move(data)), req,
              [ids, heights, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                std::size_t off = 0;
                for (std::size_t k = 0; k < ids.size(); ++k) {
                  const std::size_t len = static_cast<std::size_t>(heights[k]) * n;
                  if (t.nodes_[ids[k]].requires_grad) {
                    Tensor<T>& dp = t.GradOf(ids[k]);
                    for (std::size_t i = 0; i < len; ++i) dp[i] += dy[off + i];
                  }
                  off += len;
                }
              });
}

template <typename T>
Var<T> Tape<T>::SliceRows(Var<T> a, int begin, int end) {
  Tensor<T> out = a.value().RowSlice(begin, end);
  const int n = a.cols();
  const std::size_t ai = a.id();
  return Push("slice_rows", std::move(out), Requires({a}),
              [ai, begin, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                Tensor<T>& da = t.GradOf(ai);
                const std::size_t off = static_cast<std::size_t>(begin) * n;
                for (std::size_t i = 0; i < dy.size(); ++i) da[off + i] += dy[i];
              });
}

template <typename T>
Var<T> Tape<T>::SliceCols(Var<T> a, int begin, int end) {
  const Tensor<T>& av = a.value();
  if (begin < 0 || end > av.cols() || begin >= end) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") out of range for " +
                         ShapeString(av.shape()));
  }
  const int m = av.rows(), w = end - begin;
  Tensor<T> out({m, w});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j) out.at(i, j) = av.at(i, begin + j);
  const std::size_t ai = a.id();
  return Push("slice_cols", std::move(out), Requires({a}),
              [ai, begin, m, w](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                Tensor<T>& da = t.GradOf(ai);
                for (int i = 0; i < m; ++i)
                  for (int j = 0; j < w; ++j) da.at(i, begin + j) += dy.at(i, j);
              });
}

template <typename T>
Var<T> Tape<T>::Reshape(Var<T> a, Shape shape) {
  if (ShapeSize(shape) != a.value().size()) {
    throw DimensionError("reshape: " + ShapeString(a.shape()) + " -> " +
                         ShapeString(shape));
  }
  Tensor<T> out = a.value().Reshaped(std::move(shape));
  const std::size_t ai = a.id();
  return Push("reshape", std::move(out), Requires({a}), [ai](Tape& t, std::size_t self) {
    AddInto(t.GradOf(ai), t.OutGrad(self));
  });
}

template <typename T>
Var<T> Tape<T>::BroadcastRows(Var<T> row, int count) {
  const Tensor<T>& rv = row.value();
  if (count < 1) throw DimensionError("broadcast_rows: count must be positive");
  const int n = static_cast<int>(rv.size());
  Tensor<T> out({count, n});
  for (int i = 0; i < count; ++i) std::copy(rv.data(), rv.data() + n, out.row(i).begin());
  const std::size_t ri = row.id();
  return Push("broadcast_rows", std::move(out), Requires({row}),
              [ri, count, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                Tensor<T>& dr = t.GradOf(ri);
                for (int i = 0; i < count; ++i)
                  for (int j = 0; j < n; ++j) dr[j] += dy.at(i, j);
              });
}

template <typename T>
Var<T> Tape<T>::OuterAddRows(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("outer_add_rows: width mismatch " + ShapeString(av.shape()) +
                         " vs " + ShapeString(bv.shape()));
  }
  const int ta = av.rows(), tb = bv.rows(), n = av.cols();
  Tensor<T> out({ta * tb, n});
  for (int i = 0; i < ta; ++i)
    for (int u = 0; u < tb; ++u)
      for (int j = 0; j < n; ++j) out.at(i * tb + u, j) = av.at(i, j) + bv.at(u, j);
  const std::size_t ai = a.id(), bi = b.id();
  return Push("outer_add_rows", std::move(out), Requires({a, b}),
              [ai, bi, ta, tb, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                const bool need_a = t.nodes_[ai].requires_grad;
                const bool need_b = t.nodes_[bi].requires_grad;
                Tensor<T>* da = need_a ? &t.GradOf(ai) : nullptr;
                Tensor<T>* db = need_b ? &t.GradOf(bi) : nullptr;
                for (int i = 0; i < ta; ++i)
                  for (int u = 0; u < tb; ++u)
                    for (int j = 0; j < n; ++j) {
                      const T g = dy.at(i * tb + u, j);
                      if (da) da->at(i, j) += g;
                      if (db) db->at(u, j) += g;
                    }
              });
}

template <typename T>
Var<T> Tape<T>::Embedding(Var<T> table, std::span<const int> ids) {
  const Tensor<T>& tv = table.value();
  const int v = tv.rows(), n = tv.cols();
  if (ids.empty()) throw DimensionError("embedding: no ids");
  Tensor<T> out({static_cast<int>(ids.size()), n});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= v) {
      throw DimensionError("embedding: id " + std::to_string(ids[i]) +
                           " outside table of " + std::to_string(v) + " rows");
    }
    std::copy(tv.row(ids[i]).begin(), tv.row(ids[i]).end(), out.row(i).begin());
  }
  std::vector<int> saved(ids.begin(), ids.end());
  const std::size_t ti = table.id();
  return Push("embedding", std::move(out), Requires({table}),
              [ti, saved, n](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                Tensor<T>& dt = t.GradOf(ti);
                for (std::size_t i = 0; i < saved.size(); ++i)
                  for (int j = 0; j < n; ++j) dt.at(saved[i], j) += dy.at(i, j);
              });
}

// ---------------------------------------------------------------------------
// convolutions

template <typename T>
Var<T> Tape<T>::DepthwiseConvCausal(Var<T> x, Var<T> w, Var<T> bias) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  const int rows = xv.rows(), d = xv.cols(), k = wv.rows();
  if (wv.cols() != d || bias.value().size() != static_cast<std::size_t>(d)) {
    throw DimensionError("depthwise_conv: kernel " + ShapeString(wv.shape()) +
                         " does not match input " + ShapeString(xv.shape()));
  }
  const Tensor<T>& bv = bias.value();
  Tensor<T> out({rows, d});
  for (int r = 0; r < rows; ++r) {
    T* yr = out.row(r).data();
    for (int c = 0; c < d; ++c) yr[c] = bv[c];
    for (int j = 0; j < k; ++j) {
      const int s = r - (k - 1) + j;
      if (s < 0) continue;
      const T* xr = xv.row(s).data();
      const T* wr = wv.row(j).data();
      for (int c = 0; c < d; ++c) yr[c] += wr[c] * xr[c];
    }
  }
  const std::size_t xi = x.id(), wi = w.id(), bi = bias.id();
  return Push("depthwise_conv", std::move(out), Requires({x, w, bias}),
              [xi, wi, bi, rows, d, k](Tape& t, std::size_t self) {
                const Tensor<T>& dy = t.OutGrad(self);
                const Tensor<T>& xv = t.value(xi);
                const Tensor<T>& wv = t.value(wi);
                Tensor<T>* dx = t.nodes_[xi].requires_grad ? &t.GradOf(xi) : nullptr;
                Tensor<T>* dw = t.nodes_[wi].requires_grad ? &t.GradOf(wi) : nullptr;
                Tensor<T>* db = t.nodes_[bi].requires_grad ? &t.GradOf(bi) : nullptr;
                for (int r = 0; r < rows; ++r) {
                  for (int c = 0; c < d; ++c) {
                    const T g = dy.at(r, c);
                    if (db) (*db)[c] += g;
                    for (int j = 0; j < k; ++j) {
                      const int s = r - (k - 1) + j;
                      if (s < 0) continue;
                      if (dx) dx->at(s, c) += g * wv.at(j, c);
                      if (dw) dw->at(j, c) += g * xv.at(s, c);
                    }
                  }
                }
              });
}

template <typename T>
Var<T> Tape<T>::StridedConv2(Var<T> x, Var<T> w, Var<T> bias) {
  const int rows = x.rows(), c = x.cols();
  if (rows % 2 != 0) {
    throw DimensionError("strided_conv: row count must be even, got " +
                         ShapeString(x.shape()));
  }
  Var<T> paired = Reshape(x, {rows / 2, 2 * c});
  return AddRowBroadcast(MatMul(paired, w), bias);
}

// ---------------------------------------------------------------------------
// reductions / losses

template <typename T>
Var<T> Tape<T>::Sum(Var<T> a) {
  T s = 0;
  for (T v : a.value().values()) s += v;
  const std::size_t ai = a.id();
  return Push("sum", Tensor<T>::Scalar(s), Requires({a}), [ai](Tape& t, std::size_t self) {
    const T g = t.OutGrad(self)[0];
    for (auto& v : t.GradOf(ai).values()) v += g;
  });
}

template <typename T>
Var<T> Tape<T>::Mean(Var<T> a) {
  const std::size_t n = a.value().size();
  return Scale(Sum(a), T(1) / T(n));
}

template <typename T>
Var<T> Tape<T>::MeanSquaredError(Var<T> a, Var<T> b) {
  RequireSameShape("mse", a.shape(), b.shape());
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const std::size_t n = av.size();
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  const std::size_t ai = a.id(), bi = b.id();
  return Push("mse", Tensor<T>::Scalar(s / T(n)), Requires({a, b}),
              [ai, bi, n](Tape& t, std::size_t self) {
                const T g = t.OutGrad(self)[0] * T(2) / T(n);
                const Tensor<T>& av = t.value(ai);
                const Tensor<T>& bv = t.value(bi);
                if (t.nodes_[ai].requires_grad) {
                  Tensor<T>& da = t.GradOf(ai);
                  for (std::size_t i = 0; i < n; ++i) da[i] += g * (av[i] - bv[i]);
                }
                if (t.nodes_[bi].requires_grad) {
                  Tensor<T>& db = t.GradOf(bi);
                  for (std::size_t i = 0; i < n; ++i) db[i] -= g * (av[i] - bv[i]);
                }
              });
}

template <typename T>
Var<T> Tape<T>::RnntLoss(Var<T> log_probs, int frames, std::span<const int> targets,
                         double fastemit_lambda, int blank) {
  const Tensor<T>& lp = log_probs.value();
  const int vocab = lp.cols();
  RnntLossResult r = RnntLossWithGrad<T>(lp.values(), frames, targets, vocab,
                                         fastemit_lambda, blank);
  auto grad = std::make_shared<std::vector<double>>(std::move(r.grad));
  const std::size_t li = log_probs.id();
  return Push("rnnt_loss", Tensor<T>::Scalar(static_cast<T>(r.loss)),
              Requires({log_probs}), [li, grad](Tape& t, std::size_t self) {
                const double g = static_cast<double>(t.OutGrad(self)[0]);
                Tensor<T>& dl = t.GradOf(li);
                for (std::size_t i = 0; i < grad->size(); ++i)
                  dl[i] += static_cast<T>(g * (*grad)[i]);
              });
}

// ---------------------------------------------------------------------------
// differentiation

template <typename T>
void Tape<T>::Backward(Var<T> loss) {
  CheckTape(loss);
  if (!grad_enabled_) throw StateError("backward on a tape with grad disabled");
  const Tensor<T>& lv = loss.value();
  if (lv.size() != 1) {
    throw DimensionError("backward: loss must be a scalar, got shape " +
                         ShapeString(lv.shape()));
  }
  if (!nodes_[loss.id()].requires_grad) return;
  GradOf(loss.id()).Fill(T(1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

template <typename T>
const Tensor<T>* Tape<T>::Grad(Var<T> v) const {
  const Node& n = nodes_.at(v.id());
  return n.grad.empty() ? nullptr : &n.grad;
}

template <typename T>
void Tape<T>::AccumulateParamGrads() {
  for (Node& n : nodes_) {
    if (n.param && !n.grad.empty()) AddInto(n.param->grad, n.grad);
  }
}

template <typename T>
void Tape<T>::AccumulateParamGrads(const ParameterList<T>& params,
                                   std::vector<Tensor<T>>& grads) const {
  grads.resize(params.size());
  for (const Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (params[k] != n.param) continue;
      if (grads[k].empty()) grads[k] = Tensor<T>(n.grad.shape());
      AddInto(grads[k], n.grad);
      break;
    }
  }
}

template <typename T>
std::optional<std::pair<std::size_t, std::string>> Tape<T>::FirstNonFinite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].value.AllFinite()) {
      std::string name = nodes_[i].op;
      if (nodes_[i].param) name += " " + nodes_[i].param->name;
      return std::make_pair(i, name);
    }
  }
  return std::nullopt;
}

template class Tape<float>;
template class Tape<double>;
template Tensor<float> UniformInit<float>(Shape, int, CounterRng&);
template Tensor<double> UniformInit<double>(Shape, int, CounterRng&);

}  // namespace sens
