#ifndef SENS_TENSOR_H_
#define SENS_TENSOR_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "sens/error.h"

namespace sens {

using Shape = std::vector<int>;

std::string ShapeString(const Shape& shape);
std::size_t ShapeSize(const Shape& shape);

// Dense row-major tensor. Dimensions are strictly positive; a
// default-constructed tensor is the only empty one (rank 0, size 0).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    CheckShape();
    data_.assign(ShapeSize(shape_), fill);
  }
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    CheckShape();
    if (data_.size() != ShapeSize(shape_)) {
      throw DimensionError("tensor data length " +
                           std::to_string(data_.size()) +
                           " does not match shape " + ShapeString(shape_));
    }
  }

  static Tensor Matrix(std::initializer_list<std::initializer_list<T>> rows) {
    std::vector<T> data;
    int cols = -1;
    for (const auto& r : rows) {
      if (cols >= 0 && static_cast<int>(r.size()) != cols) {
        throw DimensionError("ragged matrix literal");
      }
      cols = static_cast<int>(r.size());
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({static_cast<int>(rows.size()), cols}, std::move(data));
  }
  static Tensor Row(std::vector<T> values) {
    const int n = static_cast<int>(values.size());
    return Tensor({1, n}, std::move(values));
  }
  static Tensor Scalar(T v) { return Tensor({1, 1}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(i); }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  // Matrix view: rank-1 tensors are a single row, higher ranks fold all
  // leading dimensions into rows.
  int rows() const {
    if (shape_.empty()) return 0;
    return static_cast<int>(data_.size() / static_cast<std::size_t>(shape_.back()));
  }
  int cols() const { return shape_.empty() ? 0 : shape_.back(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  const T& at(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols() + c];
  }
  std::span<T> row(int r) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(r) * cols(), cols());
  }
  std::span<const T> row(int r) const {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(r) * cols(),
                                             cols());
  }

  void Fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool AllFinite() const {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
  Tensor Reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  template <typename U>
  Tensor<U> Cast() const {
    if (empty()) return Tensor<U>();
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  // Rows [begin, end) as a new tensor.
  Tensor RowSlice(int begin, int end) const {
    if (begin < 0 || end > rows() || begin >= end) {
      throw DimensionError("row slice [" + std::to_string(begin) + "," +
                           std::to_string(end) + ") out of range for shape " +
                           ShapeString(shape_));
    }
    const std::size_t c = cols();
    std::vector<T> out(data_.begin() + begin * c, data_.begin() + end * c);
    return Tensor({end - begin, cols()}, std::move(out));
  }

  // Appends the rows of `other` (same column count). Works on an empty tensor.
  void AppendRows(const Tensor& other) {
    if (other.empty()) return;
    if (empty()) {
      *this = Tensor({other.rows(), other.cols()}, other.storage());
      return;
    }
    if (other.cols() != cols()) {
      throw DimensionError("append rows: column mismatch " + ShapeString(shape_) +
                           " vs " + ShapeString(other.shape()));
    }
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    shape_ = {rows(), cols()};
  }

  // Keeps only the last `n` rows (all rows if fewer exist).
  void KeepLastRows(int n) {
    if (empty() || rows() <= n) return;
    if (n <= 0) {
      *this = Tensor();
      return;
    }
    const std::size_t c = cols();
    data_.erase(data_.begin(), data_.end() - static_cast<std::ptrdiff_t>(n * c));
    shape_ = {n, cols()};
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void CheckShape() const {
    for (int d : shape_) {
      if (d <= 0) {
        throw DimensionError("tensor dimensions must be positive, got " +
                             ShapeString(shape_));
      }
    }
    if (shape_.empty()) throw DimensionError("tensor rank must be >= 1");
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace sens

#endif  // SENS_TENSOR_H_
