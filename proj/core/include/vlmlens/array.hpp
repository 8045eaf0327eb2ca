#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vlmlens/errors.hpp"

namespace vlmlens {

// Row-major dense tensor of doubles. The only tensor type in the project; all
// model math, probes, and metrics flow through these and the free-function
// kernels below. Values are expected finite; module boundaries call
// assert_finite to turn silent NaN propagation into a hard error.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> shape);
  DenseArray(std::vector<std::size_t> shape, std::vector<double> values);

  static DenseArray zeros(std::vector<std::size_t> shape) { return DenseArray(std::move(shape)); }
  static DenseArray full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // 2-D conveniences; throw on rank mismatch.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  bool same_shape(const DenseArray& other) const { return shape_ == other.shape_; }

  // Throws ErrorKind::contract naming `label` if any element is NaN/inf.
  void assert_finite(const std::string& label) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// ---- kernels ----------------------------------------------------------------
// Shared verbatim by the eager path and the gradient tape, so recorded forward
// passes are bit-identical to plain ones.

// (M,K) x (K,N) -> (M,N)
DenseArray matmul(const DenseArray& a, const DenseArray& b);

// 2-D transpose.
DenseArray transpose(const DenseArray& a);

// Elementwise add for equal shapes, plus (N,D) + (D) row broadcast.
DenseArray add(const DenseArray& a, const DenseArray& b);

// Elementwise multiply, equal shapes only.
DenseArray mul(const DenseArray& a, const DenseArray& b);

DenseArray scale(const DenseArray& a, double c);

// Softmax over the last axis, numerically stabilized by row-max subtraction.
DenseArray softmax(const DenseArray& a);

// Normalizes the last axis to zero mean / unit variance (epsilon inside the
// sqrt), then applies elementwise gain and bias of length = last axis.
DenseArray layer_norm(const DenseArray& x, const DenseArray& gain,
                      const DenseArray& bias, double eps = 1e-5);

// Exact GELU: 0.5 * x * (1 + erf(x / sqrt(2))).
DenseArray gelu(const DenseArray& x);

// Sum of all elements, returned as shape {1} (tape-friendly scalar).
DenseArray sum(const DenseArray& a);

double sum_value(const DenseArray& a);

// Index of the maximum element; ties resolve to the lowest index. n > 0.
std::size_t argmax(const double* values, std::size_t n);

}  // namespace vlmlens
