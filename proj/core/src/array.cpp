#include "vlmlens/array.hpp"

#include <cmath>

namespace vlmlens {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  out += ")";
  return out;
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  require(data_.size() == shape_product(shape_), ErrorKind::dimension,
          "value count " + std::to_string(data_.size()) + " does not fill shape " +
              shape_string(shape_));
}

DenseArray DenseArray::full(std::vector<std::size_t> shape, double value) {
  DenseArray out(std::move(shape));
  for (double& v : out.data_) v = value;
  return out;
}

std::size_t DenseArray::rows() const {
  require(ndim() == 2, ErrorKind::dimension, "rows() on non-2D array " + shape_string(shape_));
  return shape_[0];
}

std::size_t DenseArray::cols() const {
  require(ndim() == 2, ErrorKind::dimension, "cols() on non-2D array " + shape_string(shape_));
  return shape_[1];
}

double& DenseArray::at(std::size_t i, std::size_t j) {
  require(ndim() == 2 && i < shape_[0] && j < shape_[1], ErrorKind::dimension,
          "at(" + std::to_string(i) + "," + std::to_string(j) + ") out of range for " +
              shape_string(shape_));
  return data_[i * shape_[1] + j];
}

double DenseArray::at(std::size_t i, std::size_t j) const {
  return const_cast<DenseArray*>(this)->at(i, j);
}

void DenseArray::assert_finite(const std::string& label) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      fail(ErrorKind::contract,
           label + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
  require(a.ndim() == 2 && b.ndim() == 2, ErrorKind::dimension, "matmul needs 2-D operands");
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  require(b.rows() == k, ErrorKind::dimension,
          "matmul inner dims differ: " + std::to_string(k) + " vs " + std::to_string(b.rows()));
  DenseArray out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  // ikj order: streams through b and out rows, good cache behavior without
  // needing an external BLAS at this problem size.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      double aik = pa[i * k + kk];
      if (aik == 0.0) continue;
      const double* brow = pb + kk * n;
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

DenseArray transpose(const DenseArray& a) {
  std::size_t m = a.rows(), n = a.cols();
  DenseArray out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

DenseArray add(const DenseArray& a, const DenseArray& b) {
  if (a.same_shape(b)) {
    DenseArray out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
  }
  // (N,D) + (D): broadcast b across rows.
  if (a.ndim() == 2 && b.ndim() == 1 && a.cols() == b.shape()[0]) {
    DenseArray out = a;
    std::size_t n = a.rows(), d = a.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += b[j];
    return out;
  }
  fail(ErrorKind::dimension, "add: incompatible shapes");
}

DenseArray mul(const DenseArray& a, const DenseArray& b) {
  require(a.same_shape(b), ErrorKind::dimension, "mul: shapes differ");
  DenseArray out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

DenseArray scale(const DenseArray& a, double c) {
  DenseArray out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

DenseArray softmax(const DenseArray& a) {
  require(a.ndim() >= 1, ErrorKind::dimension, "softmax needs at least rank 1");
  std::size_t d = a.shape().back();
  require(d > 0, ErrorKind::dimension, "softmax over empty axis");
  std::size_t rows = a.size() / d;
  DenseArray out = a;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * d;
    double mx = row[0];
    for (std::size_t j = 1; j < d; ++j)
      if (row[j] > mx) mx = row[j];
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) row[j] /= total;
  }
  return out;
}

DenseArray layer_norm(const DenseArray& x, const DenseArray& gain,
                      const DenseArray& bias, double eps) {
  require(x.ndim() >= 1, ErrorKind::dimension, "layer_norm needs at least rank 1");
  std::size_t d = x.shape().back();
  require(gain.ndim() == 1 && gain.size() == d, ErrorKind::dimension, "layer_norm gain size");
  require(bias.ndim() == 1 && bias.size() == d, ErrorKind::dimension, "layer_norm bias size");
  std::size_t rows = x.size() / d;
  DenseArray out = x;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j)
      row[j] = (row[j] - mean) * inv * gain[j] + bias[j];
  }
  return out;
}

DenseArray gelu(const DenseArray& x) {
  DenseArray out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = out[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244));
  }
  return out;
}

DenseArray sum(const DenseArray& a) {
  DenseArray out({1});
  out[0] = sum_value(a);
  return out;
}

double sum_value(const DenseArray& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i];
  return total;
}

std::size_t argmax(const double* values, std::size_t n) {
  require(n > 0, ErrorKind::empty_support, "argmax over empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace vlmlens
