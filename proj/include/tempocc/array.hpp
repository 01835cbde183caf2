#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tempocc/error.hpp"

namespace tempocc {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major block of doubles with an arbitrary-rank shape.
/// Rank-0 arrays hold a single value.
class Array {
 public:
  Array() : shape_{0}, data_{} {}
  explicit Array(Shape shape, double fill = 0.0) : shape_(std::move(shape)), data_(numel(shape_), fill) {}
  Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (numel(shape_) != data_.size())
      throw DimensionError("array of shape " + to_string(shape_) + " given " + std::to_string(data_.size()) +
                           " values");
  }

  static Array scalar(double v) { return Array(Shape{}, std::vector<double>{v}); }
  static Array matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Array({rows, cols}, fill); }
  static Array matrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> data;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Array({rows.size(), cols}, std::move(data));
  }
  static Array vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Array({n}, std::move(values));
  }
  static Array identity(std::size_t n) {
    Array a = matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
    return a;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  /// Row count of a rank-2 array.
  std::size_t rows() const { return shape_.at(0); }
  /// Column count of a rank-2 array.
  std::size_t cols() const { return shape_.at(1); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  /// Value of a single-element array.
  double item() const {
    if (data_.size() != 1) throw DimensionError("item() on array of shape " + to_string(shape_));
    return data_[0];
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Array reshaped(Shape shape) const {
    if (numel(shape) != data_.size())
      throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    return Array(std::move(shape), data_);
  }

  Array transposed() const {
    if (rank() != 2) throw DimensionError("transpose needs a rank-2 array, got " + to_string(shape_));
    Array t = matrix(cols(), rows());
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t c = 0; c < cols(); ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  Array column(std::size_t c) const {
    Array out({rows()});
    for (std::size_t r = 0; r < rows(); ++r) out[r] = (*this)(r, c);
    return out;
  }

  Array rows_at(const std::vector<std::size_t>& idx) const {
    Array out = matrix(idx.size(), cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols(); ++c) out(i, c) = (*this)(idx[i], c);
    return out;
  }

  friend bool operator==(const Array& a, const Array& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Largest absolute elementwise difference. Shapes must agree in size.
inline double max_abs_diff(const Array& a, const Array& b) {
  if (a.size() != b.size()) throw DimensionError("max_abs_diff size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Plain (non-differentiable) product of two rank-2 arrays.
inline Array matmul(const Array& a, const Array& b);

}  // namespace tempocc

#include <Eigen/Core>

namespace tempocc {

namespace detail {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

inline ConstMapMat view(const Array& a) {
  return ConstMapMat(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}
inline MapMat view(Array& a) {
  return MapMat(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}
}  // namespace detail

inline Array matmul(const Array& a, const Array& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw DimensionError("matmul of " + to_string(a.shape()) + " and " + to_string(b.shape()));
  Array out = Array::matrix(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  detail::view(out).noalias() = detail::view(a) * detail::view(b);
  return out;
}

}  // namespace tempocc
