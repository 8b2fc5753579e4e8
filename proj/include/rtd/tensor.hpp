#pragma once

// Dense storage. Both matrices and tensors are linearized row-major (last
// index fastest); every permutation in the library is defined against that
// order.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rtd/error.hpp"

namespace rtd {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(shape[k]);
  }
  return out + ")";
}

inline void validate_shape(const Shape& shape) {
  require(!shape.empty(), ErrorKind::ShapeMismatch, "tensor order must be >= 1");
  for (auto extent : shape)
    require(extent >= 1, ErrorKind::ShapeMismatch, "extents must be >= 1, got " + shape_string(shape));
}

class DenseTensor {
 public:
  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(element_count(shape_), 0.0);
  }

  DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    require(data_.size() == element_count(shape_), ErrorKind::ShapeMismatch,
            "data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t linear) noexcept { return data_[linear]; }
  double operator[](std::size_t linear) const noexcept { return data_[linear]; }

  std::size_t linear_index(std::span<const std::size_t> index) const {
    require(index.size() == shape_.size(), ErrorKind::ShapeMismatch, "index order mismatch");
    std::size_t linear = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
      require(index[k] < shape_[k], ErrorKind::BadIndex, "index out of range");
      linear = linear * shape_[k] + index[k];
    }
    return linear;
  }

  double at(std::span<const std::size_t> index) const { return data_[linear_index(index)]; }

  double squared_norm() const noexcept {
    double sum = 0.0;
    for (double v : data_) sum += v * v;
    return sum;
  }
  double frobenius_norm() const noexcept { return std::sqrt(squared_norm()); }

  bool all_finite() const noexcept {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline double inner_product(const DenseTensor& a, const DenseTensor& b) {
  require(a.shape() == b.shape(), ErrorKind::ShapeMismatch, "inner product of differently shaped tensors");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum;
}

inline double inner_product(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::ShapeMismatch,
          "inner product of differently shaped matrices");
  return a.cwiseProduct(b).sum();
}

inline bool all_finite(const Matrix& m) noexcept { return m.allFinite(); }

}  // namespace rtd
