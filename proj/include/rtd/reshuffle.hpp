#pragma once

// Reshuffling operators: bijective relocations of the entries of an m×n
// matrix into a tensor with the same element count. Classical folding is the
// identity permutation under row-major linearization.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "rtd/error.hpp"
#include "rtd/rng.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

using Permutation = std::vector<std::size_t>;

inline bool is_permutation_of_range(std::span<const std::size_t> perm) {
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    if (p >= perm.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

inline Permutation invert(std::span<const std::size_t> perm) {
  Permutation inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

/// Immutable bijection between matrix entries (row-major linear index i) and
/// tensor entries (row-major linear index perm[i]).
class ReshuffleOp {
 public:
  ReshuffleOp(std::size_t rows, std::size_t cols, Shape dst_shape, Permutation perm)
      : rows_(rows), cols_(cols), dst_shape_(std::move(dst_shape)), perm_(std::move(perm)) {
    require(rows >= 1 && cols >= 1, ErrorKind::ShapeMismatch, "matrix extents must be >= 1");
    validate_shape(dst_shape_);
    require(rows * cols == element_count(dst_shape_), ErrorKind::ShapeMismatch,
            std::to_string(rows) + "x" + std::to_string(cols) + " matrix cannot be reshuffled into " +
                shape_string(dst_shape_));
    require(perm_.size() == rows * cols && is_permutation_of_range(perm_), ErrorKind::InvalidArgument,
            "perm is not a permutation of [0, mn)");
    inv_perm_ = invert(perm_);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return perm_.size(); }
  const Shape& dst_shape() const noexcept { return dst_shape_; }
  std::span<const std::size_t> perm() const noexcept { return perm_; }
  std::span<const std::size_t> inv_perm() const noexcept { return inv_perm_; }

  /// out[perm[i]] = a[i], written as a gather over inv_perm.
  void apply_into(std::span<const double> matrix_values, std::span<double> tensor_values) const {
    for (std::size_t t = 0; t < inv_perm_.size(); ++t) tensor_values[t] = matrix_values[inv_perm_[t]];
  }

  /// out[i] = y[perm[i]].
  void adjoint_into(std::span<const double> tensor_values, std::span<double> matrix_values) const {
    for (std::size_t i = 0; i < perm_.size(); ++i) matrix_values[i] = tensor_values[perm_[i]];
  }

  friend bool operator==(const ReshuffleOp& a, const ReshuffleOp& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.dst_shape_ == b.dst_shape_ && a.perm_ == b.perm_;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  Shape dst_shape_;
  Permutation perm_;
  Permutation inv_perm_;
};

inline ReshuffleOp reshuffle_identity(std::size_t rows, std::size_t cols, Shape dst_shape) {
  Permutation perm(rows * cols);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  return ReshuffleOp(rows, cols, std::move(dst_shape), std::move(perm));
}

/// Fisher–Yates (descending i, j uniform in [0, i]) driven by SplitMix64(seed)
/// with multiply-shift bounded sampling.
inline Permutation seeded_permutation(std::size_t length, std::uint64_t seed) {
  Permutation perm(length);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SplitMix64 gen(seed);
  for (std::size_t i = length; i-- > 1;) {
    const auto j = static_cast<std::size_t>(gen.bounded(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

inline ReshuffleOp reshuffle_from_seed(std::size_t rows, std::size_t cols, Shape dst_shape, std::uint64_t seed) {
  require(rows * cols == element_count(dst_shape), ErrorKind::ShapeMismatch,
          "element counts differ for seeded reshuffle");
  return ReshuffleOp(rows, cols, std::move(dst_shape), seeded_permutation(rows * cols, seed));
}

inline DenseTensor apply(const ReshuffleOp& op, const Matrix& a) {
  require(static_cast<std::size_t>(a.rows()) == op.rows() && static_cast<std::size_t>(a.cols()) == op.cols(),
          ErrorKind::ShapeMismatch, "matrix shape does not match reshuffle source");
  DenseTensor out(op.dst_shape());
  op.apply_into(std::span<const double>(a.data(), op.size()), out.values());
  return out;
}

inline Matrix adjoint(const ReshuffleOp& op, const DenseTensor& y) {
  require(y.shape() == op.dst_shape(), ErrorKind::ShapeMismatch,
          "tensor shape " + shape_string(y.shape()) + " does not match reshuffle target " +
              shape_string(op.dst_shape()));
  Matrix out(op.rows(), op.cols());
  op.adjoint_into(y.values(), std::span<double>(out.data(), op.size()));
  return out;
}

/// R_to⋆ ∘ R_from as an entry permutation: matrix entry k of the `from`
/// frame lands at entry map[k] of the `to` frame.
class CrossMap {
 public:
  CrossMap(const ReshuffleOp& from, const ReshuffleOp& to)
      : from_rows_(from.rows()), from_cols_(from.cols()), to_rows_(to.rows()), to_cols_(to.cols()) {
    require(from.size() == to.size(), ErrorKind::ShapeMismatch, "cross map between ops of different sizes");
    map_.resize(from.size());
    const auto perm = from.perm();
    const auto inv = to.inv_perm();
    for (std::size_t k = 0; k < map_.size(); ++k) map_[k] = inv[perm[k]];
  }

  std::span<const std::size_t> permutation() const noexcept { return map_; }

  /// R_to⋆(R_from(m)).
  Matrix operator()(const Matrix& m) const {
    require(static_cast<std::size_t>(m.rows()) == from_rows_ && static_cast<std::size_t>(m.cols()) == from_cols_,
            ErrorKind::ShapeMismatch, "cross map input shape");
    Matrix out(to_rows_, to_cols_);
    for (std::size_t k = 0; k < map_.size(); ++k) out.data()[map_[k]] = m.data()[k];
    return out;
  }

  /// Adjoint (= inverse) of operator(): R_from⋆(R_to(m)).
  Matrix pullback(const Matrix& m) const {
    require(static_cast<std::size_t>(m.rows()) == to_rows_ && static_cast<std::size_t>(m.cols()) == to_cols_,
            ErrorKind::ShapeMismatch, "cross map pullback input shape");
    Matrix out(from_rows_, from_cols_);
    for (std::size_t k = 0; k < map_.size(); ++k) out.data()[k] = m.data()[map_[k]];
    return out;
  }

 private:
  std::size_t from_rows_, from_cols_, to_rows_, to_cols_;
  Permutation map_;
};

inline CrossMap cross_map(const ReshuffleOp& op_i, const ReshuffleOp& op_j) { return CrossMap(op_i, op_j); }

/// Debug dump: perm as one line of space-separated integers.
inline void dump_permutation(std::ostream& os, const ReshuffleOp& op) {
  const auto perm = op.perm();
  for (std::size_t i = 0; i < perm.size(); ++i) os << (i ? " " : "") << perm[i];
  os << '\n';
}

}  // namespace rtd
