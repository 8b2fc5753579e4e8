#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "rtd/error.hpp"
#include "rtd/rng.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

/// Singular values at or below this fraction of the largest count as zero.
inline constexpr double kRankCutoff = 1e-12;

struct SvdFactors {
  Matrix U;  // m×k, orthonormal columns
  Vector S;  // k values, nonincreasing
  Matrix V;  // n×k, orthonormal columns

  Matrix reconstruct() const { return U * S.asDiagonal() * V.transpose(); }
};

inline void require_finite(const Matrix& m, const char* what) {
  require(m.allFinite(), ErrorKind::NonFinite, std::string(what) + " has NaN or Inf entries");
}

/// Thin SVD, k = min(m, n).
inline SvdFactors svd_full(const Matrix& m) {
  require_finite(m, "svd input");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdFactors{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

inline Vector singular_values(const Matrix& m) {
  require_finite(m, "svd input");
  const Eigen::BDCSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(m)};
  return svd.singularValues();
}

inline std::size_t numerical_rank(const Vector& s) {
  if (s.size() == 0 || s[0] <= 0.0) return 0;
  const double cutoff = kRankCutoff * s[0];
  std::size_t k = 0;
  while (k < static_cast<std::size_t>(s.size()) && s[static_cast<Eigen::Index>(k)] > cutoff) ++k;
  return k;
}

inline double nuclear_norm(const Matrix& m) { return singular_values(m).sum(); }

struct Shrinkage {
  Matrix value;
  double nuclear_norm = 0.0;  // of value
  std::size_t rank = 0;       // singular values surviving the threshold
};

/// D_alpha(M) plus the nuclear norm of the result, which falls out for free.
inline Shrinkage shrink_singular_values(const Matrix& m, double alpha) {
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidArgument, "svt threshold must be >= 0");
  const SvdFactors f = svd_full(m);
  Eigen::Index kept = 0;
  while (kept < f.S.size() && f.S[kept] > alpha) ++kept;
  Shrinkage out;
  out.rank = static_cast<std::size_t>(kept);
  if (kept == 0) {
    out.value = Matrix::Zero(m.rows(), m.cols());
    return out;
  }
  const Vector shrunk = f.S.head(kept).array() - alpha;
  out.nuclear_norm = shrunk.sum();
  out.value = f.U.leftCols(kept) * shrunk.asDiagonal() * f.V.leftCols(kept).transpose();
  return out;
}

/// Proximal operator of alpha·‖·‖_* at M.
inline Matrix svt(const Matrix& m, double alpha) { return shrink_singular_values(m, alpha).value; }

struct SingularTriplet {
  double sigma = 0.0;
  Vector u;
  Vector v;
};

inline SingularTriplet leading_singular_triplet(const Matrix& m) {
  const SvdFactors f = svd_full(m);
  return {f.S[0], f.U.col(0), f.V.col(0)};
}

/// Largest singular value by power iteration on MᵀM with a residual
/// certificate ‖Mᵀu − σv‖ ≤ 1e-11σ; falls back to the SVD when the
/// iteration stalls (clustered top singular values).
inline double spectral_norm(const Matrix& m) {
  require_finite(m, "spectral_norm input");
  if (m.size() == 0) return 0.0;
  if (m.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  Vector v(m.cols());
  SplitMix64 gen(0x5eed);
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = 0.5 + gen.uniform();
  v.normalize();

  constexpr int kMaxIter = 2000;
  double sigma = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    Vector u = m * v;
    sigma = u.norm();
    if (sigma == 0.0) break;
    u /= sigma;
    Vector w = m.transpose() * u;
    const double residual = (w - sigma * v).norm();
    const double next_sigma = w.norm();
    v = w / next_sigma;
    if (residual <= 1e-11 * sigma) return std::max(sigma, next_sigma);
  }
  return singular_values(m)[0];
}

/// Orthonormalize columns in place (modified Gram–Schmidt, two passes).
inline void orthonormalize_columns(Matrix& q) {
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
    const double norm = q.col(j).norm();
    require(norm > 0.0, ErrorKind::DegenerateRank, "rank-deficient Gaussian draw");
    q.col(j) /= norm;
  }
}

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, GaussianStream& stream) {
  Matrix g(rows, cols);
  for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = stream.next();
  return g;
}

/// (U, V), both n×r with orthonormal columns; U·Vᵀ has r unit singular values.
inline std::pair<Matrix, Matrix> random_semi_orthonormal_pair(std::size_t n, std::size_t r, std::uint64_t seed) {
  require(r >= 1 && r <= n, ErrorKind::BadRank,
          "rank " + std::to_string(r) + " not realizable with n = " + std::to_string(n));
  GaussianStream stream(seed);
  Matrix u = gaussian_matrix(n, r, stream);
  Matrix v = gaussian_matrix(n, r, stream);
  orthonormalize_columns(u);
  orthonormalize_columns(v);
  return {std::move(u), std::move(v)};
}

}  // namespace rtd
