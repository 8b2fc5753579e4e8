#pragma once

// Recovery metrics and exact-recovery diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rtd/error.hpp"
#include "rtd/linalg.hpp"
#include "rtd/reshuffle.hpp"
#include "rtd/rng.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

/// Returned by tsir/sir when the error energy is negligible.
inline constexpr double kSirCapDb = 300.0;

namespace detail {

inline double ratio_db(double signal, double error) {
  require(signal > 0.0, ErrorKind::AllZeroSignal, "reference signal has zero energy");
  if (error < 1e-300 * signal) return kSirCapDb;
  return 10.0 * std::log10(signal / error);
}

}  // namespace detail

/// 10·log10(Σ‖A_i*‖² / Σ‖A_i* − Â_i‖²) in dB.
inline double tsir(std::span<const Matrix> truth, std::span<const Matrix> estimate) {
  require(truth.size() == estimate.size(), ErrorKind::ShapeMismatch, "tsir: component counts differ");
  double signal = 0.0, error = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i].rows() == estimate[i].rows() && truth[i].cols() == estimate[i].cols(), ErrorKind::ShapeMismatch,
            "tsir: component " + std::to_string(i) + " shapes differ");
    signal += truth[i].squaredNorm();
    error += (truth[i] - estimate[i]).squaredNorm();
  }
  return detail::ratio_db(signal, error);
}

inline double sir(std::span<const double> reference, std::span<const double> estimate) {
  require(reference.size() == estimate.size(), ErrorKind::ShapeMismatch, "sir: sizes differ");
  double signal = 0.0, error = 0.0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    signal += reference[k] * reference[k];
    const double d = reference[k] - estimate[k];
    error += d * d;
  }
  return detail::ratio_db(signal, error);
}

inline double sir(const Matrix& reference, const Matrix& estimate) {
  require(reference.rows() == estimate.rows() && reference.cols() == estimate.cols(), ErrorKind::ShapeMismatch,
          "sir: shapes differ");
  return sir(std::span<const double>(reference.data(), static_cast<std::size_t>(reference.size())),
             std::span<const double>(estimate.data(), static_cast<std::size_t>(estimate.size())));
}

/// Smallest n with n > (3N − 2)²·r.
constexpr std::uint64_t recovery_bound_min_n(std::uint64_t n_components, std::uint64_t rank) {
  const std::uint64_t f = 3 * n_components - 2;
  return f * f * rank + 1;
}

constexpr double certificate_threshold(std::size_t n_components) {
  return 1.0 / (3.0 * static_cast<double>(n_components) - 2.0);
}

/// max μ_i < 1/(3N − 2). With lower-bound estimates of μ a `true` here only
/// means the condition was not falsified.
inline bool exact_recovery_certificate(std::span<const double> mu_values) {
  require(!mu_values.empty(), ErrorKind::InvalidArgument, "certificate needs at least one mu");
  for (double mu : mu_values) require(mu >= 0.0, ErrorKind::InvalidArgument, "mu must be >= 0");
  return *std::max_element(mu_values.begin(), mu_values.end()) < certificate_threshold(mu_values.size());
}

struct TangentBasisInfo {
  Matrix U;  // m×k
  Matrix V;  // n×k
};

inline TangentBasisInfo tangent_basis(const Matrix& a) {
  const SvdFactors f = svd_full(a);
  const std::size_t k = numerical_rank(f.S);
  require(k > 0, ErrorKind::DegenerateRank, "tangent space of the zero matrix");
  const auto kk = static_cast<Eigen::Index>(k);
  return {f.U.leftCols(kk), f.V.leftCols(kk)};
}

/// UUᵀM + MVVᵀ − UUᵀMVVᵀ: orthogonal projection onto {UV̄ᵀ + ŪVᵀ}.
inline Matrix tangent_project(const TangentBasisInfo& t, const Matrix& m) {
  require(m.rows() == t.U.rows() && m.cols() == t.V.rows(), ErrorKind::ShapeMismatch, "tangent_project shape");
  const Matrix ut_m = t.U.transpose() * m;  // k×n
  const Matrix m_v = m * t.V;               // m×k
  return t.U * ut_m + m_v * t.V.transpose() - t.U * (ut_m * t.V) * t.V.transpose();
}

struct IncoherenceOptions {
  std::size_t restarts = 10;
  std::size_t iters = 100;
  std::uint64_t seed = 0;
};

struct IncoherenceEstimate {
  double value = 0.0;  // lower bound on μ_i
  std::size_t restarts = 0;
  std::vector<double> per_restart_best;
  std::vector<bool> converged;
};

namespace detail {

inline Matrix unit_spectral(const Matrix& m) {
  const double s = spectral_norm(m);
  return s > 0.0 ? Matrix(m / s) : m;
}

/// One ascent run of f(M) = ‖C(M)‖₂ / ‖M‖₂ over the tangent set, using the
/// projected subgradient P_T(C⋆(abᵀ)) − f·P_T(pqᵀ) (a, b and p, q the top
/// singular pairs of C(M) and M) with backtracking. f is scale-invariant, so
/// every evaluated point is feasible after rescaling and the best value is a
/// valid lower bound.
inline double tangent_ascent(const TangentBasisInfo& tangent, const CrossMap& cross, Matrix m, std::size_t iters,
                             bool& converged) {
  const auto ratio = [&](const Matrix& x) {
    const double denom = spectral_norm(x);
    return denom > 0.0 ? spectral_norm(cross(x)) / denom : 0.0;
  };
  m = unit_spectral(tangent_project(tangent, m));
  double best = ratio(m);
  converged = false;
  for (std::size_t it = 0; it < iters; ++it) {
    const SingularTriplet outer = leading_singular_triplet(cross(m));
    const SingularTriplet inner = leading_singular_triplet(m);
    const Matrix grad = tangent_project(tangent, cross.pullback(outer.u * outer.v.transpose())) -
                        best * tangent_project(tangent, inner.u * inner.v.transpose());
    const double grad_norm = grad.norm();
    if (grad_norm <= 1e-14 * std::max(1.0, best)) {
      converged = true;
      break;
    }
    const double base = m.norm() / grad_norm;
    bool improved = false;
    for (double step = 1.0; step >= 1e-8; step *= 0.25) {
      const Matrix candidate = unit_spectral(m + (step * base) * grad);
      const double value = ratio(candidate);
      if (value > best * (1.0 + 1e-13)) {
        best = value;
        m = candidate;
        improved = true;
        break;
      }
    }
    if (!improved) {
      converged = true;
      break;
    }
  }
  return best;
}

}  // namespace detail

/// Heuristic lower bound on μ_i(A) = max_{j≠i} max_{M ∈ T_i(A), ‖M‖₂ ≤ 1} ‖R_j⋆(R_i(M))‖₂.
/// Restart k draws its start from splitmix64_at(seed, k), so adding restarts
/// never lowers the estimate.
inline IncoherenceEstimate incoherence_lower_bound(const Matrix& a, std::span<const ReshuffleOp> ops, std::size_t i,
                                                   const IncoherenceOptions& options = {}) {
  require(i < ops.size(), ErrorKind::BadIndex, "component index out of range");
  require(ops.size() >= 2, ErrorKind::InvalidArgument, "incoherence needs at least two operators");
  require(static_cast<std::size_t>(a.rows()) == ops[i].rows() && static_cast<std::size_t>(a.cols()) == ops[i].cols(),
          ErrorKind::ShapeMismatch, "A does not match op i");
  require(options.restarts >= 1, ErrorKind::InvalidArgument, "restarts must be >= 1");
  const TangentBasisInfo tangent = tangent_basis(a);

  std::vector<CrossMap> crosses;
  for (std::size_t j = 0; j < ops.size(); ++j)
    if (j != i) crosses.emplace_back(ops[i], ops[j]);

  IncoherenceEstimate estimate;
  estimate.restarts = options.restarts;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    GaussianStream stream(splitmix64_at(options.seed, r));
    const Matrix start = gaussian_matrix(ops[i].rows(), ops[i].cols(), stream);
    double restart_best = 0.0;
    bool all_converged = true;
    for (const auto& cross : crosses) {
      bool converged = false;
      restart_best = std::max(restart_best, detail::tangent_ascent(tangent, cross, start, options.iters, converged));
      all_converged = all_converged && converged;
    }
    estimate.per_restart_best.push_back(restart_best);
    estimate.converged.push_back(all_converged);
    estimate.value = std::max(estimate.value, restart_best);
  }
  return estimate;
}

/// Number of components with ‖Â_i‖_F > eta·max_j ‖Â_j‖_F.
inline std::size_t estimate_component_count(std::span<const double> norms, double eta) {
  require(eta > 0.0, ErrorKind::InvalidArgument, "eta must be > 0");
  const double top = norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
  if (top <= 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(norms.begin(), norms.end(), [&](double v) { return v > eta * top; }));
}

inline std::size_t estimate_component_count(std::span<const Matrix> components, double eta) {
  std::vector<double> norms;
  norms.reserve(components.size());
  for (const auto& c : components) norms.push_back(c.norm());
  return estimate_component_count(norms, eta);
}

struct RecoveryAssumptionReport {
  std::vector<std::size_t> ranks;  // numerical rank of each A_i*
  bool ranks_equal_r = true;
  bool cross_full_rank = true;     // every R_j⋆(R_i(A_i*)), j ≠ i
  double max_spread = 1.0;         // max over all (i, j) of σ_max/σ_min over nonzero σ
};

/// Checks the size-bound assumptions on generated instances: every A_i* has
/// rank r and every cross-mapped R_j⋆(R_i(A_i*)) is full rank. The worst
/// singular-value spread is reported, not judged.
inline RecoveryAssumptionReport check_recovery_assumptions(std::span<const Matrix> components,
                                                           std::span<const ReshuffleOp> ops, std::size_t r) {
  require(components.size() == ops.size(), ErrorKind::ShapeMismatch, "components and ops differ in count");
  RecoveryAssumptionReport report;
  const auto spread = [](const Vector& s) {
    const std::size_t k = numerical_rank(s);
    return k == 0 ? 1.0 : s[0] / s[static_cast<Eigen::Index>(k - 1)];
  };
  for (std::size_t i = 0; i < components.size(); ++i) {
    const Vector s = singular_values(components[i]);
    report.ranks.push_back(numerical_rank(s));
    report.ranks_equal_r = report.ranks_equal_r && report.ranks.back() == r;
    report.max_spread = std::max(report.max_spread, spread(s));
    for (std::size_t j = 0; j < ops.size(); ++j) {
      if (j == i) continue;
      const Vector sj = singular_values(CrossMap(ops[i], ops[j])(components[i]));
      report.cross_full_rank = report.cross_full_rank && numerical_rank(sj) == static_cast<std::size_t>(sj.size());
      report.max_spread = std::max(report.max_spread, spread(sj));
    }
  }
  return report;
}

/// CSV: component,mu_lower_bound,threshold,verdict
inline void write_certificate_csv(std::ostream& os, std::span<const double> mu_lower_bounds) {
  const double threshold = certificate_threshold(mu_lower_bounds.size());
  os << "component,mu_lower_bound,threshold,verdict\n";
  os.precision(17);
  for (std::size_t i = 0; i < mu_lower_bounds.size(); ++i)
    os << i << ',' << mu_lower_bounds[i] << ',' << threshold << ','
       << (mu_lower_bounds[i] < threshold ? "not_falsified" : "violated") << '\n';
}

}  // namespace rtd
