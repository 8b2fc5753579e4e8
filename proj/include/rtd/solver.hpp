#pragma once

// Augmented-Lagrangian solver for
//
//   min Σ‖A_i‖_*   s.t.   X = Σ R_i(A_i)
//
// Each sweep updates the components in ascending order by singular-value
// thresholding (Gauss–Seidel, newest iterates used immediately), then takes a
// dual ascent step on Y and advances the penalty κ.

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rtd/error.hpp"
#include "rtd/linalg.hpp"
#include "rtd/reshuffle.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

enum class KappaSchedule {
  Geometric,  // κ ← ρκ
  Harmonic,   // κ_k = κ0·k, so Σ 1/κ_k diverges
};

struct SolverConfig {
  double rho = 1.01;
  std::optional<double> kappa0;  // unset: scale-equivariant default, see default_kappa0
  std::size_t max_iter = 2000;
  double tol = 1e-7;
  KappaSchedule schedule = KappaSchedule::Geometric;
  std::optional<double> kappa_max;

  void validate() const {
    require(rho > 1.0 && std::isfinite(rho), ErrorKind::InvalidArgument, "rho must be > 1");
    require(!kappa0 || (*kappa0 > 0.0 && std::isfinite(*kappa0)), ErrorKind::InvalidArgument, "kappa0 must be > 0");
    require(max_iter >= 1, ErrorKind::InvalidArgument, "max_iter must be >= 1");
    require(tol > 0.0, ErrorKind::InvalidArgument, "tol must be > 0");
    require(!kappa_max || *kappa_max > 0.0, ErrorKind::InvalidArgument, "kappa_max must be > 0");
  }
};

struct Problem {
  DenseTensor observation;
  std::vector<ReshuffleOp> ops;

  void validate() const {
    require(!ops.empty(), ErrorKind::InvalidArgument, "problem needs at least one component");
    for (std::size_t i = 0; i < ops.size(); ++i)
      require(ops[i].dst_shape() == observation.shape(), ErrorKind::ShapeMismatch,
              "op " + std::to_string(i) + " targets " + shape_string(ops[i].dst_shape()) + " but X is " +
                  shape_string(observation.shape()));
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  double residual = 0.0;       // ‖X − ΣR_i(A_i)‖_F / max(1, ‖X‖_F)
  double objective = 0.0;      // Σ‖A_i‖_*
  double kappa = 0.0;          // penalty used during this iteration
  double dual_residual = 0.0;  // κ‖ΔΣR_i(A_i)‖_F / max(1, ‖X‖_F); recorded only
};

struct SolverResult {
  std::vector<Matrix> components;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> history;
  double kappa0 = 0.0;
  double final_kappa = 0.0;

  double final_residual() const { return history.empty() ? 0.0 : history.back().residual; }
};

/// 1 / (‖X‖_F / √numel), or 1 when X = 0.
inline double default_kappa0(const DenseTensor& x) {
  const double rms = x.frobenius_norm() / std::sqrt(static_cast<double>(x.size()));
  return rms > 0.0 ? 1.0 / rms : 1.0;
}

namespace detail {

inline void check_components(const Problem& problem, std::span<const Matrix> components) {
  require(components.size() == problem.ops.size(), ErrorKind::ShapeMismatch, "component count differs from op count");
  for (std::size_t i = 0; i < components.size(); ++i)
    require(static_cast<std::size_t>(components[i].rows()) == problem.ops[i].rows() &&
                static_cast<std::size_t>(components[i].cols()) == problem.ops[i].cols(),
            ErrorKind::ShapeMismatch, "component " + std::to_string(i) + " shape differs from its op");
}

inline void accumulate(const ReshuffleOp& op, const Matrix& a, double scale, std::span<double> sum) {
  const auto perm = op.perm();
  const double* values = a.data();
  for (std::size_t k = 0; k < perm.size(); ++k) sum[perm[k]] += scale * values[k];
}

inline std::vector<double> reconstruct(std::span<const ReshuffleOp> ops, std::span<const Matrix> components,
                                       std::size_t numel) {
  std::vector<double> sum(numel, 0.0);
  for (std::size_t i = 0; i < ops.size(); ++i) accumulate(ops[i], components[i], 1.0, sum);
  return sum;
}

inline double residual_norm(const DenseTensor& x, std::span<const double> sum) {
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - sum[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace detail

inline double primal_residual(const Problem& problem, std::span<const Matrix> components) {
  problem.validate();
  detail::check_components(problem, components);
  const auto sum = detail::reconstruct(problem.ops, components, problem.observation.size());
  return detail::residual_norm(problem.observation, sum) / std::max(1.0, problem.observation.frobenius_norm());
}

inline double objective(std::span<const Matrix> components) {
  double total = 0.0;
  for (const auto& a : components) total += nuclear_norm(a);
  return total;
}

inline SolverResult decompose(const Problem& problem, const SolverConfig& config) {
  problem.validate();
  config.validate();
  const DenseTensor& x = problem.observation;
  require(x.all_finite(), ErrorKind::NonFinite, "observation has NaN or Inf entries");

  const std::size_t n_comp = problem.ops.size();
  const std::size_t numel = x.size();
  const double scale = std::max(1.0, x.frobenius_norm());
  const double kappa0 = config.kappa0.value_or(default_kappa0(x));

  SolverResult result;
  result.kappa0 = kappa0;
  result.components.reserve(n_comp);
  for (const auto& op : problem.ops) result.components.push_back(adjoint(op, x) / static_cast<double>(n_comp));

  // Y = sgn(X), with sgn(0) = 0.
  std::vector<double> dual(numel);
  for (std::size_t k = 0; k < numel; ++k) dual[k] = static_cast<double>((x[k] > 0.0) - (x[k] < 0.0));

  std::vector<double> sum = detail::reconstruct(problem.ops, result.components, numel);
  std::vector<double> work(numel);
  std::vector<double> nuclear(n_comp, 0.0);
  Matrix gathered;

  double kappa = kappa0;
  double divergence_reference = 0.0;

  for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
    const double inv_kappa = 1.0 / kappa;
    for (std::size_t k = 0; k < numel; ++k) work[k] = x[k] + inv_kappa * dual[k];
    const std::vector<double> sum_before = sum;

    for (std::size_t i = 0; i < n_comp; ++i) {
      const ReshuffleOp& op = problem.ops[i];
      Matrix& a = result.components[i];
      // R_i⋆(X − Σ_{j≠i} R_j(A_j) + Y/κ) = R_i⋆(work − sum) + A_i
      gathered.resize(static_cast<Eigen::Index>(op.rows()), static_cast<Eigen::Index>(op.cols()));
      const auto perm = op.perm();
      for (std::size_t k = 0; k < perm.size(); ++k)
        gathered.data()[k] = work[perm[k]] - sum[perm[k]] + a.data()[k];
      Shrinkage shrunk = shrink_singular_values(gathered, inv_kappa);
      for (std::size_t k = 0; k < perm.size(); ++k) sum[perm[k]] += shrunk.value.data()[k] - a.data()[k];
      a = std::move(shrunk.value);
      nuclear[i] = shrunk.nuclear_norm;
    }

    sum = detail::reconstruct(problem.ops, result.components, numel);
    double primal_sq = 0.0, change_sq = 0.0;
    for (std::size_t k = 0; k < numel; ++k) {
      const double r = x[k] - sum[k];
      dual[k] += kappa * r;
      primal_sq += r * r;
      const double d = sum[k] - sum_before[k];
      change_sq += d * d;
    }

    IterationRecord record;
    record.iteration = iter;
    record.residual = std::sqrt(primal_sq) / scale;
    record.kappa = kappa;
    record.dual_residual = kappa * std::sqrt(change_sq) / scale;
    for (double v : nuclear) record.objective += v;
    result.history.push_back(record);
    result.iterations = iter;

    require(std::isfinite(record.residual), ErrorKind::DivergenceDetected, "residual became non-finite");
    if (iter == 1) divergence_reference = std::max(record.residual, config.tol);
    require(record.residual <= 1e6 * divergence_reference, ErrorKind::DivergenceDetected,
            "residual grew past 1e6x its first-iteration value");

    switch (config.schedule) {
      case KappaSchedule::Geometric: kappa *= config.rho; break;
      case KappaSchedule::Harmonic: kappa = kappa0 * static_cast<double>(iter + 1); break;
    }
    if (config.kappa_max) kappa = std::min(kappa, *config.kappa_max);

    if (record.residual <= config.tol) {
      result.converged = true;
      break;
    }
  }
  result.final_kappa = kappa;
  return result;
}

/// CSV: iteration,residual,objective,kappa
inline void write_history_csv(std::ostream& os, const SolverResult& result) {
  os << "iteration,residual,objective,kappa\n";
  os.precision(17);
  for (const auto& h : result.history) os << h.iteration << ',' << h.residual << ',' << h.objective << ',' << h.kappa << '\n';
}

}  // namespace rtd
