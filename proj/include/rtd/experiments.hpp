#pragma once

// Synthetic studies: phase-transition grids, Gaussian-noise sweeps and
// component-dropout runs. Every trial draws its randomness from a seed
// derived from (base seed, cell coordinates, trial index), so results do not
// depend on grid extents, thread count or execution order.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include "rtd/analysis.hpp"
#include "rtd/error.hpp"
#include "rtd/linalg.hpp"
#include "rtd/netpbm.hpp"
#include "rtd/reshuffle.hpp"
#include "rtd/rng.hpp"
#include "rtd/solver.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

struct Instance {
  std::vector<Matrix> components;  // A_i* = U_i V_iᵀ
  std::vector<ReshuffleOp> ops;
  DenseTensor observation;         // Σ R_i(A_i*)
};

/// N rank-r n×n components with seeded reshuffles into `shape` (default (n²,)).
inline Instance make_instance(std::size_t n, std::size_t r, std::size_t n_components, std::uint64_t seed,
                              std::optional<Shape> shape = std::nullopt) {
  require(n >= 1 && n_components >= 1, ErrorKind::InvalidArgument, "n and N must be >= 1");
  require(r >= 1 && r <= n, ErrorKind::BadRank, "rank " + std::to_string(r) + " exceeds n = " + std::to_string(n));
  Shape dst = shape.value_or(Shape{n * n});
  require(element_count(dst) == n * n, ErrorKind::ShapeMismatch, "tensor shape must hold n² entries");

  std::vector<Matrix> components;
  std::vector<ReshuffleOp> ops;
  DenseTensor x(dst);
  for (std::size_t i = 0; i < n_components; ++i) {
    auto [u, v] = random_semi_orthonormal_pair(n, r, splitmix64_at(seed, 2 * i));
    components.push_back(u * v.transpose());
    ops.push_back(reshuffle_from_seed(n, n, dst, splitmix64_at(seed, 2 * i + 1)));
    detail::accumulate(ops.back(), components.back(), 1.0, x.values());
  }
  return {std::move(components), std::move(ops), std::move(x)};
}

/// σ for a target SNR: σ² = ‖X‖² / (numel · 10^(snr/10)).
inline double noise_sigma(const DenseTensor& x, double snr_db) {
  require(std::isfinite(snr_db), ErrorKind::InvalidArgument, "snr must be finite");
  const double energy = x.squared_norm();
  require(energy > 0.0, ErrorKind::AllZeroSignal, "cannot set an SNR on a zero tensor");
  return std::sqrt(energy / (static_cast<double>(x.size()) * std::pow(10.0, snr_db / 10.0)));
}

inline DenseTensor add_gaussian_noise(const DenseTensor& x, double snr_db, std::uint64_t seed) {
  const double sigma = noise_sigma(x, snr_db);
  DenseTensor noisy = x;
  GaussianStream stream(seed);
  for (std::size_t k = 0; k < noisy.size(); ++k) noisy[k] += sigma * stream.next();
  return noisy;
}

/// Runs task(0..count-1) on up to `threads` workers; rethrows the first error.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t)
      workers.emplace_back([&] {
        for (std::size_t k = next++; k < count; k = next++) {
          try {
            task(k);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

inline std::size_t default_thread_count() { return std::max(1u, std::thread::hardware_concurrency()); }

inline std::vector<std::size_t> axis_range(std::size_t start, std::size_t stop, std::size_t step) {
  require(step >= 1 && start <= stop, ErrorKind::InvalidArgument, "empty or malformed axis range");
  std::vector<std::size_t> values;
  for (std::size_t v = start; v <= stop; v += step) values.push_back(v);
  return values;
}

inline std::uint64_t cell_seed(std::uint64_t base, std::uint64_t row_value, std::uint64_t col_value) {
  return splitmix64_at(splitmix64_at(base, row_value), col_value);
}

/// Mean tSIR of one generated instance, solved with `config`.
inline double trial_tsir(std::size_t n, std::size_t r, std::size_t n_components, std::uint64_t seed,
                         const SolverConfig& config) {
  const Instance inst = make_instance(n, r, n_components, seed);
  const SolverResult res = decompose(Problem{inst.observation, inst.ops}, config);
  return tsir(inst.components, res.components);
}

// ---------------------------------------------------------------------------
// Phase transitions

enum class PhaseMode {
  RankVsSize,   // rows r, cols n, N fixed
  RankVsCount,  // rows r, cols N, n fixed
};

struct PhaseGridSpec {
  PhaseMode mode = PhaseMode::RankVsSize;
  std::size_t fixed_value = 2;  // N for RankVsSize, n for RankVsCount
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  std::size_t trials = 3;
  std::uint64_t base_seed = 0;
  SolverConfig solver;
  std::size_t threads = 1;

  void validate() const {
    require(!rows.empty() && !cols.empty(), ErrorKind::InvalidArgument, "phase grid axes must be nonempty");
    require(trials >= 1, ErrorKind::InvalidArgument, "trials must be >= 1");
    require(fixed_value >= 1, ErrorKind::InvalidArgument, "fixed parameter must be >= 1");
    require(std::is_sorted(rows.begin(), rows.end()) && std::is_sorted(cols.begin(), cols.end()),
            ErrorKind::InvalidArgument, "axes must be ascending");
    solver.validate();
  }
};

struct PhaseCell {
  std::size_t row_value = 0;
  std::size_t col_value = 0;
  std::size_t trial_count = 0;  // 0 marks an invalid cell (r > n)
  double mean_tsir_db = std::numeric_limits<double>::quiet_NaN();
  bool bound_flag = false;      // first (or last) cell inside the recovery bound

  bool valid() const noexcept { return trial_count > 0; }
};

struct PhaseGrid {
  PhaseGridSpec spec;
  std::vector<PhaseCell> cells;  // row-major over (rows, cols)

  const PhaseCell& at(std::size_t row, std::size_t col) const { return cells[row * spec.cols.size() + col]; }
};

/// Inside-bound test for a cell: n ≥ recovery_bound_min_n(N, r).
inline bool within_recovery_bound(const PhaseGridSpec& spec, std::size_t row_value, std::size_t col_value) {
  const std::size_t n = spec.mode == PhaseMode::RankVsSize ? col_value : spec.fixed_value;
  const std::size_t big_n = spec.mode == PhaseMode::RankVsSize ? spec.fixed_value : col_value;
  return n >= recovery_bound_min_n(big_n, row_value);
}

inline PhaseGrid run_phase_grid(const PhaseGridSpec& spec) {
  spec.validate();
  PhaseGrid grid{spec, {}};
  const std::size_t n_rows = spec.rows.size(), n_cols = spec.cols.size();
  grid.cells.resize(n_rows * n_cols);
  for (std::size_t ri = 0; ri < n_rows; ++ri)
    for (std::size_t ci = 0; ci < n_cols; ++ci) {
      auto& cell = grid.cells[ri * n_cols + ci];
      cell.row_value = spec.rows[ri];
      cell.col_value = spec.cols[ci];
    }

  // Boundary line: first n inside the bound (RankVsSize) or last N inside it
  // (RankVsCount), per row.
  for (std::size_t ri = 0; ri < n_rows; ++ri) {
    std::optional<std::size_t> boundary;
    for (std::size_t ci = 0; ci < n_cols; ++ci) {
      if (!within_recovery_bound(spec, spec.rows[ri], spec.cols[ci])) continue;
      if (spec.mode == PhaseMode::RankVsSize) {
        if (!boundary) boundary = ci;
      } else {
        boundary = ci;
      }
    }
    if (boundary) grid.cells[ri * n_cols + *boundary].bound_flag = true;
  }

  const std::size_t tasks = n_rows * n_cols * spec.trials;
  std::vector<double> values(tasks, std::numeric_limits<double>::quiet_NaN());
  parallel_for(tasks, spec.threads, [&](std::size_t task) {
    const std::size_t cell_index = task / spec.trials, trial = task % spec.trials;
    const PhaseCell& cell = grid.cells[cell_index];
    const std::size_t r = cell.row_value;
    const std::size_t n = spec.mode == PhaseMode::RankVsSize ? cell.col_value : spec.fixed_value;
    const std::size_t big_n = spec.mode == PhaseMode::RankVsSize ? spec.fixed_value : cell.col_value;
    if (r > n) return;
    const std::uint64_t seed = splitmix64_at(cell_seed(spec.base_seed, cell.row_value, cell.col_value), trial);
    values[task] = trial_tsir(n, r, big_n, seed, spec.solver);
  });

  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < spec.trials; ++t) {
      const double v = values[c * spec.trials + t];
      if (std::isnan(v)) continue;
      sum += v;
      ++count;
    }
    grid.cells[c].trial_count = count;
    if (count) grid.cells[c].mean_tsir_db = sum / static_cast<double>(count);
  }
  return grid;
}

namespace detail {

inline void write_double(std::ostream& os, double v) {
  if (std::isnan(v))
    os << "nan";
  else
    os << v;
}

}  // namespace detail

/// CSV: row_value,col_value,trial_count,mean_tsir_db,bound_flag
inline void write_phase_csv(std::ostream& os, const PhaseGrid& grid) {
  os << "row_value,col_value,trial_count,mean_tsir_db,bound_flag\n";
  os.precision(17);
  for (const auto& c : grid.cells) {
    os << c.row_value << ',' << c.col_value << ',' << c.trial_count << ',';
    detail::write_double(os, c.mean_tsir_db);
    os << ',' << (c.bound_flag ? 1 : 0) << '\n';
  }
}

inline constexpr std::uint16_t kBoundMarker = 128;

/// 8-bit grayscale heatmap; ≤ lo_db black, ≥ hi_db white, linear between.
/// Rows are drawn with the largest row value on top; each cell is a
/// cell_px×cell_px block and boundary cells get a mid-gray top border row.
inline Raster render_heatmap(const PhaseGrid& grid, double lo_db = 15.0, double hi_db = 25.0, std::size_t cell_px = 8) {
  require(!grid.cells.empty(), ErrorKind::InvalidArgument, "empty grid");
  require(hi_db > lo_db && cell_px >= 1, ErrorKind::InvalidArgument, "bad heatmap parameters");
  const std::size_t n_rows = grid.spec.rows.size(), n_cols = grid.spec.cols.size();
  Raster img{n_cols * cell_px, n_rows * cell_px, 1, 255, {}};
  img.samples.assign(img.width * img.height, 0);
  for (std::size_t ri = 0; ri < n_rows; ++ri)
    for (std::size_t ci = 0; ci < n_cols; ++ci) {
      const PhaseCell& cell = grid.at(ri, ci);
      std::uint16_t level = 0;
      if (cell.valid()) {
        const double t = std::clamp((cell.mean_tsir_db - lo_db) / (hi_db - lo_db), 0.0, 1.0);
        level = static_cast<std::uint16_t>(std::lround(255.0 * t));
      }
      const std::size_t top = (n_rows - 1 - ri) * cell_px, left = ci * cell_px;
      for (std::size_t y = 0; y < cell_px; ++y)
        for (std::size_t x = 0; x < cell_px; ++x)
          img.samples[(top + y) * img.width + left + x] = (cell.bound_flag && y == 0) ? kBoundMarker : level;
    }
  return img;
}

// ---------------------------------------------------------------------------
// Gaussian-noise sweep

struct NoiseSweepSpec {
  std::size_t n = 100;
  std::size_t n_components = 10;
  std::vector<std::size_t> ranks{1, 2, 3, 4};
  std::vector<double> snr_db{5, 10, 15, 20, 25, 30, 35};
  std::size_t trials = 3;
  std::uint64_t seed = 0;
  SolverConfig solver;
  std::size_t threads = 1;

  void validate() const {
    require(!snr_db.empty() && !ranks.empty(), ErrorKind::InvalidArgument, "noise sweep needs ranks and SNRs");
    require(trials >= 1, ErrorKind::InvalidArgument, "trials must be >= 1");
    solver.validate();
  }
};

struct NoiseRow {
  std::size_t rank = 0;
  double snr_db = 0.0;
  std::size_t trials = 0;
  double mean_tsir_db = 0.0;
};

inline std::uint64_t snr_stream(double snr_db) { return std::bit_cast<std::uint64_t>(snr_db); }

/// Trial t at rank r uses the same clean instance for every SNR; only the
/// noise draw changes with the SNR.
inline std::vector<NoiseRow> run_noise_sweep(const NoiseSweepSpec& spec) {
  spec.validate();
  const std::size_t per_rank = spec.snr_db.size() * spec.trials;
  std::vector<double> values(spec.ranks.size() * per_rank);
  parallel_for(values.size(), spec.threads, [&](std::size_t task) {
    const std::size_t ri = task / per_rank, si = (task % per_rank) / spec.trials, t = task % spec.trials;
    const std::uint64_t inst_seed = splitmix64_at(cell_seed(spec.seed, spec.ranks[ri], 0), t);
    const Instance inst = make_instance(spec.n, spec.ranks[ri], spec.n_components, inst_seed);
    const DenseTensor noisy =
        add_gaussian_noise(inst.observation, spec.snr_db[si], splitmix64_at(inst_seed, snr_stream(spec.snr_db[si])));
    const SolverResult res = decompose(Problem{noisy, inst.ops}, spec.solver);
    values[task] = tsir(inst.components, res.components);
  });

  std::vector<NoiseRow> rows;
  for (std::size_t ri = 0; ri < spec.ranks.size(); ++ri)
    for (std::size_t si = 0; si < spec.snr_db.size(); ++si) {
      double sum = 0.0;
      for (std::size_t t = 0; t < spec.trials; ++t) sum += values[ri * per_rank + si * spec.trials + t];
      rows.push_back({spec.ranks[ri], spec.snr_db[si], spec.trials, sum / static_cast<double>(spec.trials)});
    }
  return rows;
}

/// CSV: rank,snr_db,trials,mean_tsir_db
inline void write_noise_csv(std::ostream& os, const std::vector<NoiseRow>& rows) {
  os << "rank,snr_db,trials,mean_tsir_db\n";
  os.precision(17);
  for (const auto& r : rows) os << r.rank << ',' << r.snr_db << ',' << r.trials << ',' << r.mean_tsir_db << '\n';
}

// ---------------------------------------------------------------------------
// Component dropout / count estimation

struct DropoutSpec {
  std::size_t n = 60;
  std::size_t n_components = 6;
  std::vector<std::size_t> ranks{1};
  std::vector<double> snr_db{30};
  std::size_t trials = 10;
  double removal_probability = 0.5;
  double eta = 0.1;
  std::uint64_t seed = 0;
  SolverConfig solver;
  std::size_t threads = 1;

  void validate() const {
    require(!snr_db.empty() && !ranks.empty(), ErrorKind::InvalidArgument, "dropout run needs ranks and SNRs");
    require(trials >= 1, ErrorKind::InvalidArgument, "trials must be >= 1");
    require(removal_probability >= 0.0 && removal_probability <= 1.0, ErrorKind::InvalidArgument,
            "removal probability must be in [0, 1]");
    require(eta > 0.0, ErrorKind::InvalidArgument, "eta must be > 0");
    solver.validate();
  }
};

struct DropoutTrial {
  std::size_t kept = 0;
  std::size_t estimated = 0;
  std::optional<double> tsir_db;  // unset when every component was removed
};

struct DropoutRow {
  double snr_db = 0.0;
  std::size_t rank = 0;
  std::size_t trials = 0;
  double accuracy = 0.0;
  double mean_tsir_db = std::numeric_limits<double>::quiet_NaN();  // over trials with signal
};

/// One dropout trial: all N ops are declared to the solver, removed
/// generators are zero. If nothing survives, X = 0 and no noise is added.
inline DropoutTrial run_dropout_trial(std::size_t n, std::size_t r, std::size_t n_components, double snr_db,
                                      double removal_probability, double eta, std::uint64_t seed,
                                      const SolverConfig& config) {
  Instance inst = make_instance(n, r, n_components, seed);
  SplitMix64 coin(splitmix64_at(seed, 0xd20f));
  DropoutTrial trial;
  DenseTensor x(inst.observation.shape());
  for (std::size_t i = 0; i < n_components; ++i) {
    if (coin.uniform() < removal_probability) {
      inst.components[i].setZero();
    } else {
      ++trial.kept;
      detail::accumulate(inst.ops[i], inst.components[i], 1.0, x.values());
    }
  }
  const DenseTensor observed = trial.kept ? add_gaussian_noise(x, snr_db, splitmix64_at(seed, snr_stream(snr_db))) : x;
  const SolverResult res = decompose(Problem{observed, inst.ops}, config);
  trial.estimated = estimate_component_count(res.components, eta);
  if (trial.kept) trial.tsir_db = tsir(inst.components, res.components);
  return trial;
}

inline std::vector<DropoutRow> run_dropout_experiment(const DropoutSpec& spec) {
  spec.validate();
  const std::size_t per_snr = spec.ranks.size() * spec.trials;
  std::vector<DropoutTrial> trials(spec.snr_db.size() * per_snr);
  parallel_for(trials.size(), spec.threads, [&](std::size_t task) {
    const std::size_t si = task / per_snr, ri = (task % per_snr) / spec.trials, t = task % spec.trials;
    const std::uint64_t seed = splitmix64_at(cell_seed(spec.seed, spec.ranks[ri], snr_stream(spec.snr_db[si])), t);
    trials[task] = run_dropout_trial(spec.n, spec.ranks[ri], spec.n_components, spec.snr_db[si],
                                     spec.removal_probability, spec.eta, seed, spec.solver);
  });

  std::vector<DropoutRow> rows;
  for (std::size_t si = 0; si < spec.snr_db.size(); ++si)
    for (std::size_t ri = 0; ri < spec.ranks.size(); ++ri) {
      DropoutRow row{spec.snr_db[si], spec.ranks[ri], spec.trials, 0.0};
      std::size_t exact = 0, with_signal = 0;
      double tsir_sum = 0.0;
      for (std::size_t t = 0; t < spec.trials; ++t) {
        const DropoutTrial& tr = trials[si * per_snr + ri * spec.trials + t];
        exact += tr.estimated == tr.kept;
        if (tr.tsir_db) {
          tsir_sum += *tr.tsir_db;
          ++with_signal;
        }
      }
      row.accuracy = static_cast<double>(exact) / static_cast<double>(spec.trials);
      if (with_signal) row.mean_tsir_db = tsir_sum / static_cast<double>(with_signal);
      rows.push_back(row);
    }
  return rows;
}

/// CSV: snr_db,rank,trials,accuracy,mean_tsir_db
inline void write_dropout_csv(std::ostream& os, const std::vector<DropoutRow>& rows) {
  os << "snr_db,rank,trials,accuracy,mean_tsir_db\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.snr_db << ',' << r.rank << ',' << r.trials << ',' << r.accuracy << ',';
    detail::write_double(os, r.mean_tsir_db);
    os << '\n';
  }
}

}  // namespace rtd
