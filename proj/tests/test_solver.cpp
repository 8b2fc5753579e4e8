#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rtd/analysis.hpp"
#include "rtd/experiments.hpp"
#include "rtd/solver.hpp"

using namespace rtd;

namespace {

Problem problem_of(const Instance& inst) { return Problem{inst.observation, inst.ops}; }

double relative_error(const Matrix& est, const Matrix& truth) { return (est - truth).norm() / truth.norm(); }

}  // namespace

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rho = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.kappa0 = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.tol = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Decompose, SingleComponentIsExact) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = make_instance(12, 3, 1, seed, Shape{4, 36});
    const SolverResult res = decompose(problem_of(inst), {});
    EXPECT_TRUE(res.converged);
    EXPECT_LE(relative_error(res.components[0], inst.components[0]), 1e-6);
  }
}

TEST(Decompose, ZeroObservationGivesZeroComponents) {
  const Instance inst = make_instance(8, 1, 3, 4);
  const Problem p{DenseTensor(inst.observation.shape()), inst.ops};
  const SolverResult res = decompose(p, {});
  EXPECT_TRUE(res.converged);
  for (const auto& a : res.components) EXPECT_LE(a.norm(), 1e-12);
  EXPECT_EQ(res.kappa0, 1.0);
}

TEST(Decompose, TwoComponentRecovery) {
  const Instance inst = make_instance(50, 2, 2, 11);
  const SolverResult res = decompose(problem_of(inst), {});
  EXPECT_TRUE(res.converged);
  EXPECT_GE(tsir(inst.components, res.components), 25.0);
}

TEST(Decompose, RecoveryRateOnRandomInstances) {
  // n = 40 > 16r for r = 2.
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = make_instance(40, 2, 2, 1000 + seed);
    const SolverResult res = decompose(problem_of(inst), {});
    if (res.final_residual() <= SolverConfig{}.tol && tsir(inst.components, res.components) >= 25.0) ++good;
  }
  EXPECT_GE(good, 19);
}

TEST(Decompose, ObjectiveNotAboveTruth) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = make_instance(30, 1, 2, 300 + seed);
    const SolverResult res = decompose(problem_of(inst), {});
    const double truth = objective(inst.components);
    EXPECT_LE(objective(res.components), truth * (1.0 + 1e-4));
  }
}

TEST(Decompose, GeometricKappaIsExact) {
  const Instance inst = make_instance(20, 1, 2, 5);
  SolverConfig cfg;
  cfg.max_iter = 17;
  cfg.tol = 1e-300;
  const SolverResult res = decompose(problem_of(inst), cfg);
  EXPECT_EQ(res.iterations, 17u);
  EXPECT_FALSE(res.converged);
  double expected = res.kappa0;
  for (std::size_t k = 0; k < 17; ++k) {
    EXPECT_EQ(res.history[k].kappa, expected);
    expected *= cfg.rho;
  }
  EXPECT_EQ(res.final_kappa, expected);
  EXPECT_DOUBLE_EQ(res.final_kappa, res.kappa0 * std::pow(cfg.rho, 17));
}

TEST(Decompose, HarmonicScheduleAndCap) {
  const Instance inst = make_instance(20, 1, 2, 6);
  SolverConfig cfg;
  cfg.schedule = KappaSchedule::Harmonic;
  cfg.max_iter = 10;
  cfg.tol = 1e-300;
  cfg.kappa_max = 5.0 * default_kappa0(inst.observation);
  const SolverResult res = decompose(problem_of(inst), cfg);
  for (std::size_t k = 0; k < res.history.size(); ++k)
    EXPECT_DOUBLE_EQ(res.history[k].kappa, std::min(res.kappa0 * static_cast<double>(k + 1), *cfg.kappa_max));
}

TEST(Decompose, InvariantUnderComponentOrder) {
  const Instance inst = make_instance(40, 1, 3, 21);
  SolverConfig cfg;
  cfg.tol = 1e-11;
  cfg.max_iter = 5000;
  const SolverResult forward = decompose(problem_of(inst), cfg);
  const std::vector<std::size_t> order{2, 0, 1};
  Problem permuted{inst.observation, {}};
  for (auto i : order) permuted.ops.push_back(inst.ops[i]);
  const SolverResult shuffled = decompose(permuted, cfg);
  for (std::size_t k = 0; k < order.size(); ++k)
    EXPECT_LE((shuffled.components[k] - forward.components[order[k]]).norm(), 1e-8);
}

TEST(Decompose, Errors) {
  const Instance inst = make_instance(6, 1, 2, 1);
  Problem bad{DenseTensor({35}), inst.ops};
  try {
    decompose(bad, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  Problem nonfinite = problem_of(inst);
  nonfinite.observation[3] = std::numeric_limits<double>::infinity();
  try {
    decompose(nonfinite, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
}

TEST(PrimalResidual, Basics) {
  const Instance inst = make_instance(10, 2, 3, 8);
  const Problem p = problem_of(inst);
  EXPECT_LE(primal_residual(p, inst.components), 1e-12);

  std::vector<Matrix> zeros(3, Matrix::Zero(10, 10));
  ASSERT_GE(inst.observation.frobenius_norm(), 1.0);
  EXPECT_NEAR(primal_residual(p, zeros), 1.0, 1e-15);

  std::vector<Matrix> perturbed = inst.components;
  GaussianStream g(3);
  const Matrix e = 0.01 * gaussian_matrix(10, 10, g);
  perturbed[1] += e;
  EXPECT_LE(primal_residual(p, perturbed), e.norm() / inst.observation.frobenius_norm() + 1e-12);

  std::vector<Matrix> wrong(2, Matrix::Zero(10, 10));
  EXPECT_THROW(primal_residual(p, wrong), Error);
}

TEST(Objective, Basics) {
  EXPECT_EQ(objective(std::vector<Matrix>{Matrix::Zero(3, 3)}), 0.0);
  Matrix d(2, 2);
  d << 3, 0, 0, 1;
  EXPECT_NEAR(objective(std::vector<Matrix>{d}), 4.0, 1e-12);
  const Instance inst = make_instance(9, 2, 2, 2);
  EXPECT_NEAR(objective(inst.components), svd_full(inst.components[0]).S.sum() + svd_full(inst.components[1]).S.sum(),
              1e-12);
}

TEST(HistoryCsv, Header) {
  const Instance inst = make_instance(8, 1, 1, 2);
  std::ostringstream os;
  write_history_csv(os, decompose(problem_of(inst), {}));
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "iteration,residual,objective,kappa");
}
