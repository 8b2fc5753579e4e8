#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "rtd/reshuffle.hpp"
#include "rtd/rng.hpp"

using namespace rtd;

namespace {

Matrix integer_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  SplitMix64 g(seed);
  Matrix a(m, n);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = static_cast<double>(static_cast<int>(g.bounded(21)) - 10);
  return a;
}

DenseTensor integer_tensor(const Shape& shape, std::uint64_t seed) {
  SplitMix64 g(seed);
  DenseTensor t(shape);
  for (auto& v : t.values()) v = static_cast<double>(static_cast<int>(g.bounded(21)) - 10);
  return t;
}

}  // namespace

TEST(SplitMix64, MatchesReferenceSequence) {
  // First outputs of splitmix64 seeded with 0 (Vigna's reference implementation).
  SplitMix64 g(0);
  EXPECT_EQ(g.next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(g.next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(g.next(), 0x06c45d188009454fULL);
  EXPECT_EQ(splitmix64_at(0, 0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64_at(0, 2), 0x06c45d188009454fULL);
}

TEST(ReshuffleIdentity, IsIdentityPermutation) {
  const auto op = reshuffle_identity(2, 2, {2, 2});
  EXPECT_EQ(std::vector<std::size_t>(op.perm().begin(), op.perm().end()), (std::vector<std::size_t>{0, 1, 2, 3}));

  const auto op16 = reshuffle_identity(4, 4, {2, 2, 4});
  std::vector<std::size_t> expected(16);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  EXPECT_EQ(std::vector<std::size_t>(op16.perm().begin(), op16.perm().end()), expected);
}

TEST(ReshuffleIdentity, RowMajorFolding) {
  const auto op = reshuffle_identity(2, 3, {3, 2});
  Matrix a(2, 3);
  a << 0, 1, 2, 3, 4, 5;
  const DenseTensor t = apply(op, a);
  const std::size_t idx[] = {1, 0};
  EXPECT_EQ(t.at(idx), a(0, 2));
}

TEST(ReshuffleIdentity, RejectsElementCountMismatch) {
  try {
    reshuffle_identity(2, 3, {4});
    FAIL() << "expected ShapeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  EXPECT_THROW(reshuffle_from_seed(3, 3, {2, 4}, 1), Error);
}

TEST(ReshuffleFromSeed, FrozenFisherYatesTraces) {
  // Hand-executed with an independent Fisher–Yates/splitmix64 script.
  auto as_vec = [](const ReshuffleOp& op) { return std::vector<std::size_t>(op.perm().begin(), op.perm().end()); };
  EXPECT_EQ(as_vec(reshuffle_from_seed(2, 2, {4}, 0)), (std::vector<std::size_t>{2, 0, 1, 3}));
  EXPECT_EQ(as_vec(reshuffle_from_seed(3, 2, {2, 3}, 7)), (std::vector<std::size_t>{5, 4, 1, 3, 0, 2}));
  EXPECT_EQ(as_vec(reshuffle_from_seed(3, 2, {2, 3}, 8)), (std::vector<std::size_t>{4, 0, 1, 2, 5, 3}));
  EXPECT_EQ(as_vec(reshuffle_from_seed(2, 5, {10}, 42)), (std::vector<std::size_t>{8, 3, 6, 5, 4, 0, 9, 2, 1, 7}));
}

TEST(ReshuffleFromSeed, Deterministic) {
  EXPECT_EQ(reshuffle_from_seed(7, 9, {3, 21}, 99), reshuffle_from_seed(7, 9, {3, 21}, 99));
}

TEST(Apply, IdentityKeepsEntries) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  const DenseTensor t = apply(reshuffle_identity(2, 2, {2, 2}), a);
  EXPECT_EQ(std::vector<double>(t.values().begin(), t.values().end()), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Apply, ZeroMapsToZero) {
  const auto op = reshuffle_from_seed(3, 4, {2, 6}, 5);
  EXPECT_EQ(apply(op, Matrix::Zero(3, 4)).squared_norm(), 0.0);
  EXPECT_EQ(adjoint(op, DenseTensor({2, 6})).squaredNorm(), 0.0);
}

TEST(Apply, ShapeChecks) {
  const auto op = reshuffle_from_seed(3, 4, {12}, 5);
  EXPECT_THROW(apply(op, Matrix::Zero(4, 3)), Error);
  EXPECT_THROW(adjoint(op, DenseTensor({3, 4})), Error);
}

// Property sweep over random (m, n, shape, seed) tuples.
TEST(ReshuffleProperties, AlgebraHoldsExactly) {
  SplitMix64 g(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + g.bounded(7), n = 1 + g.bounded(7);
    const Shape shape = (trial % 2) ? Shape{m * n} : Shape{n, m};
    const auto op = reshuffle_from_seed(m, n, shape, g.next());

    std::vector<std::size_t> sorted(op.perm().begin(), op.perm().end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
    for (std::size_t i = 0; i < op.size(); ++i) ASSERT_EQ(op.inv_perm()[op.perm()[i]], i);

    const Matrix a = integer_matrix(m, n, g.next());
    const Matrix b = integer_matrix(m, n, g.next());
    const DenseTensor y = integer_tensor(shape, g.next());

    EXPECT_EQ(adjoint(op, apply(op, a)), a);
    EXPECT_EQ(apply(op, adjoint(op, y)), y);
    EXPECT_EQ(inner_product(apply(op, a), y), inner_product(a, adjoint(op, y)));
    EXPECT_EQ(apply(op, a).squared_norm(), a.squaredNorm());
    EXPECT_EQ(adjoint(op, y).squaredNorm(), y.squared_norm());

    // Linearity with exactly representable scalars.
    const Matrix combo = 2.0 * a - 0.5 * b;
    const DenseTensor lhs = apply(op, combo);
    const DenseTensor ra = apply(op, a), rb = apply(op, b);
    for (std::size_t k = 0; k < lhs.size(); ++k) ASSERT_EQ(lhs[k], 2.0 * ra[k] - 0.5 * rb[k]);
  }
}

TEST(CrossMap, SelfIsIdentity) {
  const auto op = reshuffle_from_seed(4, 5, {20}, 3);
  const auto c = cross_map(op, op);
  for (std::size_t k = 0; k < c.permutation().size(); ++k) EXPECT_EQ(c.permutation()[k], k);
}

TEST(CrossMap, FromIdentityIsInversePermutation) {
  const auto id = reshuffle_identity(4, 5, {20});
  const auto op = reshuffle_from_seed(4, 5, {20}, 3);
  const auto c = cross_map(id, op);
  EXPECT_TRUE(std::equal(c.permutation().begin(), c.permutation().end(), op.inv_perm().begin()));
}

TEST(CrossMap, AgreesWithApplyThenAdjoint) {
  const auto op_i = reshuffle_from_seed(6, 4, {3, 8}, 11);
  const auto op_j = reshuffle_from_seed(8, 3, {3, 8}, 12);
  const Matrix a = integer_matrix(6, 4, 13);
  const auto c = cross_map(op_i, op_j);
  EXPECT_EQ(c(a), adjoint(op_j, apply(op_i, a)));
  EXPECT_EQ(c.pullback(c(a)), a);
  EXPECT_THROW(cross_map(op_i, reshuffle_identity(5, 5, {25})), Error);
}

TEST(ReshuffleOp, DebugDump) {
  std::ostringstream os;
  dump_permutation(os, reshuffle_from_seed(2, 2, {4}, 0));
  EXPECT_EQ(os.str(), "2 0 1 3\n");
}

TEST(ReshuffleOp, RejectsNonPermutation) {
  EXPECT_THROW(ReshuffleOp(2, 2, {4}, {0, 1, 1, 3}), Error);
}
