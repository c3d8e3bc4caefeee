// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "asyncfp/lapjac.hpp"

using namespace asyncfp;
using namespace asyncfp::lapjac;

namespace {

/// Dense Gaussian elimination with partial pivoting.
Vector dense_solve(const CsrMatrix& a, Vector b) {
  const std::size_t n = a.n;
  std::vector<Vector> m(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) m[i][a.col[k]] = a.val[k];
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
      b[r] -= f * b[c];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= m[i][k] * x[k];
    x[i] = s / m[i][i];
  }
  return x;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST(AssembleLaplacian, TwoByTwoIsFourCycle) {
  const SparseSystem sys = assemble_laplacian(2, 2, RightHandSide::UnitSolution);
  ASSERT_EQ(sys.n(), 4u);
  // Unknowns 0-1 / 2-3 on the grid: 0~1, 0~2, 1~3, 2~3.
  const double expected[4][4] = {{4, -1, -1, 0}, {-1, 4, 0, -1}, {-1, 0, 4, -1}, {0, -1, -1, 4}};
  for (std::size_t i = 0; i < 4; ++i) {
    Vector e(4, 0.0);
    e[i] = 1.0;
    const Vector col = sys.a.multiply(e);
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(col[r], expected[r][i]);
    EXPECT_EQ(sys.b[i], 2.0);
  }
  ASSERT_TRUE(sys.x_star.has_value());
}

TEST(AssembleLaplacian, FullSizeGrid) {
  const SparseSystem sys = assemble_laplacian(100, 100);
  EXPECT_EQ(sys.n(), 10000u);
  EXPECT_FALSE(sys.x_star.has_value());
  for (double b : sys.b) ASSERT_EQ(b, 1.0);
  // cos(pi / 101)
  EXPECT_NEAR(sys.spectral_radius, 0.99951628049072, 1e-7);
  EXPECT_LT(sys.spectral_radius, 1.0);
}

TEST(AssembleLaplacian, SpectralRadiusMatchesClosedForm) {
  for (std::size_t g : {4u, 8u, 16u}) {
    const SparseSystem sys = assemble_laplacian(g, g);
    EXPECT_NEAR(sys.spectral_radius, std::cos(M_PI / static_cast<double>(g + 1)), 1e-9) << g;
  }
}

TEST(LocalSweeps, OneSweepMatchesEvaluateBlock) {
  auto sys = std::make_shared<const SparseSystem>(assemble_laplacian(7, 7, RightHandSide::UnitSolution));
  const JacobiProblem problem(sys, make_row_block_partition(7, 7, 3), 1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector x(49);
  for (double& v : x) v = g(rng);
  for (std::size_t b = 0; b < problem.partition().num_blocks(); ++b)
    EXPECT_EQ(local_sweeps(*sys, problem.partition().block(b), x, 1), problem.evaluate_block(b, x));
}

TEST(LocalSweeps, SolutionIsFixed) {
  const SparseSystem sys = assemble_laplacian(6, 5, RightHandSide::UnitSolution);
  const Vector ones(30, 1.0);
  const BlockPartition p = make_row_block_partition(6, 5, 2);
  for (std::size_t b = 0; b < p.num_blocks(); ++b)
    for (double v : local_sweeps(sys, p.block(b), ones, 7)) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(LocalSweeps, WholeDomainConvergesToDirectSolve) {
  const SparseSystem sys = assemble_laplacian(5, 4);
  const Vector exact = dense_solve(sys.a, sys.b);
  IndexSet all(sys.n());
  for (Index i = 0; i < sys.n(); ++i) all[i] = i;
  const Vector x = local_sweeps(sys, all, Vector(sys.n(), 0.0), 2000);
  for (std::size_t i = 0; i < sys.n(); ++i) EXPECT_NEAR(x[i], exact[i], 1e-10);
}

TEST(LocalSweeps, PropertyCompositional) {
  const SparseSystem sys = assemble_laplacian(8, 8);
  const BlockPartition p = make_row_block_partition(8, 8, 3);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vector x(64);
    for (double& v : x) v = g(rng);
    const std::size_t k = 1 + static_cast<std::size_t>(trial);
    for (std::size_t b = 0; b < p.num_blocks(); ++b) {
      const auto block = p.block(b);
      Vector snap = x;
      for (std::size_t s = 0; s < k; ++s) {
        const Vector once = local_sweeps(sys, block, snap, 1);
        for (std::size_t i = 0; i < block.size(); ++i) snap[block[i]] = once[i];
      }
      const Vector direct = local_sweeps(sys, block, x, k);
      for (std::size_t i = 0; i < block.size(); ++i) ASSERT_NEAR(direct[i], snap[block[i]], 1e-13);
    }
  }
}

TEST(RowBlockPartition, Shapes) {
  const BlockPartition p = make_row_block_partition(100, 100, 25);
  ASSERT_EQ(p.num_blocks(), 4u);
  for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(p.block(b).size(), 2500u);
  const BlockPartition rem = make_row_block_partition(10, 7, 3);
  ASSERT_EQ(rem.num_blocks(), 3u);
  EXPECT_EQ(rem.block(2).size(), 10u);
}

TEST(RowBlockPartition, SingleBandHasFullCoupling) {
  auto sys = std::make_shared<const SparseSystem>(assemble_laplacian(10, 10));
  const JacobiProblem problem(sys, make_row_block_partition(10, 10, 10), 1);
  EXPECT_EQ(problem.coupling_fraction(problem.partition()), std::vector<double>{1.0});
}

TEST(RowBlockPartition, CouplingBands) {
  auto sys = std::make_shared<const SparseSystem>(assemble_laplacian(100, 100));
  const JacobiProblem problem(sys, make_row_block_partition(100, 100, 25), 10);
  // Thin bands lose a large share of their stencil weight to neighbours.
  const double c1 = mean(problem.coupling_fraction(make_row_block_partition(100, 100, 1)));
  const double c2 = mean(problem.coupling_fraction(make_row_block_partition(100, 100, 2)));
  const double c5 = mean(problem.coupling_fraction(make_row_block_partition(100, 100, 5)));
  const double c10 = mean(problem.coupling_fraction(make_row_block_partition(100, 100, 10)));
  EXPECT_GE(c1, 0.60);
  EXPECT_LE(c2, 0.90);
  EXPECT_LT(c1, c2);
  EXPECT_GE(c5, 0.93);
  EXPECT_LE(c10, 0.99);
  EXPECT_LT(c5, c10);
}
