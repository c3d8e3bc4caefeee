// SPDX-License-Identifier: Apache-2.0

// Block Jacobi on the 5-point 2D Laplacian with Dirichlet boundaries.

#pragma once

#include <memory>
#include <optional>

#include "asyncfp/fpcore.hpp"

namespace asyncfp::lapjac {

struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<Index> col;
  Vector val;

  Vector multiply(std::span<const double> x) const;
};

struct SparseSystem {
  std::size_t nx = 0;
  std::size_t ny = 0;
  CsrMatrix a;
  Vector diagonal;
  Vector b;
  std::optional<Vector> x_star;
  double spectral_radius = 0.0;  // estimate for M = D^-1 (L + U)

  std::size_t n() const { return a.n; }
};

enum class RightHandSide {
  Ones,          // b = 1 (unit source); no closed-form solution
  UnitSolution,  // b = A * 1, so x* = 1
};

/// Unknown (i, j) -> j * nx + i; grid row j is a contiguous range.
SparseSystem assemble_laplacian(std::size_t nx, std::size_t ny, RightHandSide rhs = RightHandSide::Ones);

/// Lanczos estimate of rho(D^-1 (L + U)) on the symmetrically scaled
/// iteration matrix.
double estimate_jacobi_spectral_radius(const CsrMatrix& a, std::span<const double> diagonal,
                                       std::size_t iterations = 400);

/// `n_sweeps` Jacobi sweeps over the rows in `block`, with every other
/// unknown frozen at its snapshot value. Returns the block's values in
/// the order of `block`.
Vector local_sweeps(const SparseSystem& system, std::span<const Index> block,
                    std::span<const double> snapshot, std::size_t n_sweeps);

/// Contiguous bands of grid rows; the last band takes any remainder.
BlockPartition make_row_block_partition(std::size_t nx, std::size_t ny, std::size_t rows_per_block);

/// Worker l owns a row band and returns `sweeps` local Jacobi sweeps.
/// Residual is b - Ax, reported relative to ||b||_2.
class JacobiProblem final : public ProblemInstance {
 public:
  JacobiProblem(std::shared_ptr<const SparseSystem> system, BlockPartition partition, std::size_t sweeps);

  std::string name() const override { return "jacobi"; }
  const BlockPartition& partition() const override { return partition_; }
  NormKind native_norm() const override { return NormKind::L2; }
  EvaluationKind evaluation_kind() const override { return EvaluationKind::PartialUpdate; }
  Vector initial_iterate() const override { return Vector(system_->n(), 0.0); }

  Vector evaluate_targets(std::span<const Index> targets, std::span<const double> snapshot) const override;

  using ProblemInstance::residual_vector;
  Vector residual_vector(std::span<const double> x) const override;
  Vector residual_vector(std::span<const double> x, std::span<const double> gx) const override;
  bool residual_uses_map() const override { return false; }
  double residual_scale() const override { return b_norm_; }

  /// Dependence weight |a_ij| including the diagonal; the fraction of each
  /// block's total weight that stays inside the block.
  std::vector<double> coupling_fraction(const BlockPartition& p) const override;

  std::optional<Vector> known_solution() const override { return system_->x_star; }

  const SparseSystem& system() const { return *system_; }
  std::size_t sweeps() const { return sweeps_; }

 private:
  std::shared_ptr<const SparseSystem> system_;
  BlockPartition partition_;
  std::size_t sweeps_;
  double b_norm_;
};

}  // namespace asyncfp::lapjac
