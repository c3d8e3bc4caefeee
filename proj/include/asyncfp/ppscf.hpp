// SPDX-License-Identifier: Apache-2.0

// Closed-shell Hartree-Fock SCF for the Pariser-Parr-Pople chain with Ohno
// two-electron integrals, in the zero-differential-overlap approximation.

#pragma once

#include <memory>

#include "asyncfp/fpcore.hpp"

namespace asyncfp::ppscf {

using numkit::DenseMatrix;

struct PppSystem {
  std::size_t n_atoms = 0;
  double t = -1.0;  // nearest-neighbour hopping
  double u = 0.0;   // on-site repulsion
  DenseMatrix distance;
  DenseMatrix gamma;  // Ohno integrals
  DenseMatrix core;   // one-electron Hamiltonian
  std::size_t n_electrons = 0;

  std::size_t n_occupied() const { return n_electrons / 2; }
};

/// gamma = U / sqrt(1 + (U R)^2).
double ohno_gamma(double u, double r);

/// Linear chain with unit spacing. `u_over_t` is U/|t|; n_electrons = 0 means
/// half filling.
PppSystem make_ppp_chain(std::size_t n_atoms, double u_over_t, double t = -1.0, std::size_t n_electrons = 0);

/// F_mm = H_mm + sum_l P_ll g_ml - P_mm g_mm / 2;  F_mn = H_mn - P_mn g_mn / 2.
DenseMatrix build_fock(const PppSystem& sys, const DenseMatrix& p);

/// 2 C_occ C_occ^T from the lowest orbitals of `f`. Throws NumericError when
/// the HOMO/LUMO gap is below 1e-10.
DenseMatrix aufbau_density(const DenseMatrix& f, std::size_t n_occupied);

/// One SCF step P -> P'. A degenerate frontier gap triggers a single retry
/// with a 0.1 level shift on the virtual space.
DenseMatrix scf_map(const PppSystem& sys, const DenseMatrix& p);

/// Density from the core Hamiltonian.
DenseMatrix core_guess(const PppSystem& sys);

/// E = 1/2 sum P_mn (H + F)_nm.
double hf_energy(const PppSystem& sys, const DenseMatrix& p);

/// FP - PF flattened row-major.
Vector diis_residual(const DenseMatrix& f, const DenseMatrix& p);

DenseMatrix to_matrix(std::span<const double> flat, std::size_t n);

/// SCF as a partitioned problem on the flattened density. Each worker owns
/// a band of rows, evaluates the full map on its snapshot and returns its
/// rows; the coordinator symmetrizes after assembly. The accelerator
/// extrapolates Fock matrices (Pulay DIIS) with commutator residuals.
class ScfProblem final : public ProblemInstance {
 public:
  ScfProblem(std::shared_ptr<const PppSystem> system, std::size_t row_blocks);

  std::string name() const override { return "scf"; }
  const BlockPartition& partition() const override { return partition_; }
  NormKind native_norm() const override { return NormKind::L2; }
  EvaluationKind evaluation_kind() const override { return EvaluationKind::FullMap; }
  Vector initial_iterate() const override;

  Vector evaluate_targets(std::span<const Index> targets, std::span<const double> snapshot) const override;
  Vector apply_full_map(std::span<const double> x) const override;

  using ProblemInstance::residual_vector;
  Vector residual_vector(std::span<const double> x) const override;
  Vector residual_vector(std::span<const double> x, std::span<const double> gx) const override;
  bool residual_uses_map() const override { return false; }

  /// Every worker evaluates the whole map: 1 for each block.
  std::vector<double> coupling_fraction(const BlockPartition& p) const override;

  Vector accel_basis(std::span<const double> x, std::span<const double> gx) const override;
  Vector accel_realize(Vector combined) const override;
  void assemble(Vector& x) const override;
  std::optional<double> energy(std::span<const double> x) const override;

  const PppSystem& system() const { return *system_; }

 private:
  std::shared_ptr<const PppSystem> system_;
  BlockPartition partition_;
};

}  // namespace asyncfp::ppscf
