// SPDX-License-Identifier: Apache-2.0

#include "asyncfp/ppscf.hpp"

#include <cmath>
#include <stdexcept>

namespace asyncfp::ppscf {

namespace {
constexpr double kGapTolerance = 1e-10;
constexpr double kLevelShift = 0.1;
}  // namespace

double ohno_gamma(double u, double r) { return u / std::sqrt(1.0 + (u * r) * (u * r)); }

PppSystem make_ppp_chain(std::size_t n_atoms, double u_over_t, double t, std::size_t n_electrons) {
  if (n_atoms < 2) throw std::invalid_argument("make_ppp_chain: need at least two atoms");
  if (u_over_t < 0.0) throw std::invalid_argument("make_ppp_chain: U/|t| must be >= 0");
  PppSystem sys;
  sys.n_atoms = n_atoms;
  sys.t = t;
  sys.u = u_over_t * std::abs(t);
  sys.n_electrons = n_electrons == 0 ? n_atoms : n_electrons;
  if (sys.n_electrons % 2 != 0) throw std::invalid_argument("make_ppp_chain: closed shell needs an even electron count");
  if (sys.n_electrons > 2 * n_atoms) throw std::invalid_argument("make_ppp_chain: too many electrons");
  sys.distance = DenseMatrix(n_atoms, n_atoms);
  sys.gamma = DenseMatrix(n_atoms, n_atoms);
  sys.core = DenseMatrix(n_atoms, n_atoms);
  for (std::size_t i = 0; i < n_atoms; ++i)
    for (std::size_t j = 0; j < n_atoms; ++j) {
      const double r = std::abs(static_cast<double>(i) - static_cast<double>(j));
      sys.distance(i, j) = r;
      sys.gamma(i, j) = ohno_gamma(sys.u, r);
      if (r == 1.0) sys.core(i, j) = t;
    }
  return sys;
}

DenseMatrix build_fock(const PppSystem& sys, const DenseMatrix& p) {
  const std::size_t n = sys.n_atoms;
  if (p.rows() != n || p.cols() != n) throw std::invalid_argument("build_fock: density shape mismatch");
  DenseMatrix f = sys.core;
  for (std::size_t m = 0; m < n; ++m) {
    double coulomb = 0.0;
    for (std::size_t l = 0; l < n; ++l) coulomb += p(l, l) * sys.gamma(m, l);
    f(m, m) += coulomb - 0.5 * p(m, m) * sys.gamma(m, m);
    for (std::size_t k = 0; k < n; ++k)
      if (k != m) f(m, k) -= 0.5 * p(m, k) * sys.gamma(m, k);
  }
  return f;
}

DenseMatrix aufbau_density(const DenseMatrix& f, std::size_t n_occupied) {
  const std::size_t n = f.rows();
  const numkit::EigenDecomposition eig = numkit::sym_eig(f);
  if (n_occupied > 0 && n_occupied < n &&
      eig.eigenvalues[n_occupied] - eig.eigenvalues[n_occupied - 1] < kGapTolerance)
    throw NumericError("aufbau_density: degenerate HOMO/LUMO");
  DenseMatrix p(n, n);
  for (std::size_t i = 0; i < n_occupied; ++i)
    for (std::size_t a = 0; a < n; ++a) {
      const double ca = eig.eigenvectors(a, i);
      for (std::size_t b = 0; b < n; ++b) p(a, b) += 2.0 * ca * eig.eigenvectors(b, i);
    }
  return p;
}

DenseMatrix scf_map(const PppSystem& sys, const DenseMatrix& p) {
  if (!p.all_finite()) throw NumericError("scf_map: non-finite density");
  const DenseMatrix f = build_fock(sys, p);
  try {
    return aufbau_density(f, sys.n_occupied());
  } catch (const NumericError&) {
    // Shift the virtual space of the input density: F + s (I - P/2).
    const std::size_t n = sys.n_atoms;
    DenseMatrix shifted = f;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) shifted(i, j) += kLevelShift * ((i == j ? 1.0 : 0.0) - 0.5 * p(i, j));
    return aufbau_density(shifted, sys.n_occupied());
  }
}

DenseMatrix core_guess(const PppSystem& sys) { return aufbau_density(sys.core, sys.n_occupied()); }

double hf_energy(const PppSystem& sys, const DenseMatrix& p) {
  const DenseMatrix f = build_fock(sys, p);
  double e = 0.0;
  for (std::size_t m = 0; m < sys.n_atoms; ++m)
    for (std::size_t n = 0; n < sys.n_atoms; ++n) e += p(m, n) * (sys.core(n, m) + f(n, m));
  return 0.5 * e;
}

Vector diis_residual(const DenseMatrix& f, const DenseMatrix& p) {
  if (f.rows() != p.rows() || f.cols() != p.cols()) throw std::invalid_argument("diis_residual: shape mismatch");
  const DenseMatrix c = f * p - p * f;
  return c.values();
}

DenseMatrix to_matrix(std::span<const double> flat, std::size_t n) {
  if (flat.size() != n * n) throw std::invalid_argument("to_matrix: length is not n*n");
  return DenseMatrix(n, n, Vector(flat.begin(), flat.end()));
}

ScfProblem::ScfProblem(std::shared_ptr<const PppSystem> system, std::size_t row_blocks)
    : system_(std::move(system)) {
  if (!system_) throw std::invalid_argument("ScfProblem: null system");
  const std::size_t n = system_->n_atoms;
  const BlockPartition rows = BlockPartition::even(n, row_blocks);
  std::vector<std::size_t> sizes;
  for (std::size_t b = 0; b < rows.num_blocks(); ++b) sizes.push_back(rows.block(b).size() * n);
  partition_ = BlockPartition::contiguous(n * n, sizes);
}

Vector ScfProblem::initial_iterate() const { return core_guess(*system_).values(); }

Vector ScfProblem::evaluate_targets(std::span<const Index> targets, std::span<const double> snapshot) const {
  const Vector full = apply_full_map(snapshot);
  Vector out(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) out[k] = full[targets[k]];
  return out;
}

Vector ScfProblem::apply_full_map(std::span<const double> x) const {
  return scf_map(*system_, to_matrix(x, system_->n_atoms)).values();
}

Vector ScfProblem::residual_vector(std::span<const double> x) const {
  const DenseMatrix p = to_matrix(x, system_->n_atoms);
  return diis_residual(build_fock(*system_, p), p);
}

Vector ScfProblem::residual_vector(std::span<const double> x, std::span<const double> /*gx*/) const {
  return residual_vector(x);
}

std::vector<double> ScfProblem::coupling_fraction(const BlockPartition& p) const {
  return std::vector<double>(p.num_blocks(), 1.0);
}

Vector ScfProblem::accel_basis(std::span<const double> x, std::span<const double> /*gx*/) const {
  return build_fock(*system_, to_matrix(x, system_->n_atoms)).values();
}

Vector ScfProblem::accel_realize(Vector combined) const {
  const std::size_t n = system_->n_atoms;
  DenseMatrix f = to_matrix(combined, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) f(i, j) = f(j, i) = 0.5 * (f(i, j) + f(j, i));
  return aufbau_density(f, system_->n_occupied()).values();
}

void ScfProblem::assemble(Vector& x) const {
  const std::size_t n = system_->n_atoms;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (x[i * n + j] + x[j * n + i]);
      x[i * n + j] = avg;
      x[j * n + i] = avg;
    }
}

std::optional<double> ScfProblem::energy(std::span<const double> x) const {
  if (!numkit::all_finite(x)) return std::nullopt;
  return hf_energy(*system_, to_matrix(x, system_->n_atoms));
}

}  // namespace asyncfp::ppscf
