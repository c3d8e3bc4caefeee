// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "asyncfp/accel.hpp"
#include "asyncfp/engine.hpp"
#include "asyncfp/ppscf.hpp"

using namespace asyncfp;
using namespace asyncfp::ppscf;
using numkit::DenseMatrix;

namespace {

DenseMatrix dimer_bonding_density() { return DenseMatrix(2, 2, {1.0, 1.0, 1.0, 1.0}); }

double trace(const DenseMatrix& p) {
  double t = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) t += p(i, i);
  return t;
}

double frobenius(const Vector& v) { return numkit::norm2(v); }

/// Plain SCF iteration to a tight fixed point.
DenseMatrix converge(const PppSystem& sys, double damping, std::vector<double>* energies = nullptr) {
  DenseMatrix p = core_guess(sys);
  for (int it = 0; it < 5000; ++it) {
    if (energies) energies->push_back(hf_energy(sys, p));
    const DenseMatrix next = scf_map(sys, p);
    const DenseMatrix mixed = (1.0 - damping) * p + damping * next;
    const double change = (mixed - p).frobenius_norm();
    p = mixed;
    if (change < 1e-13) break;
  }
  return p;
}

/// Pulay DIIS coded directly on Fock matrices: B c = 0 with sum c = 1 via
/// the bordered system, solved by Gaussian elimination.
std::vector<DenseMatrix> direct_pulay(const PppSystem& sys, std::size_t iterations) {
  std::vector<DenseMatrix> densities{core_guess(sys)};
  std::vector<DenseMatrix> focks;
  std::vector<Vector> errors;
  for (std::size_t k = 0; k < iterations; ++k) {
    const DenseMatrix& p = densities.back();
    focks.push_back(build_fock(sys, p));
    errors.push_back(diis_residual(focks.back(), p));
    const std::size_t m = focks.size();
    std::vector<Vector> b(m + 1, Vector(m + 2, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) b[i][j] = numkit::dot(errors[i], errors[j]);
      b[i][m] = 1.0;
      b[m][i] = 1.0;
    }
    b[m][m + 1] = 1.0;
    for (std::size_t c = 0; c <= m; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r <= m; ++r)
        if (std::abs(b[r][c]) > std::abs(b[piv][c])) piv = r;
      std::swap(b[c], b[piv]);
      for (std::size_t r = 0; r <= m; ++r) {
        if (r == c) continue;
        const double f = b[r][c] / b[c][c];
        for (std::size_t q = c; q <= m + 1; ++q) b[r][q] -= f * b[c][q];
      }
    }
    DenseMatrix f(sys.n_atoms, sys.n_atoms);
    for (std::size_t i = 0; i < m; ++i) f = f + (b[i][m + 1] / b[i][i]) * focks[i];
    const DenseMatrix sym = 0.5 * (f + f.transpose());
    densities.push_back(aufbau_density(sym, sys.n_occupied()));
  }
  return densities;
}

}  // namespace

TEST(Ohno, Examples) {
  EXPECT_DOUBLE_EQ(ohno_gamma(2.0, 0.0), 2.0);
  EXPECT_NEAR(ohno_gamma(2.0, 1.0), 2.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(ohno_gamma(2.0, 1e6) * 1e6, 1.0, 1e-9);
}

TEST(PppChain, Structure) {
  const PppSystem sys = make_ppp_chain(6, 2.0);
  EXPECT_EQ(sys.n_electrons, 6u);
  EXPECT_EQ(sys.u, 2.0);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(sys.gamma(i, i), 2.0);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(sys.gamma(i, j), sys.gamma(j, i));
      EXPECT_GT(sys.gamma(i, j), 0.0);
      EXPECT_EQ(sys.core(i, j), (i + 1 == j || j + 1 == i) ? -1.0 : 0.0);
    }
  }
  EXPECT_THROW(make_ppp_chain(4, 1.0, -1.0, 3), std::invalid_argument);
}

TEST(BuildFock, ZeroDensityAndZeroRepulsion) {
  const PppSystem sys = make_ppp_chain(6, 3.0);
  EXPECT_EQ(build_fock(sys, DenseMatrix(6, 6)).values(), sys.core.values());
  const PppSystem free = make_ppp_chain(5, 0.0, -1.0, 4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix p(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j <= i; ++j) p(i, j) = p(j, i) = u(rng);
  EXPECT_EQ(build_fock(free, p).values(), free.core.values());
}

TEST(BuildFock, DimerHandSubstitution) {
  const PppSystem sys = make_ppp_chain(2, 2.0);
  const DenseMatrix f = build_fock(sys, dimer_bonding_density());
  const double g11 = 2.0, g12 = 2.0 / std::sqrt(5.0);
  EXPECT_NEAR(f(0, 0), 0.5 * g11 + g12, 1e-15);
  EXPECT_NEAR(f(1, 1), 0.5 * g11 + g12, 1e-15);
  EXPECT_NEAR(f(0, 1), -1.0 - 0.5 * g12, 1e-15);
  EXPECT_EQ(f(0, 1), f(1, 0));
}

TEST(ScfMap, DimerFixedPoints) {
  const PppSystem free = make_ppp_chain(2, 0.0);
  const DenseMatrix p0 = core_guess(free);
  const DenseMatrix p1 = scf_map(free, p0);
  for (double v : p1.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  for (double v : p0.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_NEAR(hf_energy(free, p1), 2.0 * free.t, 1e-12);

  for (double u : {0.5, 2.0, 4.0}) {
    const PppSystem sys = make_ppp_chain(2, u);
    const DenseMatrix p = scf_map(sys, dimer_bonding_density());
    for (double v : p.values()) EXPECT_NEAR(v, 1.0, 1e-12) << "U=" << u;
  }
}

TEST(ScfMap, PropertyTracePreserved) {
  const PppSystem sys = make_ppp_chain(8, 2.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    DenseMatrix p(8, 8);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j <= i; ++j) p(i, j) = p(j, i) = u(rng);
    const DenseMatrix next = scf_map(sys, p);
    ASSERT_NEAR(trace(next), 8.0, 1e-8);
    ASSERT_LE((next - next.transpose()).frobenius_norm(), 1e-10);
  }
}

TEST(HfEnergy, ZeroDensity) { EXPECT_EQ(hf_energy(make_ppp_chain(4, 2.0), DenseMatrix(4, 4)), 0.0); }

TEST(HfEnergy, DecreasesAlongDampedSyncScf) {
  const PppSystem sys = make_ppp_chain(8, 2.0);
  std::vector<double> energies;
  const DenseMatrix p = converge(sys, 0.3, &energies);
  // The brute-force fixed point from undamped iteration must agree.
  const DenseMatrix q = converge(sys, 1.0);
  EXPECT_NEAR(hf_energy(sys, p), hf_energy(sys, q), 1e-10);
  ASSERT_GT(energies.size(), 5u);
  for (std::size_t k = 1; k < energies.size(); ++k) ASSERT_LE(energies[k], energies[k - 1] + 1e-12) << k;
}

TEST(DiisResidual, CommutatorProperties) {
  const DenseMatrix a(2, 2, {2.0, 0.0, 0.0, 3.0});
  const DenseMatrix b(2, 2, {5.0, 0.0, 0.0, -1.0});
  for (double v : diis_residual(a, b)) EXPECT_EQ(v, 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix f(5, 5), p(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      f(i, j) = f(j, i) = u(rng);
      p(i, j) = p(j, i) = u(rng);
    }
  const DenseMatrix c = to_matrix(diis_residual(f, p), 5);
  EXPECT_LE((c + c.transpose()).frobenius_norm(), 1e-14);
}

TEST(Convergence, EightAtomInvariants) {
  const PppSystem sys = make_ppp_chain(8, 2.0);
  const DenseMatrix p = converge(sys, 1.0);
  const DenseMatrix f = build_fock(sys, p);
  EXPECT_LT(frobenius(diis_residual(f, p)), 1e-10);
  EXPECT_LE((p * p - 2.0 * p).frobenius_norm(), 1e-6);
  EXPECT_NEAR(trace(p), 8.0, 1e-10);
  EXPECT_LE((scf_map(sys, p) - p).frobenius_norm(), 1e-9);
  // U/|t| = 2, 8 atoms, unit spacing.
  EXPECT_NEAR(hf_energy(sys, p), 5.450433638573, 1e-9);
}

TEST(Convergence, PropertyResidualsCoVanish) {
  // Along a converging run the commutator and the map residual shrink together.
  const PppSystem sys = make_ppp_chain(8, 2.0);
  DenseMatrix p = core_guess(sys);
  for (int it = 0; it < 60; ++it) {
    const double comm = frobenius(diis_residual(build_fock(sys, p), p));
    const DenseMatrix next = scf_map(sys, p);
    const double step = (next - p).frobenius_norm();
    if (comm < 1e-9) {
      EXPECT_LT(step, 1e-6);
    }
    if (step < 1e-9) {
      EXPECT_LT(comm, 1e-6);
    }
    p = next;
  }
}

TEST(Diis, AndersonOnFockMatchesDirectPulay) {
  // Eight atoms keep the commutator history well conditioned; with four the
  // antisymmetric residual has only six free entries.
  const PppSystem sys = make_ppp_chain(8, 2.0);
  auto shared = std::make_shared<const PppSystem>(sys);
  const ScfProblem problem(shared, 2);
  const std::size_t iterations = 8;
  const std::vector<DenseMatrix> reference = direct_pulay(sys, iterations);

  accel::AndersonParams params;
  params.window = 50;
  accel::AndersonWindow window(params);
  Vector x = problem.initial_iterate();
  for (std::size_t k = 0; k < iterations; ++k) {
    ASSERT_LE((to_matrix(x, 8) - reference[k]).frobenius_norm(), 1e-12) << "iteration " << k;
    if (frobenius(problem.residual_vector(x)) < 1e-11) break;
    const Vector gx = problem.apply_full_map(x);
    window.push(x, problem.accel_basis(x, gx), problem.accel_residual(x, gx));
    x = problem.accel_realize(accel::anderson_candidate(window).combined);
  }
}

TEST(ScfProblem, RowAssemblyReproducesSyncSequence) {
  // Row-partitioned workers computing the full map and returning their rows,
  // then symmetrization, must follow plain SCF exactly.
  auto shared = std::make_shared<const PppSystem>(make_ppp_chain(8, 2.0));
  const ScfProblem problem(shared, 4);
  engine::RunConfig config;
  config.workers = 4;
  config.tol = 1e-9;
  config.max_worker_updates = 4 * 12;
  const engine::RunTrace trace = engine::run_sync(problem, config);

  DenseMatrix p = core_guess(*shared);
  for (std::uint64_t r = 0; r < trace.counters.rounds; ++r) p = scf_map(*shared, p);
  ASSERT_EQ(trace.final_iterate.size(), 64u);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(trace.final_iterate[i], p.values()[i]);
}
