// SPDX-License-Identifier: Apache-2.0

#include "asyncfp/lapjac.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asyncfp::lapjac {

Vector CsrMatrix::multiply(std::span<const double> x) const {
  Vector y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    y[i] = s;
  }
  return y;
}

SparseSystem assemble_laplacian(std::size_t nx, std::size_t ny, RightHandSide rhs) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("assemble_laplacian: grid must be at least 2x2");
  SparseSystem sys;
  sys.nx = nx;
  sys.ny = ny;
  const std::size_t n = nx * ny;
  CsrMatrix& a = sys.a;
  a.n = n;
  a.row_ptr.reserve(n + 1);
  a.row_ptr.push_back(0);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const Index row = j * nx + i;
      // Column order: south, west, centre, east, north (ascending index).
      if (j > 0) {
        a.col.push_back(row - nx);
        a.val.push_back(-1.0);
      }
      if (i > 0) {
        a.col.push_back(row - 1);
        a.val.push_back(-1.0);
      }
      a.col.push_back(row);
      a.val.push_back(4.0);
      if (i + 1 < nx) {
        a.col.push_back(row + 1);
        a.val.push_back(-1.0);
      }
      if (j + 1 < ny) {
        a.col.push_back(row + nx);
        a.val.push_back(-1.0);
      }
      a.row_ptr.push_back(a.col.size());
    }
  sys.diagonal.assign(n, 4.0);
  if (rhs == RightHandSide::UnitSolution) {
    sys.x_star = Vector(n, 1.0);
    sys.b = a.multiply(*sys.x_star);
  } else {
    sys.b.assign(n, 1.0);
  }
  sys.spectral_radius = estimate_jacobi_spectral_radius(a, sys.diagonal);
  return sys;
}

namespace {

/// Number of eigenvalues of the symmetric tridiagonal (alpha, beta) below x.
std::size_t sturm_count(const Vector& alpha, const Vector& beta, double x) {
  std::size_t count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double off = i == 0 ? 0.0 : beta[i - 1] * beta[i - 1];
    q = alpha[i] - x - (i == 0 ? 0.0 : off / q);
    if (q == 0.0) q = -1e-300;
    if (q < 0.0) ++count;
  }
  return count;
}

double tridiagonal_extreme(const Vector& alpha, const Vector& beta, bool largest) {
  double bound = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double left = i == 0 ? 0.0 : std::abs(beta[i - 1]);
    const double right = i + 1 < alpha.size() ? std::abs(beta[i]) : 0.0;
    bound = std::max(bound, std::abs(alpha[i]) + left + right);
  }
  double lo = -bound, hi = bound;
  const std::size_t target = largest ? alpha.size() - 1 : 0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * bound; ++it) {
    const double mid = 0.5 * (lo + hi);
    // Index `target` (ascending) lies below mid iff more than target eigenvalues are.
    if (sturm_count(alpha, beta, mid) > target) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double estimate_jacobi_spectral_radius(const CsrMatrix& a, std::span<const double> diagonal,
                                       std::size_t iterations) {
  const std::size_t n = a.n;
  // S = D^-1/2 (L + U) D^-1/2 is symmetric and similar to D^-1 (L + U).
  Vector inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(diagonal[i]);
  auto apply_s = [&](const Vector& v) {
    Vector w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
        if (a.col[k] != i) s -= a.val[k] * inv_sqrt[a.col[k]] * v[a.col[k]];
      w[i] = s * inv_sqrt[i];
    }
    return w;
  };
  // Lanczos without reorthogonalization: ghost copies only duplicate
  // converged extreme Ritz values, which is all this needs.
  Vector alpha, beta;
  Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Vector v_prev(n, 0.0);
  double b_prev = 0.0;
  for (std::size_t it = 0; it < std::min(iterations, n); ++it) {
    Vector w = apply_s(v);
    const double a_k = numkit::dot(v, w);
    for (std::size_t i = 0; i < n; ++i) w[i] -= a_k * v[i] + b_prev * v_prev[i];
    alpha.push_back(a_k);
    const double b_k = std::sqrt(numkit::dot(w, w));
    if (b_k < 1e-14) break;
    beta.push_back(b_k);
    for (double& x : w) x /= b_k;
    v_prev = std::move(v);
    v = std::move(w);
    b_prev = b_k;
  }
  return std::max(std::abs(tridiagonal_extreme(alpha, beta, true)),
                  std::abs(tridiagonal_extreme(alpha, beta, false)));
}

namespace {

template <typename Lookup>
Vector sweep_block(const SparseSystem& sys, std::span<const Index> block, std::span<const double> snapshot,
                   std::size_t n_sweeps, Lookup local_of) {
  const CsrMatrix& a = sys.a;
  Vector cur(block.size());
  for (std::size_t k = 0; k < block.size(); ++k) cur[k] = snapshot[block[k]];
  Vector next(block.size());
  for (std::size_t s = 0; s < n_sweeps; ++s) {
    for (std::size_t k = 0; k < block.size(); ++k) {
      const Index row = block[k];
      double acc = sys.b[row];
      for (std::size_t e = a.row_ptr[row]; e < a.row_ptr[row + 1]; ++e) {
        const Index c = a.col[e];
        if (c == row) continue;
        const std::ptrdiff_t local = local_of(c);
        acc -= a.val[e] * (local >= 0 ? cur[static_cast<std::size_t>(local)] : snapshot[c]);
      }
      next[k] = acc / sys.diagonal[row];
    }
    cur.swap(next);
  }
  return cur;
}

}  // namespace

Vector local_sweeps(const SparseSystem& system, std::span<const Index> block, std::span<const double> snapshot,
                    std::size_t n_sweeps) {
  if (n_sweeps == 0) throw std::invalid_argument("local_sweeps: n_sweeps must be >= 1");
  if (snapshot.size() != system.n()) throw std::invalid_argument("local_sweeps: snapshot length mismatch");
  if (block.empty()) return {};
  bool contiguous = true;
  for (std::size_t k = 1; k < block.size() && contiguous; ++k) contiguous = block[k] == block[0] + k;
  if (contiguous) {
    const Index lo = block.front();
    const Index hi = block.back() + 1;
    return sweep_block(system, block, snapshot, n_sweeps, [lo, hi](Index c) -> std::ptrdiff_t {
      return (c >= lo && c < hi) ? static_cast<std::ptrdiff_t>(c - lo) : -1;
    });
  }
  std::vector<std::ptrdiff_t> local(system.n(), -1);
  for (std::size_t k = 0; k < block.size(); ++k) local[block[k]] = static_cast<std::ptrdiff_t>(k);
  return sweep_block(system, block, snapshot, n_sweeps, [&local](Index c) { return local[c]; });
}

BlockPartition make_row_block_partition(std::size_t nx, std::size_t ny, std::size_t rows_per_block) {
  if (rows_per_block == 0) throw std::invalid_argument("make_row_block_partition: rows_per_block must be >= 1");
  std::vector<std::size_t> sizes;
  for (std::size_t row = 0; row < ny; row += rows_per_block) {
    const std::size_t rows = std::min(rows_per_block, ny - row);
    sizes.push_back(rows * nx);
  }
  return BlockPartition::contiguous(nx * ny, sizes);
}

JacobiProblem::JacobiProblem(std::shared_ptr<const SparseSystem> system, BlockPartition partition,
                             std::size_t sweeps)
    : system_(std::move(system)), partition_(std::move(partition)), sweeps_(sweeps) {
  if (!system_) throw std::invalid_argument("JacobiProblem: null system");
  if (partition_.n() != system_->n()) throw std::invalid_argument("JacobiProblem: partition size mismatch");
  if (sweeps_ == 0) throw std::invalid_argument("JacobiProblem: sweeps must be >= 1");
  b_norm_ = numkit::norm2(system_->b);
  if (b_norm_ == 0.0) b_norm_ = 1.0;
}

Vector JacobiProblem::evaluate_targets(std::span<const Index> targets, std::span<const double> snapshot) const {
  return local_sweeps(*system_, targets, snapshot, sweeps_);
}

Vector JacobiProblem::residual_vector(std::span<const double> x) const {
  if (x.size() != system_->n()) throw std::invalid_argument("residual_vector: length mismatch");
  Vector r = system_->a.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = system_->b[i] - r[i];
  return r;
}

Vector JacobiProblem::residual_vector(std::span<const double> x, std::span<const double> /*gx*/) const {
  return residual_vector(x);
}

std::vector<double> JacobiProblem::coupling_fraction(const BlockPartition& p) const {
  if (p.n() != system_->n()) throw std::invalid_argument("coupling_fraction: partition size mismatch");
  const CsrMatrix& a = system_->a;
  std::vector<double> out(p.num_blocks(), 0.0);
  for (std::size_t blk = 0; blk < p.num_blocks(); ++blk) {
    double inside = 0.0;
    double total = 0.0;
    for (Index row : p.block(blk))
      for (std::size_t e = a.row_ptr[row]; e < a.row_ptr[row + 1]; ++e) {
        const double w = std::abs(a.val[e]);
        total += w;
        if (p.block_of(a.col[e]) == blk) inside += w;
      }
    out[blk] = total > 0.0 ? inside / total : 1.0;
  }
  return out;
}

}  // namespace asyncfp::lapjac
