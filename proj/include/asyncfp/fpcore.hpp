// SPDX-License-Identifier: Apache-2.0

// Partitioned fixed-point problems x = G(x): block structure, the global
// iterate with per-block vintages, native norms and coupling measurement.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncfp/numkit.hpp"

namespace asyncfp {

using Index = std::size_t;
using IndexSet = std::vector<Index>;

enum class NormKind { L2, Linf };
enum class EvaluationKind { PartialUpdate, FullMap };

const char* to_string(NormKind kind);

double native_norm(NormKind kind, std::span<const double> v);

/// Disjoint, non-empty index sets covering 0..n-1.
class BlockPartition {
 public:
  BlockPartition() = default;
  BlockPartition(std::size_t n, std::vector<IndexSet> blocks);

  /// Contiguous blocks with the given sizes, in order.
  static BlockPartition contiguous(std::size_t n, std::span<const std::size_t> sizes);
  /// `parts` contiguous blocks whose sizes differ by at most one.
  static BlockPartition even(std::size_t n, std::size_t parts);

  std::size_t n() const { return n_; }
  std::size_t num_blocks() const { return blocks_.size(); }
  std::span<const Index> block(std::size_t id) const { return blocks_.at(id); }
  std::size_t block_of(Index i) const { return owner_.at(i); }

 private:
  std::size_t n_ = 0;
  std::vector<IndexSet> blocks_;
  std::vector<std::size_t> owner_;
};

/// Coordinator-owned global iterate plus staleness bookkeeping.
struct IterateState {
  Vector x;
  std::vector<std::uint64_t> block_vintage;
  std::uint64_t global_step = 0;

  IterateState() = default;
  IterateState(Vector x0, std::size_t num_blocks) : x(std::move(x0)), block_vintage(num_blocks, 0) {}

  /// One applied update to `block_id`.
  void record_block_update(std::size_t block_id);
  /// One applied update that replaced the whole iterate.
  void record_global_update();
};

/// A partitioned fixed-point map with its residual definition.
///
/// Instances are immutable after construction; every const member may be
/// called concurrently.
class ProblemInstance {
 public:
  virtual ~ProblemInstance() = default;

  virtual std::string name() const = 0;
  virtual const BlockPartition& partition() const = 0;
  virtual NormKind native_norm() const = 0;
  virtual EvaluationKind evaluation_kind() const = 0;
  virtual Vector initial_iterate() const = 0;

  std::size_t dimension() const { return partition().n(); }

  /// G restricted to `targets`, evaluated on a (possibly stale) snapshot.
  virtual Vector evaluate_targets(std::span<const Index> targets,
                                  std::span<const double> snapshot) const = 0;

  /// G restricted to one block of the problem's own partition.
  Vector evaluate_block(std::size_t block_id, std::span<const double> snapshot) const;

  /// G applied consistently to the whole iterate. The default concatenates
  /// evaluate_block over all blocks.
  virtual Vector apply_full_map(std::span<const double> x) const;

  /// Native residual vector at x. The default is G(x) - x.
  virtual Vector residual_vector(std::span<const double> x) const;
  /// Same, reusing an already computed gx = G(x) when the definition needs it.
  virtual Vector residual_vector(std::span<const double> x, std::span<const double> gx) const;
  /// Whether residual_vector needs G(x).
  virtual bool residual_uses_map() const { return true; }
  /// Divisor applied to the residual norm (relative residuals).
  virtual double residual_scale() const { return 1.0; }

  double norm(std::span<const double> v) const { return asyncfp::native_norm(native_norm(), v); }
  double residual_norm_from(std::span<const double> residual) const;
  /// Native residual norm; +infinity when x or its residual is not finite.
  double residual_norm(std::span<const double> x) const;

  /// Per block of `p`: fraction of the block's dependence weight that stays
  /// inside the block.
  virtual std::vector<double> coupling_fraction(const BlockPartition& p) const = 0;

  /// Extrapolation space for the accelerator. Anderson combines these
  /// vectors and accel_realize maps the combination back to an iterate.
  virtual Vector accel_basis(std::span<const double> x, std::span<const double> gx) const;
  virtual Vector accel_realize(Vector combined) const { return combined; }
  /// Residual stored with each history entry. Defaults to residual_vector.
  virtual Vector accel_residual(std::span<const double> x, std::span<const double> gx) const {
    return residual_vector(x, gx);
  }

  /// Called by the coordinator after worker values were written into x.
  virtual void assemble(Vector& /*x*/) const {}

  virtual std::optional<double> energy(std::span<const double> /*x*/) const { return std::nullopt; }
  virtual std::optional<Vector> known_solution() const { return std::nullopt; }
};

}  // namespace asyncfp
