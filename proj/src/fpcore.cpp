// SPDX-License-Identifier: Apache-2.0

#include "asyncfp/fpcore.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace asyncfp {

const char* to_string(NormKind kind) { return kind == NormKind::L2 ? "L2" : "Linf"; }

double native_norm(NormKind kind, std::span<const double> v) {
  return kind == NormKind::L2 ? numkit::norm2(v) : numkit::norm_inf(v);
}

BlockPartition::BlockPartition(std::size_t n, std::vector<IndexSet> blocks)
    : n_(n), blocks_(std::move(blocks)), owner_(n, std::numeric_limits<std::size_t>::max()) {
  if (blocks_.empty()) throw std::invalid_argument("BlockPartition: no blocks");
  std::size_t covered = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].empty()) throw std::invalid_argument("BlockPartition: empty block");
    for (Index i : blocks_[b]) {
      if (i >= n_) throw std::invalid_argument("BlockPartition: index out of range");
      if (owner_[i] != std::numeric_limits<std::size_t>::max())
        throw std::invalid_argument("BlockPartition: blocks overlap");
      owner_[i] = b;
      ++covered;
    }
  }
  if (covered != n_) throw std::invalid_argument("BlockPartition: blocks do not cover 0..n-1");
}

BlockPartition BlockPartition::contiguous(std::size_t n, std::span<const std::size_t> sizes) {
  std::vector<IndexSet> blocks;
  Index next = 0;
  for (std::size_t s : sizes) {
    IndexSet b(s);
    for (std::size_t k = 0; k < s; ++k) b[k] = next++;
    blocks.push_back(std::move(b));
  }
  return BlockPartition(n, std::move(blocks));
}

BlockPartition BlockPartition::even(std::size_t n, std::size_t parts) {
  if (parts == 0 || parts > n) throw std::invalid_argument("BlockPartition::even: need 1 <= parts <= n");
  std::vector<std::size_t> sizes(parts, n / parts);
  for (std::size_t k = 0; k < n % parts; ++k) ++sizes[k];
  return contiguous(n, sizes);
}

void IterateState::record_block_update(std::size_t block_id) {
  ++global_step;
  block_vintage.at(block_id) = global_step;
}

void IterateState::record_global_update() {
  ++global_step;
  for (auto& v : block_vintage) v = global_step;
}

Vector ProblemInstance::evaluate_block(std::size_t block_id, std::span<const double> snapshot) const {
  if (snapshot.size() != dimension()) throw std::invalid_argument("evaluate_block: snapshot length mismatch");
  if (!numkit::all_finite(snapshot)) throw NumericError("evaluate_block: non-finite snapshot");
  return evaluate_targets(partition().block(block_id), snapshot);
}

Vector ProblemInstance::apply_full_map(std::span<const double> x) const {
  if (x.size() != dimension()) throw std::invalid_argument("apply_full_map: length mismatch");
  if (!numkit::all_finite(x)) throw NumericError("apply_full_map: non-finite iterate");
  Vector gx(x.size());
  const BlockPartition& part = partition();
  for (std::size_t b = 0; b < part.num_blocks(); ++b) {
    const Vector vals = evaluate_targets(part.block(b), x);
    const auto idx = part.block(b);
    for (std::size_t k = 0; k < idx.size(); ++k) gx[idx[k]] = vals[k];
  }
  return gx;
}

Vector ProblemInstance::residual_vector(std::span<const double> x) const {
  if (!residual_uses_map()) throw std::logic_error("residual_vector: override required");
  const Vector gx = apply_full_map(x);
  return residual_vector(x, gx);
}

Vector ProblemInstance::residual_vector(std::span<const double> x, std::span<const double> gx) const {
  Vector r(gx.begin(), gx.end());
  numkit::axpy(-1.0, x, r);
  return r;
}

double ProblemInstance::residual_norm_from(std::span<const double> residual) const {
  const double v = norm(residual) / residual_scale();
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

double ProblemInstance::residual_norm(std::span<const double> x) const {
  if (!numkit::all_finite(x)) return std::numeric_limits<double>::infinity();
  try {
    return residual_norm_from(residual_vector(x));
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  }
}

Vector ProblemInstance::accel_basis(std::span<const double> /*x*/, std::span<const double> gx) const {
  return Vector(gx.begin(), gx.end());
}

}  // namespace asyncfp
