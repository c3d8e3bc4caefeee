// SPDX-License-Identifier: Apache-2.0

// Pieces shared by the sync and async runtimes.

#pragma once

#include <cmath>
#include <limits>
#include <random>

#include "asyncfp/engine.hpp"

namespace asyncfp::engine::detail {

inline std::mt19937_64 worker_stream(std::uint64_t seed, std::size_t worker) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(worker), 0x5eedu};
  return std::mt19937_64(seq);
}

inline std::mt19937_64 coordinator_stream(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xc00du};
  return std::mt19937_64(seq);
}

inline std::uint64_t completion_cap(const RunConfig& config) {
  return config.max_completions != 0 ? config.max_completions : 10 * config.max_worker_updates;
}

inline std::size_t selection_k(const Selection& s) {
  if (const auto* u = std::get_if<UniformRandom>(&s)) return u->k;
  if (const auto* g = std::get_if<GreedyTopK>(&s)) return g->k;
  return 0;
}

/// Stopping rules: divergence sentinel, residual tolerance and the optional
/// energy-change criterion.
class StopRule {
 public:
  StopRule(const ProblemInstance& problem, const RunConfig& config) : problem_(problem), config_(config) {}

  /// Records the state after an event; returns true when the run is over.
  bool observe(std::span<const double> x, double residual, RunTrace& trace) {
    trace.final_residual = residual;
    if (!std::isfinite(residual) || residual > config_.divergence_threshold) {
      trace.status = RunStatus::Diverged;
      return true;
    }
    bool energy_ok = true;
    if (config_.energy_tol) {
      const std::optional<double> e = problem_.energy(x);
      energy_ok = e && std::abs(*e - prev_energy_) < *config_.energy_tol;
      prev_energy_ = e.value_or(std::numeric_limits<double>::quiet_NaN());
    }
    if (residual <= config_.tol && energy_ok) {
      trace.status = RunStatus::Converged;
      return true;
    }
    return false;
  }

  /// Initial check: a starting point within tolerance counts as converged.
  bool observe_initial(std::span<const double> x, double residual, RunTrace& trace) {
    trace.initial_residual = residual;
    trace.final_residual = residual;
    if (config_.energy_tol) prev_energy_ = problem_.energy(x).value_or(std::numeric_limits<double>::quiet_NaN());
    if (!std::isfinite(residual) || residual > config_.divergence_threshold) {
      trace.status = RunStatus::Diverged;
      return true;
    }
    if (residual <= config_.tol) {
      trace.status = RunStatus::Converged;
      return true;
    }
    return false;
  }

 private:
  const ProblemInstance& problem_;
  const RunConfig& config_;
  double prev_energy_ = std::numeric_limits<double>::quiet_NaN();  // NaN fails every comparison
};

/// Marks the blocks touched by `targets` as updated at one new global step.
inline void record_update(IterateState& state, const BlockPartition& partition, std::span<const Index> targets) {
  ++state.global_step;
  for (Index i : targets) state.block_vintage[partition.block_of(i)] = state.global_step;
}

inline void finalize(const ProblemInstance& problem, Vector x, RunTrace& trace) {
  trace.final_energy = problem.energy(x);
  trace.final_iterate = std::move(x);
}

}  // namespace asyncfp::engine::detail
