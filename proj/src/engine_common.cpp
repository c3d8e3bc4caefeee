// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "asyncfp/engine.hpp"

namespace asyncfp::engine {

const char* to_string(ExecutionMode mode) {
  switch (mode) {
    case ExecutionMode::Sync: return "sync";
    case ExecutionMode::AsyncDes: return "async_des";
    case ExecutionMode::AsyncThreads: return "async_threads";
  }
  return "?";
}

ExecutionMode parse_execution_mode(const std::string& text) {
  if (text == "sync") return ExecutionMode::Sync;
  if (text == "async_des" || text == "async") return ExecutionMode::AsyncDes;
  if (text == "async_threads") return ExecutionMode::AsyncThreads;
  throw std::invalid_argument("unknown execution mode '" + text + "'");
}

const char* to_string(AsyncHistory h) {
  switch (h) {
    case AsyncHistory::Auto: return "auto";
    case AsyncHistory::Assembled: return "assembled";
    case AsyncHistory::Evaluated: return "evaluated";
  }
  return "?";
}

AsyncHistory parse_async_history(const std::string& text) {
  if (text == "auto") return AsyncHistory::Auto;
  if (text == "assembled") return AsyncHistory::Assembled;
  if (text == "evaluated") return AsyncHistory::Evaluated;
  throw std::invalid_argument("unknown async history source '" + text + "'");
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Apply: return "apply";
    case EventKind::Drop: return "drop";
    case EventKind::AccelAccept: return "accel_accept";
    case EventKind::AccelReject: return "accel_reject";
    case EventKind::StaleDiscard: return "stale_discard";
  }
  return "?";
}

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Converged: return "converged";
    case RunStatus::BudgetExhausted: return "budget_exhausted";
    case RunStatus::Diverged: return "diverged";
  }
  return "?";
}

const char* selection_name(const Selection& s) {
  if (std::holds_alternative<FixedPartition>(s)) return "fixed_partition";
  if (std::holds_alternative<UniformRandom>(s)) return "uniform_random";
  return "greedy_topk";
}

void FaultProfile::validate() const {
  auto nonneg = [](double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("fault profile: ") + what + " must be finite and >= 0");
  };
  nonneg(delay_mean, "delay_mean");
  nonneg(delay_std, "delay_std");
  nonneg(noise_std, "noise_std");
  nonneg(drop_prob, "drop_prob");
  if (drop_prob > 1.0) throw std::invalid_argument("fault profile: drop_prob must be <= 1");
}

void RunConfig::validate(const ProblemInstance& problem) const {
  if (workers < 1) throw std::invalid_argument("run config: workers must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("run config: tol must be > 0");
  if (max_worker_updates == 0) throw std::invalid_argument("run config: max_worker_updates must be > 0");
  if (!(base_compute_time >= 0.0) || !std::isfinite(base_compute_time))
    throw std::invalid_argument("run config: base_compute_time must be finite and >= 0");
  if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("run config: damping must be in (0, 1]");
  if (energy_tol && !(*energy_tol > 0.0)) throw std::invalid_argument("run config: energy_tol must be > 0");
  if (!(divergence_threshold > 0.0)) throw std::invalid_argument("run config: divergence_threshold must be > 0");
  if (!faults.empty() && faults.size() != workers)
    throw std::invalid_argument("run config: need one fault profile per worker (got " + std::to_string(faults.size()) +
                                " for " + std::to_string(workers) + " workers)");
  for (const auto& f : faults) f.validate();
  accel::validate(accel);
  anderson.validate();

  const std::size_t n = problem.dimension();
  if (std::holds_alternative<FixedPartition>(selection)) {
    if (problem.partition().num_blocks() != workers)
      throw std::invalid_argument("run config: fixed_partition needs one block per worker (" +
                                  std::to_string(problem.partition().num_blocks()) + " blocks, " +
                                  std::to_string(workers) + " workers)");
  } else {
    const std::size_t k = std::visit(
        [](const auto& s) -> std::size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, FixedPartition>) return 0;
          else return s.k;
        },
        selection);
    if (k < 1 || k > n) throw std::invalid_argument("run config: selection k must be in [1, n]");
  }
}

const FaultProfile& RunConfig::fault(std::size_t worker) const {
  static const FaultProfile kNone{};
  if (faults.empty()) return kNone;
  return faults.at(worker);
}

double sample_delay(const FaultProfile& profile, std::mt19937_64& rng) {
  if (profile.delay_std == 0.0) return profile.delay_mean;
  std::normal_distribution<double> dist(profile.delay_mean, profile.delay_std);
  return std::max(0.0, dist(rng));
}

FaultOutcome inject_faults(const FaultProfile& profile, Vector block_values, std::uint64_t staleness,
                           std::mt19937_64& rng) {
  FaultOutcome out;
  if (profile.drop_prob > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < profile.drop_prob) {
      out.kind = FaultOutcome::Kind::Drop;
      return out;
    }
  }
  if (profile.max_staleness && staleness > *profile.max_staleness) {
    out.kind = FaultOutcome::Kind::StaleDiscard;
    return out;
  }
  if (profile.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, profile.noise_std);
    for (double& v : block_values) v += noise(rng);
  }
  out.values = std::move(block_values);
  return out;
}

IndexSet select_targets(const Selection& strategy, std::span<const double> residual, std::size_t k,
                        std::mt19937_64& rng, std::span<const Index> own_block, const std::vector<bool>* excluded) {
  if (std::holds_alternative<FixedPartition>(strategy)) return IndexSet(own_block.begin(), own_block.end());

  const std::size_t n = residual.size();
  if (k > n) throw std::invalid_argument("select_targets: k exceeds n");
  if (excluded && excluded->size() != n) throw std::invalid_argument("select_targets: exclusion mask length mismatch");

  // Free indices first, excluded ones only as a last resort.
  IndexSet free_pool, busy_pool;
  free_pool.reserve(n);
  for (Index i = 0; i < n; ++i) (excluded && (*excluded)[i] ? busy_pool : free_pool).push_back(i);

  IndexSet out;
  out.reserve(k);
  if (std::holds_alternative<UniformRandom>(strategy)) {
    auto draw = [&](IndexSet& pool, std::size_t count) {
      // Partial Fisher-Yates.
      for (std::size_t j = 0; j < count; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
        std::swap(pool[j], pool[pick(rng)]);
        out.push_back(pool[j]);
      }
    };
    const std::size_t from_free = std::min(k, free_pool.size());
    draw(free_pool, from_free);
    if (from_free < k) draw(busy_pool, k - from_free);
  } else {
    auto by_residual = [&](Index a, Index b) {
      const double ra = std::abs(residual[a]), rb = std::abs(residual[b]);
      if (ra != rb) return ra > rb;
      return a < b;
    };
    auto take = [&](IndexSet& pool, std::size_t count) {
      std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count), pool.end(), by_residual);
      out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    };
    const std::size_t from_free = std::min(k, free_pool.size());
    take(free_pool, from_free);
    if (from_free < k) take(busy_pool, k - from_free);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunTrace run(const ProblemInstance& problem, const RunConfig& config) {
  switch (config.mode) {
    case ExecutionMode::Sync: return run_sync(problem, config);
    case ExecutionMode::AsyncDes: return run_async_des(problem, config);
    case ExecutionMode::AsyncThreads: return run_async_threads(problem, config);
  }
  throw std::invalid_argument("run: unknown mode");
}

}  // namespace asyncfp::engine
