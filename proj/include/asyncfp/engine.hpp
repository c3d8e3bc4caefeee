// SPDX-License-Identifier: Apache-2.0

// Execution runtimes for partitioned fixed-point iterations.
//
//   run_sync          bulk-synchronous rounds in simulated time
//   run_async_des     asynchronous iteration as a deterministic discrete-event
//                     simulation (events ordered by (fire_time, worker_id))
//   run_async_threads the same coordinator driven by real worker threads
//
// Work is counted in worker-updates (WU): partial updates applied to the
// global iterate. Coordinator-side map evaluations (acceleration, safeguard,
// greedy selection) are counted separately.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>

#include "asyncfp/accel.hpp"
#include "asyncfp/fpcore.hpp"

namespace asyncfp::engine {

enum class ExecutionMode { Sync, AsyncDes, AsyncThreads };

const char* to_string(ExecutionMode mode);
ExecutionMode parse_execution_mode(const std::string& text);

struct FaultProfile {
  double delay_mean = 0.0;  // seconds
  double delay_std = 0.0;   // seconds; delays are Gaussian clamped at 0
  double noise_std = 0.0;   // additive Gaussian noise on returned components
  double drop_prob = 0.0;
  std::optional<std::uint64_t> max_staleness;  // nullopt = unlimited

  void validate() const;
  bool operator==(const FaultProfile&) const = default;
};

/// How the async coordinator forms the map value of a history entry.
enum class AsyncHistory {
  /// Evaluated when the residual definition already needs G at the
  /// coordinator (no extra cost), assembled otherwise.
  Auto,
  /// Entry = (iterate at the previous firing, current global iterate): the
  /// map value is whatever the workers' returns assembled in between.
  Assembled,
  /// Entry = (current iterate, G(current iterate)) from a coordinator-side
  /// evaluation of the full map.
  Evaluated,
};

const char* to_string(AsyncHistory h);
AsyncHistory parse_async_history(const std::string& text);

struct FixedPartition {};
struct UniformRandom {
  std::size_t k = 1;
};
struct GreedyTopK {
  std::size_t k = 1;
};
using Selection = std::variant<FixedPartition, UniformRandom, GreedyTopK>;

const char* selection_name(const Selection& s);

struct RunConfig {
  ExecutionMode mode = ExecutionMode::Sync;
  std::size_t workers = 1;
  /// Empty, or one profile per worker.
  std::vector<FaultProfile> faults;
  double base_compute_time = 0.007;  // seconds per worker update
  accel::AccelMode accel = accel::MonitorOnly{};
  accel::AndersonParams anderson;
  AsyncHistory async_history = AsyncHistory::Auto;
  /// Damping of plain updates outside periodic mode (1 = none).
  double damping = 1.0;
  Selection selection = FixedPartition{};
  double tol = 1e-6;
  /// When set, convergence also requires |E_k - E_{k-1}| below this.
  std::optional<double> energy_tol;
  std::uint64_t max_worker_updates = 200000;
  /// Cap on worker completions (0 = 10 x max_worker_updates).
  std::uint64_t max_completions = 0;
  double divergence_threshold = 1e12;
  std::uint64_t rng_seed = 0;

  void validate(const ProblemInstance& problem) const;
  const FaultProfile& fault(std::size_t worker) const;
};

enum class EventKind { Apply, Drop, AccelAccept, AccelReject, StaleDiscard };
enum class RunStatus { Converged, BudgetExhausted, Diverged };

const char* to_string(EventKind kind);
const char* to_string(RunStatus status);

struct TraceEvent {
  double sim_time = 0.0;
  std::uint64_t worker_updates = 0;
  double residual = 0.0;  // coordinator residual after the event
  EventKind kind = EventKind::Apply;
  int worker = -1;  // -1 for coordinator events
  std::uint64_t staleness = 0;
  // Acceleration events: candidate residual and the residual it had to beat.
  double candidate_residual = 0.0;
  double reference_residual = 0.0;

  bool operator==(const TraceEvent&) const = default;
};

struct RunCounters {
  std::uint64_t completions = 0;
  std::uint64_t applied = 0;
  std::uint64_t dropped = 0;
  std::uint64_t stale_discarded = 0;
  std::uint64_t accel_accepted = 0;
  std::uint64_t accel_rejected = 0;
  std::uint64_t accel_fallbacks = 0;
  std::uint64_t accel_nonfinite = 0;
  std::uint64_t coordinator_map_evals = 0;
  std::uint64_t rounds = 0;
  std::uint64_t max_applied_staleness = 0;

  bool operator==(const RunCounters&) const = default;
};

struct RunTrace {
  std::vector<TraceEvent> events;
  RunStatus status = RunStatus::BudgetExhausted;
  double sim_time = 0.0;
  std::uint64_t worker_updates = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::optional<double> final_energy;
  Vector final_iterate;
  RunCounters counters;
  int fixed_point_label = -1;  // set by bench::summarize for problems with an energy

  bool operator==(const RunTrace&) const = default;
};

/// Result of passing one worker return through its fault profile.
struct FaultOutcome {
  enum class Kind { Apply, Drop, StaleDiscard } kind = Kind::Apply;
  Vector values;
};

FaultOutcome inject_faults(const FaultProfile& profile, Vector block_values, std::uint64_t staleness,
                           std::mt19937_64& rng);

/// Gaussian(mean, std) clamped at zero.
double sample_delay(const FaultProfile& profile, std::mt19937_64& rng);

/// Indices to update next. fixed_partition returns `own_block`; uniform
/// draws k distinct indices; greedy takes the k largest |residual| entries,
/// ties to the lowest index. Indices flagged in `excluded` are used only
/// when nothing else is left. The result is sorted ascending.
IndexSet select_targets(const Selection& strategy, std::span<const double> residual, std::size_t k,
                        std::mt19937_64& rng, std::span<const Index> own_block = {},
                        const std::vector<bool>* excluded = nullptr);

RunTrace run_sync(const ProblemInstance& problem, const RunConfig& config);
RunTrace run_async_des(const ProblemInstance& problem, const RunConfig& config);
RunTrace run_async_threads(const ProblemInstance& problem, const RunConfig& config);

/// Dispatches on config.mode.
RunTrace run(const ProblemInstance& problem, const RunConfig& config);

}  // namespace asyncfp::engine
