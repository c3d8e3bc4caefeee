// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>

#include "engine_detail.hpp"

namespace asyncfp::engine {

namespace {

struct Task {
  std::size_t worker = 0;
  IndexSet targets;
  Vector snapshot;
  std::uint64_t launch_step = 0;
  double delay = 0.0;
};

/// Coordinator state machine shared by the discrete-event and threaded
/// runtimes. It alone owns the global iterate.
class Coordinator {
 public:
  Coordinator(const ProblemInstance& problem, const RunConfig& config)
      : problem_(problem),
        config_(config),
        partition_(problem.partition()),
        window_(config.anderson),
        stop_(problem, config),
        fixed_(std::holds_alternative<FixedPartition>(config.selection)),
        accelerate_(accel::fires(config.accel)),
        per_extrapolation_(accel::pushes_per_extrapolation(config.accel)),
        alpha_(accel::plain_damping(config.accel, config.damping)),
        completion_cap_(detail::completion_cap(config)) {
    config.validate(problem);
    state_ = IterateState(problem.initial_iterate(), partition_.num_blocks());
    for (std::size_t l = 0; l < config.workers; ++l) worker_rng_.push_back(detail::worker_stream(config.rng_seed, l));
    coord_rng_ = detail::coordinator_stream(config.rng_seed);
    in_flight_.resize(config.workers);
    evaluated_history_ = config.async_history == AsyncHistory::Evaluated ||
                         (config.async_history == AsyncHistory::Auto && problem.residual_uses_map());
    refresh_residual();
    done_ = stop_.observe_initial(state_.x, residual_, trace_);
  }

  bool done() const { return done_; }

  Task launch(std::size_t worker) {
    Task task;
    task.worker = worker;
    if (fixed_) {
      const auto block = partition_.block(worker);
      task.targets.assign(block.begin(), block.end());
    } else {
      const Vector r = problem_.residual_vector(state_.x);
      if (problem_.residual_uses_map()) ++trace_.counters.coordinator_map_evals;
      std::vector<bool> busy(state_.x.size(), false);
      for (std::size_t l = 0; l < in_flight_.size(); ++l)
        if (l != worker)
          for (Index i : in_flight_[l]) busy[i] = true;
      task.targets = select_targets(config_.selection, r, detail::selection_k(config_.selection), coord_rng_, {}, &busy);
    }
    in_flight_[worker] = task.targets;
    task.snapshot = state_.x;
    task.launch_step = state_.global_step;
    task.delay = sample_delay(config_.fault(worker), worker_rng_[worker]);
    return task;
  }

  /// Handles one worker return; `values` is empty when the worker failed.
  void complete(const Task& task, std::optional<Vector> values, double now) {
    const std::size_t worker = task.worker;
    trace_.sim_time = std::max(trace_.sim_time, now);
    ++trace_.counters.completions;
    in_flight_[worker].clear();
    const std::uint64_t staleness = state_.global_step - task.launch_step;

    EventKind kind = EventKind::Drop;
    FaultOutcome out;
    if (values) {
      out = inject_faults(config_.fault(worker), std::move(*values), staleness, worker_rng_[worker]);
      kind = out.kind == FaultOutcome::Kind::Apply  ? EventKind::Apply
             : out.kind == FaultOutcome::Kind::Drop ? EventKind::Drop
                                                    : EventKind::StaleDiscard;
    }

    if (kind == EventKind::Apply) {
      Vector& x = state_.x;
      for (std::size_t k = 0; k < task.targets.size(); ++k) {
        const Index i = task.targets[k];
        x[i] = alpha_ == 1.0 ? out.values[k] : (1.0 - alpha_) * x[i] + alpha_ * out.values[k];
      }
      problem_.assemble(x);
      detail::record_update(state_, partition_, task.targets);
      ++trace_.worker_updates;
      ++trace_.counters.applied;
      trace_.counters.max_applied_staleness = std::max(trace_.counters.max_applied_staleness, staleness);
      refresh_residual();
    } else if (kind == EventKind::Drop) {
      ++trace_.counters.dropped;
    } else {
      ++trace_.counters.stale_discarded;
    }

    TraceEvent ev;
    ev.sim_time = trace_.sim_time;
    ev.worker_updates = trace_.worker_updates;
    ev.residual = residual_;
    ev.kind = kind;
    ev.worker = static_cast<int>(worker);
    ev.staleness = staleness;
    trace_.events.push_back(ev);

    if (kind == EventKind::Apply) {
      done_ = stop_.observe(state_.x, residual_, trace_);
      if (!done_ && accelerate_ && ++applied_since_push_ >= config_.anderson.fire_every) {
        applied_since_push_ = 0;
        fire();
      }
    }
    if (!done_ && (trace_.worker_updates >= config_.max_worker_updates || trace_.counters.completions >= completion_cap_)) {
      trace_.status = RunStatus::BudgetExhausted;
      done_ = true;
    }
  }

  RunTrace finish(double now) {
    trace_.sim_time = std::max(trace_.sim_time, now);
    trace_.final_residual = residual_;
    detail::finalize(problem_, std::move(state_.x), trace_);
    return std::move(trace_);
  }

 private:
  // Monitor residual at the current iterate, keeping G(x) when it is needed
  // for the residual anyway.
  void refresh_residual() {
    current_map_.reset();
    if (!problem_.residual_uses_map()) {
      residual_ = problem_.residual_norm(state_.x);
      return;
    }
    try {
      current_map_ = problem_.apply_full_map(state_.x);
      residual_ = problem_.residual_norm_from(problem_.residual_vector(state_.x, *current_map_));
    } catch (const NumericError&) {
      current_map_.reset();
      residual_ = std::numeric_limits<double>::infinity();
    }
  }

  // Pushes a history entry and, when due, replaces the global iterate by the
  // safeguarded extrapolation.
  void fire() {
    const Vector xc = state_.x;
    try {
      if (evaluated_history_) {
        if (!current_map_) {
          current_map_ = problem_.apply_full_map(xc);
          ++trace_.counters.coordinator_map_evals;
        }
        const Vector& gxc = *current_map_;
        window_.push(xc, problem_.accel_basis(xc, gxc), problem_.accel_residual(xc, gxc));
      } else {
        if (!last_fired_) {
          last_fired_ = xc;
          return;
        }
        Vector from = std::exchange(*last_fired_, xc);
        Vector basis = problem_.accel_basis(from, xc);
        Vector r = problem_.accel_residual(from, xc);
        window_.push(std::move(from), std::move(basis), std::move(r));
      }
    } catch (const NumericError&) {
      return;
    }
    if (++pushes_ % per_extrapolation_ != 0) return;

    const double reference = residual_;
    accel::SafeguardResult res = accel::safeguarded_step(problem_, window_, xc, xc, reference);
    if (!res.candidate.empty() && !res.nonfinite) ++trace_.counters.coordinator_map_evals;
    if (res.fallback) ++trace_.counters.accel_fallbacks;
    if (res.nonfinite) ++trace_.counters.accel_nonfinite;

    TraceEvent ev;
    ev.sim_time = trace_.sim_time;
    ev.worker_updates = trace_.worker_updates;
    ev.candidate_residual = res.candidate_residual;
    ev.reference_residual = reference;
    if (res.accepted) {
      ++trace_.counters.accel_accepted;
      state_.x = std::move(res.candidate);
      current_map_ = std::move(res.candidate_map);
      state_.record_global_update();
      if (last_fired_) *last_fired_ = state_.x;
      residual_ = res.candidate_residual;
      ev.kind = EventKind::AccelAccept;
    } else {
      ++trace_.counters.accel_rejected;
      ev.kind = EventKind::AccelReject;
      if (config_.anderson.clear_on_reject) window_.clear();
    }
    ev.residual = residual_;
    trace_.events.push_back(ev);
    if (res.accepted) done_ = stop_.observe(state_.x, residual_, trace_);
  }

  const ProblemInstance& problem_;
  const RunConfig& config_;
  const BlockPartition& partition_;
  accel::AndersonWindow window_;
  detail::StopRule stop_;
  const bool fixed_;
  const bool accelerate_;
  const std::size_t per_extrapolation_;
  const double alpha_;
  const std::uint64_t completion_cap_;

  IterateState state_;
  std::vector<std::mt19937_64> worker_rng_;
  std::mt19937_64 coord_rng_;
  std::vector<IndexSet> in_flight_;
  std::uint64_t applied_since_push_ = 0;
  std::uint64_t pushes_ = 0;
  bool evaluated_history_ = false;
  std::optional<Vector> current_map_;  // G(x) for the current iterate, when known
  std::optional<Vector> last_fired_;  // global iterate at the previous firing (assembled history)
  double residual_ = 0.0;
  RunTrace trace_;
  bool done_ = false;
};

std::optional<Vector> evaluate(const ProblemInstance& problem, const Task& task) {
  try {
    return problem.evaluate_targets(task.targets, task.snapshot);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct ScheduledEvent {
  double fire_time = 0.0;
  std::size_t worker = 0;
  Task task;
  std::optional<Vector> values;
};

// Min-heap order on (fire_time, worker_id).
bool later(const ScheduledEvent& a, const ScheduledEvent& b) {
  if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
  return a.worker > b.worker;
}

template <class T>
class Channel {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(value));
    }
    ready_.notify_one();
  }
  T pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return !queue_.empty(); });
    T value = std::move(queue_.front());
    queue_.pop_front();
    return value;
  }

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<T> queue_;
};

}  // namespace

RunTrace run_async_des(const ProblemInstance& problem, const RunConfig& config) {
  Coordinator coord(problem, config);
  std::vector<ScheduledEvent> heap;
  double now = 0.0;

  auto schedule = [&](std::size_t worker) {
    ScheduledEvent ev;
    ev.worker = worker;
    ev.task = coord.launch(worker);
    ev.values = evaluate(problem, ev.task);
    ev.fire_time = now + config.base_compute_time + ev.task.delay;
    heap.push_back(std::move(ev));
    std::push_heap(heap.begin(), heap.end(), later);
  };

  if (!coord.done())
    for (std::size_t l = 0; l < config.workers; ++l) schedule(l);
  while (!coord.done() && !heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), later);
    ScheduledEvent ev = std::move(heap.back());
    heap.pop_back();
    now = ev.fire_time;
    coord.complete(ev.task, std::move(ev.values), now);
    if (!coord.done()) schedule(ev.worker);
  }
  return coord.finish(now);
}

RunTrace run_async_threads(const ProblemInstance& problem, const RunConfig& config) {
  using Clock = std::chrono::steady_clock;
  Coordinator coord(problem, config);
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  if (coord.done()) return coord.finish(0.0);

  struct Result {
    Task task;
    std::optional<Vector> values;
  };
  const std::size_t p = config.workers;
  std::vector<Channel<std::optional<Task>>> inbox(p);
  Channel<Result> outbox;

  std::size_t in_flight = 0;
  double end_time = 0.0;
  {
    std::vector<std::jthread> workers;
    workers.reserve(p);
    for (std::size_t l = 0; l < p; ++l) {
      workers.emplace_back([&problem, &in = inbox[l], &outbox] {
        while (std::optional<Task> task = in.pop()) {
          std::optional<Vector> values = evaluate(problem, *task);
          std::this_thread::sleep_for(std::chrono::duration<double>(task->delay));
          outbox.push(Result{std::move(*task), std::move(values)});
        }
      });
    }
    for (std::size_t l = 0; l < p; ++l) {
      inbox[l].push(coord.launch(l));
      ++in_flight;
    }
    while (in_flight > 0 && !coord.done()) {
      Result r = outbox.pop();
      --in_flight;
      const std::size_t worker = r.task.worker;
      coord.complete(r.task, std::move(r.values), elapsed());
      if (!coord.done()) {
        inbox[worker].push(coord.launch(worker));
        ++in_flight;
      }
    }
    end_time = elapsed();
    for (auto& in : inbox) in.push(std::nullopt);
  }  // workers join here
  return coord.finish(end_time);
}

}  // namespace asyncfp::engine
