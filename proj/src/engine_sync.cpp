// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <limits>

#include "engine_detail.hpp"

namespace asyncfp::engine {

namespace {

struct RoundOutput {
  Vector raw;     // x with gathered (undamped) worker values written in
  Vector damped;  // x with damped worker values written in, assembled
  std::uint64_t applied = 0;
  double max_delay = 0.0;
};

}  // namespace

RunTrace run_sync(const ProblemInstance& problem, const RunConfig& config) {
  config.validate(problem);
  const BlockPartition& partition = problem.partition();
  const std::size_t p = config.workers;
  const bool fixed = std::holds_alternative<FixedPartition>(config.selection);
  const bool accelerate = accel::fires(config.accel);
  const std::size_t per_extrapolation = accel::pushes_per_extrapolation(config.accel);
  const double alpha = accel::plain_damping(config.accel, config.damping);

  std::vector<std::mt19937_64> worker_rng;
  for (std::size_t l = 0; l < p; ++l) worker_rng.push_back(detail::worker_stream(config.rng_seed, l));
  std::mt19937_64 coord_rng = detail::coordinator_stream(config.rng_seed);

  accel::AndersonWindow window(config.anderson);
  detail::StopRule stop(problem, config);
  RunTrace trace;
  IterateState state(problem.initial_iterate(), partition.num_blocks());

  // G(x) for the current x when already known. Only valid with the fixed
  // partition, where worker blocks are slices of the full map.
  std::optional<Vector> known_map;
  auto residual_of = [&](const Vector& v) -> double {
    if (!problem.residual_uses_map()) return problem.residual_norm(v);
    try {
      Vector gv = problem.apply_full_map(v);
      const double r = problem.residual_norm_from(problem.residual_vector(v, gv));
      if (fixed) known_map = std::move(gv);
      return r;
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  double residual = residual_of(state.x);
  bool finished = stop.observe_initial(state.x, residual, trace);
  std::uint64_t pushes = 0;

  while (!finished) {
    if (trace.worker_updates >= config.max_worker_updates || trace.counters.completions >= detail::completion_cap(config)) {
      trace.status = RunStatus::BudgetExhausted;
      break;
    }
    const Vector& x = state.x;

    // Targets for this round; non-fixed strategies never hand the same index
    // to two workers unless they run out.
    std::vector<IndexSet> targets(p);
    if (fixed) {
      for (std::size_t l = 0; l < p; ++l) targets[l] = IndexSet(partition.block(l).begin(), partition.block(l).end());
    } else {
      const Vector r = problem.residual_vector(x);
      if (problem.residual_uses_map()) ++trace.counters.coordinator_map_evals;
      std::vector<bool> taken(x.size(), false);
      for (std::size_t l = 0; l < p; ++l) {
        targets[l] = select_targets(config.selection, r, detail::selection_k(config.selection), coord_rng, {}, &taken);
        for (Index i : targets[l]) taken[i] = true;
      }
    }

    // Every worker would compute the same full map from the same snapshot.
    if (fixed && !known_map && problem.evaluation_kind() == EvaluationKind::FullMap) {
      try {
        known_map = problem.apply_full_map(x);
      } catch (const NumericError&) {
      }
    }

    RoundOutput round{x, x, 0, 0.0};
    std::vector<std::pair<std::size_t, EventKind>> outcomes;
    for (std::size_t l = 0; l < p; ++l) {
      std::optional<Vector> values;
      if (known_map) {
        Vector v(targets[l].size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = (*known_map)[targets[l][k]];
        values = std::move(v);
      } else {
        try {
          values = problem.evaluate_targets(targets[l], x);
        } catch (const std::exception&) {
        }
      }
      const FaultProfile& fault = config.fault(l);
      round.max_delay = std::max(round.max_delay, sample_delay(fault, worker_rng[l]));
      ++trace.counters.completions;
      if (!values) {
        ++trace.counters.dropped;
        outcomes.emplace_back(l, EventKind::Drop);
        continue;
      }
      FaultOutcome out = inject_faults(fault, std::move(*values), 0, worker_rng[l]);
      if (out.kind == FaultOutcome::Kind::Drop) {
        ++trace.counters.dropped;
        outcomes.emplace_back(l, EventKind::Drop);
        continue;
      }
      if (out.kind == FaultOutcome::Kind::StaleDiscard) {
        ++trace.counters.stale_discarded;
        outcomes.emplace_back(l, EventKind::StaleDiscard);
        continue;
      }
      for (std::size_t k = 0; k < targets[l].size(); ++k) {
        const Index i = targets[l][k];
        round.raw[i] = out.values[k];
        round.damped[i] = alpha == 1.0 ? out.values[k] : (1.0 - alpha) * x[i] + alpha * out.values[k];
      }
      ++round.applied;
      outcomes.emplace_back(l, EventKind::Apply);
    }
    known_map.reset();
    problem.assemble(round.damped);
    if (round.applied == p && fixed) problem.assemble(round.raw);

    ++trace.counters.rounds;
    trace.sim_time += config.base_compute_time + round.max_delay;

    // Candidate next iterate: the plain (damped) round, possibly replaced by
    // the accelerator.
    Vector next = std::move(round.damped);
    double next_residual = std::numeric_limits<double>::quiet_NaN();
    std::optional<TraceEvent> accel_event;
    if (accelerate && round.applied > 0 && trace.counters.rounds % config.anderson.fire_every == 0) {
      bool pushed = false;
      Vector r;
      try {
        r = problem.accel_residual(x, round.raw);
        window.push(x, problem.accel_basis(x, round.raw), r);
        pushed = true;
      } catch (const NumericError&) {
      }
      if (pushed && ++pushes % per_extrapolation == 0) {
        const double reference = residual;
        accel::SafeguardResult res = accel::safeguarded_step(problem, window, x, next, reference);
        if (!res.candidate.empty() && !res.nonfinite) ++trace.counters.coordinator_map_evals;
        if (res.fallback) ++trace.counters.accel_fallbacks;
        if (res.nonfinite) ++trace.counters.accel_nonfinite;
        TraceEvent ev;
        ev.candidate_residual = res.candidate_residual;
        ev.reference_residual = reference;
        if (res.accepted) {
          ++trace.counters.accel_accepted;
          ev.kind = EventKind::AccelAccept;
          next = std::move(res.candidate);
          next_residual = res.candidate_residual;
          if (fixed) known_map = std::move(res.candidate_map);
        } else {
          ++trace.counters.accel_rejected;
          ev.kind = EventKind::AccelReject;
          if (config.anderson.clear_on_reject) window.clear();
        }
        accel_event = ev;
      }
    }

    if (std::isnan(next_residual)) next_residual = residual_of(next);
    state.x = std::move(next);
    if (accel_event && accel_event->kind == EventKind::AccelAccept) {
      state.record_global_update();
    } else {
      for (const auto& [l, kind] : outcomes)
        if (kind == EventKind::Apply) detail::record_update(state, partition, targets[l]);
    }
    residual = next_residual;

    for (const auto& [l, kind] : outcomes) {
      TraceEvent ev;
      ev.sim_time = trace.sim_time;
      if (kind == EventKind::Apply) ++trace.worker_updates;
      ev.worker_updates = trace.worker_updates;
      ev.residual = residual;
      ev.kind = kind;
      ev.worker = static_cast<int>(l);
      trace.events.push_back(ev);
    }
    trace.counters.applied += round.applied;
    if (accel_event) {
      accel_event->sim_time = trace.sim_time;
      accel_event->worker_updates = trace.worker_updates;
      accel_event->residual = residual;
      trace.events.push_back(*accel_event);
    }
    finished = stop.observe(state.x, residual, trace);
  }

  detail::finalize(problem, std::move(state.x), trace);
  return trace;
}

}  // namespace asyncfp::engine
