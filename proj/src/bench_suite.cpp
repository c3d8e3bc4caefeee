// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "asyncfp/bench.hpp"

namespace asyncfp::bench {

using nlohmann::json;

namespace {

std::string format(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string trace_file_name(const RunRecord& run) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "c%03zu_s%llu.csv", run.cell, static_cast<unsigned long long>(run.seed));
  return buf;
}

/// Labels of a cell minus the named axes, joined, plus the seed.
std::string match_key(const Cell& cell, std::uint64_t seed, const std::vector<std::string>& ignored) {
  std::string key;
  for (const auto& [name, value] : cell.labels) {
    if (std::find(ignored.begin(), ignored.end(), name) != ignored.end()) continue;
    key += name + "=" + value + ";";
  }
  return key + "seed=" + std::to_string(seed);
}

RunRecord execute(const ExperimentSpec& spec, std::size_t cell_index, std::uint64_t seed) {
  const Cell& cell = spec.cells[cell_index];
  const auto problem = build_problem(cell.problem, cell.run.workers, seed);
  engine::RunConfig config = cell.run;
  config.rng_seed = seed;
  RunRecord record;
  record.cell = cell_index;
  record.seed = seed;
  record.trace = engine::run(*problem, config);
  const std::vector<double> coupling = problem->coupling_fraction(problem->partition());
  record.coupling_mean = std::accumulate(coupling.begin(), coupling.end(), 0.0) / static_cast<double>(coupling.size());
  return record;
}

}  // namespace

std::vector<int> cluster_energies(const std::vector<std::optional<double>>& energies, double gap) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < energies.size(); ++i)
    if (energies[i]) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return *energies[a] < *energies[b]; });
  std::vector<int> labels(energies.size(), -1);
  int label = -1;
  for (std::size_t j = 0; j < order.size(); ++j) {
    if (j == 0 || *energies[order[j]] - *energies[order[j - 1]] > gap) ++label;
    labels[order[j]] = label;
  }
  return labels;
}

Summary summarize(const ExperimentSpec& spec, std::vector<RunRecord>& runs) {
  Summary summary;
  summary.rows.reserve(runs.size());
  for (const RunRecord& run : runs) {
    const Cell& cell = spec.cells.at(run.cell);
    SummaryRow row;
    row.experiment = spec.id;
    row.config = cell.config_label();
    row.seed = run.seed;
    row.status = run.trace.status;
    row.wu = run.trace.worker_updates;
    row.time_s = run.trace.sim_time;
    row.final_residual = run.trace.final_residual;
    row.energy = run.trace.final_energy;
    row.required = cell.require_convergence;
    summary.rows.push_back(std::move(row));
  }

  // Speedup: matched sync run of the same configuration and seed.
  if (!spec.mode_axis.empty()) {
    std::map<std::string, std::size_t> sync_rows;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const Cell& cell = spec.cells[runs[i].cell];
      if (cell.run.mode == engine::ExecutionMode::Sync)
        sync_rows.emplace(match_key(cell, runs[i].seed, {spec.mode_axis}), i);
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const Cell& cell = spec.cells[runs[i].cell];
      if (cell.run.mode == engine::ExecutionMode::Sync) continue;
      const auto it = sync_rows.find(match_key(cell, runs[i].seed, {spec.mode_axis}));
      if (it == sync_rows.end()) continue;
      const SummaryRow& sync = summary.rows[it->second];
      SummaryRow& row = summary.rows[i];
      if (sync.status == engine::RunStatus::Converged && row.status == engine::RunStatus::Converged && row.time_s > 0.0)
        row.speedup = sync.time_s / row.time_s;
    }
  }

  // Sync work must not depend on timing-only axes.
  std::vector<std::string> timing_axes;
  for (const SweepAxis& axis : spec.axes)
    if (axis.timing_only) timing_axes.push_back(axis.name);
  std::map<std::string, std::uint64_t> sync_wu;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Cell& cell = spec.cells[runs[i].cell];
    if (cell.run.mode != engine::ExecutionMode::Sync || summary.rows[i].status != engine::RunStatus::Converged) continue;
    const auto [it, fresh] = sync_wu.emplace(match_key(cell, runs[i].seed, timing_axes), summary.rows[i].wu);
    if (!fresh && it->second != summary.rows[i].wu) summary.sync_wu_consistent = false;
  }

  // Distinct fixed points per configuration, across seeds.
  std::map<std::string, std::vector<std::size_t>> by_config;
  std::vector<std::string> config_order;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!summary.rows[i].energy) continue;
    auto [it, fresh] = by_config.try_emplace(summary.rows[i].config);
    if (fresh) config_order.push_back(summary.rows[i].config);
    it->second.push_back(i);
  }
  for (const std::string& config : config_order) {
    const std::vector<std::size_t>& members = by_config[config];
    std::vector<std::optional<double>> energies;
    for (std::size_t i : members)
      energies.push_back(summary.rows[i].status == engine::RunStatus::Converged ? summary.rows[i].energy : std::nullopt);
    const std::vector<int> labels = cluster_energies(energies);
    int distinct = 0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      summary.rows[members[j]].fixed_point_label = labels[j];
      runs[members[j]].trace.fixed_point_label = labels[j];
      distinct = std::max(distinct, labels[j] + 1);
    }
    summary.distinct_energies.emplace_back(config, static_cast<std::size_t>(distinct));
  }
  return summary;
}

SuiteResult run_suite(const ExperimentSpec& spec, const SuiteOptions& options) {
  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < spec.cells.size(); ++c)
    for (std::uint64_t seed : spec.seeds) jobs.push_back({c, seed + options.seed_offset});

  SuiteResult result;
  result.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        result.runs[j] = execute(spec, jobs[j].cell, jobs[j].seed);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(jobs.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  result.summary = summarize(spec, result.runs);
  if (options.out_dir) write_outputs(*options.out_dir, spec, result);
  return result;
}

bool any_required_diverged(const Summary& summary) {
  return std::any_of(summary.rows.begin(), summary.rows.end(), [](const SummaryRow& r) {
    return r.required && r.status == engine::RunStatus::Diverged;
  });
}

void write_trace_csv(std::ostream& out, const engine::RunTrace& trace) {
  out << "sim_time_s,worker_updates,residual,event\n";
  for (const engine::TraceEvent& ev : trace.events)
    out << format("%.9g", ev.sim_time) << ',' << ev.worker_updates << ',' << format("%.9e", ev.residual) << ','
        << engine::to_string(ev.kind) << '\n';
}

void write_summary_csv(std::ostream& out, const Summary& summary) {
  out << "experiment,config,seed,status,wu,time_s,final_residual,speedup\n";
  for (const SummaryRow& row : summary.rows) {
    out << row.experiment << ',' << row.config << ',' << row.seed << ',' << engine::to_string(row.status) << ','
        << row.wu << ',' << format("%.6f", row.time_s) << ',' << format("%.6e", row.final_residual) << ',';
    if (row.speedup) out << format("%.4f", *row.speedup);
    out << '\n';
  }
}

json summary_json(const ExperimentSpec& spec, const SuiteResult& result) {
  json rows = json::array();
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const RunRecord& run = result.runs[i];
    const SummaryRow& row = result.summary.rows[i];
    const Cell& cell = spec.cells[run.cell];
    const engine::RunCounters& k = run.trace.counters;
    json labels = json::object();
    for (const auto& [name, value] : cell.labels) labels[name] = value;
    json entry = {
        {"config", row.config},
        {"labels", labels},
        {"seed", row.seed},
        {"mode", engine::to_string(cell.run.mode)},
        {"status", engine::to_string(row.status)},
        {"wu", row.wu},
        {"time_s", row.time_s},
        {"initial_residual", run.trace.initial_residual},
        {"final_residual", row.final_residual},
        {"speedup", row.speedup ? json(*row.speedup) : json(nullptr)},
        {"energy", row.energy ? json(*row.energy) : json(nullptr)},
        {"fixed_point_label", row.fixed_point_label},
        {"required", row.required},
        {"coupling_mean", run.coupling_mean},
        {"trace_file", "traces/" + trace_file_name(run)},
        {"counters",
         {{"completions", k.completions},
          {"applied", k.applied},
          {"dropped", k.dropped},
          {"stale_discarded", k.stale_discarded},
          {"accel_accepted", k.accel_accepted},
          {"accel_rejected", k.accel_rejected},
          {"accel_fallbacks", k.accel_fallbacks},
          {"accel_nonfinite", k.accel_nonfinite},
          {"coordinator_map_evals", k.coordinator_map_evals},
          {"rounds", k.rounds},
          {"max_applied_staleness", k.max_applied_staleness}}},
    };
    rows.push_back(std::move(entry));
  }
  json distinct = json::object();
  for (const auto& [config, count] : result.summary.distinct_energies) distinct[config] = count;
  return {
      {"experiment", spec.id},
      {"description", spec.description},
      {"sync_wu_consistent", result.summary.sync_wu_consistent},
      {"distinct_energies", distinct},
      {"rows", rows},
  };
}

void write_outputs(const std::filesystem::path& dir, const ExperimentSpec& spec, const SuiteResult& result) {
  std::filesystem::create_directories(dir / "traces");
  auto open = [](const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
  };
  {
    std::ofstream out = open(dir / "summary.csv");
    write_summary_csv(out, result.summary);
  }
  {
    std::ofstream out = open(dir / "summary.json");
    out << summary_json(spec, result).dump(2) << '\n';
  }
  for (const RunRecord& run : result.runs) {
    std::ofstream out = open(dir / "traces" / trace_file_name(run));
    write_trace_csv(out, run.trace);
  }
}

}  // namespace asyncfp::bench
