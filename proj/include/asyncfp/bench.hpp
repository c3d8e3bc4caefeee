// SPDX-License-Identifier: Apache-2.0

// Experiment harness: JSON experiment specs, Cartesian sweeps over seeds,
// summary tables and the CSV/JSON output schema.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "asyncfp/engine.hpp"
#include "asyncfp/lapjac.hpp"

namespace asyncfp::bench {

/// Invalid experiment spec. The message starts with the offending key path.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JacobiSpec {
  std::size_t nx = 100;
  std::size_t ny = 100;
  std::size_t rows_per_block = 25;
  std::size_t sweeps = 10;
  lapjac::RightHandSide rhs = lapjac::RightHandSide::Ones;
};

struct GarnetSpec {
  std::size_t states = 500;
  std::size_t actions = 4;
  std::size_t branching = 5;
  double gamma = 0.95;
  std::optional<std::uint64_t> seed;  // MDP seed; the run seed when unset
  std::size_t blocks = 0;             // 0: one block per worker
};

struct GridworldSpec {
  std::size_t side = 10;
  double gamma = 0.95;
  std::size_t blocks = 0;
};

struct ScfSpec {
  std::size_t atoms = 8;
  double u_over_t = 2.0;
  double t = -1.0;
  std::size_t electrons = 0;   // 0: half filling
  std::size_t row_blocks = 0;  // 0: one block per worker
};

using ProblemSpec = std::variant<JacobiSpec, GarnetSpec, GridworldSpec, ScfSpec>;

const char* problem_kind(const ProblemSpec& spec);

/// Builds the problem for one run. `seed` feeds seeded generators that
/// have no explicit seed of their own.
std::unique_ptr<ProblemInstance> build_problem(const ProblemSpec& spec, std::size_t workers, std::uint64_t seed);

struct AxisValue {
  std::string label;
  nlohmann::json set;  // JSON-pointer -> value overrides
};

struct SweepAxis {
  std::string name;
  std::string key;          // JSON pointer for scalar values; empty when values carry their own overrides
  bool timing_only = false;  // only changes delays; sync WU must not depend on it
  std::vector<AxisValue> values;
};

/// One point of the sweep, fully resolved.
struct Cell {
  std::string group;
  std::vector<std::pair<std::string, std::string>> labels;  // (axis name, value label)
  ProblemSpec problem;
  engine::RunConfig run;
  bool require_convergence = false;

  std::string config_label() const;
};

struct ExperimentSpec {
  std::string id;
  std::string description;
  std::vector<std::uint64_t> seeds;
  std::vector<Cell> cells;
  std::vector<SweepAxis> axes;  // union over groups, for describe
  std::string mode_axis;        // name of the axis sweeping /run/mode, if any
};

/// Parses and fully validates a spec document.
ExperimentSpec parse_spec(const nlohmann::json& document);
ExperimentSpec load_spec(const std::filesystem::path& path);

struct RunRecord {
  std::size_t cell = 0;
  std::uint64_t seed = 0;
  engine::RunTrace trace;
  double coupling_mean = 1.0;
};

struct SummaryRow {
  std::string experiment;
  std::string config;
  std::uint64_t seed = 0;
  engine::RunStatus status = engine::RunStatus::BudgetExhausted;
  std::uint64_t wu = 0;
  double time_s = 0.0;
  double final_residual = 0.0;
  std::optional<double> speedup;
  std::optional<double> energy;
  int fixed_point_label = -1;
  bool required = false;
};

struct Summary {
  std::vector<SummaryRow> rows;  // one per run, in run order
  bool sync_wu_consistent = true;
  std::vector<std::pair<std::string, std::size_t>> distinct_energies;  // per config, converged runs only
};

/// Single-linkage clustering of sorted energies with the given gap. Labels
/// are dense, ascending in energy; missing energies get -1.
std::vector<int> cluster_energies(const std::vector<std::optional<double>>& energies, double gap = 1e-4);

/// Builds the summary table and writes the per-config fixed-point labels
/// back into the traces.
Summary summarize(const ExperimentSpec& spec, std::vector<RunRecord>& runs);

struct SuiteOptions {
  std::size_t threads = 1;
  std::uint64_t seed_offset = 0;
  std::optional<std::filesystem::path> out_dir;
};

struct SuiteResult {
  std::vector<RunRecord> runs;  // cell-major, seeds inner
  Summary summary;
};

SuiteResult run_suite(const ExperimentSpec& spec, const SuiteOptions& options = {});

/// Whether any required-convergence run diverged.
bool any_required_diverged(const Summary& summary);

void write_trace_csv(std::ostream& out, const engine::RunTrace& trace);
void write_summary_csv(std::ostream& out, const Summary& summary);
nlohmann::json summary_json(const ExperimentSpec& spec, const SuiteResult& result);

/// Writes summary.csv, summary.json and traces/ under `dir`.
void write_outputs(const std::filesystem::path& dir, const ExperimentSpec& spec, const SuiteResult& result);

}  // namespace asyncfp::bench
