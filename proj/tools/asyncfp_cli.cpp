// SPDX-License-Identifier: Apache-2.0

// asyncfp: run experiment suites and inspect the shipped suite specs.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asyncfp/bench.hpp"

namespace fs = std::filesystem;
using namespace asyncfp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiverged = 1;
constexpr int kExitConfig = 2;

#ifndef ASYNCFP_SUITE_DIR
#define ASYNCFP_SUITE_DIR "suites"
#endif

/// A spec argument is either a path to a file or the name of a shipped suite.
fs::path resolve_spec(const std::string& arg, const fs::path& suite_dir) {
  if (fs::is_regular_file(arg)) return arg;
  const fs::path named = suite_dir / (arg + ".json");
  if (fs::is_regular_file(named)) return named;
  throw bench::SpecError(arg + ": no such spec file or suite in " + suite_dir.string());
}

std::vector<fs::path> suite_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_run(const std::string& spec_arg, const fs::path& suite_dir, const fs::path& out_root, std::uint64_t seed_offset,
            std::size_t threads) {
  bench::ExperimentSpec spec;
  try {
    spec = bench::load_spec(resolve_spec(spec_arg, suite_dir));
  } catch (const bench::SpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const fs::path out_dir = out_root / spec.id;
  bench::SuiteOptions options;
  options.threads = threads;
  options.seed_offset = seed_offset;
  options.out_dir = out_dir;
  std::cerr << spec.id << ": " << spec.cells.size() << " configs x " << spec.seeds.size() << " seeds -> "
            << out_dir.string() << '\n';
  const bench::SuiteResult result = bench::run_suite(spec, options);
  bench::write_summary_csv(std::cout, result.summary);
  if (!result.summary.sync_wu_consistent) std::cerr << "warning: sync worker-updates differ across timing-only axes\n";
  for (const auto& [config, count] : result.summary.distinct_energies)
    std::cerr << "distinct energies [" << config << "]: " << count << '\n';
  if (bench::any_required_diverged(result.summary)) {
    std::cerr << "a required-convergence run diverged\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_list(const fs::path& suite_dir) {
  const auto files = suite_files(suite_dir);
  if (files.empty()) {
    std::cerr << "no suites found in " << suite_dir.string() << '\n';
    return kExitConfig;
  }
  int status = kExitOk;
  for (const fs::path& file : files) {
    try {
      const bench::ExperimentSpec spec = bench::load_spec(file);
      std::cout << file.stem().string() << "  " << spec.cells.size() * spec.seeds.size() << " runs  " << spec.description
                << '\n';
    } catch (const bench::SpecError& e) {
      std::cout << file.stem().string() << "  INVALID: " << e.what() << '\n';
      status = kExitConfig;
    }
  }
  return status;
}

int cmd_describe(const std::string& name, const fs::path& suite_dir) {
  bench::ExperimentSpec spec;
  try {
    spec = bench::load_spec(resolve_spec(name, suite_dir));
  } catch (const bench::SpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::cout << "experiment: " << spec.id << '\n';
  if (!spec.description.empty()) std::cout << "description: " << spec.description << '\n';
  std::set<std::string> kinds;
  for (const auto& cell : spec.cells) kinds.insert(bench::problem_kind(cell.problem));
  std::cout << "problem:";
  for (const auto& k : kinds) std::cout << ' ' << k;
  std::cout << "\nseeds:";
  for (auto s : spec.seeds) std::cout << ' ' << s;
  std::cout << "\naxes:\n";
  for (const auto& axis : spec.axes) {
    std::cout << "  " << axis.name;
    if (!axis.key.empty()) std::cout << " (" << axis.key << ")";
    if (axis.timing_only) std::cout << " [timing only]";
    std::cout << ":";
    for (const auto& v : axis.values) std::cout << ' ' << v.label;
    std::cout << '\n';
  }
  std::cout << "configs (" << spec.cells.size() << "):\n";
  for (const auto& cell : spec.cells)
    std::cout << "  " << cell.config_label() << "  [" << engine::to_string(cell.run.mode) << ", "
              << cell.run.workers << " workers, " << accel::mode_name(cell.run.accel)
              << (cell.require_convergence ? ", required" : "") << "]\n";
  std::cout << "total runs: " << spec.cells.size() * spec.seeds.size() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous fixed-point iteration experiments"};
  app.require_subcommand(1);
  std::string suite_dir = ASYNCFP_SUITE_DIR;
  app.add_option("--suites", suite_dir, "Directory holding the shipped suite specs")->capture_default_str();

  std::string spec_arg;
  std::string out_dir = "results";
  std::uint64_t seed_offset = 0;
  std::size_t threads = 1;
  auto* run = app.add_subcommand("run", "Run an experiment spec (file path or suite name)");
  run->add_option("spec", spec_arg, "Spec file or suite name")->required();
  run->add_option("--out", out_dir, "Output root; results go to <out>/<experiment>")->capture_default_str();
  run->add_option("--seed-offset", seed_offset, "Added to every seed in the spec")->capture_default_str();
  run->add_option("--threads", threads, "Parallel (config, seed) cells")->check(CLI::PositiveNumber)->capture_default_str();

  app.add_subcommand("list-suites", "List the shipped suites");

  std::string describe_name;
  auto* describe = app.add_subcommand("describe", "Show the sweep of a suite or spec file");
  describe->add_option("suite", describe_name, "Suite name or spec file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(spec_arg, suite_dir, out_dir, seed_offset, threads);
    if (describe->parsed()) return cmd_describe(describe_name, suite_dir);
    return cmd_list(suite_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDiverged;
  }
}
