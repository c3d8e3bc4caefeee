// SPDX-License-Identifier: Apache-2.0

// Acceptance run: executes the shipped suites in DES mode with their fixed
// seeds and checks each criterion at its stated tolerance. Prints one
// PASS/FAIL line per criterion. Exits 0 unless --strict is given and a
// criterion failed, or something threw.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../affine_problem.hpp"
#include "asyncfp/bench.hpp"
#include "asyncfp/lapjac.hpp"
#include "asyncfp/mdpvi.hpp"
#include "asyncfp/ppscf.hpp"

using namespace asyncfp;
using engine::RunStatus;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct LoadedSuite {
  bench::ExperimentSpec spec;
  bench::SuiteResult result;
  std::string csv;

  std::string label(const bench::RunRecord& run, const std::string& axis) const {
    for (const auto& [name, value] : spec.cells[run.cell].labels)
      if (name == axis) return value;
    return {};
  }

  /// Runs whose labels match every (axis, value) pair.
  std::vector<const bench::RunRecord*> select(const std::vector<std::pair<std::string, std::string>>& match) const {
    std::vector<const bench::RunRecord*> out;
    for (const auto& run : result.runs) {
      bool ok = true;
      for (const auto& [axis, value] : match) ok = ok && label(run, axis) == value;
      if (ok) out.push_back(&run);
    }
    return out;
  }

  const bench::RunRecord& one(const std::vector<std::pair<std::string, std::string>>& match) const {
    const auto runs = select(match);
    if (runs.size() != 1) throw std::runtime_error(spec.id + ": expected one matching run");
    return *runs.front();
  }
};

std::string summary_csv(const bench::Summary& summary) {
  std::ostringstream out;
  bench::write_summary_csv(out, summary);
  return out.str();
}

LoadedSuite load_and_run(const std::string& id) {
  LoadedSuite s;
  s.spec = bench::load_spec(std::string(ASYNCFP_SUITE_DIR) + "/" + id + ".json");
  std::fprintf(stderr, "running %s (%zu runs)\n", id.c_str(), s.spec.cells.size() * s.spec.seeds.size());
  s.result = bench::run_suite(s.spec);
  s.csv = summary_csv(s.result.summary);
  return s;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool converged(const bench::RunRecord& r) { return r.trace.status == RunStatus::Converged; }

std::uint64_t wu(const bench::RunRecord& r) { return r.trace.worker_updates; }

double max_residual(const engine::RunTrace& t) {
  double m = t.initial_residual;
  for (const auto& e : t.events) m = std::max(m, e.residual);
  return m;
}

// ---------------------------------------------------------------------------

Outcome sync_jacobi_rounds(const LoadedSuite& s) {
  Outcome o{true, ""};
  std::uint64_t first = 0;
  for (const char* d : {"0.0", "0.005", "0.02", "0.1"}) {
    const auto& r = s.one({{"mode", "sync"}, {"delay", d}});
    const auto rounds = r.trace.counters.rounds;
    o.pass = o.pass && converged(r) && rounds >= 2500 && rounds <= 4000 && wu(r) == 4 * rounds;
    if (first == 0) first = wu(r);
    o.pass = o.pass && wu(r) == first;
    o.detail += fmt("delay %ss: %llu rounds/%llu WU ", d, static_cast<unsigned long long>(rounds),
                    static_cast<unsigned long long>(wu(r)));
  }
  o.pass = o.pass && s.result.summary.sync_wu_consistent;
  return o;
}

Outcome sync_time_ratio(const LoadedSuite& s) {
  const double t0 = s.one({{"mode", "sync"}, {"delay", "0.0"}}).trace.sim_time;
  const double t100 = s.one({{"mode", "sync"}, {"delay", "0.1"}}).trace.sim_time;
  const double expected = (0.007 + 0.100) / 0.007;
  const double ratio = t100 / t0;
  return {std::abs(ratio / expected - 1.0) <= 0.10, fmt("ratio %.2f (target %.2f +-10%%)", ratio, expected)};
}

Outcome async_straggler(const LoadedSuite& s) {
  const auto& a0 = s.one({{"mode", "async"}, {"delay", "0.0"}});
  const auto& a100 = s.one({{"mode", "async"}, {"delay", "0.1"}});
  const auto& s100 = s.one({{"mode", "sync"}, {"delay", "0.1"}});
  const double inflation = static_cast<double>(wu(a100)) / static_cast<double>(wu(a0));
  const double speedup = s100.trace.sim_time / a100.trace.sim_time;
  return {converged(a0) && converged(a100) && inflation >= 3.0 && speedup >= 2.0,
          fmt("WU inflation %.2f (>=3), speedup vs sync %.2f (>=2)", inflation, speedup)};
}

Outcome sync_anderson_jacobi(const LoadedSuite& straggler) {
  const auto& plain = straggler.one({{"mode", "sync"}, {"delay", "0.0"}});
  auto problem = bench::build_problem(straggler.spec.cells[plain.cell].problem, 4, 0);
  engine::RunConfig c;
  c.workers = 4;
  c.accel = accel::CoordinatorAccel{};
  c.anderson.window = 20;
  const auto t = engine::run_sync(*problem, c);
  const double reduction = static_cast<double>(plain.trace.counters.rounds) / static_cast<double>(t.counters.rounds);
  return {t.status == RunStatus::Converged && 20 * t.counters.rounds <= plain.trace.counters.rounds,
          fmt("%llu vs %llu rounds (%.1fx, need >=20x)", static_cast<unsigned long long>(t.counters.rounds),
              static_cast<unsigned long long>(plain.trace.counters.rounds), reduction)};
}

Outcome walker_ni() {
  const std::size_t n = 20, iters = 15;
  const auto problem = asyncfp::testing::AffineProblem::random(n, 0.9, 2024);
  const auto& m = problem.matrix();
  const Vector gmres = numkit::gmres_reference(
      [&](std::span<const double> x) {
        Vector y = m * x;
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - y[i];
        return y;
      },
      problem.offset(), iters);
  accel::AndersonParams p;
  p.window = iters + 1;
  accel::AndersonWindow w(p);
  Vector x = problem.initial_iterate();
  double worst = 0.0;
  for (std::size_t k = 0; k < iters && k < gmres.size(); ++k) {
    const Vector gx = problem.apply_full_map(x);
    w.push(x, gx, problem.residual_vector(x, gx));
    const auto c = accel::anderson_candidate(w);
    worst = std::max(worst, std::abs(c.ls.residual_norm - gmres[k]));
    x = c.combined;
  }
  return {gmres.size() >= iters && worst <= 1e-8, fmt("max |AA - GMRES| residual gap %.2e over %zu iterations", worst, iters)};
}

Outcome anderson_async_jacobi(const LoadedSuite& s) {
  const auto& plain = s.one({{"group", "plain"}});
  const double base = static_cast<double>(wu(plain));
  Outcome o{converged(plain), fmt("plain %llu WU;", static_cast<unsigned long long>(wu(plain)))};
  for (const char* e : {"2", "4"}) {
    const auto& r = s.one({{"group", "anderson"}, {"m", "5"}, {"E", e}});
    const bool bad = r.trace.status == RunStatus::Diverged || static_cast<double>(wu(r)) > base;
    o.pass = o.pass && bad;
    o.detail += fmt(" E=%s %s %.2fx", e, engine::to_string(r.trace.status), static_cast<double>(wu(r)) / base);
  }
  for (const char* e : {"8", "16", "32"}) {
    const auto& r = s.one({{"group", "anderson"}, {"m", "5"}, {"E", e}});
    const double ratio = static_cast<double>(wu(r)) / base;
    o.pass = o.pass && converged(r) && ratio >= 1.2;
    o.detail += fmt(" E=%s %s %.2fx", e, engine::to_string(r.trace.status), ratio);
  }
  return o;
}

Outcome bellman_contraction() {
  const mdpvi::Mdp mdp = mdpvi::make_garnet(7, 200, 4, 5, 0.95);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::size_t violations = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Vector v1(200), v2(200);
    for (double& x : v1) x = u(rng);
    for (double& x : v2) x = u(rng);
    const Vector t1 = mdpvi::bellman_apply(mdp, v1);
    const Vector t2 = mdpvi::bellman_apply(mdp, v2);
    double dv = 0.0, dt = 0.0;
    for (std::size_t s = 0; s < 200; ++s) {
      dv = std::max(dv, std::abs(v1[s] - v2[s]));
      dt = std::max(dt, std::abs(t1[s] - t2[s]));
    }
    if (dt > mdp.gamma * dv) ++violations;
    worst = std::max(worst, dt / dv);
  }
  return {violations == 0, fmt("%zu/1000 violations, max ratio %.6f (gamma 0.95)", violations, worst)};
}

Outcome vi_anderson_benefit(const LoadedSuite& s) {
  Outcome o{true, "sync median reduction:"};
  double previous = 0.0;
  for (const char* g : {"0.9", "0.95", "0.99"}) {
    std::vector<double> ratios;
    for (std::uint64_t seed : s.spec.seeds) {
      const bench::RunRecord* plain = nullptr;
      const bench::RunRecord* aa = nullptr;
      for (const auto* r : s.select({{"gamma", g}, {"mode", "sync"}})) {
        if (r->seed != seed) continue;
        (s.label(*r, "accel") == "coordinator" ? aa : plain) = r;
      }
      if (!plain || !aa || !converged(*plain) || !converged(*aa)) {
        o.pass = false;
        continue;
      }
      ratios.push_back(static_cast<double>(plain->trace.counters.rounds) / static_cast<double>(aa->trace.counters.rounds));
    }
    const double r = ratios.empty() ? 0.0 : median(ratios);
    o.detail += fmt(" g=%s %.2fx", g, r);
    if (std::strcmp(g, "0.9") == 0) o.pass = o.pass && r >= 1.1;
    if (std::strcmp(g, "0.99") == 0) o.pass = o.pass && r >= 1.4;
    o.pass = o.pass && r >= previous;
    previous = r;
  }
  std::vector<double> async_ratios;
  for (std::uint64_t seed : s.spec.seeds) {
    const bench::RunRecord* plain = nullptr;
    const bench::RunRecord* aa = nullptr;
    for (const auto* r : s.select({{"gamma", "0.95"}, {"mode", "async"}})) {
      if (r->seed != seed) continue;
      (s.label(*r, "accel") == "coordinator" ? aa : plain) = r;
    }
    if (plain && aa && converged(*plain) && converged(*aa))
      async_ratios.push_back(static_cast<double>(wu(*plain)) / static_cast<double>(wu(*aa)));
  }
  const double ar = async_ratios.size() == s.spec.seeds.size() ? median(async_ratios) : 0.0;
  o.detail += fmt("; async g=0.95 %.2fx (>=1.15)", ar);
  o.pass = o.pass && ar >= 1.15;
  return o;
}

Outcome safeguard_necessity(const LoadedSuite& s) {
  std::size_t blown = 0, safe_total = 0, safe_converged = 0, accepted = 0, literal_violations = 0;
  double worst_unsafe = 0.0;
  for (const auto& r : s.result.runs) {
    const std::string accel = s.label(r, "accel");
    if (accel == "unsafeguarded") {
      const double m = max_residual(r.trace);
      worst_unsafe = std::max(worst_unsafe, m);
      if (m > 1e10) ++blown;
    } else if (accel == "safeguarded") {
      ++safe_total;
      if (converged(r)) ++safe_converged;
      for (const auto& e : r.trace.events) {
        if (e.kind != engine::EventKind::AccelAccept) continue;
        ++accepted;
        if (!(e.candidate_residual < e.reference_residual)) ++literal_violations;
      }
    }
  }
  return {blown >= 1 && safe_converged == safe_total && literal_violations == 0,
          fmt("unsafeguarded runs above 1e10: %zu (max residual %.3g); safeguarded converged %zu/%zu; "
              "%zu accepted steps, %zu violate the acceptance inequality",
              blown, worst_unsafe, safe_converged, safe_total, accepted, literal_violations)};
}

Outcome coupling_threshold(const LoadedSuite& s) {
  Outcome o{true, ""};
  std::map<std::string, double> improvement, coupling;
  for (const char* rows : {"1", "2", "5", "10"}) {
    const auto& one = s.one({{"rows", rows}, {"sweeps", "1"}});
    const auto& ten = s.one({{"rows", rows}, {"sweeps", "10"}});
    o.pass = o.pass && converged(one) && converged(ten);
    improvement[rows] = static_cast<double>(one.trace.counters.rounds) / static_cast<double>(ten.trace.counters.rounds);
    coupling[rows] = one.coupling_mean;
    o.detail += fmt("%s-row: %.2fx, coupling %.3f; ", rows, improvement[rows], coupling[rows]);
  }
  o.pass = o.pass && improvement["10"] >= 100.0 && improvement["1"] <= 2.0;
  for (const char* rows : {"1", "2"}) o.pass = o.pass && coupling[rows] >= 0.60 && coupling[rows] <= 0.90;
  for (const char* rows : {"5", "10"}) o.pass = o.pass && coupling[rows] >= 0.93 && coupling[rows] <= 0.99;
  return o;
}

Outcome greedy_selection(const LoadedSuite& s) {
  std::vector<double> uniform, greedy;
  for (const auto& r : s.result.runs) {
    const double w = converged(r) ? static_cast<double>(wu(r)) : INFINITY;
    (s.label(r, "selection") == "greedy_topk" ? greedy : uniform).push_back(w);
  }
  const double mu = median(uniform), mg = median(greedy);
  return {std::isfinite(mg) && mg <= 0.7 * mu, fmt("median updates greedy %.0f vs uniform %.0f (%.2fx, need <=0.7)", mg, mu, mg / mu)};
}

Outcome scf_sync_diis() {
  auto sys = std::make_shared<const ppscf::PppSystem>(ppscf::make_ppp_chain(8, 2.0));
  const ppscf::ScfProblem problem(sys, 4);
  engine::RunConfig c;
  c.workers = 4;
  c.tol = 1e-10;
  c.energy_tol = 1e-12;
  c.accel = accel::CoordinatorAccel{};
  c.anderson.window = 8;
  const auto t = engine::run_sync(problem, c);

  auto dimer = std::make_shared<const ppscf::PppSystem>(ppscf::make_ppp_chain(2, 2.0));
  const ppscf::ScfProblem dp(dimer, 2);
  engine::RunConfig dc;
  dc.workers = 2;
  dc.tol = 1e-14;
  const auto d = engine::run_sync(dp, dc);
  double p_err = 0.0;
  for (double v : d.final_iterate) p_err = std::max(p_err, std::abs(v - 1.0));
  // Bonding density: E = U/2 + gamma_12/2 + 2t with gamma_12 = U / sqrt(1 + U^2).
  const double e_dimer = 1.0 + 1.0 / std::sqrt(5.0) - 2.0;
  const double e_err = d.final_energy ? std::abs(*d.final_energy - e_dimer) : INFINITY;
  return {t.status == RunStatus::Converged && t.counters.rounds <= 40 && p_err <= 1e-12 && e_err <= 1e-12,
          fmt("8 atoms: %s in %llu iterations, E=%.12f; dimer |P-1| %.1e, |E-E*| %.1e",
              engine::to_string(t.status), static_cast<unsigned long long>(t.counters.rounds),
              t.final_energy.value_or(NAN), p_err, e_err)};
}

Outcome scf_async_correction(const LoadedSuite& s) {
  std::map<std::uint64_t, double> reference_by_seed;
  for (const auto* r : s.select({{"group", "small"}, {"scheme", "diis"}, {"mode", "sync"}}))
    reference_by_seed[r->seed] = r->trace.final_energy.value_or(NAN);
  const double reference = reference_by_seed.empty() ? NAN : reference_by_seed.begin()->second;
  double plain_worst = 0.0, diis_worst = 0.0;
  bool diis_ok = !reference_by_seed.empty();
  for (const auto* r : s.select({{"group", "small"}, {"mode", "async"}})) {
    const auto ref = reference_by_seed.find(r->seed);
    const double reference = ref == reference_by_seed.end() ? NAN : ref->second;
    const double e = r->trace.final_energy.value_or(NAN);
    const double gap = converged(*r) ? std::abs(e - reference) : NAN;
    if (s.label(*r, "scheme") == "plain") {
      if (converged(*r)) plain_worst = std::max(plain_worst, gap);
    } else {
      diis_ok = diis_ok && converged(*r) && gap <= 1e-4;
      if (converged(*r)) diis_worst = std::max(diis_worst, gap);
    }
  }
  return {plain_worst > 1e-2 && diis_ok,
          fmt("sync E=%.10f (first seed); plain async max |dE| %.2e (need one >1e-2); DIIS async max |dE| %.2e (<=1e-4)", reference,
              plain_worst, diis_worst)};
}

Outcome scf_multiplicity(const LoadedSuite& s) {
  std::size_t best = 0;
  std::string detail;
  for (const auto& [config, count] : s.result.summary.distinct_energies) {
    best = std::max(best, count);
    detail += config + ": " + std::to_string(count) + " ";
  }
  return {best >= 2, "distinct converged energies per config: " + detail};
}

Outcome determinism(const std::vector<LoadedSuite>& suites) {
  Outcome o{true, ""};
  for (const auto& s : suites) {
    std::fprintf(stderr, "rerunning %s\n", s.spec.id.c_str());
    const bool same = summary_csv(bench::run_suite(s.spec).summary) == s.csv;
    o.pass = o.pass && same;
    o.detail += s.spec.id + (same ? " identical; " : " DIFFERS; ");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i) strict = strict || std::strcmp(argv[i], "--strict") == 0;

  try {
    std::vector<std::pair<std::string, Outcome>> results;
    auto report = [&](const std::string& id, Outcome o) {
      std::printf("%s %s: %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
      std::fflush(stdout);
      results.emplace_back(id, std::move(o));
    };

    report("AC5 walker-ni", walker_ni());
    report("AC7 bellman-contraction", bellman_contraction());
    report("AC12 scf-sync-diis", scf_sync_diis());

    std::vector<LoadedSuite> suites;
    suites.push_back(load_and_run("straggler-jacobi"));
    const LoadedSuite& straggler = suites.back();
    report("AC1 sync-jacobi-rounds", sync_jacobi_rounds(straggler));
    report("AC2 sync-time-ratio", sync_time_ratio(straggler));
    report("AC3 async-straggler", async_straggler(straggler));
    report("AC4 sync-anderson-jacobi", sync_anderson_jacobi(straggler));

    suites.push_back(load_and_run("anderson-sweep"));
    report("AC6 async-anderson-jacobi", anderson_async_jacobi(suites.back()));
    suites.push_back(load_and_run("vi-gamma"));
    report("AC8 vi-anderson-benefit", vi_anderson_benefit(suites.back()));
    suites.push_back(load_and_run("vi-straggler"));
    report("AC9 safeguard-necessity", safeguard_necessity(suites.back()));
    suites.push_back(load_and_run("coupling-threshold"));
    report("AC10 coupling-threshold", coupling_threshold(suites.back()));
    suites.push_back(load_and_run("vi-selection"));
    report("AC11 greedy-selection", greedy_selection(suites.back()));
    suites.push_back(load_and_run("scf-regimes"));
    report("AC13 scf-async-correction", scf_async_correction(suites.back()));
    suites.push_back(load_and_run("scf-stochastic"));
    report("AC14 scf-multiplicity", scf_multiplicity(suites.back()));
    report("AC15 determinism", determinism(suites));

    const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.second.pass; });
    std::printf("%zu/%zu criteria passed\n", results.size() - static_cast<std::size_t>(failed), results.size());
    return strict && failed > 0 ? 1 : 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance: %s\n", e.what());
    return 2;
  }
}
