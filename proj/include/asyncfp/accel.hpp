// SPDX-License-Identifier: Apache-2.0

// Coordinator-level Anderson / DIIS acceleration.
//
// The window keeps (iterate, basis, residual) triples, newest last. For most
// problems the basis is G(x) and the candidate is sum_j a_j G(x_j), with the
// weights minimizing ||sum_j a_j r_j||_2 under sum_j a_j = 1. Problems may
// extrapolate in a different space (the SCF problem combines Fock matrices
// and realizes a density from the result).

#pragma once

#include <deque>
#include <variant>

#include "asyncfp/fpcore.hpp"

namespace asyncfp::accel {

struct AndersonParams {
  std::size_t window = 5;        // m; history holds at most m + 1 entries
  std::size_t fire_every = 1;    // E: applied returns (async) or rounds (sync) between history pushes
  double mixing_beta = 1.0;      // 1 = pure Anderson
  double regularization = 0.0;
  bool safeguard = true;
  bool clear_on_reject = false;

  void validate() const;
};

struct MonitorOnly {};
struct CoordinatorAccel {};
/// Extrapolate at every `period`-th history push; damped mixing with `alpha` in between.
struct PeriodicAccel {
  std::size_t period = 5;
  double alpha = 1.0;
};

using AccelMode = std::variant<MonitorOnly, CoordinatorAccel, PeriodicAccel>;

void validate(const AccelMode& mode);
bool fires(const AccelMode& mode);
/// History pushes per extrapolation: 1 for coordinator mode, period for periodic.
std::size_t pushes_per_extrapolation(const AccelMode& mode);
/// Damping applied to plain updates between firings (1 = none).
double plain_damping(const AccelMode& mode, double configured_damping);
const char* mode_name(const AccelMode& mode);

struct HistoryEntry {
  Vector iterate;
  Vector basis;
  Vector residual;
};

class AndersonWindow {
 public:
  explicit AndersonWindow(AndersonParams params = {});

  /// Appends a triple, evicting the oldest entries beyond m + 1.
  void push(Vector iterate, Vector basis, Vector residual);
  void clear() { history_.clear(); }

  std::size_t size() const { return history_.size(); }
  bool empty() const { return history_.empty(); }
  const AndersonParams& params() const { return params_; }
  const std::deque<HistoryEntry>& history() const { return history_; }

 private:
  AndersonParams params_;
  std::deque<HistoryEntry> history_;
};

struct Candidate {
  Vector combined;  // in basis space
  numkit::LsSolution ls;
  bool fallback = false;  // least squares failed; most recent basis returned
};

/// Extrapolated combination for the current window. Requires a non-empty window.
Candidate anderson_candidate(const AndersonWindow& window);

struct SafeguardResult {
  Vector next;
  bool accepted = false;
  bool nonfinite = false;
  bool fallback = false;
  double candidate_residual = 0.0;  // native residual norm of the candidate
  double reference_residual = 0.0;  // native residual norm at x_current
  Vector candidate;                 // realized candidate iterate (may be empty if it failed)
  Vector candidate_map;             // G(candidate), reusable by the caller
};

/// Computes the candidate, evaluates its native residual and accepts it iff
/// that residual is strictly below `current_residual` (always, when the
/// safeguard is off and the candidate is finite). On rejection `next` is the
/// plain step `gx_current`.
SafeguardResult safeguarded_step(const ProblemInstance& problem, const AndersonWindow& window,
                                 std::span<const double> x_current, std::span<const double> gx_current,
                                 double current_residual);

/// Convenience overload that evaluates G(x_current) and its residual.
SafeguardResult safeguarded_step(const ProblemInstance& problem, const AndersonWindow& window,
                                 std::span<const double> x_current);

/// (1 - alpha) x + alpha gx.
Vector damped_mix(std::span<const double> x, std::span<const double> gx, double alpha);

}  // namespace asyncfp::accel
