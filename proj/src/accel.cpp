// SPDX-License-Identifier: Apache-2.0

#include "asyncfp/accel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace asyncfp::accel {

void AndersonParams::validate() const {
  if (fire_every < 1) throw std::invalid_argument("anderson: fire_every must be >= 1");
  if (!(mixing_beta > 0.0 && mixing_beta <= 1.0)) throw std::invalid_argument("anderson: mixing_beta must be in (0, 1]");
  if (!(regularization >= 0.0) || !std::isfinite(regularization))
    throw std::invalid_argument("anderson: regularization must be finite and >= 0");
}

void validate(const AccelMode& mode) {
  if (const auto* p = std::get_if<PeriodicAccel>(&mode)) {
    if (p->period < 1) throw std::invalid_argument("periodic_accel: period must be >= 1");
    if (!(p->alpha > 0.0 && p->alpha <= 1.0)) throw std::invalid_argument("periodic_accel: alpha must be in (0, 1]");
  }
}

bool fires(const AccelMode& mode) { return !std::holds_alternative<MonitorOnly>(mode); }

std::size_t pushes_per_extrapolation(const AccelMode& mode) {
  if (const auto* p = std::get_if<PeriodicAccel>(&mode)) return p->period;
  return 1;
}

double plain_damping(const AccelMode& mode, double configured_damping) {
  if (const auto* p = std::get_if<PeriodicAccel>(&mode)) return p->alpha;
  return configured_damping;
}

const char* mode_name(const AccelMode& mode) {
  if (std::holds_alternative<MonitorOnly>(mode)) return "monitor_only";
  if (std::holds_alternative<CoordinatorAccel>(mode)) return "coordinator_accel";
  return "periodic_accel";
}

AndersonWindow::AndersonWindow(AndersonParams params) : params_(params) { params_.validate(); }

void AndersonWindow::push(Vector iterate, Vector basis, Vector residual) {
  if (!history_.empty()) {
    const HistoryEntry& last = history_.back();
    if (iterate.size() != last.iterate.size() || basis.size() != last.basis.size() ||
        residual.size() != last.residual.size())
      throw std::invalid_argument("AndersonWindow::push: vector length changed");
  }
  if (!numkit::all_finite(iterate) || !numkit::all_finite(basis) || !numkit::all_finite(residual))
    throw NumericError("AndersonWindow::push: non-finite entry");
  history_.push_back({std::move(iterate), std::move(basis), std::move(residual)});
  while (history_.size() > params_.window + 1) history_.pop_front();
}

Candidate anderson_candidate(const AndersonWindow& window) {
  if (window.empty()) throw std::invalid_argument("anderson_candidate: empty window");
  const auto& hist = window.history();
  Candidate out;
  std::vector<Vector> residuals;
  residuals.reserve(hist.size());
  for (const auto& e : hist) residuals.push_back(e.residual);
  try {
    out.ls = numkit::solve_constrained_ls(residuals, window.params().regularization);
  } catch (const std::exception&) {
    out.fallback = true;
    out.combined = hist.back().basis;
    out.ls.coefficients.assign(hist.size(), 0.0);
    out.ls.coefficients.back() = 1.0;
    return out;
  }
  const double beta = window.params().mixing_beta;
  out.combined.assign(hist.back().basis.size(), 0.0);
  for (std::size_t j = 0; j < hist.size(); ++j) {
    const double a = out.ls.coefficients[j];
    if (a == 0.0) continue;
    numkit::axpy(beta * a, hist[j].basis, out.combined);
    if (beta < 1.0) numkit::axpy((1.0 - beta) * a, hist[j].iterate, out.combined);
  }
  return out;
}

SafeguardResult safeguarded_step(const ProblemInstance& problem, const AndersonWindow& window,
                                 std::span<const double> x_current, std::span<const double> gx_current,
                                 double current_residual) {
  if (!numkit::all_finite(x_current)) throw NumericError("safeguarded_step: non-finite current iterate");
  SafeguardResult res;
  res.reference_residual = current_residual;
  res.next.assign(gx_current.begin(), gx_current.end());
  res.candidate_residual = std::numeric_limits<double>::infinity();

  Candidate cand = anderson_candidate(window);
  res.fallback = cand.fallback;
  try {
    res.candidate = problem.accel_realize(std::move(cand.combined));
    if (!numkit::all_finite(res.candidate)) {
      res.nonfinite = true;
      return res;
    }
    res.candidate_map = problem.apply_full_map(res.candidate);
    res.candidate_residual = problem.residual_norm_from(problem.residual_vector(res.candidate, res.candidate_map));
  } catch (const NumericError&) {
    res.nonfinite = true;
    return res;
  }
  if (!std::isfinite(res.candidate_residual)) {
    res.nonfinite = true;
    return res;
  }
  res.accepted = !window.params().safeguard || res.candidate_residual < current_residual;
  if (res.accepted) res.next = res.candidate;
  return res;
}

SafeguardResult safeguarded_step(const ProblemInstance& problem, const AndersonWindow& window,
                                 std::span<const double> x_current) {
  const Vector gx = problem.apply_full_map(x_current);
  const double r = problem.residual_norm_from(problem.residual_vector(x_current, gx));
  return safeguarded_step(problem, window, x_current, gx, r);
}

Vector damped_mix(std::span<const double> x, std::span<const double> gx, double alpha) {
  if (x.size() != gx.size()) throw std::invalid_argument("damped_mix: length mismatch");
  Vector out(x.size());
  if (alpha == 1.0) {
    out.assign(gx.begin(), gx.end());
    return out;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (1.0 - alpha) * x[i] + alpha * gx[i];
  return out;
}

}  // namespace asyncfp::accel
