// SPDX-License-Identifier: Apache-2.0

#include "asyncfp/mdpvi.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace asyncfp::mdpvi {

std::span<const Index> Mdp::successors_of(std::size_t s, std::size_t a) const {
  const std::size_t p = pair(s, a);
  return std::span<const Index>(successors).subspan(offsets[p], offsets[p + 1] - offsets[p]);
}

std::span<const double> Mdp::probabilities_of(std::size_t s, std::size_t a) const {
  const std::size_t p = pair(s, a);
  return std::span<const double>(probabilities).subspan(offsets[p], offsets[p + 1] - offsets[p]);
}

double Mdp::max_abs_reward() const {
  double m = 0.0;
  for (double r : rewards) m = std::max(m, std::abs(r));
  return m;
}

void Mdp::validate() const {
  if (states == 0 || actions == 0) throw std::invalid_argument("Mdp: empty state or action set");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("Mdp: gamma must lie in [0, 1)");
  if (offsets.size() != states * actions + 1 || rewards.size() != states * actions)
    throw std::invalid_argument("Mdp: table sizes do not match S*A");
  for (std::size_t s = 0; s < states; ++s)
    for (std::size_t a = 0; a < actions; ++a) {
      double total = 0.0;
      for (double p : probabilities_of(s, a)) {
        if (p < 0.0) throw std::invalid_argument("Mdp: negative transition probability");
        total += p;
      }
      for (Index t : successors_of(s, a))
        if (t >= states) throw std::invalid_argument("Mdp: successor out of range");
      if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("Mdp: probability row does not sum to 1");
    }
}

Mdp make_garnet(std::uint64_t seed, std::size_t states, std::size_t actions, std::size_t branching, double gamma) {
  if (branching == 0 || branching > states) throw std::invalid_argument("make_garnet: need 1 <= b <= S");
  Mdp mdp;
  mdp.states = states;
  mdp.actions = actions;
  mdp.gamma = gamma;
  mdp.offsets.reserve(states * actions + 1);
  mdp.offsets.push_back(0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Index> pool(states);
  Vector cuts(branching > 0 ? branching - 1 : 0);
  for (std::size_t s = 0; s < states; ++s)
    for (std::size_t a = 0; a < actions; ++a) {
      // Partial Fisher-Yates for b distinct successors.
      for (std::size_t k = 0; k < states; ++k) pool[k] = k;
      for (std::size_t k = 0; k < branching; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, states - 1);
        std::swap(pool[k], pool[pick(rng)]);
      }
      for (double& c : cuts) c = unit(rng);
      std::sort(cuts.begin(), cuts.end());
      double prev = 0.0;
      for (std::size_t k = 0; k < branching; ++k) {
        const double next = k + 1 < branching ? cuts[k] : 1.0;
        mdp.successors.push_back(pool[k]);
        mdp.probabilities.push_back(next - prev);
        prev = next;
      }
      mdp.offsets.push_back(mdp.successors.size());
      mdp.rewards.push_back(unit(rng));
    }
  return mdp;
}

GridWorld make_gridworld(std::size_t side, double gamma) {
  if (side < 2) throw std::invalid_argument("make_gridworld: side must be >= 2");
  GridWorld gw;
  gw.side = side;
  gw.goal = side * side - 1;
  Mdp& mdp = gw.mdp;
  mdp.states = side * side;
  mdp.actions = 4;
  mdp.gamma = gamma;
  mdp.offsets.push_back(0);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    const std::size_t r = s / side;
    const std::size_t c = s % side;
    for (std::size_t a = 0; a < 4; ++a) {
      Index next = s;
      if (s != gw.goal) {
        std::size_t nr = r, nc = c;
        if (a == 0 && r > 0) --nr;
        if (a == 1 && r + 1 < side) ++nr;
        if (a == 2 && c > 0) --nc;
        if (a == 3 && c + 1 < side) ++nc;
        next = nr * side + nc;
      }
      mdp.successors.push_back(next);
      mdp.probabilities.push_back(1.0);
      mdp.offsets.push_back(mdp.successors.size());
      mdp.rewards.push_back((s != gw.goal && next == gw.goal) ? 1.0 : 0.0);
    }
  }
  gw.v_star.assign(mdp.states, 0.0);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    if (s == gw.goal) continue;
    const std::size_t d = (side - 1 - s / side) + (side - 1 - s % side);
    gw.v_star[s] = std::pow(gamma, static_cast<double>(d - 1));
  }
  return gw;
}

double bellman_state(const Mdp& mdp, std::size_t s, std::span<const double> v, std::size_t* argmax) {
  double best = 0.0;
  std::size_t best_a = 0;
  for (std::size_t a = 0; a < mdp.actions; ++a) {
    const auto succ = mdp.successors_of(s, a);
    const auto prob = mdp.probabilities_of(s, a);
    double ev = 0.0;
    for (std::size_t k = 0; k < succ.size(); ++k) ev += prob[k] * v[succ[k]];
    const double q = mdp.reward(s, a) + mdp.gamma * ev;
    if (a == 0 || q > best) {
      best = q;
      best_a = a;
    }
  }
  if (argmax) *argmax = best_a;
  return best;
}

Vector bellman_apply(const Mdp& mdp, std::span<const double> v) {
  if (v.size() != mdp.states) throw std::invalid_argument("bellman_apply: length mismatch");
  Vector tv(mdp.states);
  for (std::size_t s = 0; s < mdp.states; ++s) tv[s] = bellman_state(mdp, s, v);
  return tv;
}

std::vector<std::size_t> greedy_policy(const Mdp& mdp, std::span<const double> v) {
  std::vector<std::size_t> pi(mdp.states);
  for (std::size_t s = 0; s < mdp.states; ++s) bellman_state(mdp, s, v, &pi[s]);
  return pi;
}

namespace {

double policy_state(const Mdp& mdp, std::size_t s, std::size_t a, std::span<const double> v) {
  const auto succ = mdp.successors_of(s, a);
  const auto prob = mdp.probabilities_of(s, a);
  double ev = 0.0;
  for (std::size_t k = 0; k < succ.size(); ++k) ev += prob[k] * v[succ[k]];
  return mdp.reward(s, a) + mdp.gamma * ev;
}

std::vector<double> transition_coupling(const Mdp& mdp, const BlockPartition& p) {
  if (p.n() != mdp.states) throw std::invalid_argument("coupling_fraction: partition size mismatch");
  std::vector<double> out(p.num_blocks(), 0.0);
  for (std::size_t blk = 0; blk < p.num_blocks(); ++blk) {
    double inside = 0.0;
    for (Index s : p.block(blk))
      for (std::size_t a = 0; a < mdp.actions; ++a) {
        const auto succ = mdp.successors_of(s, a);
        const auto prob = mdp.probabilities_of(s, a);
        for (std::size_t k = 0; k < succ.size(); ++k)
          if (p.block_of(succ[k]) == blk) inside += prob[k];
      }
    out[blk] = inside / static_cast<double>(p.block(blk).size() * mdp.actions);
  }
  return out;
}

}  // namespace

Vector policy_eval_apply(const Mdp& mdp, std::span<const std::size_t> policy, std::span<const double> v) {
  if (policy.size() != mdp.states || v.size() != mdp.states)
    throw std::invalid_argument("policy_eval_apply: length mismatch");
  Vector out(mdp.states);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    if (policy[s] >= mdp.actions) throw std::invalid_argument("policy_eval_apply: invalid action");
    out[s] = policy_state(mdp, s, policy[s], v);
  }
  return out;
}

ValueIterationProblem::ValueIterationProblem(std::shared_ptr<const Mdp> mdp, BlockPartition partition)
    : mdp_(std::move(mdp)), partition_(std::move(partition)) {
  if (!mdp_) throw std::invalid_argument("ValueIterationProblem: null MDP");
  mdp_->validate();
  if (partition_.n() != mdp_->states) throw std::invalid_argument("ValueIterationProblem: partition size mismatch");
}

Vector ValueIterationProblem::evaluate_targets(std::span<const Index> targets, std::span<const double> snapshot) const {
  Vector out(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) out[k] = bellman_state(*mdp_, targets[k], snapshot);
  return out;
}

Vector ValueIterationProblem::apply_full_map(std::span<const double> x) const {
  if (!numkit::all_finite(x)) throw NumericError("apply_full_map: non-finite iterate");
  return bellman_apply(*mdp_, x);
}

std::vector<double> ValueIterationProblem::coupling_fraction(const BlockPartition& p) const {
  return transition_coupling(*mdp_, p);
}

PolicyEvaluationProblem::PolicyEvaluationProblem(std::shared_ptr<const Mdp> mdp, std::vector<std::size_t> policy,
                                                 BlockPartition partition)
    : mdp_(std::move(mdp)), policy_(std::move(policy)), partition_(std::move(partition)) {
  if (!mdp_) throw std::invalid_argument("PolicyEvaluationProblem: null MDP");
  mdp_->validate();
  if (policy_.size() != mdp_->states) throw std::invalid_argument("PolicyEvaluationProblem: policy length mismatch");
  for (std::size_t a : policy_)
    if (a >= mdp_->actions) throw std::invalid_argument("PolicyEvaluationProblem: invalid action");
  if (partition_.n() != mdp_->states) throw std::invalid_argument("PolicyEvaluationProblem: partition size mismatch");
}

Vector PolicyEvaluationProblem::evaluate_targets(std::span<const Index> targets, std::span<const double> snapshot) const {
  Vector out(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k)
    out[k] = policy_state(*mdp_, targets[k], policy_[targets[k]], snapshot);
  return out;
}

std::vector<double> PolicyEvaluationProblem::coupling_fraction(const BlockPartition& p) const {
  if (p.n() != mdp_->states) throw std::invalid_argument("coupling_fraction: partition size mismatch");
  std::vector<double> out(p.num_blocks(), 0.0);
  for (std::size_t blk = 0; blk < p.num_blocks(); ++blk) {
    double inside = 0.0;
    for (Index s : p.block(blk)) {
      const auto succ = mdp_->successors_of(s, policy_[s]);
      const auto prob = mdp_->probabilities_of(s, policy_[s]);
      for (std::size_t k = 0; k < succ.size(); ++k)
        if (p.block_of(succ[k]) == blk) inside += prob[k];
    }
    out[blk] = inside / static_cast<double>(p.block(blk).size());
  }
  return out;
}

}  // namespace asyncfp::mdpvi
