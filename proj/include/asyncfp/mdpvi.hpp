// SPDX-License-Identifier: Apache-2.0

// Finite MDPs, the Bellman optimality operator, policy evaluation and the
// Garnet / grid-world generators.

#pragma once

#include <cstdint>
#include <memory>

#include "asyncfp/fpcore.hpp"

namespace asyncfp::mdpvi {

/// Sparse tabular MDP. Transitions for (s, a) live in
/// [offsets[s*A+a], offsets[s*A+a+1]) of `successors` / `probabilities`.
struct Mdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  double gamma = 0.9;
  std::vector<std::size_t> offsets;
  std::vector<Index> successors;
  Vector probabilities;
  Vector rewards;  // index s*A+a

  std::size_t pair(std::size_t s, std::size_t a) const { return s * actions + a; }
  double reward(std::size_t s, std::size_t a) const { return rewards[pair(s, a)]; }
  std::span<const Index> successors_of(std::size_t s, std::size_t a) const;
  std::span<const double> probabilities_of(std::size_t s, std::size_t a) const;
  double max_abs_reward() const;

  /// Throws std::invalid_argument if a probability row is invalid or gamma
  /// is outside [0, 1).
  void validate() const;

  bool operator==(const Mdp&) const = default;
};

/// Garnet(S, A, b): b distinct successors per (s, a), probabilities from
/// sorted uniform cut points, rewards Uniform[0, 1].
Mdp make_garnet(std::uint64_t seed, std::size_t states, std::size_t actions, std::size_t branching, double gamma);

struct GridWorld {
  Mdp mdp;
  Vector v_star;
  std::size_t side = 0;
  Index goal = 0;
};

/// Deterministic side x side grid, actions {up, down, left, right}, walls
/// clamp, absorbing goal in the far corner, reward 1 on entering the goal.
GridWorld make_gridworld(std::size_t side, double gamma);

/// max_a [R(s,a) + gamma sum P(s'|s,a) V(s')]; `argmax` gets the lowest
/// maximizing action when non-null.
double bellman_state(const Mdp& mdp, std::size_t s, std::span<const double> v, std::size_t* argmax = nullptr);

Vector bellman_apply(const Mdp& mdp, std::span<const double> v);

std::vector<std::size_t> greedy_policy(const Mdp& mdp, std::span<const double> v);

/// r^pi + gamma P^pi V.
Vector policy_eval_apply(const Mdp& mdp, std::span<const std::size_t> policy, std::span<const double> v);

/// Value iteration as a partitioned fixed-point problem (sup-norm, residual TV - V).
class ValueIterationProblem final : public ProblemInstance {
 public:
  ValueIterationProblem(std::shared_ptr<const Mdp> mdp, BlockPartition partition);

  std::string name() const override { return "value_iteration"; }
  const BlockPartition& partition() const override { return partition_; }
  NormKind native_norm() const override { return NormKind::Linf; }
  EvaluationKind evaluation_kind() const override { return EvaluationKind::PartialUpdate; }
  Vector initial_iterate() const override { return Vector(mdp_->states, 0.0); }

  Vector evaluate_targets(std::span<const Index> targets, std::span<const double> snapshot) const override;
  Vector apply_full_map(std::span<const double> x) const override;

  /// Mean over the block's (state, action) pairs of the transition mass
  /// landing inside the block.
  std::vector<double> coupling_fraction(const BlockPartition& p) const override;

  const Mdp& mdp() const { return *mdp_; }

 private:
  std::shared_ptr<const Mdp> mdp_;
  BlockPartition partition_;
};

/// Linear policy-evaluation map V -> r^pi + gamma P^pi V.
class PolicyEvaluationProblem final : public ProblemInstance {
 public:
  PolicyEvaluationProblem(std::shared_ptr<const Mdp> mdp, std::vector<std::size_t> policy, BlockPartition partition);

  std::string name() const override { return "policy_evaluation"; }
  const BlockPartition& partition() const override { return partition_; }
  NormKind native_norm() const override { return NormKind::Linf; }
  EvaluationKind evaluation_kind() const override { return EvaluationKind::PartialUpdate; }
  Vector initial_iterate() const override { return Vector(mdp_->states, 0.0); }

  Vector evaluate_targets(std::span<const Index> targets, std::span<const double> snapshot) const override;
  std::vector<double> coupling_fraction(const BlockPartition& p) const override;

  const Mdp& mdp() const { return *mdp_; }
  const std::vector<std::size_t>& policy() const { return policy_; }

 private:
  std::shared_ptr<const Mdp> mdp_;
  std::vector<std::size_t> policy_;
  BlockPartition partition_;
};

}  // namespace asyncfp::mdpvi
