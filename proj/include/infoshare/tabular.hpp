#pragma once

#include <span>
#include <vector>

#include "infoshare/env.hpp"

namespace infoshare {

/// Numerically stable softmax; `out` may alias `logits`.
void softmax(std::span<const double> logits, std::span<double> out);

/// Alice's goal-conditioned policy: logits theta[g][s][a], softmax over a.
class GoalPolicyTable {
 public:
  GoalPolicyTable() = default;
  GoalPolicyTable(int num_goals, int num_states, int num_actions);

  int num_goals() const { return goals_; }
  int num_states() const { return states_; }
  int num_actions() const { return actions_; }

  std::span<double> logits(Goal g, State s) { return {data_.data() + offset(g, s), static_cast<std::size_t>(actions_)}; }
  std::span<const double> logits(Goal g, State s) const {
    return {data_.data() + offset(g, s), static_cast<std::size_t>(actions_)};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void probs(Goal g, State s, std::span<double> out) const { softmax(logits(g, s), out); }

  std::size_t offset(Goal g, State s) const {
    return (static_cast<std::size_t>(g) * states_ + s) * actions_;
  }

  friend bool operator==(const GoalPolicyTable&, const GoalPolicyTable&) = default;

 private:
  int goals_ = 0;
  int states_ = 0;
  int actions_ = 0;
  std::vector<double> data_;
};

std::vector<double> action_probs(const GoalPolicyTable& policy, Goal g, State s);

/// pi_0(a|s) = sum_g rho_G(g) pi_g(a|s).
std::vector<double> base_policy(const GoalPolicyTable& policy, std::span<const double> goal_dist, State s);

Action sample_action(const GoalPolicyTable& policy, Goal g, State s, Rng& rng);

/// Entropy in nats, with 0 log 0 = 0.
double entropy(std::span<const double> probs);
double policy_entropy(const GoalPolicyTable& policy, Goal g, State s);

/// d H[pi_g(.|s)] / d theta[g][s][.]
std::vector<double> entropy_gradient(const GoalPolicyTable& policy, Goal g, State s);

/// d log pi(a) / d logits = one_hot(a) - pi.
std::vector<double> log_prob_gradient(std::span<const double> probs, Action a);

class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(int num_goals, int num_states) : states_(num_states), data_(static_cast<std::size_t>(num_goals) * num_states, 0.0) {}

  double operator()(Goal g, State s) const { return data_[index(g, s)]; }
  double& operator()(Goal g, State s) { return data_[index(g, s)]; }
  std::size_t index(Goal g, State s) const { return static_cast<std::size_t>(g) * states_ + s; }
  int num_states() const { return states_; }
  int num_goals() const { return states_ == 0 ? 0 : static_cast<int>(data_.size()) / states_; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const ValueTable&, const ValueTable&) = default;

 private:
  int states_ = 0;
  std::vector<double> data_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t size, double lr) : m(size, 0.0), v(size, 0.0), learning_rate(lr) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

enum class StepDirection { kAscend, kDescend };

/// One bias-corrected Adam update over every parameter. Throws
/// std::invalid_argument on a shape mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, StepDirection direction);

}  // namespace infoshare
