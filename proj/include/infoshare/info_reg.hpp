#pragma once

#include <span>
#include <vector>

#include "infoshare/env.hpp"
#include "infoshare/tabular.hpp"

namespace infoshare {

inline constexpr double kLn2 = 0.69314718055994530942;
inline double nats_to_bits(double nats) { return nats / kLn2; }

/// KL[p | q] in nats with 0 log 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// KL[pi_g(.|s) | pi_0(.|s)] and its gradient with respect to the logits of
/// every goal at state s. grad is laid out [goal][action].
struct KlToBase {
  double kl = 0.0;
  std::vector<double> grad;
};

KlToBase kl_to_base(const GoalPolicyTable& policy, std::span<const double> goal_dist, Goal g, State s);

/// r + beta * KL.
double modified_reward_action(double reward, double kl, double beta);

/// Goal-conditioned visit counts N_g(s) with running marginals N_g, N(s), N.
class StateCounts {
 public:
  StateCounts() = default;
  StateCounts(int num_goals, int num_states, double pseudocount = 1.0);

  int num_goals() const { return goals_; }
  int num_states() const { return states_; }

  double count(Goal g, State s) const { return table_[index(g, s)]; }
  double goal_total(Goal g) const { return goal_totals_[g]; }
  double state_total(State s) const { return state_totals_[s]; }
  double total() const { return total_; }

  void add(Goal g, State s, double amount = 1.0);
  void set(Goal g, State s, double value);

  /// One visit per state an action was taken from (s_0 .. s_{L-1}); the
  /// final state is added only when include_final_state is set.
  void record(const Trajectory& traj, bool include_final_state = false);

  /// Multiplies every count by factor (exponential forgetting).
  void decay(double factor);

  std::span<const double> table() const { return table_; }

  friend bool operator==(const StateCounts&, const StateCounts&) = default;

 private:
  std::size_t index(Goal g, State s) const { return static_cast<std::size_t>(g) * states_ + s; }
  void recompute_marginals();

  int goals_ = 0;
  int states_ = 0;
  std::vector<double> table_;
  std::vector<double> goal_totals_;
  std::vector<double> state_totals_;
  double total_ = 0.0;
};

struct EmpiricalRatios {
  double p_state_given_goal = 0.0;  // N_g(s) / N_g
  double p_state = 0.0;             // N(s) / N
  double log_ratio = 0.0;           // nats
  double p_goal_given_state = 0.0;  // rho_G(g) p(s|g) / p(s)
};

EmpiricalRatios emp_ratios(const StateCounts& counts, std::span<const double> goal_dist, Goal g, State s);

/// r + beta (1 - p(g|s) + log p(s|g)/p(s)).
double modified_reward_state(double reward, const EmpiricalRatios& ratios, double beta);

/// r_cf(t, g, g') computed directly from the product over the prefix.
double counterfactual_reward(const Trajectory& traj, std::size_t t, const GoalPolicyTable& policy,
                             const StateCounts& counts, Goal other);

/// All r_cf(t, g, g') laid out [t][g'], carried incrementally through the
/// running importance weight. The own-goal column is zero.
std::vector<double> counterfactual_rewards(const Trajectory& traj, const GoalPolicyTable& policy,
                                           const StateCounts& counts);

/// R_t = r_t + gamma R_{t+1} with R after the last step = 0.
std::vector<double> discounted_return(std::span<const double> rewards, double gamma);

/// Running information estimates in nats: an exponential moving average over
/// all per-step samples plus per-goal cumulative means.
class InfoEstimate {
 public:
  explicit InfoEstimate(int num_goals = 1, double decay = 0.999);

  void add(Goal g, double sample);

  /// Bias-corrected exponential moving average; 0 before any sample.
  double ema() const;
  double ema_bits() const { return nats_to_bits(ema()); }
  /// sum_g rho_G(g) * mean of goal-g samples (goals with no samples skipped).
  double goal_weighted_mean(std::span<const double> goal_dist) const;
  long samples() const { return samples_; }
  double decay() const { return decay_; }

 private:
  double decay_;
  double ema_ = 0.0;
  double weight_ = 0.0;
  long samples_ = 0;
  std::vector<double> goal_sums_;
  std::vector<long> goal_samples_;
};

/// Per-episode modified rewards/returns and, for state regularization, the
/// counterfactual returns R_cf(t, g, g') laid out [t][g'].
struct StepCredit {
  int num_goals = 0;
  std::vector<double> info;  // per-step KL (action) or log-ratio (state), nats
  std::vector<double> modified_rewards;
  std::vector<double> modified_returns;
  std::vector<double> cf_returns;
};

StepCredit action_credit(const Trajectory& traj, const GoalPolicyTable& policy, std::span<const double> goal_dist,
                         double beta, double gamma);

StepCredit state_credit(const Trajectory& traj, const GoalPolicyTable& policy, const StateCounts& counts,
                        std::span<const double> goal_dist, double beta, double gamma);

/// Gradient contribution restricted to the logits at one state: d_logits is
/// laid out [goal][action] for `state`.
struct StepGradient {
  State state = 0;
  int num_actions = 0;
  std::vector<double> d_logits;

  std::span<double> row(Goal g) { return {d_logits.data() + static_cast<std::size_t>(g) * num_actions, static_cast<std::size_t>(num_actions)}; }
  std::span<const double> row(Goal g) const {
    return {d_logits.data() + static_cast<std::size_t>(g) * num_actions, static_cast<std::size_t>(num_actions)};
  }
};

/// A_action(t) grad log pi_g(a_t|s_t) + beta grad KL[pi_g | pi_0](s_t).
StepGradient action_grad_step(std::size_t t, const Trajectory& traj, const GoalPolicyTable& policy,
                              const ValueTable& value, std::span<const double> goal_dist, double beta,
                              const StepCredit& credit);

/// A_state(t) grad log pi_g(a_t|s_t)
///   - beta sum_{g' != g} rho_G(g') R_cf(t, g, g') grad log pi_g'(a_t|s_t).
StepGradient state_grad_step(std::size_t t, const Trajectory& traj, const GoalPolicyTable& policy,
                             const ValueTable& value, std::span<const double> goal_dist, double beta,
                             const StepCredit& credit);

/// Adds a StepGradient into a dense logit-shaped buffer.
void scatter_add(const StepGradient& step, const GoalPolicyTable& shape, std::span<double> dense, double scale = 1.0);

}  // namespace infoshare
