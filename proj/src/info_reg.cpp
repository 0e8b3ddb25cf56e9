#include "infoshare/info_reg.hpp"

#include <cmath>
#include <stdexcept>

namespace infoshare {

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] > 0.0) kl += p[a] * std::log(p[a] / q[a]);
  }
  return kl;
}

KlToBase kl_to_base(const GoalPolicyTable& policy, std::span<const double> goal_dist, Goal g, State s) {
  const int n_goals = policy.num_goals();
  const int n_actions = policy.num_actions();
  std::vector<double> probs(static_cast<std::size_t>(n_goals) * n_actions);
  std::vector<double> base(n_actions, 0.0);
  for (Goal h = 0; h < n_goals; ++h) {
    std::span<double> ph(probs.data() + static_cast<std::size_t>(h) * n_actions, n_actions);
    policy.probs(h, s, ph);
    for (int a = 0; a < n_actions; ++a) base[a] += goal_dist[h] * ph[a];
  }
  std::span<const double> pg(probs.data() + static_cast<std::size_t>(g) * n_actions, n_actions);

  KlToBase out;
  if (n_goals < 2) {
    // The base policy is pi_g itself; skip the rounding noise.
    out.grad.assign(probs.size(), 0.0);
    return out;
  }
  out.kl = kl_divergence(pg, base);
  out.grad.assign(probs.size(), 0.0);

  // Through pi_g directly: pi_g(b) (log(pi_g(b)/pi_0(b)) - KL).
  for (int b = 0; b < n_actions; ++b) {
    if (pg[b] > 0.0) out.grad[static_cast<std::size_t>(g) * n_actions + b] += pg[b] * (std::log(pg[b] / base[b]) - out.kl);
  }
  // Through pi_0 = sum_h rho_h pi_h.
  for (Goal h = 0; h < n_goals; ++h) {
    if (goal_dist[h] == 0.0) continue;
    const double* ph = probs.data() + static_cast<std::size_t>(h) * n_actions;
    double cross = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      if (base[a] > 0.0) cross += pg[a] * ph[a] / base[a];
    }
    for (int b = 0; b < n_actions; ++b) {
      const double ratio = base[b] > 0.0 ? pg[b] / base[b] : 0.0;
      out.grad[static_cast<std::size_t>(h) * n_actions + b] -= goal_dist[h] * ph[b] * (ratio - cross);
    }
  }
  return out;
}

double modified_reward_action(double reward, double kl, double beta) { return reward + beta * kl; }

StateCounts::StateCounts(int num_goals, int num_states, double pseudocount)
    : goals_(num_goals),
      states_(num_states),
      table_(static_cast<std::size_t>(num_goals) * num_states, pseudocount) {
  recompute_marginals();
}

void StateCounts::recompute_marginals() {
  goal_totals_.assign(goals_, 0.0);
  state_totals_.assign(states_, 0.0);
  total_ = 0.0;
  for (Goal g = 0; g < goals_; ++g) {
    for (State s = 0; s < states_; ++s) {
      const double n = table_[index(g, s)];
      goal_totals_[g] += n;
      state_totals_[s] += n;
      total_ += n;
    }
  }
}

void StateCounts::add(Goal g, State s, double amount) {
  table_[index(g, s)] += amount;
  goal_totals_[g] += amount;
  state_totals_[s] += amount;
  total_ += amount;
}

void StateCounts::set(Goal g, State s, double value) {
  table_[index(g, s)] = value;
  recompute_marginals();
}

void StateCounts::record(const Trajectory& traj, bool include_final_state) {
  for (const TrajectoryStep& step : traj.steps) add(traj.goal, step.state);
  if (include_final_state && !traj.steps.empty()) add(traj.goal, traj.final_state());
}

void StateCounts::decay(double factor) {
  for (double& n : table_) n *= factor;
  recompute_marginals();
}

EmpiricalRatios emp_ratios(const StateCounts& counts, std::span<const double> goal_dist, Goal g, State s) {
  EmpiricalRatios r;
  r.p_state_given_goal = counts.count(g, s) / counts.goal_total(g);
  r.p_state = counts.state_total(s) / counts.total();
  if (goal_dist.size() < 2) {
    r.p_state = r.p_state_given_goal;
    r.p_goal_given_state = 1.0;
    return r;
  }
  r.log_ratio = std::log(r.p_state_given_goal / r.p_state);
  r.p_goal_given_state = goal_dist[g] * r.p_state_given_goal / r.p_state;
  return r;
}

double modified_reward_state(double reward, const EmpiricalRatios& ratios, double beta) {
  return reward + beta * (1.0 - ratios.p_goal_given_state + ratios.log_ratio);
}

double counterfactual_reward(const Trajectory& traj, std::size_t t, const GoalPolicyTable& policy,
                             const StateCounts& counts, Goal other) {
  const Goal g = traj.goal;
  double weight = 1.0;
  for (std::size_t k = 0; k <= t; ++k) {
    const TrajectoryStep& step = traj.steps[k];
    const std::vector<double> p_other = action_probs(policy, other, step.state);
    const std::vector<double> p_own = action_probs(policy, g, step.state);
    weight *= p_other[step.action] / p_own[step.action];
  }
  const State st = traj.steps[t].state;
  return weight * (counts.count(g, st) / counts.goal_total(g)) / (counts.state_total(st) / counts.total());
}

std::vector<double> counterfactual_rewards(const Trajectory& traj, const GoalPolicyTable& policy,
                                           const StateCounts& counts) {
  const int n_goals = policy.num_goals();
  const int n_actions = policy.num_actions();
  const Goal g = traj.goal;
  std::vector<double> out(traj.size() * n_goals, 0.0);
  std::vector<double> weight(n_goals, 1.0);
  std::vector<double> probs(static_cast<std::size_t>(n_goals) * n_actions);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const TrajectoryStep& step = traj.steps[t];
    for (Goal h = 0; h < n_goals; ++h) {
      policy.probs(h, step.state, std::span<double>(probs.data() + static_cast<std::size_t>(h) * n_actions, n_actions));
    }
    const double own = probs[static_cast<std::size_t>(g) * n_actions + step.action];
    const double uniqueness =
        (counts.count(g, step.state) / counts.goal_total(g)) / (counts.state_total(step.state) / counts.total());
    for (Goal h = 0; h < n_goals; ++h) {
      if (h == g) continue;
      weight[h] *= probs[static_cast<std::size_t>(h) * n_actions + step.action] / own;
      out[t * n_goals + h] = weight[h] * uniqueness;
    }
  }
  return out;
}

std::vector<double> discounted_return(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    out[i] = acc;
  }
  return out;
}

InfoEstimate::InfoEstimate(int num_goals, double decay)
    : decay_(decay), goal_sums_(num_goals, 0.0), goal_samples_(num_goals, 0) {
  if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("InfoEstimate: decay must lie in [0, 1)");
}

void InfoEstimate::add(Goal g, double sample) {
  ema_ = decay_ * ema_ + (1.0 - decay_) * sample;
  weight_ = decay_ * weight_ + (1.0 - decay_);
  ++samples_;
  goal_sums_[g] += sample;
  ++goal_samples_[g];
}

double InfoEstimate::ema() const { return weight_ > 0.0 ? ema_ / weight_ : 0.0; }

double InfoEstimate::goal_weighted_mean(std::span<const double> goal_dist) const {
  double total = 0.0;
  double mass = 0.0;
  for (std::size_t g = 0; g < goal_sums_.size(); ++g) {
    if (goal_samples_[g] == 0) continue;
    total += goal_dist[g] * goal_sums_[g] / static_cast<double>(goal_samples_[g]);
    mass += goal_dist[g];
  }
  return mass > 0.0 ? total / mass : 0.0;
}

StepCredit action_credit(const Trajectory& traj, const GoalPolicyTable& policy, std::span<const double> goal_dist,
                         double beta, double gamma) {
  StepCredit credit;
  credit.num_goals = policy.num_goals();
  credit.info.resize(traj.size());
  credit.modified_rewards.resize(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const TrajectoryStep& step = traj.steps[t];
    credit.info[t] = kl_to_base(policy, goal_dist, traj.goal, step.state).kl;
    credit.modified_rewards[t] = beta == 0.0 ? step.reward : modified_reward_action(step.reward, credit.info[t], beta);
  }
  credit.modified_returns = discounted_return(credit.modified_rewards, gamma);
  return credit;
}

StepCredit state_credit(const Trajectory& traj, const GoalPolicyTable& policy, const StateCounts& counts,
                        std::span<const double> goal_dist, double beta, double gamma) {
  const int n_goals = policy.num_goals();
  const std::size_t len = traj.size();
  StepCredit credit;
  credit.num_goals = n_goals;
  credit.info.resize(len);
  credit.modified_rewards.resize(len);
  for (std::size_t t = 0; t < len; ++t) {
    const TrajectoryStep& step = traj.steps[t];
    const EmpiricalRatios ratios = emp_ratios(counts, goal_dist, traj.goal, step.state);
    credit.info[t] = ratios.log_ratio;
    credit.modified_rewards[t] = beta == 0.0 ? step.reward : modified_reward_state(step.reward, ratios, beta);
  }
  credit.modified_returns = discounted_return(credit.modified_rewards, gamma);

  credit.cf_returns.assign(len * n_goals, 0.0);
  if (beta == 0.0 || n_goals < 2) return credit;
  const std::vector<double> cf = counterfactual_rewards(traj, policy, counts);
  std::vector<double> column(len);
  for (Goal h = 0; h < n_goals; ++h) {
    if (h == traj.goal) continue;
    for (std::size_t t = 0; t < len; ++t) column[t] = cf[t * n_goals + h];
    const std::vector<double> ret = discounted_return(column, gamma);
    for (std::size_t t = 0; t < len; ++t) credit.cf_returns[t * n_goals + h] = ret[t];
  }
  return credit;
}

namespace {

StepGradient own_goal_term(std::size_t t, const Trajectory& traj, const GoalPolicyTable& policy,
                           const ValueTable& value, const StepCredit& credit) {
  const TrajectoryStep& step = traj.steps[t];
  StepGradient out;
  out.state = step.state;
  out.num_actions = policy.num_actions();
  out.d_logits.assign(static_cast<std::size_t>(policy.num_goals()) * policy.num_actions(), 0.0);
  const double advantage = credit.modified_returns[t] - value(traj.goal, step.state);
  const std::vector<double> probs = action_probs(policy, traj.goal, step.state);
  std::span<double> row = out.row(traj.goal);
  for (int b = 0; b < policy.num_actions(); ++b) row[b] = advantage * -probs[b];
  row[step.action] += advantage;
  return out;
}

}  // namespace

StepGradient action_grad_step(std::size_t t, const Trajectory& traj, const GoalPolicyTable& policy,
                              const ValueTable& value, std::span<const double> goal_dist, double beta,
                              const StepCredit& credit) {
  StepGradient out = own_goal_term(t, traj, policy, value, credit);
  if (beta == 0.0) return out;
  const KlToBase kl = kl_to_base(policy, goal_dist, traj.goal, out.state);
  for (std::size_t i = 0; i < out.d_logits.size(); ++i) out.d_logits[i] += beta * kl.grad[i];
  return out;
}

StepGradient state_grad_step(std::size_t t, const Trajectory& traj, const GoalPolicyTable& policy,
                             const ValueTable& value, std::span<const double> goal_dist, double beta,
                             const StepCredit& credit) {
  StepGradient out = own_goal_term(t, traj, policy, value, credit);
  if (beta == 0.0) return out;
  const TrajectoryStep& step = traj.steps[t];
  for (Goal h = 0; h < policy.num_goals(); ++h) {
    if (h == traj.goal) continue;
    const double scale = beta * goal_dist[h] * credit.cf_returns[t * credit.num_goals + h];
    if (scale == 0.0) continue;
    const std::vector<double> probs = action_probs(policy, h, step.state);
    std::span<double> row = out.row(h);
    for (int b = 0; b < policy.num_actions(); ++b) row[b] += scale * probs[b];
    row[step.action] -= scale;
  }
  return out;
}

void scatter_add(const StepGradient& step, const GoalPolicyTable& shape, std::span<double> dense, double scale) {
  for (Goal g = 0; g < shape.num_goals(); ++g) {
    const std::size_t base = shape.offset(g, step.state);
    std::span<const double> row = step.row(g);
    for (int a = 0; a < shape.num_actions(); ++a) dense[base + a] += scale * row[a];
  }
}

}  // namespace infoshare
