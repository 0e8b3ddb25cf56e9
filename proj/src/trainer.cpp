#include "infoshare/trainer.hpp"

#include <cmath>

namespace infoshare {

const char* regularizer_name(Regularizer r) {
  switch (r) {
    case Regularizer::kNone:
      return "none";
    case Regularizer::kAction:
      return "action";
    case Regularizer::kState:
      return "state";
  }
  return "?";
}

Regularizer parse_regularizer(const std::string& name) {
  if (name == "none") return Regularizer::kNone;
  if (name == "action") return Regularizer::kAction;
  if (name == "state") return Regularizer::kState;
  throw std::invalid_argument("regularizer: expected none, action or state, got '" + name + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (total_steps <= 0) fail("total_steps", "must be positive");
  if (max_episode_len <= 0) fail("max_episode_len", "must be positive");
  if (!(entropy_end > 0.0)) fail("entropy_end", "must be positive");
  if (!(entropy_start >= entropy_end)) fail("entropy_start", "must be >= entropy_end");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (!(value_weight >= 0.0)) fail("value_weight", "must be non-negative");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma", "must lie in [0, 1]");
  if (!std::isfinite(beta)) fail("beta", "must be finite");
  if (regularizer == Regularizer::kNone && beta != 0.0) fail("beta", "is set but regularizer is none");
  if (!(count_decay > 0.0 && count_decay <= 1.0)) fail("count_decay", "must lie in (0, 1]");
  if (!(info_decay >= 0.0 && info_decay < 1.0)) fail("info_decay", "must lie in [0, 1)");
}

double anneal_value(const AnnealSchedule& schedule, double step) {
  const double frac = schedule.horizon > 0.0 ? std::min(std::max(step, 0.0), schedule.horizon) / schedule.horizon : 1.0;
  return schedule.start * std::pow(schedule.end / schedule.start, frac);
}

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite ") + what);
  }
}

double log_ratio_from_counts(const StateCounts& counts, std::span<const double> goal_dist, Goal g, State s) {
  return emp_ratios(counts, goal_dist, g, s).log_ratio;
}

}  // namespace

AliceTrainer::AliceTrainer(const GoalMdp& mdp, const TrainConfig& config)
    : mdp_(mdp),
      config_(config),
      entropy_{config.entropy_start, config.entropy_end, static_cast<double>(config.total_steps)},
      action_info_(mdp.num_goals, config.info_decay),
      state_info_(mdp.num_goals, config.info_decay) {
  config_.validate();
  mdp_.validate();
  state_.policy = GoalPolicyTable(mdp.num_goals, mdp.num_states, mdp.num_actions);
  state_.value = ValueTable(mdp.num_goals, mdp.num_states);
  state_.counts = StateCounts(mdp.num_goals, mdp.num_states);
  state_.policy_adam = AdamState(state_.policy.data().size(), config.learning_rate);
  state_.value_adam = AdamState(state_.value.data().size(), config.learning_rate);
  state_.rng = Rng(config.seed);
  policy_grad_.assign(state_.policy.data().size(), 0.0);
  value_grad_.assign(state_.value.data().size(), 0.0);
}

// Gradients are checked where they are formed; finite gradients keep Adam
// finite, so parameters are checked once per episode.
void AliceTrainer::apply_policy_update(std::span<const double> grad) {
  adam_step(state_.policy_adam, state_.policy.data(), grad, StepDirection::kAscend);
}

void AliceTrainer::apply_value_update(std::span<const double> grad) {
  adam_step(state_.value_adam, state_.value.data(), grad, StepDirection::kDescend);
}

EpisodeRecord AliceTrainer::run_episode() {
  GoalPolicyTable& policy = state_.policy;
  ValueTable& value = state_.value;
  const std::span<const double> rho = mdp_.goal_dist;
  const Trajectory traj = sample_episode(
      mdp_, [&](Goal g, State s, Rng& rng) { return sample_action(policy, g, s, rng); }, state_.rng,
      config_.max_episode_len);
  const std::size_t len = traj.size();
  const Goal g = traj.goal;

  if (config_.count_decay != 1.0) state_.counts.decay(config_.count_decay);
  state_.counts.record(traj, config_.count_final_state);

  const double beta = config_.regularizer == Regularizer::kNone ? 0.0 : config_.beta;
  const StepCredit credit = config_.regularizer == Regularizer::kState
                                ? state_credit(traj, policy, state_.counts, rho, beta, config_.gamma)
                                : action_credit(traj, policy, rho, beta, config_.gamma);

  EpisodeRecord rec;
  rec.episode = state_.episodes;
  rec.goal = g;
  rec.length = static_cast<int>(len);
  rec.truncated = traj.truncated;
  double kl_sum = 0.0;
  double mse = 0.0;
  std::vector<double> raw(len);
  for (std::size_t t = 0; t < len; ++t) {
    const State s = traj.steps[t].state;
    raw[t] = traj.steps[t].reward;
    const double kl = config_.regularizer == Regularizer::kState ? kl_to_base(policy, rho, g, s).kl : credit.info[t];
    const double log_ratio = config_.regularizer == Regularizer::kState ? credit.info[t]
                                                                         : log_ratio_from_counts(state_.counts, rho, g, s);
    kl_sum += kl;
    action_info_.add(g, kl);
    state_info_.add(g, log_ratio);
    const double residual = value(g, s) - credit.modified_returns[t];
    mse += residual * residual;
  }
  rec.raw_return = len > 0 ? discounted_return(raw, config_.gamma)[0] : 0.0;
  rec.modified_return = len > 0 ? credit.modified_returns[0] : 0.0;
  rec.mean_kl_bits = len > 0 ? nats_to_bits(kl_sum / static_cast<double>(len)) : 0.0;
  rec.value_mse = len > 0 ? mse / static_cast<double>(len) : 0.0;
  rec.entropy_bonus = anneal_value(entropy_, static_cast<double>(state_.steps));

  const bool batched = config_.batched;
  for (std::size_t t = 0; t < len; ++t) {
    const State s = traj.steps[t].state;
    const StepGradient step = config_.regularizer == Regularizer::kState
                                  ? state_grad_step(t, traj, policy, value, rho, beta, credit)
                                  : action_grad_step(t, traj, policy, value, rho, beta, credit);
    require_finite(step.d_logits, "policy gradient");
    scatter_add(step, policy, policy_grad_);
    const double bonus = anneal_value(entropy_, static_cast<double>(state_.steps + static_cast<long>(t)));
    const std::vector<double> eg = entropy_gradient(policy, g, s);
    const std::size_t off = policy.offset(g, s);
    for (int b = 0; b < policy.num_actions(); ++b) policy_grad_[off + b] += bonus * eg[b];

    const std::size_t vi = value.index(g, s);
    const double dv = 2.0 * config_.value_weight * (value(g, s) - credit.modified_returns[t]);
    require_finite({&dv, 1}, "value gradient");
    if (batched) {
      value_grad_[vi] += dv;
      continue;
    }
    apply_policy_update(policy_grad_);
    for (Goal h = 0; h < policy.num_goals(); ++h) {
      std::span<double> row(policy_grad_.data() + policy.offset(h, s), static_cast<std::size_t>(policy.num_actions()));
      std::fill(row.begin(), row.end(), 0.0);
    }
    value_grad_[vi] = dv;
    apply_value_update(value_grad_);
    value_grad_[vi] = 0.0;
  }
  if (batched && len > 0) {
    apply_policy_update(policy_grad_);
    apply_value_update(value_grad_);
    std::fill(policy_grad_.begin(), policy_grad_.end(), 0.0);
    std::fill(value_grad_.begin(), value_grad_.end(), 0.0);
  }
  require_finite(policy.data(), "policy logits");
  require_finite(value.data(), "value table");

  state_.steps += static_cast<long>(len);
  ++state_.episodes;
  rec.steps = state_.steps;
  rec.i_action_bits = action_info_.ema_bits();
  rec.i_state_bits = state_info_.ema_bits();
  if (mdp_.layout && mdp_.layout->key_states > 1 && len > 0) rec.key = mdp_.layout->key(traj.final_state());
  return rec;
}

void AliceTrainer::run(const std::function<void(const EpisodeRecord&)>& on_episode) {
  while (!done()) {
    const EpisodeRecord rec = run_episode();
    if (on_episode) on_episode(rec);
  }
}

AliceResult train_alice(const GoalMdp& mdp, const TrainConfig& config) {
  AliceTrainer trainer(mdp, config);
  AliceResult result;
  trainer.run([&](const EpisodeRecord& rec) { result.records.push_back(rec); });
  result.state = trainer.state();
  return result;
}

AliceState train_reinforce_baseline(const GoalMdp& mdp, const TrainConfig& config) {
  config.validate();
  const AnnealSchedule entropy{config.entropy_start, config.entropy_end, static_cast<double>(config.total_steps)};
  AliceState st;
  st.policy = GoalPolicyTable(mdp.num_goals, mdp.num_states, mdp.num_actions);
  st.value = ValueTable(mdp.num_goals, mdp.num_states);
  st.policy_adam = AdamState(st.policy.data().size(), config.learning_rate);
  st.value_adam = AdamState(st.value.data().size(), config.learning_rate);
  st.rng = Rng(config.seed);
  std::vector<double> pgrad(st.policy.data().size());
  std::vector<double> vgrad(st.value.data().size());
  std::vector<double> probs(mdp.num_actions);

  while (st.steps < config.total_steps) {
    const Trajectory traj = sample_episode(
        mdp, [&](Goal g, State s, Rng& rng) { return sample_action(st.policy, g, s, rng); }, st.rng,
        config.max_episode_len);
    const std::size_t len = traj.size();
    std::vector<double> returns(len);
    double acc = 0.0;
    for (std::size_t i = len; i-- > 0;) {
      acc = traj.steps[i].reward + config.gamma * acc;
      returns[i] = acc;
    }
    const Goal g = traj.goal;
    for (std::size_t t = 0; t < len; ++t) {
      const State s = traj.steps[t].state;
      const Action a = traj.steps[t].action;
      std::fill(pgrad.begin(), pgrad.end(), 0.0);
      const double advantage = returns[t] - st.value(g, s);
      st.policy.probs(g, s, probs);
      const std::size_t off = st.policy.offset(g, s);
      for (int b = 0; b < mdp.num_actions; ++b) pgrad[off + b] = advantage * -probs[b];
      pgrad[off + a] += advantage;
      const double bonus = anneal_value(entropy, static_cast<double>(st.steps + static_cast<long>(t)));
      const std::vector<double> eg = entropy_gradient(st.policy, g, s);
      for (int b = 0; b < mdp.num_actions; ++b) pgrad[off + b] += bonus * eg[b];
      adam_step(st.policy_adam, st.policy.data(), pgrad, StepDirection::kAscend);

      const std::size_t vi = st.value.index(g, s);
      vgrad[vi] = 2.0 * config.value_weight * (st.value(g, s) - returns[t]);
      adam_step(st.value_adam, st.value.data(), vgrad, StepDirection::kDescend);
      vgrad[vi] = 0.0;
    }
    st.steps += static_cast<long>(len);
    ++st.episodes;
  }
  return st;
}

RolloutSummary rollout_frozen(const GoalMdp& mdp, const GoalPolicyTable& policy, long steps, Rng& rng,
                              bool count_final_state) {
  RolloutSummary out;
  StateCounts counts(mdp.num_goals, mdp.num_states, 0.0);
  std::vector<double> kl_sum(mdp.num_goals, 0.0);
  std::vector<long> kl_n(mdp.num_goals, 0);
  std::vector<double> kl_table(static_cast<std::size_t>(mdp.num_goals) * mdp.num_states, -1.0);
  long taken = 0;
  double length_sum = 0.0;
  double return_sum = 0.0;
  while (taken < steps) {
    const Trajectory traj =
        sample_episode(mdp, [&](Goal g, State s, Rng& r) { return sample_action(policy, g, s, r); }, rng);
    counts.record(traj, count_final_state);
    double ret = 0.0;
    double discount = 1.0;
    for (const TrajectoryStep& step : traj.steps) {
      double& kl = kl_table[static_cast<std::size_t>(traj.goal) * mdp.num_states + step.state];
      if (kl < 0.0) kl = kl_to_base(policy, mdp.goal_dist, traj.goal, step.state).kl;
      kl_sum[traj.goal] += kl;
      ++kl_n[traj.goal];
      ret += discount * step.reward;
      discount *= mdp.gamma;
    }
    taken += static_cast<long>(traj.size());
    length_sum += static_cast<double>(traj.size());
    return_sum += ret;
    ++out.episodes;
  }
  out.mean_length = length_sum / static_cast<double>(out.episodes);
  out.mean_return = return_sum / static_cast<double>(out.episodes);

  double mass = 0.0;
  for (Goal g = 0; g < mdp.num_goals; ++g) {
    if (kl_n[g] == 0) continue;
    out.action_info_nats += mdp.goal_dist[g] * kl_sum[g] / static_cast<double>(kl_n[g]);
    mass += mdp.goal_dist[g];
  }
  if (mass > 0.0) out.action_info_nats /= mass;

  // Plug-in I(S;G) with the rho-weighted marginal, matching the oracle's
  // definition of d(s).
  for (State s = 0; s < mdp.num_states; ++s) {
    double marginal = 0.0;
    for (Goal g = 0; g < mdp.num_goals; ++g) {
      if (counts.goal_total(g) > 0.0) marginal += mdp.goal_dist[g] * counts.count(g, s) / counts.goal_total(g);
    }
    if (marginal == 0.0) continue;
    for (Goal g = 0; g < mdp.num_goals; ++g) {
      if (counts.goal_total(g) == 0.0 || counts.count(g, s) == 0.0) continue;
      const double p = counts.count(g, s) / counts.goal_total(g);
      out.state_info_nats += mdp.goal_dist[g] * p * std::log(p / marginal);
    }
  }
  return out;
}

}  // namespace infoshare
