#include "infoshare/observer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "infoshare/trainer.hpp"

namespace infoshare {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t GruCell::layout(int input, std::size_t offset) {
  input_dim = input;
  const auto n = static_cast<std::size_t>(input);
  w_update = offset;
  w_reset = w_update + n;
  w_cand = w_reset + n;
  k_update = w_cand + n;
  k_reset = k_update + 1;
  k_cand = k_reset + 1;
  b_update = k_cand + 1;
  b_reset = b_update + 1;
  b_cand = b_reset + 1;
  return b_cand + 1;
}

double gru_step(const GruCell& cell, std::span<const double> params, std::array<int, 2> active, double h,
                GruCache* cache) {
  double pre_u = params[cell.b_update] + params[cell.k_update] * h;
  double pre_r = params[cell.b_reset] + params[cell.k_reset] * h;
  double pre_c = params[cell.b_cand];
  for (int i : active) {
    pre_u += params[cell.w_update + i];
    pre_r += params[cell.w_reset + i];
    pre_c += params[cell.w_cand + i];
  }
  const double u = sigmoid(pre_u);
  const double r = sigmoid(pre_r);
  const double c = std::tanh(pre_c + params[cell.k_cand] * (r * h));
  if (cache != nullptr) *cache = {active, h, u, r, c};
  return (1.0 - u) * h + u * c;
}

double gru_backward(const GruCell& cell, std::span<const double> params, const GruCache& cache, double d_next,
                    std::span<double> grad) {
  const double h = cache.h;
  const double u = cache.update;
  const double r = cache.reset;
  const double c = cache.cand;

  double dh = d_next * (1.0 - u);
  const double d_pre_u = d_next * (c - h) * u * (1.0 - u);
  const double d_pre_c = d_next * u * (1.0 - c * c);
  const double d_rh = d_pre_c * params[cell.k_cand];
  const double d_pre_r = d_rh * h * r * (1.0 - r);
  dh += d_rh * r + d_pre_u * params[cell.k_update] + d_pre_r * params[cell.k_reset];

  for (int i : cache.active) {
    grad[cell.w_update + i] += d_pre_u;
    grad[cell.w_reset + i] += d_pre_r;
    grad[cell.w_cand + i] += d_pre_c;
  }
  grad[cell.k_update] += d_pre_u * h;
  grad[cell.k_reset] += d_pre_r * h;
  grad[cell.k_cand] += d_pre_c * r * h;
  grad[cell.b_update] += d_pre_u;
  grad[cell.b_reset] += d_pre_r;
  grad[cell.b_cand] += d_pre_c;
  return dh;
}

ObserverNet::ObserverNet(int alice_states, int alice_actions, int bob_states, int bob_actions)
    : alice_states_(alice_states), alice_actions_(alice_actions), bob_states_(bob_states), bob_actions_(bob_actions) {
  std::size_t offset = gru_.layout(alice_states + alice_actions, 0);
  trunk_w_ = offset;
  offset += static_cast<std::size_t>(bob_states + 1) * kHidden;
  trunk_b_ = offset;
  offset += kHidden;
  policy_w_ = offset;
  offset += static_cast<std::size_t>(bob_actions) * kHidden;
  policy_b_ = offset;
  offset += bob_actions;
  value_w_ = offset;
  offset += kHidden;
  value_b_ = offset;
  offset += 1;
  params_.assign(offset, 0.0);
}

void ObserverNet::initialize(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  auto fill = [&](std::size_t begin, std::size_t count, int fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) params_[begin + i] = a * (2.0 * uniform01(rng) - 1.0);
  };
  const int gru_fan_in = gru_.input_dim + 1;
  const auto n = static_cast<std::size_t>(gru_.input_dim);
  fill(gru_.w_update, n, gru_fan_in);
  fill(gru_.w_reset, n, gru_fan_in);
  fill(gru_.w_cand, n, gru_fan_in);
  fill(gru_.k_update, 1, gru_fan_in);
  fill(gru_.k_reset, 1, gru_fan_in);
  fill(gru_.k_cand, 1, gru_fan_in);
  fill(trunk_w_, static_cast<std::size_t>(bob_states_ + 1) * kHidden, bob_states_ + 1);
  fill(policy_w_, static_cast<std::size_t>(bob_actions_) * kHidden, kHidden);
  fill(value_w_, kHidden, kHidden);
}

namespace {

struct TickForward {
  std::array<double, ObserverNet::kHidden> pre{};
  std::array<double, ObserverNet::kHidden> act{};
  std::vector<double> probs;
  double value = 0.0;
};

void forward_tick(const ObserverNet& net, double z, State bob_state, TickForward& out) {
  const std::span<const double> p = net.params();
  constexpr int H = ObserverNet::kHidden;
  const double* w_state = &p[net.trunk_weight(bob_state, 0)];
  const double* w_z = &p[net.trunk_weight(net.bob_states(), 0)];
  const double* bias = &p[net.trunk_bias()];
  for (int j = 0; j < H; ++j) {
    out.pre[j] = w_state[j] + w_z[j] * z + bias[j];
    out.act[j] = out.pre[j] > 0.0 ? out.pre[j] : 0.0;
  }
  out.probs.resize(net.bob_actions());
  for (int k = 0; k < net.bob_actions(); ++k) {
    const double* w = &p[net.policy_weight(k, 0)];
    double logit = p[net.policy_bias() + k];
    for (int j = 0; j < H; ++j) logit += w[j] * out.act[j];
    out.probs[k] = logit;
  }
  softmax(out.probs, out.probs);
  const double* wv = &p[net.value_weight()];
  double v = p[net.value_bias()];
  for (int j = 0; j < H; ++j) v += wv[j] * out.act[j];
  out.value = v;
}

}  // namespace

ObserverNet::Output ObserverNet::forward(double z, State bob_state) const {
  TickForward tick;
  forward_tick(*this, z, bob_state, tick);
  return {std::move(tick.probs), tick.value};
}

std::vector<double> observer_hidden_states(const ObserverNet& net, const BobEpisode& episode) {
  std::vector<double> hs(episode.alice_inputs.size() + 1, 0.0);
  for (std::size_t k = 0; k < episode.alice_inputs.size(); ++k) {
    hs[k + 1] = gru_step(net.gru(), net.params(), episode.alice_inputs[k], hs[k]);
  }
  return hs;
}

namespace {

// One tick's share of the surrogate objective. Accumulates parameter
// gradients of the heads and trunk into grad and returns d/dz through dz.
double tick_term(const ObserverNet& net, double z, State s, Action a, double ret, const double* advantage,
                 double bonus, double value_weight, std::vector<double>* grad, double* dz) {
  const std::span<const double> p = net.params();
  constexpr int H = ObserverNet::kHidden;
  TickForward tick;
  forward_tick(net, z, s, tick);
  const double adv = advantage != nullptr ? *advantage : ret - tick.value;
  const double h_pi = entropy(tick.probs);
  const double residual = tick.value - ret;
  const double objective = adv * std::log(tick.probs[a]) + bonus * h_pi - value_weight * residual * residual;
  if (grad == nullptr) return objective;

  std::vector<double>& g = *grad;
  std::array<double, H> d_act{};
  const double dv = -2.0 * value_weight * residual;
  const double* wv = &p[net.value_weight()];
  for (int j = 0; j < H; ++j) d_act[j] = dv * wv[j];
  for (int k = 0; k < net.bob_actions(); ++k) {
    const double pk = tick.probs[k];
    const double d_ent = pk > 0.0 ? -pk * (std::log(pk) + h_pi) : 0.0;
    const double dl = adv * ((k == a ? 1.0 : 0.0) - pk) + bonus * d_ent;
    const double* w = &p[net.policy_weight(k, 0)];
    double* gw = &g[net.policy_weight(k, 0)];
    for (int j = 0; j < H; ++j) {
      d_act[j] += dl * w[j];
      gw[j] += dl * tick.act[j];
    }
    g[net.policy_bias() + k] += dl;
  }
  double* gwv = &g[net.value_weight()];
  for (int j = 0; j < H; ++j) gwv[j] += dv * tick.act[j];
  g[net.value_bias()] += dv;

  double* gw_state = &g[net.trunk_weight(s, 0)];
  double* gw_z = &g[net.trunk_weight(net.bob_states(), 0)];
  double* gb = &g[net.trunk_bias()];
  const double* w_z = &p[net.trunk_weight(net.bob_states(), 0)];
  double d_z = 0.0;
  for (int j = 0; j < H; ++j) {
    if (tick.pre[j] <= 0.0) continue;
    const double d_pre = d_act[j];
    gw_state[j] += d_pre;
    gw_z[j] += d_pre * z;
    gb[j] += d_pre;
    d_z += d_pre * w_z[j];
  }
  *dz = d_z;
  return objective;
}

}  // namespace

double observer_objective(const ObserverNet& net, const BobEpisode& episode, double gamma, double bonus,
                          double value_weight, std::span<const double> advantages, std::vector<double>* grad) {
  const std::span<const double> p = net.params();
  const std::size_t K = episode.alice_inputs.size();
  const std::size_t L = episode.bob_states.size();

  std::vector<GruCache> caches(K);
  std::vector<double> hs(K + 1, 0.0);
  for (std::size_t k = 0; k < K; ++k) hs[k + 1] = gru_step(net.gru(), p, episode.alice_inputs[k], hs[k], &caches[k]);

  const std::vector<double> returns = discounted_return(episode.bob_rewards, gamma);
  std::vector<double> dhs(K + 1, 0.0);
  double objective = 0.0;
  for (std::size_t t = 0; t < L; ++t) {
    const std::size_t hi = std::min(t, K);
    double dz = 0.0;
    objective += tick_term(net, hs[hi], episode.bob_states[t], episode.bob_actions[t], returns[t],
                           advantages.empty() ? nullptr : &advantages[t], bonus, value_weight, grad, &dz);
    dhs[hi] += dz;
  }
  if (grad != nullptr) {
    for (std::size_t k = K; k-- > 0;) dhs[k] += gru_backward(net.gru(), p, caches[k], dhs[k + 1], *grad);
  }
  return objective;
}

double observer_tick_objective(const ObserverNet& net, const BobEpisode& episode, std::span<const double> returns,
                               std::size_t t, double bonus, double value_weight, std::vector<double>* grad) {
  const std::span<const double> p = net.params();
  const std::size_t hi = std::min(t, episode.alice_inputs.size());
  std::vector<GruCache> caches(hi);
  double h = 0.0;
  for (std::size_t k = 0; k < hi; ++k) h = gru_step(net.gru(), p, episode.alice_inputs[k], h, &caches[k]);
  double dz = 0.0;
  const double objective = tick_term(net, h, episode.bob_states[t], episode.bob_actions[t], returns[t], nullptr,
                                     bonus, value_weight, grad, &dz);
  if (grad != nullptr) {
    for (std::size_t k = hi; k-- > 0;) dz = gru_backward(net.gru(), p, caches[k], dz, *grad);
  }
  return objective;
}

JointEpisodeResult play_joint_episode(const GoalMdp& alice_mdp, const GoalPolicyTable& alice, const GoalMdp& bob_mdp,
                                      const ObserverNet& bob, Rng& rng) {
  JointEpisodeResult out;
  out.alice = sample_episode(
      alice_mdp, [&](Goal g, State s, Rng& r) { return sample_action(alice, g, s, r); }, rng);
  const Goal g = out.alice.goal;
  BobEpisode& ep = out.bob;
  ep.alice_inputs.reserve(out.alice.size());
  for (const TrajectoryStep& step : out.alice.steps) ep.alice_inputs.push_back(bob.encode(step.state, step.action));

  const std::size_t K = ep.alice_inputs.size();
  State s = sample_categorical(bob_mdp.init_dist, rng);
  double h = 0.0;
  bool bob_done = false;
  bool bob_success = false;
  double ret = 0.0;
  double discount = 1.0;
  for (int t = 0; t < bob_mdp.horizon && !bob_done; ++t) {
    if (t >= 1 && static_cast<std::size_t>(t - 1) < K) {
      h = gru_step(bob.gru(), bob.params(), ep.alice_inputs[t - 1], h);
    }
    const ObserverNet::Output o = bob.forward(h, s);
    const Action a = sample_categorical(o.probs, rng);
    const StepOutcome step = env_step(bob_mdp, s, a, g, rng);
    ep.bob_states.push_back(s);
    ep.bob_actions.push_back(a);
    ep.bob_rewards.push_back(step.reward);
    ret += discount * step.reward;
    discount *= bob_mdp.gamma;
    if (step.terminal) {
      bob_done = true;
      bob_success = bob_mdp.entry_reward(step.next, g) > 0.0;
    }
    s = step.next;
  }

  JointRecord& rec = out.record;
  rec.goal = g;
  rec.alice_length = static_cast<int>(out.alice.size());
  rec.bob_length = static_cast<int>(ep.bob_states.size());
  rec.alice_success =
      out.alice.reached_terminal() && alice_mdp.entry_reward(out.alice.final_state(), g) > 0.0;
  rec.bob_success = bob_success;
  rec.relative_length = static_cast<double>(rec.bob_length) / std::max(rec.alice_length, 1);
  rec.alice_beats_bob = rec.alice_success && (!rec.bob_success || rec.alice_length < rec.bob_length);
  rec.bob_beat_tie = rec.bob_success && (!rec.alice_success || rec.bob_length <= rec.alice_length);
  if (alice_mdp.layout && alice_mdp.layout->key_states > 1 && out.alice.size() > 0) {
    rec.alice_key = alice_mdp.layout->key(out.alice.final_state());
  }
  rec.bob_return = ret;
  rec.first_belief = K >= 1 ? gru_step(bob.gru(), bob.params(), ep.alice_inputs[0], 0.0) : 0.0;
  return out;
}

void BobConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (total_steps <= 0) fail("total_steps", "must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (!(entropy_end > 0.0)) fail("entropy_end", "must be positive");
  if (!(entropy_start >= entropy_end)) fail("entropy_start", "must be >= entropy_end");
  if (!(value_weight >= 0.0)) fail("value_weight", "must be non-negative");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma", "must lie in [0, 1]");
}

BobTrainer::BobTrainer(const GoalMdp& alice_mdp, const GoalPolicyTable& alice, const GoalMdp& bob_mdp,
                       const BobConfig& config)
    : alice_mdp_(alice_mdp), alice_(alice), bob_mdp_(bob_mdp), config_(config) {
  config_.validate();
  if (alice.num_goals() != alice_mdp.num_goals || alice.num_states() != alice_mdp.num_states ||
      alice.num_actions() != alice_mdp.num_actions) {
    throw std::invalid_argument("BobTrainer: Alice's policy does not match her MDP");
  }
  if (bob_mdp.num_goals != alice_mdp.num_goals) throw std::invalid_argument("BobTrainer: goal counts differ");
  state_.rng = Rng(config.seed);
  state_.net = ObserverNet(alice_mdp.num_states, alice_mdp.num_actions, bob_mdp.num_states, bob_mdp.num_actions);
  state_.net.initialize(state_.rng);
  state_.adam = AdamState(state_.net.params().size(), config.learning_rate);
  grad_.assign(state_.net.params().size(), 0.0);
}

JointRecord BobTrainer::run_episode() {
  const AnnealSchedule schedule{config_.entropy_start, config_.entropy_end, static_cast<double>(config_.total_steps)};
  const double bonus = anneal_value(schedule, static_cast<double>(state_.steps));
  JointEpisodeResult res = play_joint_episode(alice_mdp_, alice_, bob_mdp_, state_.net, state_.rng);
  auto check_gradient = [&] {
    for (double v : grad_) {
      if (!std::isfinite(v)) throw NonFiniteError("non-finite observer gradient");
    }
  };
  if (config_.per_step_updates) {
    const std::vector<double> returns = discounted_return(res.bob.bob_rewards, config_.gamma);
    for (std::size_t t = 0; t < res.bob.bob_states.size(); ++t) {
      const double step_bonus = anneal_value(schedule, static_cast<double>(state_.steps + static_cast<long>(t)));
      std::fill(grad_.begin(), grad_.end(), 0.0);
      observer_tick_objective(state_.net, res.bob, returns, t, step_bonus, config_.value_weight, &grad_);
      check_gradient();
      adam_step(state_.adam, state_.net.params(), grad_, StepDirection::kAscend);
    }
  } else {
    std::fill(grad_.begin(), grad_.end(), 0.0);
    observer_objective(state_.net, res.bob, config_.gamma, bonus, config_.value_weight, {}, &grad_);
    check_gradient();
    adam_step(state_.adam, state_.net.params(), grad_, StepDirection::kAscend);
  }
  for (double v : state_.net.params()) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite observer parameters");
  }
  state_.steps += res.record.bob_length;
  res.record.episode = state_.episodes++;
  res.record.steps = state_.steps;
  res.record.entropy_bonus = bonus;
  return res.record;
}

void BobTrainer::run(const std::function<void(const JointRecord&)>& on_episode) {
  while (!done()) {
    const JointRecord rec = run_episode();
    if (on_episode) on_episode(rec);
  }
}

JointSummary summarize_joint(std::span<const JointRecord> records, std::size_t window) {
  JointSummary out;
  const std::size_t n = std::min(window, records.size());
  if (n == 0) return out;
  for (std::size_t i = records.size() - n; i < records.size(); ++i) {
    const JointRecord& r = records[i];
    out.alice_length += r.alice_length;
    out.bob_length += r.bob_length;
    out.alice_beats_bob += r.alice_beats_bob ? 1.0 : 0.0;
    out.bob_beat_tie += r.bob_beat_tie ? 1.0 : 0.0;
    out.master_key += r.alice_key == KeyState::kMaster ? 1.0 : 0.0;
    out.goal_key += (r.alice_key == KeyState::kGoalKey0 || r.alice_key == KeyState::kGoalKey1) ? 1.0 : 0.0;
    out.bob_success += r.bob_success ? 1.0 : 0.0;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.episodes = static_cast<long>(n);
  out.relative_length = out.bob_length / out.alice_length;
  out.alice_length *= inv;
  out.bob_length *= inv;
  out.alice_beats_bob *= inv;
  out.bob_beat_tie *= inv;
  out.master_key *= inv;
  out.goal_key *= inv;
  out.bob_success *= inv;
  return out;
}

std::vector<JointRecord> joint_evaluate(const GoalMdp& alice_mdp, const GoalPolicyTable& alice,
                                        const GoalMdp& bob_mdp, const ObserverNet& bob, long episodes, Rng& rng) {
  std::vector<JointRecord> out;
  out.reserve(static_cast<std::size_t>(std::max(episodes, 0L)));
  long steps = 0;
  for (long i = 0; i < episodes; ++i) {
    JointRecord rec = play_joint_episode(alice_mdp, alice, bob_mdp, bob, rng).record;
    steps += rec.bob_length;
    rec.episode = i;
    rec.steps = steps;
    out.push_back(rec);
  }
  return out;
}

}  // namespace infoshare
