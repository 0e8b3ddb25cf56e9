#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "infoshare/env.hpp"
#include "infoshare/tabular.hpp"

namespace infoshare {

double sigmoid(double x);

/// Scalar-core GRU over a sparse binary input. Weights are stored in a flat
/// parameter vector; the cell only records where each block starts.
///
///   u  = sigmoid(w_u . x + k_u h + b_u)
///   r  = sigmoid(w_r . x + k_r h + b_r)
///   c  = tanh(w_c . x + k_c (r h) + b_c)
///   h' = (1 - u) h + u c
struct GruCell {
  int input_dim = 0;
  std::size_t w_update = 0;
  std::size_t w_reset = 0;
  std::size_t w_cand = 0;
  std::size_t k_update = 0;
  std::size_t k_reset = 0;
  std::size_t k_cand = 0;
  std::size_t b_update = 0;
  std::size_t b_reset = 0;
  std::size_t b_cand = 0;

  /// Lays the cell out starting at `offset`; returns the first free offset.
  std::size_t layout(int input, std::size_t offset);
};

struct GruCache {
  std::array<int, 2> active{};  // indices of the two set input bits
  double h = 0.0;
  double update = 0.0;
  double reset = 0.0;
  double cand = 0.0;
};

double gru_step(const GruCell& cell, std::span<const double> params, std::array<int, 2> active, double h,
                GruCache* cache = nullptr);

/// Accumulates d(out)/d(params) into grad given d(out)/d(h') and returns
/// d(out)/d(h).
double gru_backward(const GruCell& cell, std::span<const double> params, const GruCache& cache, double d_next,
                    std::span<double> grad);

/// Bob: GRU over Alice's (state, action) stream, then a ReLU trunk over
/// one-hot(Bob's state) joined with the GRU state, then policy and value heads.
class ObserverNet {
 public:
  static constexpr int kHidden = 128;

  ObserverNet() = default;
  ObserverNet(int alice_states, int alice_actions, int bob_states, int bob_actions);

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
  void initialize(Rng& rng);

  int alice_states() const { return alice_states_; }
  int alice_actions() const { return alice_actions_; }
  int bob_states() const { return bob_states_; }
  int bob_actions() const { return bob_actions_; }
  const GruCell& gru() const { return gru_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::array<int, 2> encode(State alice_state, Action alice_action) const {
    return {alice_state, alice_states_ + alice_action};
  }

  struct Output {
    std::vector<double> probs;
    double value = 0.0;
  };

  /// Policy and value for Bob at `bob_state` with GRU state z.
  Output forward(double z, State bob_state) const;

  std::size_t trunk_weight(int input, int unit) const {
    return trunk_w_ + static_cast<std::size_t>(input) * kHidden + unit;
  }
  std::size_t trunk_bias() const { return trunk_b_; }
  std::size_t policy_weight(int action, int unit) const {
    return policy_w_ + static_cast<std::size_t>(action) * kHidden + unit;
  }
  std::size_t policy_bias() const { return policy_b_; }
  std::size_t value_weight() const { return value_w_; }
  std::size_t value_bias() const { return value_b_; }

  friend bool operator==(const ObserverNet&, const ObserverNet&) = default;

 private:
  int alice_states_ = 0;
  int alice_actions_ = 0;
  int bob_states_ = 0;
  int bob_actions_ = 0;
  GruCell gru_;
  std::size_t trunk_w_ = 0;  // [bob_states + 1][kHidden]
  std::size_t trunk_b_ = 0;
  std::size_t policy_w_ = 0;  // [bob_actions][kHidden]
  std::size_t policy_b_ = 0;
  std::size_t value_w_ = 0;
  std::size_t value_b_ = 0;
  std::vector<double> params_;
};

/// What Bob saw and did in one joint episode. Alice's observations stop once
/// she finishes; Bob's tick t acts on the GRU state after
/// min(t, alice_inputs.size()) observations.
struct BobEpisode {
  std::vector<std::array<int, 2>> alice_inputs;
  std::vector<State> bob_states;
  std::vector<Action> bob_actions;
  std::vector<double> bob_rewards;
};

/// Surrogate objective whose gradient is the REINFORCE-with-baseline update:
///   sum_t adv_t log pi(a_t) + bonus H[pi_t] - value_weight (v_t - R_t)^2,
/// with R_t the discounted return. When `advantages` is empty they are taken
/// as R_t - v_t from this forward pass and held constant. Returns the
/// objective and, if grad is non-null, accumulates its exact gradient
/// (backprop through time into the GRU).
double observer_objective(const ObserverNet& net, const BobEpisode& episode, double gamma, double bonus,
                          double value_weight, std::span<const double> advantages, std::vector<double>* grad);

/// The tick-t term of observer_objective alone, with its advantage taken from
/// this forward pass; `returns` are the episode's discounted returns.
double observer_tick_objective(const ObserverNet& net, const BobEpisode& episode, std::span<const double> returns,
                               std::size_t t, double bonus, double value_weight, std::vector<double>* grad);

/// GRU state after each prefix of Alice's observations; [0] is the zero state.
std::vector<double> observer_hidden_states(const ObserverNet& net, const BobEpisode& episode);

struct JointRecord {
  long episode = 0;
  long steps = 0;  // cumulative Bob steps
  Goal goal = 0;
  int alice_length = 0;
  int bob_length = 0;
  bool alice_success = false;  // Alice entered the rewarding terminal
  bool bob_success = false;
  double relative_length = 0.0;  // bob_length / alice_length
  bool alice_beats_bob = false;  // Alice succeeds strictly before Bob
  bool bob_beat_tie = false;     // Bob succeeds no later than Alice
  KeyState alice_key = KeyState::kNone;
  double bob_return = 0.0;
  double first_belief = 0.0;  // GRU state after Alice's first observation
  double entropy_bonus = 0.0;
};

struct JointEpisodeResult {
  Trajectory alice;
  BobEpisode bob;
  JointRecord record;
};

/// Samples Alice's episode from her frozen policy, then runs Bob on his own
/// copy of the grid for the same goal. Both act every tick; Bob's tick-t
/// action uses Alice's observations from ticks 0..t-1. An agent that
/// finishes waits; the episode ends when both are done or the horizon hits.
JointEpisodeResult play_joint_episode(const GoalMdp& alice_mdp, const GoalPolicyTable& alice, const GoalMdp& bob_mdp,
                                      const ObserverNet& bob, Rng& rng);

struct BobConfig {
  long total_steps = 200000;
  double learning_rate = 5e-5;
  double entropy_start = 0.5;
  double entropy_end = 0.01;
  double value_weight = 0.5;
  double gamma = 0.8;
  std::uint64_t seed = 1;
  // One Adam step per tick in time order, as for Alice; otherwise one step
  // per joint episode on the summed gradient.
  bool per_step_updates = true;

  void validate() const;
};

struct BobState {
  ObserverNet net;
  AdamState adam;
  Rng rng;
  long steps = 0;
  long episodes = 0;
};

/// REINFORCE with a value baseline and backprop through time into the GRU.
class BobTrainer {
 public:
  BobTrainer(const GoalMdp& alice_mdp, const GoalPolicyTable& alice, const GoalMdp& bob_mdp, const BobConfig& config);

  JointRecord run_episode();
  void run(const std::function<void(const JointRecord&)>& on_episode = {});
  bool done() const { return state_.steps >= config_.total_steps; }

  const BobState& state() const { return state_; }
  BobState& state() { return state_; }
  const BobConfig& config() const { return config_; }

 private:
  const GoalMdp& alice_mdp_;
  const GoalPolicyTable& alice_;
  const GoalMdp& bob_mdp_;
  BobConfig config_;
  BobState state_;
  std::vector<double> grad_;
};

struct JointSummary {
  long episodes = 0;
  double alice_length = 0.0;
  double bob_length = 0.0;
  double relative_length = 0.0;  // bob_length / alice_length over the window
  double alice_beats_bob = 0.0;
  double bob_beat_tie = 0.0;
  double master_key = 0.0;
  double goal_key = 0.0;
  double bob_success = 0.0;
};

/// Means over the trailing `window` records (all records when fewer).
JointSummary summarize_joint(std::span<const JointRecord> records, std::size_t window);

/// Frozen Alice against frozen Bob for n episodes.
std::vector<JointRecord> joint_evaluate(const GoalMdp& alice_mdp, const GoalPolicyTable& alice,
                                        const GoalMdp& bob_mdp, const ObserverNet& bob, long episodes, Rng& rng);

}  // namespace infoshare
