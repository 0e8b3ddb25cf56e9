#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "infoshare/env.hpp"
#include "infoshare/info_reg.hpp"
#include "infoshare/tabular.hpp"

namespace infoshare {

enum class Regularizer { kNone, kAction, kState };

const char* regularizer_name(Regularizer r);
/// Throws std::invalid_argument for unknown names.
Regularizer parse_regularizer(const std::string& name);

struct TrainConfig {
  Regularizer regularizer = Regularizer::kNone;
  double beta = 0.0;
  long total_steps = 100000;
  int max_episode_len = 100;
  double entropy_start = 0.5;
  double entropy_end = 0.005;
  double learning_rate = 2.5e-2;
  double value_weight = 0.5;
  double gamma = 0.8;
  std::uint64_t seed = 1;
  // One Adam step per episode on the summed per-step gradients.
  bool batched = false;
  bool count_final_state = false;
  // Multiplies every count before each episode is recorded; 1 disables.
  double count_decay = 1.0;
  double info_decay = 0.999;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct AnnealSchedule {
  double start = 0.5;
  double end = 0.005;
  double horizon = 1.0;
};

/// start * (end / start)^(min(step, horizon) / horizon).
double anneal_value(const AnnealSchedule& schedule, double step);

struct EpisodeRecord {
  long episode = 0;
  long steps = 0;  // cumulative environment steps including this episode
  Goal goal = 0;
  int length = 0;
  bool truncated = false;
  double raw_return = 0.0;       // discounted, environment reward only
  double modified_return = 0.0;  // discounted, with the information bonus
  double mean_kl_bits = 0.0;
  double i_action_bits = 0.0;
  double i_state_bits = 0.0;
  double entropy_bonus = 0.0;
  double value_mse = 0.0;
  // Key held when the episode ended; kNone outside the key game.
  KeyState key = KeyState::kNone;
};

/// Thrown when a parameter or gradient becomes non-finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a training run mutates; persisted by snapshots.
struct AliceState {
  GoalPolicyTable policy;
  ValueTable value;
  StateCounts counts;
  AdamState policy_adam;
  AdamState value_adam;
  Rng rng;
  long steps = 0;
  long episodes = 0;
};

/// Information-regularized REINFORCE with a goal-state value baseline. Each
/// episode samples a trajectory, records its counts, computes modified
/// returns from the policy that generated it, then applies one policy and one
/// value update per step in time order.
class AliceTrainer {
 public:
  AliceTrainer(const GoalMdp& mdp, const TrainConfig& config);

  EpisodeRecord run_episode();
  /// Runs episodes until total_steps environment steps have been consumed.
  void run(const std::function<void(const EpisodeRecord&)>& on_episode = {});
  bool done() const { return state_.steps >= config_.total_steps; }

  const GoalMdp& mdp() const { return mdp_; }
  const TrainConfig& config() const { return config_; }
  const AliceState& state() const { return state_; }
  AliceState& state() { return state_; }
  const InfoEstimate& action_info() const { return action_info_; }
  const InfoEstimate& state_info() const { return state_info_; }

 private:
  void apply_policy_update(std::span<const double> grad);
  void apply_value_update(std::span<const double> grad);

  const GoalMdp& mdp_;
  TrainConfig config_;
  AnnealSchedule entropy_;
  AliceState state_;
  InfoEstimate action_info_;
  InfoEstimate state_info_;
  std::vector<double> policy_grad_;
  std::vector<double> value_grad_;
};

struct AliceResult {
  AliceState state;
  std::vector<EpisodeRecord> records;
};

AliceResult train_alice(const GoalMdp& mdp, const TrainConfig& config);

/// Unregularized REINFORCE with a value baseline and the same entropy bonus,
/// written without any regularizer machinery. Used to check that beta = 0
/// runs of AliceTrainer reduce to it exactly.
AliceState train_reinforce_baseline(const GoalMdp& mdp, const TrainConfig& config);

/// Per-goal mean of a frozen policy's sampled episode statistics.
struct RolloutSummary {
  long episodes = 0;
  double mean_length = 0.0;
  double mean_return = 0.0;
  double action_info_nats = 0.0;  // mean per-step exact KL to the base policy
  double state_info_nats = 0.0;   // count-based estimate from the rollouts
};

/// Samples frozen-policy episodes until at least `steps` environment steps
/// have been taken.
RolloutSummary rollout_frozen(const GoalMdp& mdp, const GoalPolicyTable& policy, long steps, Rng& rng,
                              bool count_final_state = false);

}  // namespace infoshare
