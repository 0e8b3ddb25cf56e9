#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace infoshare {

using State = int;
using Action = int;
using Goal = int;
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
double uniform01(Rng& rng);

/// Inverse-CDF draw from a probability vector. Consumes exactly one engine draw.
int sample_categorical(std::span<const double> probs, Rng& rng);

enum GridAction : int { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kStay = 4 };
inline constexpr int kNumGridActions = 5;

const char* grid_action_name(Action a);

struct GridPos {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

// held_key index: 0 = none, 1 + g = goal-specific key for goal g, 3 = master.
enum class KeyState : int { kNone = 0, kGoalKey0 = 1, kGoalKey1 = 2, kMaster = 3 };
inline constexpr int kNumKeyStates = 4;

inline KeyState goal_key(Goal g) { return static_cast<KeyState>(1 + g); }
const char* key_state_name(KeyState k);

/// Row-major grid indexing; in the key game every cell carries kNumKeyStates
/// sub-states (state = cell * key_states + key).
struct GridLayout {
  int width = 0;
  int height = 0;
  int key_states = 1;

  int num_cells() const { return width * height; }
  bool contains(GridPos p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  State index(GridPos p, KeyState k = KeyState::kNone) const {
    return (p.y * width + p.x) * key_states + static_cast<int>(k);
  }
  GridPos pos(State s) const {
    const int cell = s / key_states;
    return {cell % width, cell / width};
  }
  KeyState key(State s) const { return static_cast<KeyState>(s % key_states); }
};

struct Transition {
  State next = 0;
  double prob = 1.0;
};

/// Finite-horizon multi-goal MDP. Rewards are credited on entering a state;
/// step_penalty is added for the (state, action) pair that produced the move.
struct GoalMdp {
  std::string name;
  int num_states = 0;
  int num_actions = 0;
  int num_goals = 0;
  std::vector<std::vector<Transition>> transition;  // [s * A + a]
  std::vector<double> step_penalty;                 // [s * A + a]
  std::vector<double> goal_dist;                    // rho_G
  std::vector<double> init_dist;                    // rho_S
  std::vector<double> reward;                       // [s * G + g]
  std::vector<std::uint8_t> terminal;
  double gamma = 1.0;
  int horizon = 1;
  std::optional<GridLayout> layout;

  const std::vector<Transition>& row(State s, Action a) const {
    return transition[static_cast<std::size_t>(s) * num_actions + a];
  }
  double penalty(State s, Action a) const {
    return step_penalty[static_cast<std::size_t>(s) * num_actions + a];
  }
  double entry_reward(State s, Goal g) const {
    return reward[static_cast<std::size_t>(s) * num_goals + g];
  }
  bool is_terminal(State s) const { return terminal[s] != 0; }

  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

/// Allocates zeroed tables of the right shape; every (s, a) row is a self-loop.
GoalMdp make_empty_mdp(int num_states, int num_actions, int num_goals);

struct StepOutcome {
  State next = 0;
  double reward = 0.0;
  bool terminal = false;
};

/// Stepping from a terminal state throws std::logic_error. Deterministic rows
/// consume no randomness.
StepOutcome env_step(const GoalMdp& mdp, State s, Action a, Goal g, Rng& rng);

struct TrajectoryStep {
  State state = 0;
  Action action = 0;
  double reward = 0.0;
  State next = 0;
};

struct Trajectory {
  Goal goal = 0;
  std::vector<TrajectoryStep> steps;
  bool truncated = false;

  std::size_t size() const { return steps.size(); }
  bool reached_terminal() const { return !steps.empty() && !truncated; }
  State final_state() const { return steps.back().next; }
};

struct NavOptions {
  int width = 5;
  int height = 5;
  double wall_penalty = -0.1;
  double gamma = 0.8;
  int horizon = 100;
};

/// Two goals in the top-left and top-right corners, +1 for the episode's goal
/// and -1 for the other, both terminal; uniform spawn over the other cells.
GoalMdp build_nav_world(const NavOptions& options = {});

enum class KeyAgent { kAlice, kBob };

// Fixed key-and-door layout, 7 wide by 5 tall.
struct KeyWorldLayout {
  static constexpr int kWidth = 7;
  static constexpr int kHeight = 5;
  static constexpr GridPos kDoors[2] = {{0, 0}, {0, 4}};
  static constexpr GridPos kBobSpawn = {0, 2};
  static constexpr GridPos kBobKeys[2] = {{0, 1}, {0, 3}};
  static constexpr GridPos kAliceSpawns[3] = {{2, 1}, {2, 2}, {2, 3}};
  static constexpr GridPos kAliceKeys[2] = {{2, 0}, {2, 4}};
  static constexpr GridPos kMasterKey = {5, 2};
};

struct KeyOptions {
  double wall_penalty = -0.1;
  double gamma = 0.8;
  int horizon = 100;
};

GoalMdp build_key_world(KeyAgent agent, const KeyOptions& options = {});

/// Breadth-first shortest number of steps from `from` to any terminal state
/// that yields positive reward for goal g; -1 when unreachable.
int shortest_path_to_goal(const GoalMdp& mdp, State from, Goal g);

/// Samples g ~ rho_G, s_0 ~ rho_S, then a_t = pick(g, s_t, rng) until a
/// terminal state or max_len steps (max_len < 0 means the MDP horizon).
template <class Picker>
Trajectory sample_episode(const GoalMdp& mdp, Picker&& pick, Rng& rng, int max_len = -1) {
  const int limit = max_len < 0 ? mdp.horizon : max_len;
  Trajectory traj;
  traj.goal = sample_categorical(mdp.goal_dist, rng);
  State s = sample_categorical(mdp.init_dist, rng);
  traj.steps.reserve(static_cast<std::size_t>(std::min(limit, 64)));
  for (int t = 0; t < limit; ++t) {
    const Action a = pick(traj.goal, s, rng);
    const StepOutcome out = env_step(mdp, s, a, traj.goal, rng);
    traj.steps.push_back({s, a, out.reward, out.next});
    if (out.terminal) return traj;
    s = out.next;
  }
  traj.truncated = true;
  return traj;
}

}  // namespace infoshare
