#include "infoshare/env.hpp"

#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

namespace infoshare {

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  // Rounding left acc slightly below 1.
  return last_positive;
}

const char* grid_action_name(Action a) {
  switch (a) {
    case kLeft: return "left";
    case kRight: return "right";
    case kUp: return "up";
    case kDown: return "down";
    case kStay: return "stay";
    default: return "?";
  }
}

const char* key_state_name(KeyState k) {
  switch (k) {
    case KeyState::kNone: return "none";
    case KeyState::kGoalKey0: return "goal_key_0";
    case KeyState::kGoalKey1: return "goal_key_1";
    case KeyState::kMaster: return "master";
  }
  return "?";
}

namespace {

void check_distribution(std::span<const double> p, const std::string& what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(what + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(what + " does not sum to 1");
}

GridPos moved(GridPos p, Action a) {
  switch (a) {
    case kLeft: return {p.x - 1, p.y};
    case kRight: return {p.x + 1, p.y};
    case kUp: return {p.x, p.y - 1};
    case kDown: return {p.x, p.y + 1};
    default: return p;
  }
}

}  // namespace

void GoalMdp::validate() const {
  if (num_states <= 0 || num_actions <= 0 || num_goals <= 0) throw std::invalid_argument("mdp: empty state/action/goal set");
  const auto sa = static_cast<std::size_t>(num_states) * num_actions;
  if (transition.size() != sa || step_penalty.size() != sa) throw std::invalid_argument("mdp: transition table shape");
  if (reward.size() != static_cast<std::size_t>(num_states) * num_goals) throw std::invalid_argument("mdp: reward table shape");
  if (terminal.size() != static_cast<std::size_t>(num_states)) throw std::invalid_argument("mdp: terminal table shape");
  if (goal_dist.size() != static_cast<std::size_t>(num_goals)) throw std::invalid_argument("mdp: goal_dist shape");
  if (init_dist.size() != static_cast<std::size_t>(num_states)) throw std::invalid_argument("mdp: init_dist shape");
  check_distribution(goal_dist, "mdp: goal_dist");
  check_distribution(init_dist, "mdp: init_dist");
  for (State s = 0; s < num_states; ++s) {
    if (terminal[s] && init_dist[s] > 0.0) throw std::invalid_argument("mdp: init_dist puts mass on a terminal state");
  }
  for (std::size_t i = 0; i < sa; ++i) {
    double sum = 0.0;
    for (const Transition& tr : transition[i]) {
      if (tr.next < 0 || tr.next >= num_states) throw std::invalid_argument("mdp: transition to out-of-range state");
      if (!(tr.prob >= 0.0)) throw std::invalid_argument("mdp: negative transition probability");
      sum += tr.prob;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("mdp: transition row does not sum to 1");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("mdp: gamma outside [0, 1]");
  if (horizon < 1) throw std::invalid_argument("mdp: horizon < 1");
}

GoalMdp make_empty_mdp(int num_states, int num_actions, int num_goals) {
  GoalMdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = num_actions;
  mdp.num_goals = num_goals;
  const auto sa = static_cast<std::size_t>(num_states) * num_actions;
  mdp.transition.resize(sa);
  for (std::size_t i = 0; i < sa; ++i) mdp.transition[i] = {{static_cast<State>(i / num_actions), 1.0}};
  mdp.step_penalty.assign(sa, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(num_states) * num_goals, 0.0);
  mdp.terminal.assign(num_states, 0);
  mdp.goal_dist.assign(num_goals, 1.0 / num_goals);
  mdp.init_dist.assign(num_states, 0.0);
  return mdp;
}

StepOutcome env_step(const GoalMdp& mdp, State s, Action a, Goal g, Rng& rng) {
  if (mdp.is_terminal(s)) throw std::logic_error("env_step: stepping from terminal state " + std::to_string(s));
  if (a < 0 || a >= mdp.num_actions) throw std::logic_error("env_step: invalid action " + std::to_string(a));
  const auto& row = mdp.row(s, a);
  State next = row.front().next;
  if (row.size() > 1) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (const Transition& tr : row) {
      acc += tr.prob;
      next = tr.next;
      if (u < acc) break;
    }
  }
  return {next, mdp.entry_reward(next, g) + mdp.penalty(s, a), mdp.is_terminal(next)};
}

GoalMdp build_nav_world(const NavOptions& opt) {
  if (opt.width < 2 || opt.height < 2) throw std::invalid_argument("nav world needs at least a 2x2 grid");
  GridLayout layout{opt.width, opt.height, 1};
  GoalMdp mdp = make_empty_mdp(layout.num_cells(), kNumGridActions, 2);
  mdp.name = "nav";
  mdp.layout = layout;
  mdp.gamma = opt.gamma;
  mdp.horizon = opt.horizon;

  const State goal_states[2] = {layout.index({0, 0}), layout.index({opt.width - 1, 0})};
  for (Goal g = 0; g < 2; ++g) {
    mdp.terminal[goal_states[g]] = 1;
    for (Goal h = 0; h < 2; ++h) {
      mdp.reward[static_cast<std::size_t>(goal_states[g]) * 2 + h] = (g == h) ? 1.0 : -1.0;
    }
  }

  int open_cells = 0;
  for (State s = 0; s < mdp.num_states; ++s) open_cells += mdp.terminal[s] ? 0 : 1;
  for (State s = 0; s < mdp.num_states; ++s) {
    mdp.init_dist[s] = mdp.terminal[s] ? 0.0 : 1.0 / open_cells;
    const GridPos p = layout.pos(s);
    for (Action a = 0; a < kNumGridActions; ++a) {
      const GridPos q = moved(p, a);
      const std::size_t i = static_cast<std::size_t>(s) * kNumGridActions + a;
      if (layout.contains(q)) {
        mdp.transition[i] = {{layout.index(q), 1.0}};
      } else {
        mdp.transition[i] = {{s, 1.0}};
        mdp.step_penalty[i] = opt.wall_penalty;
      }
    }
  }
  mdp.validate();
  return mdp;
}

GoalMdp build_key_world(KeyAgent agent, const KeyOptions& opt) {
  using L = KeyWorldLayout;
  GridLayout layout{L::kWidth, L::kHeight, kNumKeyStates};
  GoalMdp mdp = make_empty_mdp(layout.num_cells() * kNumKeyStates, kNumGridActions, 2);
  mdp.name = agent == KeyAgent::kAlice ? "key-alice" : "key-bob";
  mdp.layout = layout;
  mdp.gamma = opt.gamma;
  mdp.horizon = opt.horizon;

  auto key_at = [&](GridPos p) -> KeyState {
    for (Goal g = 0; g < 2; ++g) {
      const GridPos key_cell = agent == KeyAgent::kAlice ? L::kAliceKeys[g] : L::kBobKeys[g];
      if (p == key_cell) return goal_key(g);
    }
    if (agent == KeyAgent::kAlice && p == L::kMasterKey) return KeyState::kMaster;
    return KeyState::kNone;
  };
  auto opens = [](KeyState k, Goal door) { return k == KeyState::kMaster || k == goal_key(door); };

  for (Goal door = 0; door < 2; ++door) {
    for (int k = 0; k < kNumKeyStates; ++k) {
      const auto key = static_cast<KeyState>(k);
      if (!opens(key, door)) continue;
      const State s = layout.index(L::kDoors[door], key);
      mdp.terminal[s] = 1;
      for (Goal g = 0; g < 2; ++g) mdp.reward[static_cast<std::size_t>(s) * 2 + g] = (g == door) ? 1.0 : -1.0;
    }
  }

  for (State s = 0; s < mdp.num_states; ++s) {
    const GridPos p = layout.pos(s);
    const KeyState held = layout.key(s);
    for (Action a = 0; a < kNumGridActions; ++a) {
      const GridPos q = moved(p, a);
      const std::size_t i = static_cast<std::size_t>(s) * kNumGridActions + a;
      if (!layout.contains(q)) {
        mdp.transition[i] = {{s, 1.0}};
        mdp.step_penalty[i] = opt.wall_penalty;
        continue;
      }
      // One key per episode: the first key cell entered.
      const KeyState after = held == KeyState::kNone ? key_at(q) : held;
      mdp.transition[i] = {{layout.index(q, after), 1.0}};
    }
  }

  if (agent == KeyAgent::kAlice) {
    for (GridPos p : L::kAliceSpawns) mdp.init_dist[layout.index(p)] = 1.0 / 3.0;
  } else {
    mdp.init_dist[layout.index(L::kBobSpawn)] = 1.0;
  }
  mdp.validate();
  return mdp;
}

int shortest_path_to_goal(const GoalMdp& mdp, State from, Goal g) {
  std::vector<int> dist(mdp.num_states, -1);
  std::queue<State> frontier;
  dist[from] = 0;
  frontier.push(from);
  while (!frontier.empty()) {
    const State s = frontier.front();
    frontier.pop();
    if (mdp.is_terminal(s)) {
      if (mdp.entry_reward(s, g) > 0.0) return dist[s];
      continue;
    }
    for (Action a = 0; a < mdp.num_actions; ++a) {
      for (const Transition& tr : mdp.row(s, a)) {
        if (tr.prob <= 0.0 || dist[tr.next] >= 0) continue;
        dist[tr.next] = dist[s] + 1;
        frontier.push(tr.next);
      }
    }
  }
  return -1;
}

}  // namespace infoshare
