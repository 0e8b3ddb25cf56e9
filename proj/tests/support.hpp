#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "infoshare/env.hpp"
#include "infoshare/info_reg.hpp"
#include "infoshare/tabular.hpp"

namespace testsupport {

using namespace infoshare;

/// Four states, two goals, two stochastic actions, no terminal states,
/// gamma 1 and a fixed horizon: every episode has exactly `horizon` steps.
inline GoalMdp cycle_mdp(int horizon = 5) {
  GoalMdp mdp = make_empty_mdp(4, 2, 2);
  mdp.name = "cycle";
  mdp.gamma = 1.0;
  mdp.horizon = horizon;
  mdp.goal_dist = {0.5, 0.5};
  mdp.init_dist = {0.4, 0.3, 0.2, 0.1};
  for (State s = 0; s < 4; ++s) {
    // action 0 drifts forward, action 1 drifts backward
    mdp.transition[s * 2 + 0] = {{(s + 1) % 4, 0.7}, {s, 0.2}, {(s + 2) % 4, 0.1}};
    mdp.transition[s * 2 + 1] = {{(s + 3) % 4, 0.6}, {s, 0.4}};
    mdp.step_penalty[s * 2 + 1] = -0.05;
  }
  // goal 0 likes state 1, goal 1 likes state 3
  mdp.reward = {0.0, 0.0, 1.0, -0.5, 0.2, 0.2, -0.5, 1.0};
  mdp.validate();
  return mdp;
}

/// Same layout as the nav world with only goal 0.
inline GoalMdp single_goal_nav() {
  const GoalMdp two = build_nav_world();
  GoalMdp one = two;
  one.name = "nav-single-goal";
  one.num_goals = 1;
  one.goal_dist = {1.0};
  one.reward.assign(two.num_states, 0.0);
  for (State s = 0; s < two.num_states; ++s) one.reward[s] = two.entry_reward(s, 0);
  one.validate();
  return one;
}

inline GoalPolicyTable random_policy(const GoalMdp& mdp, Rng& rng, double scale = 1.0) {
  GoalPolicyTable p(mdp.num_goals, mdp.num_states, mdp.num_actions);
  std::normal_distribution<double> n(0.0, scale);
  for (double& x : p.data()) x = n(rng);
  return p;
}

/// Brute-force expectation over every trajectory of length <= horizon,
/// independent of the forward dynamic program used by the library.
struct Enumerated {
  std::vector<double> visits;  // [g][s], expected action-taking visits
  std::vector<double> length;  // [g]
  double discounted_return = 0.0;
};

inline Enumerated enumerate_trajectories(const GoalMdp& mdp, const GoalPolicyTable& policy) {
  Enumerated out;
  out.visits.assign(static_cast<std::size_t>(mdp.num_goals) * mdp.num_states, 0.0);
  out.length.assign(mdp.num_goals, 0.0);
  std::function<void(Goal, State, int, double, double, double)> walk = [&](Goal g, State s, int t, double prob,
                                                                           double ret, double discount) {
    if (t == mdp.horizon || mdp.is_terminal(s)) {
      out.discounted_return += mdp.goal_dist[g] * prob * ret;
      return;
    }
    out.visits[static_cast<std::size_t>(g) * mdp.num_states + s] += prob;
    out.length[g] += prob;
    const std::vector<double> pi = action_probs(policy, g, s);
    for (Action a = 0; a < mdp.num_actions; ++a) {
      for (const Transition& tr : mdp.row(s, a)) {
        const double r = mdp.entry_reward(tr.next, g) + mdp.penalty(s, a);
        walk(g, tr.next, t + 1, prob * pi[a] * tr.prob, ret + discount * r, discount * mdp.gamma);
      }
    }
  };
  for (Goal g = 0; g < mdp.num_goals; ++g) {
    for (State s = 0; s < mdp.num_states; ++s) {
      if (mdp.init_dist[s] > 0.0) walk(g, s, 0, mdp.init_dist[s], 0.0, 1.0);
    }
  }
  return out;
}

/// Central differences of f with respect to every entry of x.
inline std::vector<double> numeric_gradient(std::span<double> x, const std::function<double()>& f, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

/// Relative error for long parameter vectors: entries far below the gradient's
/// largest entry are measured against 1e-4 of that entry instead of themselves.
inline double gradient_check_error(std::span<const double> analytic, std::span<const double> numeric) {
  double scale = 0.0;
  for (double x : numeric) scale = std::max(scale, std::abs(x));
  return max_relative_error(analytic, numeric, std::max(1e-4 * scale, 1e-8));
}

}  // namespace testsupport
