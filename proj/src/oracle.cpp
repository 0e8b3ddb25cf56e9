#include "infoshare/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "infoshare/info_reg.hpp"

namespace infoshare {

namespace {

std::vector<double> all_probs(const GoalPolicyTable& policy) {
  std::vector<double> probs(policy.data().size());
  for (Goal g = 0; g < policy.num_goals(); ++g) {
    for (State s = 0; s < policy.num_states(); ++s) {
      const std::size_t off = policy.offset(g, s);
      softmax(policy.logits(g, s), std::span<double>(probs.data() + off, policy.num_actions()));
    }
  }
  return probs;
}

}  // namespace

OccupancyTable exact_occupancy(const GoalMdp& mdp, const GoalPolicyTable& policy) {
  const int T = mdp.horizon;
  const int G = mdp.num_goals;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  OccupancyTable occ;
  occ.horizon = T;
  occ.num_goals = G;
  occ.num_states = S;
  occ.per_step.assign(static_cast<std::size_t>(T + 1) * G * S, 0.0);
  occ.absorbed.assign(static_cast<std::size_t>(T + 1) * G, 0.0);
  occ.visits.assign(static_cast<std::size_t>(G) * S, 0.0);
  occ.visitation.assign(static_cast<std::size_t>(G) * S, 0.0);
  occ.expected_length.assign(G, 0.0);

  const std::vector<double> probs = all_probs(policy);
  for (Goal g = 0; g < G; ++g) {
    double* p0 = &occ.per_step[(static_cast<std::size_t>(0) * G + g) * S];
    for (State s = 0; s < S; ++s) p0[s] = mdp.is_terminal(s) ? 0.0 : mdp.init_dist[s];
    for (int t = 0; t < T; ++t) {
      const double* cur = &occ.per_step[(static_cast<std::size_t>(t) * G + g) * S];
      double* nxt = &occ.per_step[(static_cast<std::size_t>(t + 1) * G + g) * S];
      double absorbed = 0.0;
      for (State s = 0; s < S; ++s) {
        const double mass = cur[s];
        if (mass == 0.0) continue;
        occ.visits[static_cast<std::size_t>(g) * S + s] += mass;
        for (Action a = 0; a < A; ++a) {
          const double pa = mass * probs[policy.offset(g, s) + a];
          if (pa == 0.0) continue;
          for (const Transition& tr : mdp.row(s, a)) {
            const double m = pa * tr.prob;
            if (mdp.is_terminal(tr.next)) {
              absorbed += m;
            } else {
              nxt[tr.next] += m;
            }
          }
        }
      }
      occ.absorbed[static_cast<std::size_t>(t + 1) * G + g] = occ.absorbed[static_cast<std::size_t>(t) * G + g] + absorbed;
    }
    double length = 0.0;
    for (State s = 0; s < S; ++s) length += occ.visits[static_cast<std::size_t>(g) * S + s];
    occ.expected_length[g] = length;
    for (State s = 0; s < S; ++s) {
      occ.visitation[static_cast<std::size_t>(g) * S + s] = length > 0.0 ? occ.visits[static_cast<std::size_t>(g) * S + s] / length : 0.0;
    }
  }
  return occ;
}

double exact_action_info(const GoalMdp& mdp, const GoalPolicyTable& policy, const OccupancyTable& occ) {
  double info = 0.0;
  for (Goal g = 0; g < mdp.num_goals; ++g) {
    if (mdp.goal_dist[g] == 0.0) continue;
    for (State s = 0; s < mdp.num_states; ++s) {
      const double d = occ.d(g, s);
      if (d == 0.0) continue;
      info += mdp.goal_dist[g] * d * kl_to_base(policy, mdp.goal_dist, g, s).kl;
    }
  }
  return info;
}

double exact_action_info(const GoalMdp& mdp, const GoalPolicyTable& policy) {
  return exact_action_info(mdp, policy, exact_occupancy(mdp, policy));
}

double exact_state_info(const GoalMdp& mdp, const OccupancyTable& occ) {
  double info = 0.0;
  for (State s = 0; s < mdp.num_states; ++s) {
    double marginal = 0.0;
    for (Goal g = 0; g < mdp.num_goals; ++g) marginal += mdp.goal_dist[g] * occ.d(g, s);
    if (marginal == 0.0) continue;
    for (Goal g = 0; g < mdp.num_goals; ++g) {
      const double d = occ.d(g, s);
      if (d == 0.0 || mdp.goal_dist[g] == 0.0) continue;
      info += mdp.goal_dist[g] * d * std::log(d / marginal);
    }
  }
  return info;
}

double exact_state_info(const GoalMdp& mdp, const GoalPolicyTable& policy) {
  return exact_state_info(mdp, exact_occupancy(mdp, policy));
}

double exact_return(const GoalMdp& mdp, const GoalPolicyTable& policy) {
  const OccupancyTable occ = exact_occupancy(mdp, policy);
  const std::vector<double> probs = all_probs(policy);
  double value = 0.0;
  for (Goal g = 0; g < mdp.num_goals; ++g) {
    double discount = 1.0;
    double goal_value = 0.0;
    for (int t = 0; t < mdp.horizon; ++t) {
      double step_reward = 0.0;
      for (State s = 0; s < mdp.num_states; ++s) {
        const double mass = occ.p(t, g, s);
        if (mass == 0.0) continue;
        for (Action a = 0; a < mdp.num_actions; ++a) {
          const double pa = mass * probs[policy.offset(g, s) + a];
          if (pa == 0.0) continue;
          double expected = mdp.penalty(s, a);
          for (const Transition& tr : mdp.row(s, a)) expected += tr.prob * mdp.entry_reward(tr.next, g);
          step_reward += pa * expected;
        }
      }
      goal_value += discount * step_reward;
      discount *= mdp.gamma;
    }
    value += mdp.goal_dist[g] * goal_value;
  }
  return value;
}

double expected_episode_length(const GoalMdp& mdp, const OccupancyTable& occ) {
  double length = 0.0;
  for (Goal g = 0; g < mdp.num_goals; ++g) length += mdp.goal_dist[g] * occ.expected_length[g];
  return length;
}

double optimal_expected_length(const GoalMdp& mdp) {
  double length = 0.0;
  for (Goal g = 0; g < mdp.num_goals; ++g) {
    for (State s = 0; s < mdp.num_states; ++s) {
      if (mdp.init_dist[s] == 0.0) continue;
      length += mdp.goal_dist[g] * mdp.init_dist[s] * shortest_path_to_goal(mdp, s, g);
    }
  }
  return length;
}

double episode_action_info(const GoalMdp& mdp, const GoalPolicyTable& policy) {
  const OccupancyTable occ = exact_occupancy(mdp, policy);
  double info = 0.0;
  for (Goal g = 0; g < mdp.num_goals; ++g) {
    for (State s = 0; s < mdp.num_states; ++s) {
      const double n = occ.n(g, s);
      if (n == 0.0) continue;
      info += mdp.goal_dist[g] * n * kl_to_base(policy, mdp.goal_dist, g, s).kl;
    }
  }
  return info;
}

double episode_state_info(const GoalMdp& mdp, const GoalPolicyTable& policy) {
  const OccupancyTable occ = exact_occupancy(mdp, policy);
  double mean_length = 0.0;
  for (Goal g = 0; g < mdp.num_goals; ++g) mean_length += mdp.goal_dist[g] * occ.expected_length[g];
  double info = 0.0;
  for (State s = 0; s < mdp.num_states; ++s) {
    double marginal = 0.0;
    for (Goal g = 0; g < mdp.num_goals; ++g) marginal += mdp.goal_dist[g] * occ.n(g, s);
    if (marginal == 0.0) continue;
    marginal /= mean_length;
    for (Goal g = 0; g < mdp.num_goals; ++g) {
      const double n = occ.n(g, s);
      if (n == 0.0 || mdp.goal_dist[g] == 0.0) continue;
      info += mdp.goal_dist[g] * n * std::log((n / occ.expected_length[g]) / marginal);
    }
  }
  return info;
}

double objective_value(const GoalMdp& mdp, const GoalPolicyTable& policy, InfoKind kind, double beta,
                       InfoScale scale) {
  const double eta = exact_return(mdp, policy);
  if (beta == 0.0) return eta;
  double info = 0.0;
  if (scale == InfoScale::kPerStep) {
    info = kind == InfoKind::kAction ? exact_action_info(mdp, policy) : exact_state_info(mdp, policy);
  } else {
    info = kind == InfoKind::kAction ? episode_action_info(mdp, policy) : episode_state_info(mdp, policy);
  }
  return eta + beta * info;
}

FiniteDiffGradient finite_diff_objective_grad(const GoalMdp& mdp, const GoalPolicyTable& policy, InfoKind kind,
                                              double beta, InfoScale scale, double step,
                                              double asymmetry_tolerance) {
  FiniteDiffGradient out;
  GoalPolicyTable probe = policy;
  const double center = objective_value(mdp, probe, kind, beta, scale);
  out.gradient.resize(probe.data().size());
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    const double original = probe.data()[i];
    probe.data()[i] = original + step;
    const double plus = objective_value(mdp, probe, kind, beta, scale);
    probe.data()[i] = original - step;
    const double minus = objective_value(mdp, probe, kind, beta, scale);
    probe.data()[i] = original;
    const double central = (plus - minus) / (2.0 * step);
    const double asym = std::abs((plus - center) / step - (center - minus) / step);
    out.gradient[i] = central;
    out.max_asymmetry = std::max(out.max_asymmetry, asym);
    if (asym > asymmetry_tolerance * (1.0 + std::abs(central))) out.step_too_large = true;
  }
  return out;
}

}  // namespace infoshare
