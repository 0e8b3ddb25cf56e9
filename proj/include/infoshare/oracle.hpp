#pragma once

#include <vector>

#include "infoshare/env.hpp"
#include "infoshare/tabular.hpp"

namespace infoshare {

/// Exact goal-conditioned occupancies by forward dynamic programming.
///
/// per_step[t][g][s] is the probability of occupying non-terminal s at time t
/// without having been absorbed; absorbed[t][g] is the mass that has entered a
/// terminal state by the end of step t. visits[g][s] sums per_step over the
/// action-taking times t < horizon, and visitation[g][s] = d(s|g) normalizes
/// visits by the expected episode length (ratio of expected counts).
struct OccupancyTable {
  int horizon = 0;
  int num_goals = 0;
  int num_states = 0;
  std::vector<double> per_step;    // [t][g][s], t in [0, horizon]
  std::vector<double> absorbed;    // [t][g], t in [0, horizon]
  std::vector<double> visits;      // [g][s]
  std::vector<double> visitation;  // [g][s]
  std::vector<double> expected_length;

  double p(int t, Goal g, State s) const {
    return per_step[(static_cast<std::size_t>(t) * num_goals + g) * num_states + s];
  }
  double d(Goal g, State s) const { return visitation[static_cast<std::size_t>(g) * num_states + s]; }
  double n(Goal g, State s) const { return visits[static_cast<std::size_t>(g) * num_states + s]; }
};

OccupancyTable exact_occupancy(const GoalMdp& mdp, const GoalPolicyTable& policy);

/// sum_g rho(g) sum_s d(s|g) KL[pi_g | pi_0], nats.
double exact_action_info(const GoalMdp& mdp, const GoalPolicyTable& policy);
double exact_action_info(const GoalMdp& mdp, const GoalPolicyTable& policy, const OccupancyTable& occ);

/// sum_g rho(g) sum_s d(s|g) log(d(s|g) / d(s)), d(s) = sum_g rho(g) d(s|g), nats.
double exact_state_info(const GoalMdp& mdp, const GoalPolicyTable& policy);
double exact_state_info(const GoalMdp& mdp, const OccupancyTable& occ);

/// Expected discounted return, reward credited on entering a state plus the
/// step penalty of the move.
double exact_return(const GoalMdp& mdp, const GoalPolicyTable& policy);

/// rho-weighted expected number of steps per episode.
double expected_episode_length(const GoalMdp& mdp, const OccupancyTable& occ);

/// rho-weighted mean shortest-path length from rho_S to the rewarding
/// terminal of each goal; the length an optimal policy achieves.
double optimal_expected_length(const GoalMdp& mdp);

/// Information summed over an episode's action-taking steps,
/// E_tau[sum_t info(s_t)]; the quantity the Monte Carlo updates ascend. For
/// action information: sum_g rho(g) sum_s n_g(s) KL. For state information:
/// sum_g rho(g) sum_s n_g(s) log(p(s|g) / p(s)), with p(s) the count-weighted
/// marginal sum_g rho(g) n_g(s) / sum_g rho(g) L_g. Both equal
/// horizon * exact_*_info on MDPs without terminal states.
double episode_action_info(const GoalMdp& mdp, const GoalPolicyTable& policy);
double episode_state_info(const GoalMdp& mdp, const GoalPolicyTable& policy);

enum class InfoKind { kAction, kState };
enum class InfoScale { kPerStep, kPerEpisode };

/// eta + beta * I, with I per step (exact_*_info) or per episode.
double objective_value(const GoalMdp& mdp, const GoalPolicyTable& policy, InfoKind kind, double beta,
                       InfoScale scale);

struct FiniteDiffGradient {
  std::vector<double> gradient;  // logit-shaped
  double max_asymmetry = 0.0;    // max |forward - backward| one-sided difference
  bool step_too_large = false;
};

/// Central differences of objective_value with respect to every logit.
/// step_too_large is set when one-sided estimates disagree by more than
/// asymmetry_tolerance * (1 + |central|).
FiniteDiffGradient finite_diff_objective_grad(const GoalMdp& mdp, const GoalPolicyTable& policy, InfoKind kind,
                                              double beta, InfoScale scale = InfoScale::kPerEpisode,
                                              double step = 1e-5, double asymmetry_tolerance = 1e-3);

}  // namespace infoshare
