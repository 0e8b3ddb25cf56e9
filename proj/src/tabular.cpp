#include "infoshare/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace infoshare {

void softmax(std::span<const double> logits, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

GoalPolicyTable::GoalPolicyTable(int num_goals, int num_states, int num_actions)
    : goals_(num_goals),
      states_(num_states),
      actions_(num_actions),
      data_(static_cast<std::size_t>(num_goals) * num_states * num_actions, 0.0) {}

std::vector<double> action_probs(const GoalPolicyTable& policy, Goal g, State s) {
  std::vector<double> p(policy.num_actions());
  policy.probs(g, s, p);
  return p;
}

std::vector<double> base_policy(const GoalPolicyTable& policy, std::span<const double> goal_dist, State s) {
  std::vector<double> base(policy.num_actions(), 0.0);
  std::vector<double> p(policy.num_actions());
  for (Goal g = 0; g < policy.num_goals(); ++g) {
    policy.probs(g, s, p);
    for (int a = 0; a < policy.num_actions(); ++a) base[a] += goal_dist[g] * p[a];
  }
  return base;
}

Action sample_action(const GoalPolicyTable& policy, Goal g, State s, Rng& rng) {
  double buf[16];
  std::vector<double> heap;
  std::span<double> p;
  if (policy.num_actions() <= 16) {
    p = std::span<double>(buf, policy.num_actions());
  } else {
    heap.resize(policy.num_actions());
    p = heap;
  }
  policy.probs(g, s, p);
  return sample_categorical(p, rng);
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double policy_entropy(const GoalPolicyTable& policy, Goal g, State s) {
  return entropy(action_probs(policy, g, s));
}

std::vector<double> entropy_gradient(const GoalPolicyTable& policy, Goal g, State s) {
  std::vector<double> p = action_probs(policy, g, s);
  const double h = entropy(p);
  std::vector<double> grad(p.size());
  for (std::size_t b = 0; b < p.size(); ++b) {
    grad[b] = p[b] > 0.0 ? -p[b] * (std::log(p[b]) + h) : 0.0;
  }
  return grad;
}

std::vector<double> log_prob_gradient(std::span<const double> probs, Action a) {
  std::vector<double> grad(probs.size());
  for (std::size_t b = 0; b < probs.size(); ++b) grad[b] = -probs[b];
  grad[a] += 1.0;
  return grad;
}

namespace {
constexpr double kTiny = std::numeric_limits<double>::min();
}  // namespace

void adam_step(AdamState& st, std::span<double> params, std::span<const double> grads, StepDirection direction) {
  if (params.size() != grads.size() || st.m.size() != params.size() || st.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment shapes differ");
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const double sign = direction == StepDirection::kAscend ? 1.0 : -1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    // Moments of long-untouched entries decay into subnormals, which are
    // slow on most hardware and far below any effect on the update.
    if (std::abs(st.m[i]) < kTiny) st.m[i] = 0.0;
    if (st.v[i] < kTiny) st.v[i] = 0.0;
    const double m_hat = st.m[i] / c1;
    const double v_hat = st.v[i] / c2;
    params[i] += sign * st.learning_rate * m_hat / (std::sqrt(v_hat) + st.epsilon);
  }
}

}  // namespace infoshare
