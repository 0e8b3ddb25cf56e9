// Acceptance suite: one PASS/FAIL line per criterion on stdout, details on
// stderr. Pass criterion names (P1 ... P8) to run a subset.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "infoshare/config.hpp"
#include "infoshare/info_reg.hpp"
#include "infoshare/matrix.hpp"
#include "infoshare/observer.hpp"
#include "infoshare/oracle.hpp"
#include "infoshare/trainer.hpp"
#include "support.hpp"

using namespace infoshare;
using testsupport::max_relative_error;
using testsupport::numeric_gradient;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream summary;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      summary << "[failed: " << what << "] ";
    }
  }
};

void note(const std::string& msg) { std::cerr << "  " << msg << '\n' << std::flush; }

std::string fmt(double x, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, x);
  return buf;
}

TrainConfig alice_config(Regularizer reg, double beta, std::uint64_t seed, long steps = 100000) {
  TrainConfig c;
  c.regularizer = reg;
  c.beta = beta;
  c.seed = seed;
  c.total_steps = steps;
  return c;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.size() > 1 ? s / static_cast<double>(v.size() - 1) : 0.0;
}

// P1: sampled information estimates of frozen trained policies agree with the
// oracle.
Verdict check_p1() {
  Verdict v;
  const GoalMdp mdp = build_nav_world();
  struct Case {
    Regularizer reg;
    double beta;
  };
  for (const Case c : {Case{Regularizer::kAction, 0.025}, Case{Regularizer::kNone, 0.0}, Case{Regularizer::kState, -0.025}}) {
    const AliceResult alice = train_alice(mdp, alice_config(c.reg, c.beta, 11));
    const GoalPolicyTable& pol = alice.state.policy;
    const double exact_a = exact_action_info(mdp, pol);
    const double exact_s = exact_state_info(mdp, pol);
    Rng rng_a(101), rng_s(102);
    const double emp_a = rollout_frozen(mdp, pol, 20000, rng_a).action_info_nats;
    const double emp_s = rollout_frozen(mdp, pol, 200000, rng_s).state_info_nats;
    const double tol_a = std::max(0.05 * exact_a, 0.02);
    const double tol_s = std::max(0.05 * exact_s, 0.02);
    const std::string name = std::string(regularizer_name(c.reg)) + " beta=" + fmt(c.beta);
    note("P1 " + name + ": I_action exact " + fmt(exact_a) + " sampled " + fmt(emp_a) + " nats; I_state exact " +
         fmt(exact_s) + " sampled " + fmt(emp_s) + " nats");
    v.require(std::abs(emp_a - exact_a) <= tol_a, name + " I_action");
    v.require(std::abs(emp_s - exact_s) <= tol_s, name + " I_state");
    v.summary << name << ": dA=" << fmt(emp_a - exact_a, 2) << " dS=" << fmt(emp_s - exact_s, 2) << "; ";
  }
  return v;
}

// P2/P3: the mean sampled per-episode update against finite differences of
// the episode-summed objective on a fixed-horizon MDP.
Verdict check_gradient(InfoKind kind) {
  Verdict v;
  const GoalMdp mdp = testsupport::cycle_mdp(5);
  Rng init(kind == InfoKind::kAction ? 41 : 42);
  const GoalPolicyTable policy = testsupport::random_policy(mdp, init);
  ValueTable value(2, 4);
  for (double& x : value.data()) x = 0.5 * (2.0 * uniform01(init) - 1.0);
  const double beta = 1.0;

  StateCounts counts(2, 4, 0.0);
  const OccupancyTable occ = exact_occupancy(mdp, policy);
  for (Goal g = 0; g < 2; ++g) {
    for (State s = 0; s < 4; ++s) counts.set(g, s, occ.n(g, s));
  }

  const long episodes = 50000;
  const std::size_t dim = policy.data().size();
  std::vector<double> sum(dim, 0.0), sumsq(dim, 0.0), ep_grad(dim);
  Rng rng(kind == InfoKind::kAction ? 43 : 44);
  for (long e = 0; e < episodes; ++e) {
    const Trajectory traj = sample_episode(
        mdp, [&](Goal g, State s, Rng& r) { return sample_action(policy, g, s, r); }, rng);
    std::fill(ep_grad.begin(), ep_grad.end(), 0.0);
    if (kind == InfoKind::kAction) {
      const StepCredit credit = action_credit(traj, policy, mdp.goal_dist, beta, mdp.gamma);
      for (std::size_t t = 0; t < traj.size(); ++t) {
        scatter_add(action_grad_step(t, traj, policy, value, mdp.goal_dist, beta, credit), policy, ep_grad);
      }
    } else {
      const StepCredit credit = state_credit(traj, policy, counts, mdp.goal_dist, beta, mdp.gamma);
      for (std::size_t t = 0; t < traj.size(); ++t) {
        scatter_add(state_grad_step(t, traj, policy, value, mdp.goal_dist, beta, credit), policy, ep_grad);
      }
    }
    for (std::size_t i = 0; i < dim; ++i) {
      sum[i] += ep_grad[i];
      sumsq[i] += ep_grad[i] * ep_grad[i];
    }
  }
  const FiniteDiffGradient fd = finite_diff_objective_grad(mdp, policy, kind, beta, InfoScale::kPerEpisode);
  v.require(!fd.step_too_large, "finite-difference step");

  double dot = 0.0, na = 0.0, nb = 0.0, worst_z = 0.0;
  const double n = static_cast<double>(episodes);
  for (std::size_t i = 0; i < dim; ++i) {
    const double m = sum[i] / n;
    const double se = std::sqrt(std::max(sumsq[i] / n - m * m, 0.0) / n);
    dot += m * fd.gradient[i];
    na += m * m;
    nb += fd.gradient[i] * fd.gradient[i];
    const double z = std::abs(m - fd.gradient[i]) / std::max(se, 1e-300);
    worst_z = std::max(worst_z, z);
    note((kind == InfoKind::kAction ? "P2" : "P3") + std::string(" coord ") + std::to_string(i) + ": sampled " +
         fmt(m, 6) + " +- " + fmt(se, 3) + ", finite difference " + fmt(fd.gradient[i], 6));
  }
  const double cosine = dot / std::sqrt(na * nb);
  v.require(cosine > 0.9, "cosine > 0.9");
  v.require(worst_z <= 3.0, "all coordinates within 3 standard errors");
  v.summary << "cosine=" << fmt(cosine, 6) << " max|z|=" << fmt(worst_z, 3) << " episodes=" << episodes;
  return v;
}

// P4: analytic derivatives against central differences.
Verdict check_p4() {
  Verdict v;
  Rng rng(61);
  const GoalMdp nav = build_nav_world();
  auto record = [&](const std::string& name, double err) {
    v.require(err < 1e-4, name);
    v.summary << name << "=" << fmt(err, 2) << " ";
  };

  {
    std::vector<double> logits(5);
    for (double& x : logits) x = 2.0 * uniform01(rng) - 1.0;
    double worst = 0.0;
    for (Action a = 0; a < 5; ++a) {
      std::vector<double> p(5);
      softmax(logits, p);
      const auto num = numeric_gradient(logits, [&] {
        std::vector<double> q(5);
        softmax(logits, q);
        return std::log(q[a]);
      });
      worst = std::max(worst, max_relative_error(log_prob_gradient(p, a), num));
    }
    record("log_softmax", worst);
  }
  {
    GoalPolicyTable pol(1, 1, 5);
    for (double& x : pol.data()) x = 2.0 * uniform01(rng) - 1.0;
    const auto num = numeric_gradient(pol.data(), [&] { return policy_entropy(pol, 0, 0); });
    record("entropy", max_relative_error(entropy_gradient(pol, 0, 0), num));
  }
  {
    GoalPolicyTable pol = testsupport::random_policy(nav, rng);
    const State s = 12;
    double worst = 0.0;
    for (Goal g = 0; g < 2; ++g) {
      const KlToBase k = kl_to_base(pol, nav.goal_dist, g, s);
      std::vector<double> row;
      for (Goal h = 0; h < 2; ++h) {
        for (double x : pol.logits(h, s)) row.push_back(x);
      }
      const auto num = numeric_gradient(row, [&] {
        GoalPolicyTable p = pol;
        for (Goal h = 0; h < 2; ++h) {
          for (int a = 0; a < 5; ++a) p.logits(h, s)[a] = row[static_cast<std::size_t>(h) * 5 + a];
        }
        return kl_to_base(p, nav.goal_dist, g, s).kl;
      });
      worst = std::max(worst, max_relative_error(k.grad, num));
    }
    record("kl_to_base", worst);
  }

  ObserverNet net(nav.num_states, nav.num_actions, nav.num_states, nav.num_actions);
  net.initialize(rng);
  const GruCell& cell = net.gru();
  for (std::size_t i = cell.w_update; i <= cell.b_cand; ++i) net.params()[i] = 3.0 * (2.0 * uniform01(rng) - 1.0);
  {
    const std::array<int, 2> active = net.encode(7, 3);
    GruCache cache;
    gru_step(cell, net.params(), active, 0.3, &cache);
    std::vector<double> grad(net.params().size(), 0.0);
    gru_backward(cell, net.params(), cache, 1.0, grad);
    const auto num = numeric_gradient(net.params(), [&] { return gru_step(cell, net.params(), active, 0.3); });
    record("gru", max_relative_error(grad, num));
  }
  {
    BobEpisode ep;
    std::vector<double> adv;
    for (int t = 0; t < 20; ++t) {
      ep.alice_inputs.push_back(net.encode(static_cast<State>(uniform01(rng) * 25), static_cast<Action>(uniform01(rng) * 5)));
      ep.bob_states.push_back(static_cast<State>(uniform01(rng) * 25));
      ep.bob_actions.push_back(static_cast<Action>(uniform01(rng) * 5));
      ep.bob_rewards.push_back(uniform01(rng) - 0.5);
      adv.push_back(2.0 * uniform01(rng) - 1.0);
    }
    std::vector<double> grad(net.params().size(), 0.0);
    observer_objective(net, ep, 0.8, 0.3, 0.5, adv, &grad);
    const auto num = numeric_gradient(
        net.params(), [&] { return observer_objective(net, ep, 0.8, 0.3, 0.5, adv, nullptr); }, 1e-6);
    record("observer_bptt", testsupport::gradient_check_error(grad, num));
  }
  return v;
}

// P5: information-seeking and information-hiding Alices on the nav world.
Verdict check_p5() {
  Verdict v;
  const GoalMdp mdp = build_nav_world();
  struct Cond {
    const char* name;
    Regularizer reg;
    double beta;
    bool high;
    double bound;  // bits
  };
  const Cond conds[] = {{"action+", Regularizer::kAction, 0.025, true, 0.9},
                        {"state+", Regularizer::kState, 0.025, true, 0.5},
                        {"action-", Regularizer::kAction, -0.025, false, 0.2},
                        {"state-", Regularizer::kState, -0.025, false, 0.1}};
  int passes[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const AliceResult base = train_alice(mdp, alice_config(Regularizer::kNone, 0.0, seed));
    const double len0 = expected_episode_length(mdp, exact_occupancy(mdp, base.state.policy));
    for (int i = 0; i < 4; ++i) {
      const Cond& c = conds[i];
      const AliceResult r = train_alice(mdp, alice_config(c.reg, c.beta, seed));
      const OccupancyTable occ = exact_occupancy(mdp, r.state.policy);
      const double bits = nats_to_bits(c.reg == Regularizer::kAction ? exact_action_info(mdp, r.state.policy, occ)
                                                                     : exact_state_info(mdp, occ));
      const double len = expected_episode_length(mdp, occ);
      const bool info_ok = c.high ? bits >= c.bound : bits <= c.bound;
      const bool len_ok = std::abs(len / len0 - 1.0) <= 0.05;
      passes[i] += (info_ok && len_ok) ? 1 : 0;
      note("P5 seed " + std::to_string(seed) + " " + c.name + ": " + fmt(bits) + " bits (bound " + fmt(c.bound) +
           "), length " + fmt(len) + " vs " + fmt(len0) + (info_ok && len_ok ? " ok" : " miss"));
    }
  }
  for (int i = 0; i < 4; ++i) {
    v.require(passes[i] >= 4, std::string(conds[i].name) + " in >= 4 of 5 seeds");
    v.summary << conds[i].name << " " << passes[i] << "/5; ";
  }
  return v;
}

MatrixOptions progress_options() {
  MatrixOptions opts;
  const auto start = std::chrono::steady_clock::now();
  opts.progress = [start](const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    note("[" + fmt(s, 5) + " s] " + msg);
  };
  return opts;
}

// P6: the nav matrix, 5 Alices per beta with the best of 10 Bobs each.
Verdict check_p6() {
  Verdict v;
  const RunConfig config = preset_config("nav-matrix");
  const MatrixResult result = run_experiment_matrix(config, progress_options());
  const std::size_t nb = config.matrix.betas.size();
  std::vector<std::vector<double>> rel(nb), beats(nb);
  for (const AliceCell& a : result.alices) {
    v.require(a.ok && a.best_bob >= 0, "every cell trained");
    if (!a.ok || a.best_bob < 0) continue;
    const BobCell& b = a.bobs[static_cast<std::size_t>(a.best_bob)];
    rel[a.beta_index].push_back(b.length_window.relative_length);
    beats[a.beta_index].push_back(b.beat_window.alice_beats_bob);
    note("P6 beta " + fmt(a.beta) + " alice " + std::to_string(a.index) + ": I_action " + fmt(a.action_info_bits) +
         " bits, best bob " + std::to_string(a.best_bob) + " relative length " + fmt(b.length_window.relative_length) +
         ", alice beats bob " + fmt(b.beat_window.alice_beats_bob));
  }
  // betas are ordered competitive, unregularized, cooperative
  const double ratio = mean(rel[0]) / mean(rel[2]);
  v.require(ratio >= 1.2, "competitive relative length >= 1.2x cooperative");
  v.require(mean(beats[0]) > mean(beats[1]) && mean(beats[1]) > mean(beats[2]),
            "alice-beats-bob ordered competitive > unregularized > cooperative");
  v.require(variance(rel[2]) < variance(rel[0]) && variance(rel[2]) < variance(rel[1]),
            "cooperative across-Alice variance smallest");
  v.summary << "relative length comp/none/coop " << fmt(mean(rel[0])) << "/" << fmt(mean(rel[1])) << "/"
            << fmt(mean(rel[2])) << " (ratio " << fmt(ratio) << "); beats " << fmt(mean(beats[0])) << "/"
            << fmt(mean(beats[1])) << "/" << fmt(mean(beats[2])) << "; variance " << fmt(variance(rel[0]), 3) << "/"
            << fmt(variance(rel[1]), 3) << "/" << fmt(variance(rel[2]), 3);
  return v;
}

// P7: the key game. Bobs are trained for master-key Alices at beta < 0 and for
// the first three Alices at each other beta.
Verdict check_p7() {
  Verdict v;
  constexpr double kMasterRoute = 0.5;
  constexpr int kBobAlices = 3;
  const RunConfig config = preset_config("key-matrix");
  MatrixOptions opts = progress_options();
  opts.train_bobs = [&](const AliceCell& a) {
    return a.beta < 0.0 ? a.pickup.master > kMasterRoute : a.index < kBobAlices;
  };
  const MatrixResult result = run_experiment_matrix(config, opts);

  int hiders = 0, master = 0;
  std::vector<double> master_beat;
  std::vector<double> other_pickup, other_beat;
  for (const AliceCell& a : result.alices) {
    v.require(a.ok, "every Alice trained");
    if (!a.ok) continue;
    double best = -1.0;
    if (a.best_bob >= 0) best = a.bobs[static_cast<std::size_t>(a.best_bob)].beat_window.bob_beat_tie;
    note("P7 beta " + fmt(a.beta) + " alice " + std::to_string(a.index) + ": master " + fmt(a.pickup.master) +
         ", goal key " + fmt(a.pickup.goal_key) + (best >= 0.0 ? ", best bob beat/tie " + fmt(best) : ""));
    if (a.beta < 0.0) {
      ++hiders;
      if (a.pickup.master > kMasterRoute) {
        ++master;
        if (best >= 0.0) master_beat.push_back(best);
      }
    } else {
      other_pickup.push_back(a.pickup.master);
      if (best >= 0.0) other_beat.push_back(best);
    }
  }
  const double master_share = hiders > 0 ? static_cast<double>(master) / hiders : 0.0;
  v.require(hiders >= 10 && master_share >= 0.3, ">= 30% of beta<0 Alices take the master key");
  v.require(!master_beat.empty() && *std::max_element(master_beat.begin(), master_beat.end()) < 0.5,
            "Bob beat/tie < 50% against master-key Alices");
  v.require(mean(other_pickup) < 0.05, "master pickup < 5% at beta >= 0");
  v.require(!other_beat.empty() && mean(other_beat) >= 0.95, "Bob beat/tie >= 95% at beta >= 0");
  v.summary << "master-key Alices " << master << "/" << hiders << "; beat/tie vs master "
            << (master_beat.empty() ? std::string("n/a") : fmt(mean(master_beat))) << "; master pickup beta>=0 "
            << fmt(mean(other_pickup)) << "; beat/tie beta>=0 " << fmt(mean(other_beat)) << " (min "
            << (other_beat.empty() ? std::string("n/a") : fmt(*std::min_element(other_beat.begin(), other_beat.end())))
            << ")";
  return v;
}

// P8: reductions and conservation invariants.
Verdict check_p8() {
  Verdict v;
  const GoalMdp nav = build_nav_world();
  auto same = [](const AliceState& a, const AliceState& b) {
    return std::ranges::equal(a.policy.data(), b.policy.data()) && std::ranges::equal(a.value.data(), b.value.data());
  };

  const AliceState plain = train_reinforce_baseline(nav, alice_config(Regularizer::kNone, 0.0, 5));
  for (Regularizer reg : {Regularizer::kNone, Regularizer::kAction, Regularizer::kState}) {
    v.require(same(train_alice(nav, alice_config(reg, 0.0, 5)).state, plain),
              std::string("beta=0 bitwise (") + regularizer_name(reg) + ")");
  }

  const GoalMdp single = testsupport::single_goal_nav();
  const AliceResult single_base = train_alice(single, alice_config(Regularizer::kNone, 0.0, 6, 30000));
  v.require(exact_action_info(single, single_base.state.policy) == 0.0, "single goal I_action = 0");
  v.require(exact_state_info(single, single_base.state.policy) == 0.0, "single goal I_state = 0");
  for (Regularizer reg : {Regularizer::kAction, Regularizer::kState}) {
    for (double beta : {-0.25, 0.25}) {
      v.require(same(train_alice(single, alice_config(reg, beta, 6, 30000)).state, single_base.state),
                std::string("single goal regularizer inert (") + regularizer_name(reg) + ")");
    }
  }

  double worst_row = 0.0, worst_mass = 0.0, worst_count = 0.0;
  for (Regularizer reg : {Regularizer::kAction, Regularizer::kState}) {
    const AliceResult r = train_alice(nav, alice_config(reg, 0.025, 7));
    for (Goal g = 0; g < 2; ++g) {
      for (State s = 0; s < nav.num_states; ++s) {
        const auto p = action_probs(r.state.policy, g, s);
        worst_row = std::max(worst_row, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
      }
    }
    const OccupancyTable occ = exact_occupancy(nav, r.state.policy);
    for (int t = 0; t <= occ.horizon; ++t) {
      for (Goal g = 0; g < 2; ++g) {
        double mass = occ.absorbed[static_cast<std::size_t>(t) * 2 + g];
        for (State s = 0; s < nav.num_states; ++s) mass += occ.p(t, g, s);
        worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
      }
    }
    const StateCounts& c = r.state.counts;
    double total = 0.0;
    for (Goal g = 0; g < 2; ++g) {
      double row = 0.0;
      for (State s = 0; s < nav.num_states; ++s) row += c.count(g, s);
      worst_count = std::max(worst_count, std::abs(row - c.goal_total(g)) / c.total());
      total += row;
    }
    for (State s = 0; s < nav.num_states; ++s) {
      worst_count = std::max(worst_count, std::abs(c.count(0, s) + c.count(1, s) - c.state_total(s)) / c.total());
    }
    worst_count = std::max(worst_count, std::abs(total - c.total()) / c.total());
  }
  v.require(worst_row < 1e-12, "policy rows sum to 1");
  v.require(worst_mass < 1e-12, "occupancy mass conserved");
  v.require(worst_count < 1e-12, "count marginals consistent");
  v.summary << "beta=0 bitwise, single-goal inert; max row error " << fmt(worst_row, 2) << ", mass error "
            << fmt(worst_mass, 2) << ", count error " << fmt(worst_count, 2);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> wanted(argv + 1, argv + argc);
  struct Criterion {
    const char* id;
    Verdict (*run)();
  };
  const Criterion all[] = {{"P1", check_p1},
                           {"P2", [] { return check_gradient(InfoKind::kAction); }},
                           {"P3", [] { return check_gradient(InfoKind::kState); }},
                           {"P4", check_p4},
                           {"P5", check_p5},
                           {"P6", check_p6},
                           {"P7", check_p7},
                           {"P8", check_p8}};
  int failed = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    std::cerr << c.id << " running\n" << std::flush;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.summary << "[error: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << c.id << (v.pass ? " PASS " : " FAIL ") << v.summary.str() << " (" << fmt(secs, 4) << " s)\n"
              << std::flush;
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
