#include "infoshare/commands.hpp"

#include <ostream>
#include <stdexcept>

#include "infoshare/info_reg.hpp"
#include "infoshare/matrix.hpp"
#include "infoshare/oracle.hpp"
#include "infoshare/persist.hpp"

namespace infoshare {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig load_run_config(const std::string& config_path, const std::string& preset, const ConfigOverrides& ov) {
  RunConfig c = preset_config(preset.empty() ? "nav-alice" : preset);
  if (!config_path.empty()) c = apply_config_json(c, read_json_file(config_path));
  if (ov.seed) {
    c.alice.seed = *ov.seed;
    c.bob.seed = *ov.seed;
    c.matrix.seed = *ov.seed;
  }
  if (ov.out) c.out = *ov.out;
  if (ov.steps) {
    if (c.role == Role::kAlice) c.alice.total_steps = *ov.steps;
    if (c.role == Role::kBob) c.bob.total_steps = *ov.steps;
  }
  c.validate();
  return c;
}

namespace {

fs::path snapshot_path(const RunConfig& c, long steps) {
  return fs::path(c.out) / "snapshots" / ("step_" + std::to_string(steps) + ".json");
}

int train_alice_role(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const GoalMdp mdp = build_game(config, Role::kAlice);
  AliceTrainer trainer(mdp, config.alice);
  MetricsWriter metrics(fs::path(config.out) / "metrics.jsonl", "alice", config.out);
  long next_snapshot = config.snapshot_every;
  try {
    while (!trainer.done()) {
      metrics.write(episode_record_json(trainer.run_episode()));
      if (config.snapshot_every > 0 && trainer.state().steps >= next_snapshot) {
        write_json_file(snapshot_path(config, trainer.state().steps), alice_snapshot_json(config, trainer.state()));
        while (next_snapshot <= trainer.state().steps) next_snapshot += config.snapshot_every;
      }
    }
  } catch (const NonFiniteError& e) {
    write_json_file(fs::path(config.out) / "diagnostic.json", alice_snapshot_json(config, trainer.state()));
    err << "train: " << e.what() << "; diagnostic snapshot written to " << config.out << "/diagnostic.json\n";
    return kExitNonFinite;
  }
  write_json_file(fs::path(config.out) / "final.json", alice_snapshot_json(config, trainer.state()));

  const AliceState& st = trainer.state();
  const OccupancyTable occ = exact_occupancy(mdp, st.policy);
  out << "alice: " << st.steps << " steps, " << st.episodes << " episodes\n"
      << "  exact I_action " << nats_to_bits(exact_action_info(mdp, st.policy, occ)) << " bits\n"
      << "  exact I_state  " << nats_to_bits(exact_state_info(mdp, occ)) << " bits\n"
      << "  expected episode length " << expected_episode_length(mdp, occ) << " (shortest paths "
      << optimal_expected_length(mdp) << ")\n"
      << "  final snapshot " << (fs::path(config.out) / "final.json").string() << '\n';
  return kExitOk;
}

struct LoadedAlice {
  AliceSnapshot snap;
  GoalMdp alice_mdp;
  GoalMdp bob_mdp;
};

LoadedAlice load_alice(const fs::path& path) {
  LoadedAlice a{alice_snapshot_from_json(read_json_file(path)), {}, {}};
  a.alice_mdp = build_game(a.snap.config, Role::kAlice);
  a.bob_mdp = build_game(a.snap.config, Role::kBob);
  const GoalPolicyTable& p = a.snap.state.policy;
  if (p.num_states() != a.alice_mdp.num_states || p.num_actions() != a.alice_mdp.num_actions ||
      p.num_goals() != a.alice_mdp.num_goals) {
    throw std::runtime_error(path.string() + ": policy shape does not match its game");
  }
  return a;
}

int train_bob_role(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.alice_snapshot.empty()) {
    err << "train: bob.alice_snapshot must name a frozen Alice snapshot\n";
    return kExitUsage;
  }
  const LoadedAlice alice = load_alice(config.alice_snapshot);
  if (alice.snap.config.game != config.game) {
    err << "train: the Alice snapshot is for the " << game_name(alice.snap.config.game) << " game, the config for "
        << game_name(config.game) << '\n';
    return kExitUsage;
  }
  BobTrainer trainer(alice.alice_mdp, alice.snap.state.policy, alice.bob_mdp, config.bob);
  MetricsWriter metrics(fs::path(config.out) / "metrics.jsonl", "bob", config.out);
  std::vector<JointRecord> records;
  long next_snapshot = config.snapshot_every;
  try {
    while (!trainer.done()) {
      const JointRecord rec = trainer.run_episode();
      records.push_back(rec);
      metrics.write(joint_record_json(rec));
      if (config.snapshot_every > 0 && trainer.state().steps >= next_snapshot) {
        write_json_file(snapshot_path(config, trainer.state().steps), bob_snapshot_json(config, trainer.state()));
        while (next_snapshot <= trainer.state().steps) next_snapshot += config.snapshot_every;
      }
    }
  } catch (const NonFiniteError& e) {
    write_json_file(fs::path(config.out) / "diagnostic.json", bob_snapshot_json(config, trainer.state()));
    err << "train: " << e.what() << "; diagnostic snapshot written to " << config.out << "/diagnostic.json\n";
    return kExitNonFinite;
  }
  write_json_file(fs::path(config.out) / "final.json", bob_snapshot_json(config, trainer.state()));

  const JointSummary len = summarize_joint(records, 500);
  const JointSummary beat = summarize_joint(records, 1000);
  out << "bob: " << trainer.state().steps << " steps, " << trainer.state().episodes << " episodes\n"
      << "  relative length (last 500) " << len.relative_length << '\n'
      << "  alice beats bob (last 1000) " << beat.alice_beats_bob << '\n'
      << "  bob beat/tie (last 1000) " << beat.bob_beat_tie << '\n'
      << "  final snapshot " << (fs::path(config.out) / "final.json").string() << '\n';
  return kExitOk;
}

}  // namespace

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    fs::create_directories(config.out);
    write_json_file(fs::path(config.out) / "config.json", config_to_json(config));
    return config.role == Role::kAlice ? train_alice_role(config, out, err) : train_bob_role(config, out, err);
  } catch (const std::invalid_argument& e) {
    err << "train: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_matrix(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    MatrixOptions opts;
    opts.out = fs::path(config.out);
    opts.progress = [&](const std::string& msg) { err << msg << '\n' << std::flush; };
    const MatrixResult result = run_experiment_matrix(config, opts);
    int failed = 0;
    for (const AliceCell& a : result.alices) {
      if (!a.ok) ++failed;
      for (const BobCell& b : a.bobs) failed += b.ok ? 0 : 1;
      out << "alice_b" << a.beta_index << '_' << a.index << " beta " << a.beta << ": I_action "
          << a.action_info_bits << " bits, I_state " << a.state_info_bits << " bits";
      if (a.best_bob >= 0) {
        const BobCell& b = a.bobs[static_cast<std::size_t>(a.best_bob)];
        out << ", best bob " << a.best_bob << " relative length " << b.length_window.relative_length
            << " bob beat/tie " << b.beat_window.bob_beat_tie;
      }
      out << '\n';
    }
    out << "manifest " << (fs::path(config.out) / "manifest.json").string() << '\n';
    return failed == 0 ? kExitOk : kExitFailure;
  } catch (const std::invalid_argument& e) {
    err << "matrix: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "matrix: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_estimate_info(const fs::path& snapshot, const std::string& mode, long steps, std::uint64_t seed,
                      std::ostream& out, std::ostream& err) {
  try {
    if (mode != "exact" && mode != "empirical") {
      err << "estimate-info: mode must be exact or empirical\n";
      return kExitUsage;
    }
    const LoadedAlice alice = load_alice(snapshot);
    const GoalMdp& mdp = alice.alice_mdp;
    const GoalPolicyTable& policy = alice.snap.state.policy;
    double action = 0.0;
    double state = 0.0;
    if (mode == "exact") {
      const long size = static_cast<long>(mdp.num_goals) * mdp.num_states * (mdp.horizon + 1);
      if (size > kExactSizeLimit) {
        err << "estimate-info: exact mode refused: " << mdp.num_goals << " goals x " << mdp.num_states
            << " states x " << (mdp.horizon + 1) << " times = " << size << " entries exceeds " << kExactSizeLimit
            << '\n';
        return kExitFailure;
      }
      const OccupancyTable occ = exact_occupancy(mdp, policy);
      action = exact_action_info(mdp, policy, occ);
      state = exact_state_info(mdp, occ);
    } else {
      if (steps <= 0) {
        err << "estimate-info: steps must be positive\n";
        return kExitUsage;
      }
      Rng rng(seed);
      const RolloutSummary s = rollout_frozen(mdp, policy, steps, rng);
      action = s.action_info_nats;
      state = s.state_info_nats;
    }
    out << "mode " << mode << '\n'
        << "I_action " << nats_to_bits(action) << " bits " << action << " nats\n"
        << "I_state " << nats_to_bits(state) << " bits " << state << " nats\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "estimate-info: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_export(const fs::path& snapshot, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  try {
    const LoadedAlice alice = load_alice(snapshot);
    export_policy_bundle(alice.alice_mdp, alice.snap.state.policy, out_dir);
    out << "wrote policy.csv, kl.csv, log_ratio.csv to " << out_dir.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "export: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_evaluate(const fs::path& bob_snapshot, const fs::path& alice_snapshot, long episodes, std::uint64_t seed,
                 const std::optional<fs::path>& metrics_out, std::ostream& out, std::ostream& err) {
  try {
    const BobSnapshot bob = bob_snapshot_from_json(read_json_file(bob_snapshot));
    const fs::path alice_path = alice_snapshot.empty() ? fs::path(bob.config.alice_snapshot) : alice_snapshot;
    if (alice_path.empty()) {
      err << "evaluate: the Bob snapshot names no Alice; pass --alice\n";
      return kExitUsage;
    }
    const LoadedAlice alice = load_alice(alice_path);
    const ObserverNet& net = bob.state.net;
    if (net.alice_states() != alice.alice_mdp.num_states || net.bob_states() != alice.bob_mdp.num_states) {
      err << "evaluate: Bob and Alice snapshots are for different games\n";
      return kExitUsage;
    }
    Rng rng(seed);
    const std::vector<JointRecord> records =
        joint_evaluate(alice.alice_mdp, alice.snap.state.policy, alice.bob_mdp, net, episodes, rng);
    if (metrics_out) {
      MetricsWriter metrics(*metrics_out, "evaluate", bob_snapshot.string());
      for (const JointRecord& r : records) metrics.write(joint_record_json(r));
    }
    const JointSummary all = summarize_joint(records, records.size());
    out << "episodes " << all.episodes << '\n'
        << "relative length " << all.relative_length << '\n'
        << "alice beats bob " << all.alice_beats_bob << '\n'
        << "bob beat/tie " << all.bob_beat_tie << '\n'
        << "bob success " << all.bob_success << '\n'
        << "alice master key " << all.master_key << '\n'
        << "alice goal key " << all.goal_key << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "evaluate: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace infoshare
