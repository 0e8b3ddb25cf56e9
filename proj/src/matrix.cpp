#include "infoshare/matrix.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "infoshare/info_reg.hpp"
#include "infoshare/oracle.hpp"
#include "infoshare/persist.hpp"

namespace infoshare {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 1));
  return h;
}

KeyPickup key_pickup_fractions(const GoalMdp& mdp, const GoalPolicyTable& policy, long episodes, Rng& rng) {
  KeyPickup out;
  if (!mdp.layout || mdp.layout->key_states == 1 || episodes <= 0) {
    out.none = 1.0;
    return out;
  }
  for (long i = 0; i < episodes; ++i) {
    const Trajectory traj = sample_episode(
        mdp, [&](Goal g, State s, Rng& r) { return sample_action(policy, g, s, r); }, rng);
    switch (mdp.layout->key(traj.final_state())) {
      case KeyState::kMaster: out.master += 1.0; break;
      case KeyState::kNone: out.none += 1.0; break;
      default: out.goal_key += 1.0; break;
    }
  }
  out.none /= static_cast<double>(episodes);
  out.goal_key /= static_cast<double>(episodes);
  out.master /= static_cast<double>(episodes);
  return out;
}

double bob_selection_score(Game game, const BobCell& bob) {
  if (!bob.ok) return -std::numeric_limits<double>::infinity();
  return game == Game::kNav ? -bob.length_window.relative_length : bob.beat_window.bob_beat_tie;
}

namespace {

constexpr long kPickupEpisodes = 1000;
constexpr std::size_t kLengthWindow = 500;
constexpr std::size_t kBeatWindow = 1000;

void run_tasks(std::vector<std::function<void()>>& tasks, int threads) {
  if (threads <= 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int n = std::min<int>(threads, static_cast<int>(tasks.size()));
  for (int i = 0; i < n; ++i) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < tasks.size(); k = next++) tasks[k]();
    });
  }
  for (auto& th : pool) th.join();
}

std::string alice_dir_name(const AliceCell& a) {
  return "alice_b" + std::to_string(a.beta_index) + "_" + std::to_string(a.index);
}

json summary_json(const JointSummary& s) {
  return {{"episodes", s.episodes},           {"alice_length", s.alice_length},
          {"bob_length", s.bob_length},       {"relative_length", s.relative_length},
          {"alice_beats_bob", s.alice_beats_bob}, {"bob_beat_tie", s.bob_beat_tie},
          {"master_key", s.master_key},       {"goal_key", s.goal_key},
          {"bob_success", s.bob_success}};
}

RunConfig alice_run_config(const RunConfig& base, const AliceCell& a) {
  RunConfig c = base;
  c.role = Role::kAlice;
  c.alice.regularizer = base.matrix.regularizer;
  c.alice.beta = a.beta;
  c.alice.seed = a.seed;
  return c;
}

void train_alice_cell(const RunConfig& config, const GoalMdp& mdp, AliceCell& a, const std::optional<fs::path>& out) {
  const RunConfig rc = alice_run_config(config, a);
  rc.validate();
  AliceTrainer trainer(mdp, rc.alice);
  if (out) {
    const fs::path dir = *out / alice_dir_name(a);
    MetricsWriter metrics(dir / "metrics.jsonl", "alice", alice_dir_name(a));
    trainer.run([&](const EpisodeRecord& rec) { metrics.write(episode_record_json(rec)); });
    write_json_file(dir / "final.json", alice_snapshot_json(rc, trainer.state()));
  } else {
    trainer.run();
  }
  a.policy = trainer.state().policy;
  const OccupancyTable occ = exact_occupancy(mdp, a.policy);
  a.action_info_bits = nats_to_bits(exact_action_info(mdp, a.policy, occ));
  a.state_info_bits = nats_to_bits(exact_state_info(mdp, occ));
  a.mean_length = expected_episode_length(mdp, occ);
  Rng rng(derive_seed(a.seed, {0}));
  a.pickup = key_pickup_fractions(mdp, a.policy, kPickupEpisodes, rng);
}

void train_bob_cell(const RunConfig& config, const GoalMdp& alice_mdp, const GoalMdp& bob_mdp, const AliceCell& a,
                    BobCell& b, const std::optional<fs::path>& out) {
  RunConfig rc = config;
  rc.role = Role::kBob;
  rc.bob.seed = b.seed;
  rc.validate();
  BobTrainer trainer(alice_mdp, a.policy, bob_mdp, rc.bob);
  std::vector<JointRecord> records;
  if (out) {
    const fs::path dir = *out / alice_dir_name(a) / ("bob_" + std::to_string(b.index));
    rc.alice_snapshot = (*out / alice_dir_name(a) / "final.json").string();
    MetricsWriter metrics(dir / "metrics.jsonl", "bob", alice_dir_name(a) + "/bob_" + std::to_string(b.index));
    trainer.run([&](const JointRecord& rec) {
      records.push_back(rec);
      metrics.write(joint_record_json(rec));
    });
    write_json_file(dir / "final.json", bob_snapshot_json(rc, trainer.state()));
  } else {
    trainer.run([&](const JointRecord& rec) { records.push_back(rec); });
  }
  b.length_window = summarize_joint(records, kLengthWindow);
  b.beat_window = summarize_joint(records, kBeatWindow);
}

json manifest_json(const RunConfig& config, const std::vector<AliceCell>& alices) {
  json cells = json::array();
  for (const AliceCell& a : alices) {
    json bobs = json::array();
    for (const BobCell& b : a.bobs) {
      json jb = {{"index", b.index}, {"seed", b.seed}, {"status", b.ok ? "ok" : "failed"}};
      if (!b.ok) jb["error"] = b.error;
      if (b.ok) {
        jb["length_window"] = summary_json(b.length_window);
        jb["beat_window"] = summary_json(b.beat_window);
      }
      bobs.push_back(jb);
    }
    json ja = {{"dir", alice_dir_name(a)},
               {"beta_index", a.beta_index},
               {"index", a.index},
               {"beta", a.beta},
               {"seed", a.seed},
               {"status", a.ok ? "ok" : "failed"},
               {"bobs", bobs},
               {"best_bob", a.best_bob < 0 ? json(nullptr) : json(a.best_bob)}};
    if (!a.ok) ja["error"] = a.error;
    if (a.ok) {
      ja["i_action_bits"] = a.action_info_bits;
      ja["i_state_bits"] = a.state_info_bits;
      ja["expected_length"] = a.mean_length;
      ja["key_pickup"] = {{"none", a.pickup.none}, {"goal_key", a.pickup.goal_key}, {"master", a.pickup.master}};
    }
    cells.push_back(ja);
  }
  return {{"format", "infoshare.manifest"}, {"version", 1}, {"config", config_to_json(config)}, {"alices", cells}};
}

}  // namespace

MatrixResult run_experiment_matrix(const RunConfig& config, const MatrixOptions& options) {
  config.validate();
  const MatrixConfig& mc = config.matrix;
  const GoalMdp alice_mdp = build_game(config, Role::kAlice);
  const GoalMdp bob_mdp = build_game(config, Role::kBob);
  auto say = [&](const std::string& msg) {
    if (options.progress) options.progress(msg);
  };
  std::mutex say_mutex;
  auto say_locked = [&](const std::string& msg) {
    std::lock_guard lock(say_mutex);
    say(msg);
  };

  MatrixResult result;
  for (std::size_t bi = 0; bi < mc.betas.size(); ++bi) {
    for (int ai = 0; ai < mc.n_alice; ++ai) {
      AliceCell a;
      a.beta_index = static_cast<int>(bi);
      a.index = ai;
      a.beta = mc.betas[bi];
      a.seed = derive_seed(mc.seed, {1, bi, static_cast<std::uint64_t>(ai)});
      result.alices.push_back(std::move(a));
    }
  }

  std::vector<std::function<void()>> tasks;
  for (AliceCell& a : result.alices) {
    tasks.emplace_back([&] {
      try {
        train_alice_cell(config, alice_mdp, a, options.out);
        say_locked(alice_dir_name(a) + ": I_action " + std::to_string(a.action_info_bits) + " bits, I_state " +
                   std::to_string(a.state_info_bits) + " bits");
      } catch (const std::exception& e) {
        a.ok = false;
        a.error = e.what();
        say_locked(alice_dir_name(a) + ": failed: " + a.error);
      }
    });
  }
  run_tasks(tasks, mc.threads);

  tasks.clear();
  for (AliceCell& a : result.alices) {
    if (!a.ok || (options.train_bobs && !options.train_bobs(a))) continue;
    a.bobs.resize(static_cast<std::size_t>(mc.n_bob_per_alice));
    for (int bj = 0; bj < mc.n_bob_per_alice; ++bj) {
      BobCell& b = a.bobs[static_cast<std::size_t>(bj)];
      b.index = bj;
      b.seed = derive_seed(mc.seed, {2, static_cast<std::uint64_t>(a.beta_index), static_cast<std::uint64_t>(a.index),
                                     static_cast<std::uint64_t>(bj)});
      tasks.emplace_back([&] {
        const std::string name = alice_dir_name(a) + "/bob_" + std::to_string(b.index);
        try {
          train_bob_cell(config, alice_mdp, bob_mdp, a, b, options.out);
          say_locked(name + ": relative length " + std::to_string(b.length_window.relative_length) +
                     ", alice beats " + std::to_string(b.beat_window.alice_beats_bob) + ", bob beat/tie " +
                     std::to_string(b.beat_window.bob_beat_tie));
        } catch (const std::exception& e) {
          b.ok = false;
          b.error = e.what();
          say_locked(name + ": failed: " + b.error);
        }
      });
    }
  }
  run_tasks(tasks, mc.threads);

  for (AliceCell& a : result.alices) {
    double best = -std::numeric_limits<double>::infinity();
    for (const BobCell& b : a.bobs) {
      const double score = bob_selection_score(config.game, b);
      if (b.ok && score > best) {
        best = score;
        a.best_bob = b.index;
      }
    }
    if (options.out && a.best_bob >= 0) {
      const fs::path best_dir = *options.out / "best";
      fs::create_directories(best_dir);
      fs::copy_file(*options.out / alice_dir_name(a) / ("bob_" + std::to_string(a.best_bob)) / "metrics.jsonl",
                    best_dir / (alice_dir_name(a) + ".jsonl"), fs::copy_options::overwrite_existing);
    }
  }

  result.manifest = manifest_json(config, result.alices);
  if (options.out) write_json_file(*options.out / "manifest.json", result.manifest);
  return result;
}

}  // namespace infoshare
