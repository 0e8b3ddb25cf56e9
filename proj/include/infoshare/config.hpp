#pragma once

#include <optional>
#include <string>
#include <vector>

#include "infoshare/env.hpp"
#include "infoshare/observer.hpp"
#include "infoshare/trainer.hpp"
#include "json.hpp"

namespace infoshare {

enum class Game { kNav, kKey };
enum class Role { kAlice, kBob };

const char* game_name(Game g);
const char* role_name(Role r);

struct MatrixConfig {
  std::vector<double> betas = {-0.025, 0.0, 0.025};
  Regularizer regularizer = Regularizer::kAction;
  int n_alice = 5;
  int n_bob_per_alice = 10;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct RunConfig {
  Game game = Game::kNav;
  Role role = Role::kAlice;
  NavOptions nav;
  KeyOptions key;
  TrainConfig alice;
  BobConfig bob;
  std::string alice_snapshot;  // frozen Alice for role bob
  std::string out = "runs/default";
  long snapshot_every = 0;  // environment steps between snapshots; 0 disables
  long eval_episodes = 1000;
  MatrixConfig matrix;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Built-in presets: nav-alice, key-alice, nav-bob, key-bob, nav-matrix,
/// key-matrix. Throws std::invalid_argument for unknown names.
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Overlays the keys present in `doc` onto `base`. Unknown keys, wrong types
/// and beta without a regularizer are rejected with the offending field path.
RunConfig apply_config_json(RunConfig base, const nlohmann::json& doc);

nlohmann::json config_to_json(const RunConfig& config);
nlohmann::json train_config_to_json(const TrainConfig& config);
nlohmann::json bob_config_to_json(const BobConfig& config);

/// Builds Alice's or Bob's MDP for the configured game.
GoalMdp build_game(const RunConfig& config, Role role);

}  // namespace infoshare
