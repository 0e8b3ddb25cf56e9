#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "infoshare/config.hpp"
#include "json.hpp"

namespace infoshare {

std::uint64_t splitmix64(std::uint64_t x);
/// Seed for a matrix cell, derived from the matrix seed and the cell's path
/// so that cells are independent of each other and of thread scheduling.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);

/// Fraction of a frozen policy's episodes that end holding each key kind.
struct KeyPickup {
  double none = 0.0;
  double goal_key = 0.0;
  double master = 0.0;
};
KeyPickup key_pickup_fractions(const GoalMdp& mdp, const GoalPolicyTable& policy, long episodes, Rng& rng);

struct BobCell {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  JointSummary length_window;  // final 500 training episodes
  JointSummary beat_window;    // final 1000 training episodes
};

struct AliceCell {
  int beta_index = 0;
  int index = 0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  GoalPolicyTable policy;
  double action_info_bits = 0.0;  // exact
  double state_info_bits = 0.0;   // exact
  double mean_length = 0.0;       // exact expected episode length
  KeyPickup pickup;               // key game only
  std::vector<BobCell> bobs;
  int best_bob = -1;
};

struct MatrixOptions {
  /// Where per-cell metrics, snapshots and the manifest go; nothing is
  /// written when unset.
  std::optional<std::filesystem::path> out;
  /// Decides per trained Alice whether her Bobs are trained; all by default.
  std::function<bool(const AliceCell&)> train_bobs;
  std::function<void(const std::string&)> progress;
};

struct MatrixResult {
  std::vector<AliceCell> alices;
  nlohmann::json manifest;
};

/// Trains n_alice Alices per beta and freezes them, then trains
/// n_bob_per_alice Bobs against each and picks the best Bob per Alice: lowest
/// final-window relative length in the nav game, highest final-window
/// beat/tie rate in the key game. A failing cell is recorded in the manifest
/// and the rest of the matrix continues.
MatrixResult run_experiment_matrix(const RunConfig& config, const MatrixOptions& options = {});

/// Higher is better.
double bob_selection_score(Game game, const BobCell& bob);

}  // namespace infoshare
