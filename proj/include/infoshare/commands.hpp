#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "infoshare/config.hpp"

namespace infoshare {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNonFinite = 3;

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;  // Alice, Bob and matrix seeds
  std::optional<std::string> out;
  std::optional<long> steps;  // budget of the role being trained; both for a matrix
};

/// Preset (nav-alice when empty), then the JSON file if given, then the
/// overrides. Throws std::invalid_argument or std::runtime_error.
RunConfig load_run_config(const std::string& config_path, const std::string& preset, const ConfigOverrides& overrides);

/// Trains Alice, or Bob against the frozen Alice named by alice_snapshot.
/// Writes config.json, metrics.jsonl, periodic snapshots under snapshots/ and
/// final.json into config.out. A non-finite value writes diagnostic.json and
/// returns kExitNonFinite.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);

int cmd_matrix(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Largest goals * states * (horizon + 1) table the exact mode accepts.
inline constexpr long kExactSizeLimit = 5'000'000;

/// mode "exact" runs the oracle; "empirical" samples frozen-policy episodes
/// for `steps` environment steps.
int cmd_estimate_info(const std::filesystem::path& snapshot, const std::string& mode, long steps,
                      std::uint64_t seed, std::ostream& out, std::ostream& err);

int cmd_export(const std::filesystem::path& snapshot, const std::filesystem::path& out_dir, std::ostream& out,
               std::ostream& err);

/// Frozen Alice against a frozen Bob snapshot. When `alice_snapshot` is empty
/// the path recorded in the Bob snapshot is used.
int cmd_evaluate(const std::filesystem::path& bob_snapshot, const std::filesystem::path& alice_snapshot,
                 long episodes, std::uint64_t seed, const std::optional<std::filesystem::path>& metrics_out,
                 std::ostream& out, std::ostream& err);

}  // namespace infoshare
