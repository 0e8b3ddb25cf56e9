#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "infoshare/config.hpp"
#include "infoshare/observer.hpp"
#include "infoshare/trainer.hpp"
#include "json.hpp"

namespace infoshare {

inline constexpr int kSnapshotVersion = 1;
inline constexpr int kMetricsVersion = 1;
inline constexpr int kExportVersion = 1;

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& text);

nlohmann::json adam_to_json(const AdamState& adam);
AdamState adam_from_json(const nlohmann::json& doc);

/// Alice snapshot: the run config that built her MDP plus every table the
/// trainer mutates, the RNG state and the counters.
nlohmann::json alice_snapshot_json(const RunConfig& config, const AliceState& state);
struct AliceSnapshot {
  RunConfig config;
  AliceState state;
};
AliceSnapshot alice_snapshot_from_json(const nlohmann::json& doc);

nlohmann::json bob_snapshot_json(const RunConfig& config, const BobState& state);
struct BobSnapshot {
  RunConfig config;
  BobState state;
};
BobSnapshot bob_snapshot_from_json(const nlohmann::json& doc);

/// Throws std::runtime_error when the file cannot be read or parsed.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

nlohmann::json episode_record_json(const EpisodeRecord& rec);
nlohmann::json joint_record_json(const JointRecord& rec);

/// Append-only JSON-lines stream. The first line is a header record
/// {"format": "infoshare.metrics", "version", "kind", "run_id"}; every later
/// line is one record tagged with run_id. Each line is flushed as written.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, const std::string& kind, const std::string& run_id);

  void write(nlohmann::json record);
  long records() const { return records_; }

 private:
  std::ofstream out_;
  std::string run_id_;
  long records_ = 0;
};

/// Writes policy.csv, kl.csv and log_ratio.csv under `dir`; every file starts
/// with a "# format=... version=1" line. Information columns are in bits and
/// the log ratio uses the exact visitation of the policy.
void export_policy_bundle(const GoalMdp& mdp, const GoalPolicyTable& policy, const std::filesystem::path& dir);

}  // namespace infoshare
