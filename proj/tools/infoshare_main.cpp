#include <iostream>

#include "CLI11.hpp"
#include "infoshare/commands.hpp"

namespace {

struct ConfigFlags {
  std::string config;
  std::string preset;
  std::uint64_t seed = 0;
  std::string out;
  long steps = 0;
  bool print_config = false;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config, "JSON config overlaid on the preset");
  cmd->add_option("--preset", f.preset, "built-in preset (nav-alice, key-alice, nav-bob, key-bob, nav-matrix, key-matrix)");
  cmd->add_option("--seed", f.seed, "seed for Alice, Bob and the matrix");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--steps", f.steps, "environment-step budget for the trained role")->check(CLI::PositiveNumber);
  cmd->add_flag("--print-config", f.print_config, "print the resolved config and exit");
}

infoshare::RunConfig resolve(CLI::App* cmd, const ConfigFlags& f) {
  infoshare::ConfigOverrides ov;
  if (cmd->count("--seed")) ov.seed = f.seed;
  if (cmd->count("--out")) ov.out = f.out;
  if (cmd->count("--steps")) ov.steps = f.steps;
  return infoshare::load_run_config(f.config, f.preset, ov);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-regularized multi-goal agents and a goal-inferring observer"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "train Alice, or Bob against a frozen Alice");
  add_config_flags(train, train_flags);

  ConfigFlags matrix_flags;
  auto* matrix = app.add_subcommand("matrix", "train Alices per beta, Bobs per Alice, and pick the best Bobs");
  add_config_flags(matrix, matrix_flags);

  std::string info_snapshot;
  std::string info_mode = "exact";
  long info_steps = 100000;
  std::uint64_t info_seed = 1;
  auto* info = app.add_subcommand("estimate-info", "report I_action and I_state of an Alice snapshot");
  info->add_option("snapshot", info_snapshot, "Alice snapshot")->required();
  info->add_option("--mode", info_mode, "exact or empirical")->check(CLI::IsMember({"exact", "empirical"}));
  info->add_option("--steps", info_steps, "empirical rollout steps")->check(CLI::PositiveNumber);
  info->add_option("--seed", info_seed, "empirical rollout seed");

  std::string export_snapshot;
  std::string export_out = "export";
  auto* exp = app.add_subcommand("export", "write policy, KL and log-ratio CSV tables");
  exp->add_option("snapshot", export_snapshot, "Alice snapshot")->required();
  exp->add_option("--out", export_out, "output directory");

  std::string eval_bob;
  std::string eval_alice;
  std::string eval_metrics;
  long eval_episodes = 1000;
  std::uint64_t eval_seed = 1;
  auto* eval = app.add_subcommand("evaluate", "frozen Alice against a frozen Bob");
  eval->add_option("snapshot", eval_bob, "Bob snapshot")->required();
  eval->add_option("--alice", eval_alice, "Alice snapshot; defaults to the one the Bob snapshot names");
  eval->add_option("--episodes", eval_episodes, "joint episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--out", eval_metrics, "JSON-lines file for per-episode records");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto [cmd, flags] : {std::pair{train, &train_flags}, std::pair{matrix, &matrix_flags}}) {
      if (!cmd->parsed()) continue;
      const infoshare::RunConfig config = resolve(cmd, *flags);
      if (flags->print_config) {
        std::cout << infoshare::config_to_json(config).dump(2) << '\n';
        return infoshare::kExitOk;
      }
      return cmd == train ? infoshare::cmd_train(config, std::cout, std::cerr)
                          : infoshare::cmd_matrix(config, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return infoshare::kExitUsage;
  }
  if (info->parsed()) return infoshare::cmd_estimate_info(info_snapshot, info_mode, info_steps, info_seed, std::cout, std::cerr);
  if (exp->parsed()) return infoshare::cmd_export(export_snapshot, export_out, std::cout, std::cerr);
  if (eval->parsed()) {
    std::optional<std::filesystem::path> metrics;
    if (!eval_metrics.empty()) metrics = eval_metrics;
    return infoshare::cmd_evaluate(eval_bob, eval_alice, eval_episodes, eval_seed, metrics, std::cout, std::cerr);
  }
  return infoshare::kExitUsage;
}
