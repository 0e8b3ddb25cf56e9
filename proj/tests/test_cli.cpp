#include <unistd.h>

#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "infoshare/commands.hpp"
#include "infoshare/info_reg.hpp"
#include "infoshare/matrix.hpp"
#include "infoshare/persist.hpp"
#include "support.hpp"

using namespace infoshare;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("infoshare_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

RunConfig smoke_alice(const fs::path& out, long steps = 1000) {
  RunConfig c = preset_config("nav-alice");
  c.alice.total_steps = steps;
  c.alice.regularizer = Regularizer::kAction;
  c.alice.beta = 0.025;
  c.out = out.string();
  return c;
}

}  // namespace

TEST_CASE("nav-alice preset echoes the Alice training table") {
  const json j = config_to_json(preset_config("nav-alice"));
  CHECK(j["alice"]["total_steps"] == 100000);
  CHECK(j["alice"]["learning_rate"] == 2.5e-2);
  CHECK(j["alice"]["gamma"] == 0.8);
  CHECK(j["alice"]["value_weight"] == 0.5);
  CHECK(j["alice"]["entropy_start"] == 0.5);
  CHECK(j["alice"]["entropy_end"] == 0.005);
  CHECK(j["alice"]["max_episode_len"] == 100);
  CHECK(j["env"]["horizon"] == 100);
}

TEST_CASE("Bob and key-game presets") {
  const json bob = config_to_json(preset_config("nav-bob"));
  CHECK(bob["bob"]["total_steps"] == 200000);
  CHECK(bob["bob"]["learning_rate"] == 5e-5);
  CHECK(bob["bob"]["entropy_start"] == 0.5);
  CHECK(bob["bob"]["entropy_end"] == 0.01);
  CHECK(bob["bob"]["gamma"] == 0.8);
  CHECK(config_to_json(preset_config("key-alice"))["alice"]["total_steps"] == 250000);
  const RunConfig km = preset_config("key-matrix");
  CHECK(km.matrix.betas == std::vector<double>{-0.25, 0.0, 0.25});
  const RunConfig nm = preset_config("nav-matrix");
  CHECK(nm.matrix.n_alice == 5);
  CHECK(nm.matrix.n_bob_per_alice == 10);
  CHECK_THROWS_AS(preset_config("nope"), std::invalid_argument);
}

TEST_CASE("config overlays are strict") {
  const RunConfig base = preset_config("nav-alice");
  CHECK_THROWS_WITH_AS(apply_config_json(base, json{{"alice", {{"beta", 0.1}}}}),
                       "config: alice.beta: is set but regularizer is none", std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_json(base, json{{"alice", {{"betta", 0.1}}}}), "config: alice.betta: unknown key",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_json(base, json{{"env", {{"gamma", "high"}}}}),
                       "config: env.gamma: expected a number", std::invalid_argument);
  CHECK_THROWS_AS(apply_config_json(base, json{{"game", "key"}, {"env", {{"width", 9}}}}), std::invalid_argument);
  const RunConfig ok = apply_config_json(base, json{{"alice", {{"regularizer", "state"}, {"beta", -0.025}}}});
  CHECK(ok.alice.regularizer == Regularizer::kState);
  CHECK(ok.alice.beta == -0.025);
  // The echo reads back to the same config.
  CHECK(config_to_json(apply_config_json(RunConfig{}, config_to_json(ok))) == config_to_json(ok));
}

TEST_CASE("overrides from the command line") {
  ConfigOverrides ov;
  ov.seed = 9;
  ov.steps = 1234;
  ov.out = "elsewhere";
  const RunConfig c = load_run_config("", "nav-bob", ov);
  CHECK(c.bob.total_steps == 1234);
  CHECK(c.alice.total_steps == 100000);
  CHECK(c.bob.seed == 9);
  CHECK(c.out == "elsewhere");
}

TEST_CASE("train writes metrics and a readable final snapshot") {
  TempDir tmp("train");
  const RunConfig c = smoke_alice(tmp.path / "run");
  std::ostringstream out, err;
  REQUIRE(cmd_train(c, out, err) == kExitOk);

  const auto lines = read_jsonl(tmp.path / "run" / "metrics.jsonl");
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0]["format"] == "infoshare.metrics");
  CHECK(lines[0]["version"] == kMetricsVersion);
  CHECK(lines[0]["kind"] == "alice");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    CHECK(lines[i]["episode"] == static_cast<long>(i - 1));
    CHECK(lines[i].contains("i_action_bits"));
    CHECK(lines[i].contains("modified_return"));
  }

  const AliceSnapshot snap = alice_snapshot_from_json(read_json_file(tmp.path / "run" / "final.json"));
  CHECK(snap.state.steps >= 1000);
  CHECK(config_to_json(snap.config) == config_to_json(c));
  CHECK(fs::exists(tmp.path / "run" / "config.json"));
}

TEST_CASE("train rejects a config with beta but no regularizer") {
  TempDir tmp("reject");
  std::ofstream(tmp.path / "bad.json") << R"({"alice": {"beta": 0.1}})";
  CHECK_THROWS_WITH_AS(load_run_config((tmp.path / "bad.json").string(), "", {}),
                       "config: alice.beta: is set but regularizer is none", std::invalid_argument);
}

TEST_CASE("Alice snapshots round-trip losslessly") {
  const GoalMdp mdp = build_nav_world();
  const RunConfig c = smoke_alice("unused", 4000);
  AliceTrainer first(mdp, c.alice);
  while (first.state().steps < 2000) first.run_episode();
  const json doc = alice_snapshot_json(c, first.state());
  const AliceSnapshot snap = alice_snapshot_from_json(json::parse(doc.dump()));
  CHECK(std::ranges::equal(snap.state.policy.data(), first.state().policy.data()));
  CHECK(snap.state.rng == first.state().rng);
  CHECK(snap.state.policy_adam == first.state().policy_adam);

  // Resuming from the snapshot continues exactly like the original run.
  AliceTrainer resumed(mdp, c.alice);
  resumed.state() = snap.state;
  first.run();
  resumed.run();
  CHECK(std::ranges::equal(resumed.state().policy.data(), first.state().policy.data()));
  CHECK(std::ranges::equal(resumed.state().value.data(), first.state().value.data()));
}

TEST_CASE("Bob snapshots round-trip losslessly") {
  const GoalMdp mdp = build_nav_world();
  const GoalPolicyTable alice(2, mdp.num_states, mdp.num_actions);
  BobConfig cfg;
  cfg.total_steps = 600;
  BobTrainer first(mdp, alice, mdp, cfg);
  while (first.state().steps < 300) first.run_episode();
  const BobSnapshot snap = bob_snapshot_from_json(json::parse(bob_snapshot_json(RunConfig{}, first.state()).dump()));
  CHECK(std::ranges::equal(snap.state.net.params(), first.state().net.params()));
  CHECK(snap.state.adam == first.state().adam);

  BobTrainer resumed(mdp, alice, mdp, cfg);
  resumed.state() = snap.state;
  first.run();
  resumed.run();
  CHECK(std::ranges::equal(resumed.state().net.params(), first.state().net.params()));
}

TEST_CASE("snapshot loading rejects foreign documents") {
  CHECK_THROWS_AS(alice_snapshot_from_json(json{{"format", "infoshare.bob"}, {"version", 1}}), std::runtime_error);
  CHECK_THROWS_AS(alice_snapshot_from_json(json{{"format", "infoshare.alice"}, {"version", 99}}), std::runtime_error);
}

TEST_CASE("export writes self-describing CSV tables consistent with the policy") {
  TempDir tmp("export");
  const RunConfig c = smoke_alice(tmp.path / "run", 3000);
  std::ostringstream out, err;
  REQUIRE(cmd_train(c, out, err) == kExitOk);
  REQUIRE(cmd_export(tmp.path / "run" / "final.json", tmp.path / "bundle", out, err) == kExitOk);
  const AliceSnapshot snap = alice_snapshot_from_json(read_json_file(tmp.path / "run" / "final.json"));
  const GoalMdp mdp = build_nav_world();

  const auto policy = read_csv(tmp.path / "bundle" / "policy.csv");
  CHECK(policy[0][0] == "# format=infoshare.policy version=1");
  CHECK(policy[1].size() == 10);
  REQUIRE(policy.size() == 2 + 2 * 25);
  for (std::size_t i = 2; i < policy.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 5; k < 10; ++k) sum += std::stod(policy[i][k]);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  const auto kl = read_csv(tmp.path / "bundle" / "kl.csv");
  REQUIRE(kl.size() == 2 + 2 * 25);
  for (std::size_t i = 2; i < kl.size(); ++i) {
    const Goal g = std::stoi(kl[i][0]);
    const State s = std::stoi(kl[i][1]);
    const double expected = nats_to_bits(kl_to_base(snap.state.policy, mdp.goal_dist, g, s).kl);
    CHECK(std::abs(std::stod(kl[i][5]) - expected) <= 1e-12);
  }

  const auto ratio = read_csv(tmp.path / "bundle" / "log_ratio.csv");
  REQUIRE(ratio.size() == 2 + 2 * 25);
  CHECK(ratio[2][6] == "nan");  // goal cell, never acted in
}

TEST_CASE("goal-identical policies export an all-zero KL column") {
  TempDir tmp("zero_kl");
  const GoalMdp mdp = build_nav_world();
  GoalPolicyTable same(2, mdp.num_states, mdp.num_actions);
  for (State s = 0; s < mdp.num_states; ++s) same.logits(0, s)[kUp] = same.logits(1, s)[kUp] = 1.0;
  export_policy_bundle(mdp, same, tmp.path);
  const auto kl = read_csv(tmp.path / "kl.csv");
  for (std::size_t i = 2; i < kl.size(); ++i) CHECK(std::stod(kl[i][5]) == 0.0);
}

TEST_CASE("estimate-info on uniform and single-goal snapshots") {
  TempDir tmp("estimate");
  const GoalMdp mdp = build_nav_world();
  AliceState st;
  st.policy = GoalPolicyTable(2, mdp.num_states, mdp.num_actions);
  st.value = ValueTable(2, mdp.num_states);
  st.counts = StateCounts(2, mdp.num_states);
  write_json_file(tmp.path / "uniform.json", alice_snapshot_json(RunConfig{}, st));
  for (const char* mode : {"exact", "empirical"}) {
    std::ostringstream out, err;
    REQUIRE(cmd_estimate_info(tmp.path / "uniform.json", mode, 20000, 1, out, err) == kExitOk);
    CHECK(out.str().find("I_action 0 bits 0 nats") != std::string::npos);
  }
  std::ostringstream out, err;
  CHECK(cmd_estimate_info(tmp.path / "uniform.json", "guess", 1, 1, out, err) == kExitUsage);
}

TEST_CASE("evaluate runs a frozen pair") {
  TempDir tmp("evaluate");
  RunConfig a = smoke_alice(tmp.path / "alice", 2000);
  std::ostringstream out, err;
  REQUIRE(cmd_train(a, out, err) == kExitOk);
  RunConfig b = a;
  b.role = Role::kBob;
  b.bob.total_steps = 2000;
  b.alice_snapshot = (tmp.path / "alice" / "final.json").string();
  b.out = (tmp.path / "bob").string();
  REQUIRE(cmd_train(b, out, err) == kExitOk);
  std::ostringstream eval;
  REQUIRE(cmd_evaluate(tmp.path / "bob" / "final.json", "", 100, 1, tmp.path / "eval.jsonl", eval, err) == kExitOk);
  CHECK(eval.str().find("episodes 100") != std::string::npos);
  CHECK(read_jsonl(tmp.path / "eval.jsonl").size() == 101);
}

TEST_CASE("smoke matrix: manifest, best Bobs and determinism") {
  TempDir tmp("matrix");
  RunConfig c = preset_config("nav-matrix");
  c.alice.total_steps = 5000;
  c.bob.total_steps = 3000;
  c.matrix.betas = {-0.025, 0.025};
  c.matrix.n_alice = 1;
  c.matrix.n_bob_per_alice = 2;
  c.out = (tmp.path / "m").string();
  std::ostringstream out, err;
  REQUIRE(cmd_matrix(c, out, err) == kExitOk);
  const json first = read_json_file(tmp.path / "m" / "manifest.json");
  CHECK(first["alices"].size() == 2);
  int bobs = 0;
  int best = 0;
  for (const json& a : first["alices"]) {
    CHECK(a["status"] == "ok");
    bobs += static_cast<int>(a["bobs"].size());
    best += a["best_bob"].is_null() ? 0 : 1;
    CHECK(fs::exists(tmp.path / "m" / "best" / (a["dir"].get<std::string>() + ".jsonl")));
  }
  CHECK(bobs == 4);
  CHECK(best == 2);

  REQUIRE(cmd_matrix(c, out, err) == kExitOk);
  CHECK(read_json_file(tmp.path / "m" / "manifest.json") == first);
}

TEST_CASE("a failing matrix cell is recorded and the rest continues") {
  RunConfig c = preset_config("nav-matrix");
  c.alice.total_steps = 2000;
  c.bob.total_steps = 500;
  c.matrix.betas = {0.025};
  c.matrix.n_alice = 2;
  c.matrix.n_bob_per_alice = 1;
  c.bob.learning_rate = std::numeric_limits<double>::infinity();
  const MatrixResult r = run_experiment_matrix(c);
  for (const AliceCell& a : r.alices) {
    CHECK(a.ok);
    REQUIRE(a.bobs.size() == 1);
    CHECK_FALSE(a.bobs[0].ok);
    CHECK(a.best_bob == -1);
  }
  CHECK(r.manifest["alices"][0]["bobs"][0]["status"] == "failed");
}

TEST_CASE("derived seeds are distinct per cell") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t b = 0; b < 3; ++b) {
    for (std::uint64_t a = 0; a < 5; ++a) seen.insert(derive_seed(1, {1, b, a}));
  }
  CHECK(seen.size() == 15);
  CHECK(derive_seed(1, {1, 0, 0}) != derive_seed(2, {1, 0, 0}));
}
