#include "infoshare/config.hpp"

#include <stdexcept>

namespace infoshare {

using nlohmann::json;

const char* game_name(Game g) { return g == Game::kNav ? "nav" : "key"; }
const char* role_name(Role r) { return r == Role::kAlice ? "alice" : "bob"; }

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config: " + field + ": " + why);
}

double get_number(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

long get_integer(const json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<long>(d))) return static_cast<long>(d);
  }
  fail(field, "expected an integer");
}

std::uint64_t get_seed(const json& v, const std::string& field) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long>() >= 0)) {
    fail(field, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) fail(field, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& field) {
  if (!v.is_string()) fail(field, "expected a string");
  return v.get<std::string>();
}

const json& require_object(const json& v, const std::string& field) {
  if (!v.is_object()) fail(field, "expected an object");
  return v;
}

Regularizer get_regularizer(const json& v, const std::string& field) {
  try {
    return parse_regularizer(get_string(v, field));
  } catch (const std::invalid_argument&) {
    fail(field, "expected one of none, action, state");
  }
}

void apply_alice(TrainConfig& c, const json& doc, const std::string& prefix) {
  for (const auto& [k, v] : require_object(doc, prefix).items()) {
    const std::string f = prefix + "." + k;
    if (k == "regularizer") c.regularizer = get_regularizer(v, f);
    else if (k == "beta") c.beta = get_number(v, f);
    else if (k == "total_steps") c.total_steps = get_integer(v, f);
    else if (k == "max_episode_len") c.max_episode_len = static_cast<int>(get_integer(v, f));
    else if (k == "entropy_start") c.entropy_start = get_number(v, f);
    else if (k == "entropy_end") c.entropy_end = get_number(v, f);
    else if (k == "learning_rate") c.learning_rate = get_number(v, f);
    else if (k == "value_weight") c.value_weight = get_number(v, f);
    else if (k == "gamma") c.gamma = get_number(v, f);
    else if (k == "seed") c.seed = get_seed(v, f);
    else if (k == "batched") c.batched = get_bool(v, f);
    else if (k == "count_final_state") c.count_final_state = get_bool(v, f);
    else if (k == "count_decay") c.count_decay = get_number(v, f);
    else if (k == "info_decay") c.info_decay = get_number(v, f);
    else fail(f, "unknown key");
  }
}

void apply_bob(BobConfig& c, std::string& alice_snapshot, const json& doc) {
  for (const auto& [k, v] : require_object(doc, "bob").items()) {
    const std::string f = "bob." + k;
    if (k == "total_steps") c.total_steps = get_integer(v, f);
    else if (k == "learning_rate") c.learning_rate = get_number(v, f);
    else if (k == "entropy_start") c.entropy_start = get_number(v, f);
    else if (k == "entropy_end") c.entropy_end = get_number(v, f);
    else if (k == "value_weight") c.value_weight = get_number(v, f);
    else if (k == "gamma") c.gamma = get_number(v, f);
    else if (k == "seed") c.seed = get_seed(v, f);
    else if (k == "per_step_updates") c.per_step_updates = get_bool(v, f);
    else if (k == "alice_snapshot") alice_snapshot = get_string(v, f);
    else fail(f, "unknown key");
  }
}

void apply_env(RunConfig& c, const json& doc) {
  for (const auto& [k, v] : require_object(doc, "env").items()) {
    const std::string f = "env." + k;
    if (k == "wall_penalty") {
      c.nav.wall_penalty = c.key.wall_penalty = get_number(v, f);
    } else if (k == "gamma") {
      c.nav.gamma = c.key.gamma = get_number(v, f);
    } else if (k == "horizon") {
      c.nav.horizon = c.key.horizon = static_cast<int>(get_integer(v, f));
    } else if (k == "width") {
      c.nav.width = static_cast<int>(get_integer(v, f));
    } else if (k == "height") {
      c.nav.height = static_cast<int>(get_integer(v, f));
    } else {
      fail(f, "unknown key");
    }
  }
}

void apply_matrix(MatrixConfig& c, const json& doc) {
  for (const auto& [k, v] : require_object(doc, "matrix").items()) {
    const std::string f = "matrix." + k;
    if (k == "betas") {
      if (!v.is_array()) fail(f, "expected an array of numbers");
      c.betas.clear();
      for (std::size_t i = 0; i < v.size(); ++i) c.betas.push_back(get_number(v[i], f + "[" + std::to_string(i) + "]"));
    } else if (k == "regularizer") {
      c.regularizer = get_regularizer(v, f);
    } else if (k == "n_alice") {
      c.n_alice = static_cast<int>(get_integer(v, f));
    } else if (k == "n_bob_per_alice") {
      c.n_bob_per_alice = static_cast<int>(get_integer(v, f));
    } else if (k == "seed") {
      c.seed = get_seed(v, f);
    } else if (k == "threads") {
      c.threads = static_cast<int>(get_integer(v, f));
    } else {
      fail(f, "unknown key");
    }
  }
}

void prefixed(const std::string& prefix, const auto& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config: " + prefix + "." + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  prefixed("alice", [&] { alice.validate(); });
  prefixed("bob", [&] { bob.validate(); });
  if (game == Game::kKey && (nav.width != NavOptions{}.width || nav.height != NavOptions{}.height)) {
    fail("env.width", "the key game has a fixed layout");
  }
  if (nav.width < 3 || nav.height < 2) fail("env.width", "nav grid must be at least 3 wide and 2 tall");
  if (nav.horizon <= 0) fail("env.horizon", "must be positive");
  if (!(nav.gamma >= 0.0 && nav.gamma <= 1.0)) fail("env.gamma", "must lie in [0, 1]");
  if (out.empty()) fail("out", "must not be empty");
  if (snapshot_every < 0) fail("snapshot_every", "must be non-negative");
  if (eval_episodes < 0) fail("eval_episodes", "must be non-negative");
  if (matrix.betas.empty()) fail("matrix.betas", "must not be empty");
  if (matrix.regularizer == Regularizer::kNone) {
    for (double b : matrix.betas) {
      if (b != 0.0) fail("matrix.betas", "nonzero beta with regularizer none");
    }
  }
  if (matrix.n_alice < 1) fail("matrix.n_alice", "must be at least 1");
  if (matrix.n_bob_per_alice < 0) fail("matrix.n_bob_per_alice", "must be non-negative");
  if (matrix.threads < 1) fail("matrix.threads", "must be at least 1");
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "nav-alice") {
    c.role = Role::kAlice;
  } else if (name == "key-alice") {
    c.game = Game::kKey;
    c.alice.total_steps = 250000;
  } else if (name == "nav-bob") {
    c.role = Role::kBob;
  } else if (name == "key-bob") {
    c.game = Game::kKey;
    c.role = Role::kBob;
    c.alice.total_steps = 250000;
  } else if (name == "nav-matrix") {
    c.matrix.betas = {-0.025, 0.0, 0.025};
  } else if (name == "key-matrix") {
    c.game = Game::kKey;
    c.alice.total_steps = 250000;
    c.matrix.betas = {-0.25, 0.0, 0.25};
    c.matrix.n_alice = 10;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return c;
}

std::vector<std::string> preset_names() {
  return {"nav-alice", "key-alice", "nav-bob", "key-bob", "nav-matrix", "key-matrix"};
}

RunConfig apply_config_json(RunConfig base, const json& doc) {
  for (const auto& [k, v] : require_object(doc, "<root>").items()) {
    if (k == "game") {
      const std::string g = get_string(v, k);
      if (g == "nav") base.game = Game::kNav;
      else if (g == "key") base.game = Game::kKey;
      else fail(k, "expected nav or key");
    } else if (k == "role") {
      const std::string r = get_string(v, k);
      if (r == "alice") base.role = Role::kAlice;
      else if (r == "bob") base.role = Role::kBob;
      else fail(k, "expected alice or bob");
    } else if (k == "env") {
      apply_env(base, v);
    } else if (k == "alice") {
      apply_alice(base.alice, v, "alice");
    } else if (k == "bob") {
      apply_bob(base.bob, base.alice_snapshot, v);
    } else if (k == "out") {
      base.out = get_string(v, k);
    } else if (k == "snapshot_every") {
      base.snapshot_every = get_integer(v, k);
    } else if (k == "eval_episodes") {
      base.eval_episodes = get_integer(v, k);
    } else if (k == "matrix") {
      apply_matrix(base.matrix, v);
    } else {
      fail(k, "unknown key");
    }
  }
  base.validate();
  return base;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"regularizer", regularizer_name(c.regularizer)},
          {"beta", c.beta},
          {"total_steps", c.total_steps},
          {"max_episode_len", c.max_episode_len},
          {"entropy_start", c.entropy_start},
          {"entropy_end", c.entropy_end},
          {"learning_rate", c.learning_rate},
          {"value_weight", c.value_weight},
          {"gamma", c.gamma},
          {"seed", c.seed},
          {"batched", c.batched},
          {"count_final_state", c.count_final_state},
          {"count_decay", c.count_decay},
          {"info_decay", c.info_decay}};
}

json bob_config_to_json(const BobConfig& c) {
  return {{"total_steps", c.total_steps},     {"learning_rate", c.learning_rate},
          {"entropy_start", c.entropy_start}, {"entropy_end", c.entropy_end},
          {"value_weight", c.value_weight},   {"gamma", c.gamma},
          {"seed", c.seed},                   {"per_step_updates", c.per_step_updates}};
}

json config_to_json(const RunConfig& c) {
  json env = {{"wall_penalty", c.nav.wall_penalty}, {"gamma", c.nav.gamma}, {"horizon", c.nav.horizon}};
  if (c.game == Game::kNav) {
    env["width"] = c.nav.width;
    env["height"] = c.nav.height;
  }
  json bob = bob_config_to_json(c.bob);
  bob["alice_snapshot"] = c.alice_snapshot;
  return {{"game", game_name(c.game)},
          {"role", role_name(c.role)},
          {"env", env},
          {"alice", train_config_to_json(c.alice)},
          {"bob", bob},
          {"out", c.out},
          {"snapshot_every", c.snapshot_every},
          {"eval_episodes", c.eval_episodes},
          {"matrix",
           {{"betas", c.matrix.betas},
            {"regularizer", regularizer_name(c.matrix.regularizer)},
            {"n_alice", c.matrix.n_alice},
            {"n_bob_per_alice", c.matrix.n_bob_per_alice},
            {"seed", c.matrix.seed},
            {"threads", c.matrix.threads}}}};
}

GoalMdp build_game(const RunConfig& config, Role role) {
  if (config.game == Game::kNav) return build_nav_world(config.nav);
  return build_key_world(role == Role::kAlice ? KeyAgent::kAlice : KeyAgent::kBob, config.key);
}

}  // namespace infoshare
