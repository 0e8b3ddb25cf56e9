#include "infoshare/persist.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "infoshare/info_reg.hpp"
#include "infoshare/oracle.hpp"

namespace infoshare {

using nlohmann::json;

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_string(const std::string& text) {
  Rng rng;
  std::istringstream is(text);
  is >> rng;
  if (is.fail()) throw std::runtime_error("snapshot: malformed rng state");
  return rng;
}

json adam_to_json(const AdamState& a) {
  return {{"m", a.m},
          {"v", a.v},
          {"step", a.step},
          {"learning_rate", a.learning_rate},
          {"beta1", a.beta1},
          {"beta2", a.beta2},
          {"epsilon", a.epsilon}};
}

AdamState adam_from_json(const json& doc) {
  AdamState a;
  a.m = doc.at("m").get<std::vector<double>>();
  a.v = doc.at("v").get<std::vector<double>>();
  a.step = doc.at("step").get<long>();
  a.learning_rate = doc.at("learning_rate").get<double>();
  a.beta1 = doc.at("beta1").get<double>();
  a.beta2 = doc.at("beta2").get<double>();
  a.epsilon = doc.at("epsilon").get<double>();
  return a;
}

namespace {

void check_format(const json& doc, const std::string& format) {
  if (!doc.is_object() || doc.value("format", "") != format) {
    throw std::runtime_error("expected a document with format '" + format + "'");
  }
  const int version = doc.value("version", 0);
  if (version != kSnapshotVersion) {
    throw std::runtime_error(format + ": unsupported version " + std::to_string(version));
  }
}

template <class T>
void copy_into(std::span<T> dst, const json& src, const char* what) {
  const auto values = src.get<std::vector<T>>();
  if (values.size() != dst.size()) {
    throw std::runtime_error(std::string("snapshot: ") + what + " has " + std::to_string(values.size()) +
                             " entries, expected " + std::to_string(dst.size()));
  }
  std::copy(values.begin(), values.end(), dst.begin());
}

}  // namespace

json alice_snapshot_json(const RunConfig& config, const AliceState& st) {
  return {{"format", "infoshare.alice"},
          {"version", kSnapshotVersion},
          {"config", config_to_json(config)},
          {"num_goals", st.policy.num_goals()},
          {"num_states", st.policy.num_states()},
          {"num_actions", st.policy.num_actions()},
          {"logits", std::vector<double>(st.policy.data().begin(), st.policy.data().end())},
          {"values", std::vector<double>(st.value.data().begin(), st.value.data().end())},
          {"counts", std::vector<double>(st.counts.table().begin(), st.counts.table().end())},
          {"policy_adam", adam_to_json(st.policy_adam)},
          {"value_adam", adam_to_json(st.value_adam)},
          {"rng", rng_to_string(st.rng)},
          {"steps", st.steps},
          {"episodes", st.episodes}};
}

AliceSnapshot alice_snapshot_from_json(const json& doc) {
  check_format(doc, "infoshare.alice");
  AliceSnapshot snap;
  snap.config = apply_config_json(RunConfig{}, doc.at("config"));
  const int goals = doc.at("num_goals").get<int>();
  const int states = doc.at("num_states").get<int>();
  const int actions = doc.at("num_actions").get<int>();
  AliceState& st = snap.state;
  st.policy = GoalPolicyTable(goals, states, actions);
  copy_into(st.policy.data(), doc.at("logits"), "logits");
  st.value = ValueTable(goals, states);
  copy_into(st.value.data(), doc.at("values"), "values");
  st.counts = StateCounts(goals, states, 0.0);
  const auto counts = doc.at("counts").get<std::vector<double>>();
  if (counts.size() != static_cast<std::size_t>(goals) * states) throw std::runtime_error("snapshot: counts shape");
  for (Goal g = 0; g < goals; ++g) {
    for (State s = 0; s < states; ++s) st.counts.add(g, s, counts[static_cast<std::size_t>(g) * states + s]);
  }
  st.policy_adam = adam_from_json(doc.at("policy_adam"));
  st.value_adam = adam_from_json(doc.at("value_adam"));
  st.rng = rng_from_string(doc.at("rng").get<std::string>());
  st.steps = doc.at("steps").get<long>();
  st.episodes = doc.at("episodes").get<long>();
  return snap;
}

json bob_snapshot_json(const RunConfig& config, const BobState& st) {
  const ObserverNet& n = st.net;
  return {{"format", "infoshare.bob"},
          {"version", kSnapshotVersion},
          {"config", config_to_json(config)},
          {"alice_states", n.alice_states()},
          {"alice_actions", n.alice_actions()},
          {"bob_states", n.bob_states()},
          {"bob_actions", n.bob_actions()},
          {"params", std::vector<double>(n.params().begin(), n.params().end())},
          {"adam", adam_to_json(st.adam)},
          {"rng", rng_to_string(st.rng)},
          {"steps", st.steps},
          {"episodes", st.episodes}};
}

BobSnapshot bob_snapshot_from_json(const json& doc) {
  check_format(doc, "infoshare.bob");
  BobSnapshot snap;
  snap.config = apply_config_json(RunConfig{}, doc.at("config"));
  BobState& st = snap.state;
  st.net = ObserverNet(doc.at("alice_states").get<int>(), doc.at("alice_actions").get<int>(),
                       doc.at("bob_states").get<int>(), doc.at("bob_actions").get<int>());
  copy_into(st.net.params(), doc.at("params"), "params");
  st.adam = adam_from_json(doc.at("adam"));
  st.rng = rng_from_string(doc.at("rng").get<std::string>());
  st.steps = doc.at("steps").get<long>();
  st.episodes = doc.at("episodes").get<long>();
  return snap;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << doc.dump(1) << '\n';
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json episode_record_json(const EpisodeRecord& r) {
  return {{"episode", r.episode},
          {"steps", r.steps},
          {"goal", r.goal},
          {"length", r.length},
          {"truncated", r.truncated},
          {"raw_return", r.raw_return},
          {"modified_return", r.modified_return},
          {"mean_kl_bits", r.mean_kl_bits},
          {"i_action_bits", r.i_action_bits},
          {"i_state_bits", r.i_state_bits},
          {"entropy_bonus", r.entropy_bonus},
          {"value_mse", r.value_mse},
          {"key", key_state_name(r.key)}};
}

json joint_record_json(const JointRecord& r) {
  return {{"episode", r.episode},
          {"steps", r.steps},
          {"goal", r.goal},
          {"alice_length", r.alice_length},
          {"bob_length", r.bob_length},
          {"alice_success", r.alice_success},
          {"bob_success", r.bob_success},
          {"relative_length", r.relative_length},
          {"alice_beats_bob", r.alice_beats_bob},
          {"bob_beat_tie", r.bob_beat_tie},
          {"alice_key", key_state_name(r.alice_key)},
          {"bob_return", r.bob_return},
          {"first_belief", r.first_belief},
          {"entropy_bonus", r.entropy_bonus}};
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, const std::string& kind, const std::string& run_id)
    : run_id_(run_id) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::out | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  const json header = {
      {"format", "infoshare.metrics"}, {"version", kMetricsVersion}, {"kind", kind}, {"run_id", run_id}};
  out_ << header.dump() << '\n' << std::flush;
}

void MetricsWriter::write(json record) {
  record["run_id"] = run_id_;
  out_ << record.dump() << '\n' << std::flush;
  ++records_;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const std::string& format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# format=" << format << " version=" << kExportVersion << '\n';
  out.precision(17);
  return out;
}

void write_location(std::ofstream& out, const GoalMdp& mdp, Goal g, State s) {
  out << g << ',' << s;
  if (mdp.layout) {
    const GridPos p = mdp.layout->pos(s);
    out << ',' << p.x << ',' << p.y << ',' << key_state_name(mdp.layout->key(s));
  } else {
    out << ",,,";
  }
}

}  // namespace

void export_policy_bundle(const GoalMdp& mdp, const GoalPolicyTable& policy, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const OccupancyTable occ = exact_occupancy(mdp, policy);

  std::ofstream probs = open_csv(dir / "policy.csv", "infoshare.policy");
  probs << "goal,state,x,y,key";
  for (Action a = 0; a < mdp.num_actions; ++a) {
    probs << ",p_" << (mdp.num_actions == kNumGridActions ? grid_action_name(a) : std::to_string(a));
  }
  probs << '\n';
  std::ofstream kl = open_csv(dir / "kl.csv", "infoshare.kl");
  kl << "goal,state,x,y,key,kl_bits\n";
  std::ofstream ratio = open_csv(dir / "log_ratio.csv", "infoshare.log_ratio");
  ratio << "goal,state,x,y,key,visitation,log_ratio_bits\n";

  for (Goal g = 0; g < mdp.num_goals; ++g) {
    for (State s = 0; s < mdp.num_states; ++s) {
      write_location(probs, mdp, g, s);
      for (double p : action_probs(policy, g, s)) probs << ',' << p;
      probs << '\n';

      write_location(kl, mdp, g, s);
      kl << ',' << nats_to_bits(kl_to_base(policy, mdp.goal_dist, g, s).kl) << '\n';

      double marginal = 0.0;
      for (Goal h = 0; h < mdp.num_goals; ++h) marginal += mdp.goal_dist[h] * occ.d(h, s);
      const double d = occ.d(g, s);
      write_location(ratio, mdp, g, s);
      ratio << ',' << d << ',';
      if (d > 0.0) {
        ratio << nats_to_bits(std::log(d / marginal));
      } else {
        ratio << "nan";
      }
      ratio << '\n';
    }
  }
}

}  // namespace infoshare
