#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedbargain/harness.hpp"

namespace fedbargain {

using nlohmann::json;

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  const double freqs[] = {1.0e9, 1.5e9, 2.0e9, 2.5e9, 3.0e9};
  const double taus[] = {1.0, 0.8, 0.6, 0.4, 0.2};
  for (int k = 0; k < 5; ++k) {
    UeProfile p;
    p.id = k;
    p.cpu_freq = freqs[k];
    p.eff_capacitance = 5e-28;
    p.cycles_per_sample = 2e6;
    p.data_size = 120;
    p.comm_time_norm = taus[k];
    cfg.ues.push_back(p);
  }
  cfg.partition.num_clients = cfg.ues.size();
  for (int i = 0; i < 50; ++i) {
    cfg.reward_grid.push_back(cfg.game.reward_min +
                              (cfg.game.reward_max - cfg.game.reward_min) * i / 49.0);
  }
  for (int i = 1; i <= 10; ++i) cfg.commtime.values.push_back(i / 10.0);
  return cfg;
}

namespace {

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(display(), "expected an object");
  }

  const std::string& path() const { return path_; }

  bool has(const char* key) const { return node_.contains(key); }

  const json* take(const char* key) {
    auto it = node_.find(key);
    if (it == node_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const char* key, Int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = static_cast<Int>(v->get<std::uint64_t>());
          return;
        }
        throw ConfigError(key_path(key), "expected a non-negative integer");
      } else {
        out = static_cast<Int>(v->get<std::int64_t>());
      }
    }
  }

  void string(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ConfigError(key_path(key), "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) {
          throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]", "expected a number");
        }
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

UeProfile read_ue(const json& node, const std::string& path, const UeProfile& base) {
  ObjectReader r(node, path);
  UeProfile p = base;
  r.integer("id", p.id);
  r.number("cpu_freq", p.cpu_freq);
  r.number("eff_capacitance", p.eff_capacitance);
  r.number("cycles_per_sample", p.cycles_per_sample);
  r.number("data_size", p.data_size);
  r.number("comm_time_norm", p.comm_time_norm);
  r.number("weight_energy", p.weight_energy);
  r.number("weight_time", p.weight_time);
  r.number("cost_sensitivity", p.cost_sensitivity);
  r.finish();
  return p;
}

void read_game(const json& node, GameConfig& g) {
  ObjectReader r(node, "game");
  r.number("nu", g.law.nu);
  r.number("a", g.law.a);
  r.number("theta_min", g.law.theta_min);
  r.number("theta_max", g.law.theta_max);
  r.number("reward_min", g.reward_min);
  r.number("reward_max", g.reward_max);
  r.number("beta", g.beta);
  r.number("kappa_acc", g.kappa_acc);
  r.number("follower_tol", g.follower_tol);
  r.integer("leader_grid", g.leader_grid);
  r.integer("max_interaction_rounds", g.max_interaction_rounds);
  r.finish();
}

void read_dataset(const json& node, DatasetSource& ds) {
  ObjectReader r(node, "dataset");
  std::string source = "synthetic";
  r.string("source", source);
  if (source == "synthetic") {
    ds.kind = DatasetSource::Kind::Synthetic;
    r.integer("classes", ds.synthetic.classes);
    r.integer("features", ds.synthetic.features);
    r.integer("samples", ds.synthetic.samples);
    r.number("separation", ds.synthetic.separation);
  } else if (source == "idx") {
    ds.kind = DatasetSource::Kind::Idx;
    r.string("images", ds.idx.images);
    r.string("labels", ds.idx.labels);
    r.string("data_dir", ds.idx.data_dir);
    r.integer("limit", ds.idx.limit);
  } else {
    throw ConfigError("dataset.source", "expected \"synthetic\" or \"idx\", got \"" + source + "\"");
  }
  r.finish();
}

void read_training(const json& node, TrainingSettings& t) {
  ObjectReader r(node, "training");
  std::string kind = "fedavg";
  r.string("aggregator", kind);
  if (kind == "fedavg") {
    t.aggregator = AggregatorKind::fed_avg();
  } else if (kind == "fedprox") {
    t.aggregator = AggregatorKind::fed_prox(0.0);
    r.number("mu", t.aggregator.mu);
  } else if (kind == "fair") {
    t.aggregator = AggregatorKind::fair_weighted(0.0);
    r.number("q", t.aggregator.q);
  } else {
    throw ConfigError("training.aggregator",
                      "expected \"fedavg\", \"fedprox\" or \"fair\", got \"" + kind + "\"");
  }
  r.number("eps_global", t.eps_global);
  r.integer("max_rounds", t.max_rounds);
  r.number("time_scale", t.time_scale);
  r.number("theta_scale", t.theta_scale);
  r.finish();
}

void read_sweeps(const json& node, ScenarioConfig& cfg, bool& reward_explicit) {
  ObjectReader r(node, "sweeps");
  if (const json* reward = r.take("reward")) {
    ObjectReader rr(*reward, "sweeps.reward");
    reward_explicit = true;
    if (rr.has("values")) {
      rr.numbers("values", cfg.reward_grid);
    } else {
      double lo = cfg.game.reward_min;
      double hi = cfg.game.reward_max;
      std::size_t points = 50;
      rr.number("min", lo);
      rr.number("max", hi);
      rr.integer("points", points);
      if (points < 1) throw ConfigError("sweeps.reward.points", "must be >= 1");
      cfg.reward_grid.clear();
      for (std::size_t i = 0; i < points; ++i) {
        cfg.reward_grid.push_back(points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) /
                                                              static_cast<double>(points - 1));
      }
    }
    rr.finish();
  }
  if (const json* comm = r.take("commtime")) {
    ObjectReader rc(*comm, "sweeps.commtime");
    rc.integer("ue_id", cfg.commtime.ue_id);
    rc.number("reward", cfg.commtime.reward);
    rc.numbers("values", cfg.commtime.values);
    rc.finish();
  }
  r.numbers("theta", cfg.theta_grid);
  r.finish();
}

ScenarioConfig from_json(const json& root) {
  ScenarioConfig cfg = default_scenario();
  ObjectReader r(root, "");
  r.integer("seed", cfg.seed);
  r.string("output_dir", cfg.output_dir);

  if (const json* ues = r.take("ues")) {
    if (!ues->is_array() || ues->empty()) throw ConfigError("ues", "expected a non-empty array");
    std::vector<UeProfile> parsed;
    for (std::size_t i = 0; i < ues->size(); ++i) {
      UeProfile base;
      base.id = static_cast<int>(i);
      parsed.push_back(read_ue((*ues)[i], "ues[" + std::to_string(i) + "]", base));
    }
    cfg.ues = std::move(parsed);
  }
  cfg.partition.num_clients = cfg.ues.size();

  if (const json* g = r.take("game")) read_game(*g, cfg.game);
  if (const json* s = r.take("solver")) {
    ObjectReader rs(*s, "solver");
    rs.number("l2_reg", cfg.solver.l2_reg);
    rs.integer("max_local_iters", cfg.solver.max_local_iters);
    rs.finish();
  }
  if (const json* p = r.take("partition")) {
    ObjectReader rp(*p, "partition");
    std::string mode = "iid";
    rp.string("mode", mode);
    if (mode == "iid") {
      cfg.partition.mode = PartitionMode::Iid;
    } else if (mode == "dirichlet") {
      cfg.partition.mode = PartitionMode::Dirichlet;
      rp.number("alpha", cfg.partition.alpha);
    } else {
      throw ConfigError("partition.mode", "expected \"iid\" or \"dirichlet\", got \"" + mode + "\"");
    }
    rp.integer("num_clients", cfg.partition.num_clients);
    rp.finish();
  }
  if (const json* d = r.take("dataset")) read_dataset(*d, cfg.dataset);
  if (const json* t = r.take("training")) read_training(*t, cfg.training);

  bool reward_explicit = false;
  if (const json* s = r.take("sweeps")) read_sweeps(*s, cfg, reward_explicit);
  if (!reward_explicit) {
    // Default grid follows the (possibly overridden) reward bounds.
    cfg.reward_grid.clear();
    for (int i = 0; i < 50; ++i) {
      cfg.reward_grid.push_back(cfg.game.reward_min +
                                (cfg.game.reward_max - cfg.game.reward_min) * i / 49.0);
    }
  }
  r.finish();
  cfg.validate();
  return cfg;
}

void check_in(bool ok, const std::string& where, const std::string& message) {
  if (!ok) throw ConfigError(where, message);
}

}  // namespace

void ScenarioConfig::validate() const {
  check_in(!ues.empty(), "ues", "at least one device required");
  std::set<int> ids;
  for (std::size_t i = 0; i < ues.size(); ++i) {
    const std::string where = "ues[" + std::to_string(i) + "]";
    try {
      ues[i].validate();
    } catch (const std::invalid_argument& e) {
      // Messages start with the offending field name.
      const std::string msg = e.what();
      throw ConfigError(where + "." + msg.substr(0, msg.find(' ')), msg);
    }
    check_in(ids.insert(ues[i].id).second, where + ".id", "duplicate device id");
  }
  try {
    game.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("game", e.what());
  }
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("solver", e.what());
  }
  check_in(solver.l2_reg > 0.0, "solver.l2_reg", "must be > 0 for the theta stopping rule");
  try {
    partition.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("partition", e.what());
  }
  check_in(partition.num_clients == ues.size(), "partition.num_clients",
           "must equal the number of devices");

  if (dataset.kind == DatasetSource::Kind::Synthetic) {
    const auto& s = dataset.synthetic;
    check_in(s.classes >= 2, "dataset.classes", "must be >= 2");
    check_in(s.features >= 1, "dataset.features", "must be >= 1");
    check_in(s.samples >= static_cast<std::size_t>(s.classes) && s.samples >= ues.size(),
             "dataset.samples", "must be >= classes and >= number of devices");
    check_in(s.separation >= 0.0, "dataset.separation", "must be >= 0");
  } else {
    check_in(!dataset.idx.images.empty(), "dataset.images", "path required");
    check_in(!dataset.idx.labels.empty(), "dataset.labels", "path required");
  }

  try {
    training.aggregator.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("training", e.what());
  }
  check_in(training.eps_global > 0.0, "training.eps_global", "must be > 0");
  check_in(training.max_rounds >= 1, "training.max_rounds", "must be >= 1");
  check_in(training.time_scale >= 0.0, "training.time_scale", "must be >= 0");
  check_in(training.theta_scale > 0.0, "training.theta_scale", "must be > 0");

  check_in(!reward_grid.empty(), "sweeps.reward", "grid must be non-empty");
  for (std::size_t i = 0; i < reward_grid.size(); ++i) {
    check_in(reward_grid[i] >= game.reward_min && reward_grid[i] <= game.reward_max,
             "sweeps.reward[" + std::to_string(i) + "]", "outside [reward_min, reward_max]");
  }
  check_in(ids.count(commtime.ue_id) == 1, "sweeps.commtime.ue_id", "no device with this id");
  check_in(commtime.reward >= game.reward_min && commtime.reward <= game.reward_max,
           "sweeps.commtime.reward", "outside [reward_min, reward_max]");
  check_in(!commtime.values.empty(), "sweeps.commtime.values", "grid must be non-empty");
  for (std::size_t i = 0; i < commtime.values.size(); ++i) {
    check_in(commtime.values[i] > 0.0 && commtime.values[i] <= 1.0,
             "sweeps.commtime.values[" + std::to_string(i) + "]", "must lie in (0, 1]");
  }
  for (std::size_t i = 0; i < theta_grid.size(); ++i) {
    check_in(theta_grid[i] >= game.law.theta_min && theta_grid[i] <= game.law.theta_max,
             "sweeps.theta[" + std::to_string(i) + "]", "outside [theta_min, theta_max]");
  }
}

ScenarioConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<json>", std::string("parse error: ") + e.what());
  }
  return from_json(root);
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_config(const ScenarioConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  json ues = json::array();
  for (const auto& p : cfg.ues) {
    ues.push_back({{"id", p.id},
                   {"cpu_freq", p.cpu_freq},
                   {"eff_capacitance", p.eff_capacitance},
                   {"cycles_per_sample", p.cycles_per_sample},
                   {"data_size", p.data_size},
                   {"comm_time_norm", p.comm_time_norm},
                   {"weight_energy", p.weight_energy},
                   {"weight_time", p.weight_time},
                   {"cost_sensitivity", p.cost_sensitivity}});
  }
  root["ues"] = ues;
  const auto& g = cfg.game;
  root["game"] = {{"nu", g.law.nu},
                  {"a", g.law.a},
                  {"theta_min", g.law.theta_min},
                  {"theta_max", g.law.theta_max},
                  {"reward_min", g.reward_min},
                  {"reward_max", g.reward_max},
                  {"beta", g.beta},
                  {"kappa_acc", g.kappa_acc},
                  {"follower_tol", g.follower_tol},
                  {"leader_grid", g.leader_grid},
                  {"max_interaction_rounds", g.max_interaction_rounds}};
  root["solver"] = {{"l2_reg", cfg.solver.l2_reg}, {"max_local_iters", cfg.solver.max_local_iters}};
  root["partition"] = {{"mode", cfg.partition.mode == PartitionMode::Iid ? "iid" : "dirichlet"},
                       {"alpha", cfg.partition.alpha},
                       {"num_clients", cfg.partition.num_clients}};
  if (cfg.dataset.kind == DatasetSource::Kind::Synthetic) {
    const auto& s = cfg.dataset.synthetic;
    root["dataset"] = {{"source", "synthetic"},
                       {"classes", s.classes},
                       {"features", s.features},
                       {"samples", s.samples},
                       {"separation", s.separation}};
  } else {
    const auto& s = cfg.dataset.idx;
    root["dataset"] = {{"source", "idx"},
                       {"images", s.images},
                       {"labels", s.labels},
                       {"data_dir", s.data_dir},
                       {"limit", s.limit}};
  }
  const auto& t = cfg.training;
  const char* kind = t.aggregator.type == AggregatorKind::Type::FedAvg    ? "fedavg"
                     : t.aggregator.type == AggregatorKind::Type::FedProx ? "fedprox"
                                                                          : "fair";
  root["training"] = {{"aggregator", kind},
                      {"mu", t.aggregator.mu},
                      {"q", t.aggregator.q},
                      {"eps_global", t.eps_global},
                      {"max_rounds", t.max_rounds},
                      {"time_scale", t.time_scale},
                      {"theta_scale", t.theta_scale}};
  root["sweeps"] = {{"reward", {{"values", cfg.reward_grid}}},
                    {"commtime",
                     {{"ue_id", cfg.commtime.ue_id},
                      {"reward", cfg.commtime.reward},
                      {"values", cfg.commtime.values}}},
                    {"theta", cfg.theta_grid}};
  return root.dump();
}

std::string config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace fedbargain
