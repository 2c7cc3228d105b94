#include "factweave/run_config.hpp"

#include <fstream>
#include <sstream>

#include "factweave/error.hpp"

namespace factweave {

namespace {

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      // files
      {"kg", ""},
      {"facts", ""},
      {"fact_embeddings", ""},
      {"concept_embeddings", ""},
      {"train", ""},
      {"dev", ""},
      {"test", ""},
      {"out", "runs/default"},
      // model
      {"d", "32"},
      {"d_c", "24"},
      {"heads", "4"},
      {"layers", "3"},
      {"k", "5"},
      {"dropout", "0.1"},
      {"max_nodes", "200"},
      {"pool", "mha"},
      {"query_post_rgcn", "false"},
      {"embedder_seed", "1234"},
      // training
      {"lr", "0.001"},
      {"batch_size", "16"},
      {"epochs", "20"},
      {"warmup", "0.1"},
      {"seed", "1"},
      // ablation switches
      {"no_facts", "false"},
      {"no_kg", "false"},
      {"no_edge_types", "false"},
      {"drop_relations", ""},  // comma list of c2f,c2c,q2f,q2c
  };
  return defaults;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() : values_(default_values()) {}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key = value at " + path.string() + ":" +
                       std::to_string(line_no));
    }
    try {
      config.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    } catch (const ContractError& e) {
      throw ParseError(std::string(e.what()) + " at " + path.string() + ":" +
                       std::to_string(line_no));
    }
  }
  return config;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (default_values().find(key) == default_values().end()) {
    throw ContractError("unknown config key '" + key + "'");
  }
  values_[key] = value;
}

std::string RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ContractError("unknown config key '" + key + "'");
  return it->second;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no" || v.empty()) return false;
  throw ContractError("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const std::int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ContractError("config key '" + key + "' is not an integer: '" + v + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ContractError("config key '" + key + "' is not a number: '" + v + "'");
  }
}

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.d = static_cast<std::size_t>(get_int("d"));
  mc.d_c = static_cast<std::size_t>(get_int("d_c"));
  mc.heads = static_cast<std::size_t>(get_int("heads"));
  mc.layers = static_cast<std::size_t>(get_int("layers"));
  mc.k = static_cast<std::size_t>(get_int("k"));
  mc.dropout = get_double("dropout");
  mc.max_nodes = static_cast<std::size_t>(get_int("max_nodes"));
  mc.pool = parse_pool_kind(get("pool"));
  mc.query_post_rgcn = get_bool("query_post_rgcn");
  mc.no_facts = get_bool("no_facts");
  mc.no_kg = get_bool("no_kg");
  mc.no_edge_types = get_bool("no_edge_types");

  std::string drops = get("drop_relations");
  std::istringstream ds(drops);
  std::string item;
  while (std::getline(ds, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if (item == "c2f") {
      mc.drop_relations.insert(RelationKind::ConceptToFact);
    } else if (item == "c2c") {
      mc.drop_relations.insert(RelationKind::ConceptToConcept);
    } else if (item == "q2f") {
      mc.drop_relations.insert(RelationKind::QuestionToFact);
    } else if (item == "q2c") {
      mc.drop_relations.insert(RelationKind::QuestionToConcept);
    } else {
      throw ContractError("unknown relation '" + item + "' in drop_relations");
    }
  }
  mc.validate();
  return mc;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.lr = get_double("lr");
  tc.batch_size = static_cast<std::size_t>(get_int("batch_size"));
  tc.epochs = static_cast<std::size_t>(get_int("epochs"));
  tc.warmup = get_double("warmup");
  tc.seed = static_cast<std::uint64_t>(get_int("seed"));
  tc.validate();
  return tc;
}

std::filesystem::path RunConfig::path(const std::string& key) const { return get(key); }

bool RunConfig::has_path(const std::string& key) const { return !get(key).empty(); }

std::string RunConfig::snapshot() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) os << key << " = " << value << "\n";
  return os.str();
}

void RunConfig::write_snapshot(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write config snapshot: " + path.string());
  os << snapshot();
}

}  // namespace factweave
