#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "factweave/data_io.hpp"
#include "factweave/error.hpp"
#include "factweave/kg.hpp"
#include "factweave/run_config.hpp"

using namespace factweave;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FW_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parser rejects unknown keys and honors overrides") {
  RunConfig config;
  CHECK_THROWS_AS(config.set("not_a_key", "1"), ContractError);
  config.set("d", "64");
  CHECK(config.get_int("d") == 64);
  CHECK(config.get_bool("no_facts") == false);

  // Snapshot is itself a loadable config.
  fs::path snap = fs::temp_directory_path() / "fw_snapshot.cfg";
  config.write_snapshot(snap);
  RunConfig reloaded = RunConfig::from_file(snap);
  CHECK(reloaded.values() == config.values());
  fs::remove(snap);
}

TEST_CASE("config file with an unknown key fails with a line number") {
  fs::path bad = fs::temp_directory_path() / "fw_bad.cfg";
  {
    std::ofstream os(bad, std::ios::trunc);
    os << "d = 16\nmystery = 3\n";
  }
  try {
    RunConfig::from_file(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  fs::remove(bad);
}

TEST_CASE("cli: missing kg file exits 2 and names the path") {
  CHECK(run_cli("retrieve --claim 'anything' --set kg=/definitely/missing.tsv --out " +
                (fs::temp_directory_path() / "fw_cli_missing").string()) == 2);
}

TEST_CASE("cli: usage errors exit 1") {
  CHECK(run_cli("definitely-not-a-command") == 1);
  CHECK(run_cli("retrieve --set nope=1") == 1);  // unknown config key
}

TEST_CASE("cli: retrieve on a claim with no hits succeeds with an empty dump") {
  fs::path dir = temp_dir("fw_cli_retrieve");
  const fs::path kg_path = dir / "kg.tsv";
  {
    std::ofstream os(kg_path, std::ios::trunc);
    os << "whale\tisa\tmammal\n";
  }
  const fs::path facts_path = dir / "facts.jsonl";
  {
    std::ofstream os(facts_path, std::ios::trunc);
    os << R"({"id": 0, "text": "whales are mammals"})" << "\n";
  }
  const int code = run_cli("retrieve --claim 'zzz qqq xxx' --set kg=" + kg_path.string() +
                           " --set facts=" + facts_path.string() + " --out " + dir.string());
  CHECK(code == 0);

  std::ifstream dump(dir / "retrieval.jsonl");
  REQUIRE(dump.good());
  std::string line;
  std::getline(dump, line);
  auto j = nlohmann::json::parse(line);
  CHECK(j["subgraph"]["nodes"].empty());
  // Config snapshot frozen alongside the outputs.
  CHECK(fs::exists(dir / "config.snapshot"));
}

TEST_CASE("cli: retrieval dump counts match a recount from the stores") {
  fs::path dir = temp_dir("fw_cli_counts");
  const fs::path kg_path = fs::path(FW_DATA_DIR) / "kg_slice.tsv";
  const fs::path facts_path = fs::path(FW_DATA_DIR) / "demo" / "facts.jsonl";

  const std::string claim = "whales can breathe underwater";
  const int code = run_cli("retrieve --claim '" + claim + "' --set kg=" + kg_path.string() +
                           " --set facts=" + facts_path.string() + " --set k=4 --out " +
                           dir.string());
  REQUIRE(code == 0);

  std::ifstream dump(dir / "retrieval.jsonl");
  std::string line;
  std::getline(dump, line);
  auto j = nlohmann::json::parse(line);

  // Oracle recount through the library on the same stores.
  KnowledgeGraph kg = KnowledgeGraph::load(kg_path);
  Subgraph sub = retrieve_subgraph(kg, link_entities(claim, kg));
  CHECK(j["subgraph"]["nodes"].size() == sub.nodes.size());
  CHECK(j["subgraph"]["edges"].size() == sub.edges.size());
  CHECK(j["facts"].size() == 4);
}

TEST_CASE("cli: synth writes the benchmark files and a runnable config") {
  fs::path dir = temp_dir("fw_cli_synth");
  const int code = run_cli("synth --n 32 --seed 5 --out " + dir.string());
  REQUIRE(code == 0);
  for (const char* name : {"kg.tsv", "facts.jsonl", "train.jsonl", "dev.jsonl", "test.jsonl",
                           "meta.json", "synth.cfg"}) {
    CHECK(fs::exists(dir / name));
  }
  CHECK(load_claims_jsonl(dir / "train.jsonl").size() == 32);
}

TEST_CASE("claims loader accepts adapter field names") {
  fs::path path = fs::temp_directory_path() / "fw_claims_adapters.jsonl";
  {
    std::ofstream os(path, std::ios::trunc);
    os << R"({"id": 3, "claim": "plain form", "label": 1})" << "\n";
    os << R"({"ex_id": "creak-7", "sentence": "creak form", "label": "false"})" << "\n";
    os << R"({"id": 9, "question": "csqa form", "answer": "yes"})" << "\n";
  }
  std::vector<Claim> claims = load_claims_jsonl(path);
  REQUIRE(claims.size() == 3);
  CHECK(claims[0].id == 3);
  CHECK(claims[0].label == 1);
  CHECK(claims[1].text == "creak form");
  CHECK(claims[1].label == 0);
  CHECK(claims[2].label == 1);
  fs::remove(path);
}
